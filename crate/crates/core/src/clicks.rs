//! APD click-delay simulation under pulsed pumping, delay histograms,
//! model scaling and acceptance-window gating.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::math::{ceil_usize, sqrt};
use crate::signal::{filter_signal, FilterChain, PulseProfile, SampledSignal};
use crate::{Error, Result};

/// Repetition and duty-cycle bookkeeping of the measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentTiming {
    rep_rate_hz: f64,
    measure_window_ns: f64,
    duty_measure_s: f64,
    duty_lock_s: f64,
}

impl ExperimentTiming {
    pub fn new(
        rep_rate_hz: f64,
        measure_window_ns: f64,
        duty_measure_s: f64,
        duty_lock_s: f64,
    ) -> Result<Self> {
        if !(rep_rate_hz > 0.0 && rep_rate_hz.is_finite()) {
            return Err(Error::InvalidParameter("repetition rate must be > 0"));
        }
        if !(measure_window_ns > 0.0 && measure_window_ns.is_finite()) {
            return Err(Error::InvalidParameter("measurement window must be > 0"));
        }
        if !(duty_measure_s >= 0.0 && duty_lock_s >= 0.0) {
            return Err(Error::InvalidParameter("duty-cycle durations must be >= 0"));
        }
        Ok(Self {
            rep_rate_hz,
            measure_window_ns,
            duty_measure_s,
            duty_lock_s,
        })
    }

    pub fn rep_rate_hz(&self) -> f64 {
        self.rep_rate_hz
    }

    pub fn measure_window_ns(&self) -> f64 {
        self.measure_window_ns
    }

    pub fn duty_measure_s(&self) -> f64 {
        self.duty_measure_s
    }

    pub fn duty_lock_s(&self) -> f64 {
        self.duty_lock_s
    }

    /// Fraction of wall-clock time spent measuring (1 if both durations are 0).
    pub fn duty_fraction(&self) -> f64 {
        let total = self.duty_measure_s + self.duty_lock_s;
        if total > 0.0 {
            self.duty_measure_s / total
        } else {
            1.0
        }
    }

    /// Live measurement time covered by `n_pulses` pulses.
    pub fn live_time_s(&self, n_pulses: u64) -> f64 {
        n_pulses as f64 / self.rep_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApdModel {
    dark_rate: f64,
    cw_reference_rate: f64,
}

impl ApdModel {
    /// Rates in s^-1. `cw_reference_rate` is the click rate under
    /// continuous pumping and calibrates the intensity-to-rate constant.
    pub fn new(dark_rate: f64, cw_reference_rate: f64) -> Result<Self> {
        if !(dark_rate >= 0.0 && dark_rate.is_finite()) {
            return Err(Error::InvalidParameter("dark rate must be >= 0"));
        }
        if !(cw_reference_rate > 0.0 && cw_reference_rate.is_finite()) {
            return Err(Error::InvalidParameter("cw reference rate must be > 0"));
        }
        Ok(Self {
            dark_rate,
            cw_reference_rate,
        })
    }

    pub fn dark_rate(&self) -> f64 {
        self.dark_rate
    }

    pub fn cw_reference_rate(&self) -> f64 {
        self.cw_reference_rate
    }
}

/// How the pulse shaper's extinction ratio leaks pump light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Leakage {
    /// Off-state pump *intensity* is `extinction` times the on-state value.
    #[default]
    IntensityRatio,
    /// Off-state pump *field* is `extinction` times the on-state value.
    FieldRatio,
}

impl Leakage {
    /// Field floor that produces this leakage for a given extinction.
    pub fn field_floor(&self, extinction: f64) -> f64 {
        match self {
            Leakage::IntensityRatio => sqrt(extinction),
            Leakage::FieldRatio => extinction,
        }
    }

    /// Off-pulse intensity relative to cw.
    pub fn intensity_floor(&self, extinction: f64) -> f64 {
        let f = self.field_floor(extinction);
        f * f
    }
}

/// Converts rates in s^-1 to rate densities in s^-1 per ns of delay.
///
/// A rate density `r(t)` integrates over one repetition period to the
/// click rate per second of live time, so a constant intensity of 1
/// reproduces the cw reference rate.
pub fn rate_density_scale(timing: &ExperimentTiming) -> f64 {
    timing.rep_rate_hz * 1e-9
}

/// Expected click-rate density versus delay from the pulse front, in
/// s^-1 per ns, on the grid `0, dt, ..` covering the measurement window.
///
/// `rate(t) = C |z(t)|^2 + dark`, with `z` the filtered pump field whose
/// off-state floor follows `leakage`. The filter chain is settled on the
/// leakage floor before the pulse starts.
pub fn click_rate_profile(
    pulse: &PulseProfile,
    chain: &FilterChain,
    apd: &ApdModel,
    timing: &ExperimentTiming,
    leakage: Leakage,
    dt: f64,
) -> Result<SampledSignal> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("sample spacing dt must be > 0"));
    }
    let field_pulse = pulse.with_extinction(leakage.field_floor(pulse.extinction()))?;
    let pre_roll = ceil_usize(40.0 / chain.slowest_kappa() / dt);
    let len = ceil_usize(timing.measure_window_ns / dt);
    let z_p = field_pulse.sample(-(pre_roll as f64) * dt, dt, pre_roll + len)?;
    let z = filter_signal(&z_p, chain)?.skip(pre_roll)?;
    let scale = rate_density_scale(timing);
    let c = apd.cw_reference_rate * scale;
    let dark = apd.dark_rate * scale;
    Ok(z.map(|v| c * v * v + dark))
}

/// One APD click, timed from the front of the electronic pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickRecord {
    pub pulse_index: u64,
    pub delay_ns: f64,
}

/// Draws clicks for `n_pulses` pulses from an inhomogeneous Poisson process
/// with rate density `rate_profile` (s^-1 per ns, see [`click_rate_profile`]).
///
/// Each profile sample is a piecewise-constant bin. Per pulse the bin count
/// is Poisson with mean `rate * dt / rep_rate`; since the pulses are
/// independent, the total over all pulses is drawn once per bin and each
/// click gets a uniform pulse index and a uniform delay inside the bin.
/// Bin `j` uses its own ChaCha stream, so the result depends only on `seed`.
/// Output is ordered by pulse index, then delay.
pub fn simulate_clicks(
    timing: &ExperimentTiming,
    rate_profile: &SampledSignal,
    n_pulses: u64,
    seed: u64,
) -> Result<Vec<ClickRecord>> {
    if n_pulses == 0 {
        return Err(Error::InvalidParameter("n_pulses must be > 0"));
    }
    let dt = rate_profile.dt();
    let window = timing.measure_window_ns;
    let mut clicks = Vec::new();
    for (j, &rate) in rate_profile.samples().iter().enumerate() {
        let t0 = rate_profile.time(j);
        if rate <= 0.0 || t0 >= window || t0 + dt <= 0.0 {
            continue;
        }
        let mean = rate * dt / timing.rep_rate_hz * n_pulses as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let count = Poisson::new(mean)
            .map_err(|_| Error::InvalidParameter("click mean outside Poisson range"))?
            .sample(&mut rng) as u64;
        for _ in 0..count {
            let pulse_index = rng.random_range(0..n_pulses);
            let delay_ns = t0 + rng.random::<f64>() * dt;
            if (0.0..window).contains(&delay_ns) {
                clicks.push(ClickRecord {
                    pulse_index,
                    delay_ns,
                });
            }
        }
    }
    clicks.sort_by(|a, b| {
        a.pulse_index
            .cmp(&b.pulse_index)
            .then(a.delay_ns.total_cmp(&b.delay_ns))
    });
    Ok(clicks)
}

/// Delay span treated as pulse-free background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundRegion {
    pub start_ns: f64,
    pub end_ns: f64,
}

impl BackgroundRegion {
    /// The last `len_ns` of a window.
    pub fn tail(window_ns: f64, len_ns: f64) -> Self {
        Self {
            start_ns: window_ns - len_ns,
            end_ns: window_ns,
        }
    }

    fn contains_bin(&self, start: f64, end: f64) -> bool {
        start >= self.start_ns - 1e-9 && end <= self.end_ns + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayHistogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    total_live_time_s: f64,
}

impl DelayHistogram {
    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_live_time_s(&self) -> f64 {
        self.total_live_time_s
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        self.bin_edges[i]
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Indices of bins lying entirely inside `region`.
    pub fn bins_in(&self, region: &BackgroundRegion) -> Vec<usize> {
        (0..self.n_bins())
            .filter(|&i| region.contains_bin(self.bin_edges[i], self.bin_edges[i + 1]))
            .collect()
    }

    /// Mean count per bin inside `region`.
    pub fn background_level(&self, region: &BackgroundRegion) -> Result<f64> {
        let bins = self.bins_in(region);
        if bins.is_empty() {
            return Err(Error::InvalidParameter(
                "background region contains no complete bin",
            ));
        }
        Ok(bins.iter().map(|&i| self.counts[i] as f64).sum::<f64>() / bins.len() as f64)
    }

    /// Counts divided by the mean background bin count.
    pub fn normalized(&self, region: &BackgroundRegion) -> Result<Vec<f64>> {
        if self.total() == 0 {
            return Err(Error::EmptyInput);
        }
        let level = self.background_level(region)?;
        if level <= 0.0 {
            return Err(Error::EmptyInput);
        }
        Ok(self.counts.iter().map(|&c| c as f64 / level).collect())
    }

    /// Click rate per second of live time.
    pub fn rate_per_s(&self) -> f64 {
        self.total() as f64 / self.total_live_time_s
    }
}

/// Bins click delays into `[0, window)` with `bin_width` wide bins.
pub fn histogram_clicks(
    clicks: &[ClickRecord],
    bin_width: f64,
    window: f64,
    live_time_s: f64,
) -> Result<DelayHistogram> {
    if !(bin_width > 0.0 && window > 0.0) {
        return Err(Error::InvalidParameter("bin width and window must be > 0"));
    }
    let ratio = window / bin_width;
    let n_bins = libm::round(ratio);
    if n_bins < 1.0 || (ratio - n_bins).abs() > 1e-9 * ratio {
        return Err(Error::InvalidParameter("bin width must divide the window"));
    }
    let n_bins = n_bins as usize;
    let mut counts = alloc::vec![0u64; n_bins];
    for c in clicks {
        if (0.0..window).contains(&c.delay_ns) {
            let i = ((c.delay_ns / bin_width) as usize).min(n_bins - 1);
            counts[i] += 1;
        }
    }
    let bin_edges = (0..=n_bins).map(|i| i as f64 * bin_width).collect();
    Ok(DelayHistogram {
        bin_edges,
        counts,
        total_live_time_s: live_time_s,
    })
}

/// Integrates a sampled model over each histogram bin (samples are treated as
/// piecewise constant over `[t, t + dt)`).
pub fn bin_model(hist: &DelayHistogram, model: &SampledSignal) -> Vec<f64> {
    let dt = model.dt();
    let mut out = alloc::vec![0.0; hist.n_bins()];
    for (j, &v) in model.samples().iter().enumerate() {
        let (a, b) = (model.time(j), model.time(j) + dt);
        for (i, slot) in out.iter_mut().enumerate() {
            let lo = a.max(hist.bin_edges[i]);
            let hi = b.min(hist.bin_edges[i + 1]);
            if hi > lo {
                *slot += v * (hi - lo);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFit {
    /// Least-squares factor mapping binned model to background-free counts.
    pub factor: f64,
    /// Poisson standard error of `factor`.
    pub factor_std_err: f64,
    /// Mean background count per bin that was subtracted.
    pub background_per_bin: f64,
    /// Background-subtracted counts minus `factor * model`, per bin.
    pub residuals: Vec<f64>,
    /// Sum of squared residuals over Poisson variance, per degree of freedom.
    pub chi2_per_bin: f64,
}

/// Subtracts the background estimated in `background`, then fits a single
/// scale factor to the binned `model` (intensity, no background) by least
/// squares. The model's own mean over `background` is removed first so a
/// slowly decaying tail does not bias the factor.
pub fn fit_scale_to_model(
    hist: &DelayHistogram,
    model: &SampledSignal,
    background: &BackgroundRegion,
) -> Result<ScaleFit> {
    let mut m = bin_model(hist, model);
    if !m.iter().any(|&v| v != 0.0) {
        return Err(Error::DegenerateModel);
    }
    let bg = hist.background_level(background)?;
    // reference the model to its own off-pulse level, as done for the data
    let region = hist.bins_in(background);
    let m_bg = region.iter().map(|&i| m[i]).sum::<f64>() / region.len() as f64;
    for v in &mut m {
        *v -= m_bg;
    }
    let mm: f64 = m.iter().map(|v| v * v).sum();
    if !(mm > 0.0) {
        return Err(Error::DegenerateModel);
    }
    let y: Vec<f64> = hist.counts.iter().map(|&c| c as f64 - bg).collect();
    let factor = m.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / mm;
    let var_num: f64 = m
        .iter()
        .zip(&hist.counts)
        .map(|(a, &c)| a * a * c as f64)
        .sum();
    let residuals: Vec<f64> = y.iter().zip(&m).map(|(yi, mi)| yi - factor * mi).collect();
    let chi2: f64 = residuals
        .iter()
        .zip(&hist.counts)
        .map(|(r, &c)| r * r / (c as f64).max(1.0))
        .sum();
    let dof = (hist.n_bins().max(2) - 1) as f64;
    Ok(ScaleFit {
        factor,
        factor_std_err: sqrt(var_num) / mm,
        background_per_bin: bg,
        residuals,
        chi2_per_bin: chi2 / dof,
    })
}

/// Acceptance window `|delay - center| <= len / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceGate {
    center_ns: f64,
    length_ns: f64,
}

impl AcceptanceGate {
    pub fn new(center_ns: f64, length_ns: f64) -> Result<Self> {
        if !(length_ns > 0.0 && length_ns.is_finite()) {
            return Err(Error::InvalidParameter(
                "acceptance window length must be > 0",
            ));
        }
        if !center_ns.is_finite() {
            return Err(Error::InvalidParameter(
                "acceptance window center must be finite",
            ));
        }
        Ok(Self {
            center_ns,
            length_ns,
        })
    }

    pub fn center_ns(&self) -> f64 {
        self.center_ns
    }

    pub fn length_ns(&self) -> f64 {
        self.length_ns
    }

    pub fn start_ns(&self) -> f64 {
        self.center_ns - self.length_ns / 2.0
    }

    pub fn admits(&self, delay_ns: f64) -> bool {
        (delay_ns - self.center_ns).abs() <= self.length_ns / 2.0
    }
}

/// Clicks inside the acceptance window; these herald homodyne windows.
pub fn gate_clicks(clicks: &[ClickRecord], gate: &AcceptanceGate) -> Vec<ClickRecord> {
    clicks
        .iter()
        .filter(|c| gate.admits(c.delay_ns))
        .copied()
        .collect()
}
