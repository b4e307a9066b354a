//! Pump-pulse profiles, single-pole Lorentzian cavity filters and their
//! discrete convolution on a uniform time grid.

use alloc::vec::Vec;

use crate::math::{cos, exp, sqrt, TAU};
use crate::{Error, Result};

/// Converts an ordinary frequency in MHz to an angular frequency in rad/ns.
pub fn mhz_to_rad_per_ns(mhz: f64) -> f64 {
    TAU * mhz * 1e-3
}

/// Square pump pulse with linear rise and fall on a leakage floor.
///
/// The profile sits at `extinction` before `t = 0`, ramps linearly to 1 over
/// `rise_time`, stays at 1 until `duration`, ramps back down over another
/// `rise_time` and returns to the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseProfile {
    duration: f64,
    rise_time: f64,
    extinction: f64,
}

impl PulseProfile {
    pub fn new(duration: f64, rise_time: f64, extinction: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParameter("pulse duration must be > 0"));
        }
        if !(rise_time >= 0.0 && rise_time.is_finite()) {
            return Err(Error::InvalidParameter("pulse rise time must be >= 0"));
        }
        if !(0.0..1.0).contains(&extinction) {
            return Err(Error::InvalidParameter(
                "pulse extinction must lie in [0, 1)",
            ));
        }
        Ok(Self {
            duration,
            rise_time,
            extinction,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn rise_time(&self) -> f64 {
        self.rise_time
    }

    pub fn extinction(&self) -> f64 {
        self.extinction
    }

    /// Same shape with a different floor.
    pub fn with_extinction(&self, extinction: f64) -> Result<Self> {
        Self::new(self.duration, self.rise_time, extinction)
    }

    /// Trapezoid shape between 0 and 1, without the floor.
    fn shape(&self, t: f64) -> f64 {
        let (d, r) = (self.duration, self.rise_time);
        if t < 0.0 {
            0.0
        } else if t < r {
            t / r
        } else if t <= d {
            1.0
        } else if t < d + r {
            1.0 - (t - d) / r
        } else {
            0.0
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.extinction + (1.0 - self.extinction) * self.shape(t)
    }

    /// Samples the profile at `start + i * dt` for `i < len`.
    pub fn sample(&self, start: f64, dt: f64, len: usize) -> Result<SampledSignal> {
        SampledSignal::from_fn(start, dt, len, |t| self.evaluate(t))
    }
}

/// Free function form of [`PulseProfile::evaluate`].
pub fn evaluate_pulse(pulse: &PulseProfile, t: f64) -> f64 {
    pulse.evaluate(t)
}

/// Single-pole cavity field filter with half-width `kappa` (rad/ns).
///
/// The time-domain response is `kappa * exp(-kappa t)` for `t >= 0`, which has
/// unit area and a Lorentzian power spectrum of half-width `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityFilter {
    kappa: f64,
}

impl CavityFilter {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter("cavity kappa must be > 0"));
        }
        Ok(Self { kappa })
    }

    /// From the half-width `kappa / 2pi` quoted in MHz.
    pub fn from_half_width_mhz(kappa_over_2pi: f64) -> Result<Self> {
        Self::new(mhz_to_rad_per_ns(kappa_over_2pi))
    }

    /// From a full bandwidth `gamma / 2pi` in MHz, using `kappa = gamma / 2`.
    pub fn from_bandwidth_mhz(gamma_over_2pi: f64) -> Result<Self> {
        Self::new(mhz_to_rad_per_ns(gamma_over_2pi) / 2.0)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `kappa / 2pi` in MHz.
    pub fn half_width_mhz(&self) -> f64 {
        self.kappa / TAU * 1e3
    }

    pub fn impulse_response(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.kappa * exp(-self.kappa * t)
        }
    }

    fn check_grid(&self, dt: f64) -> Result<()> {
        if self.kappa * dt >= 0.5 {
            return Err(Error::GridTooCoarse {
                kappa: self.kappa,
                dt,
            });
        }
        Ok(())
    }

    /// Runs the exact zero-order-hold recursion in place. Sample `x[n]` is
    /// held over `[t_n, t_n + dt)`, so `y[n]` only sees inputs before `t_n`
    /// and the filter starts at rest.
    fn apply_in_place(&self, samples: &mut [f64], dt: f64) {
        let decay = exp(-self.kappa * dt);
        let gain = 1.0 - decay;
        let mut y = 0.0;
        let mut x_prev = 0.0;
        for s in samples.iter_mut() {
            y = decay * y + gain * x_prev;
            x_prev = *s;
            *s = y;
        }
    }
}

/// Free function form of [`CavityFilter::impulse_response`].
pub fn impulse_response(filter: &CavityFilter, t: f64) -> f64 {
    filter.impulse_response(t)
}

/// Cascade of cavity filters; the response is the product of the members'.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterChain {
    filters: Vec<CavityFilter>,
}

impl FilterChain {
    pub fn new(filters: Vec<CavityFilter>) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::InvalidParameter("filter chain must not be empty"));
        }
        Ok(Self { filters })
    }

    pub fn single(filter: CavityFilter) -> Self {
        Self {
            filters: alloc::vec![filter],
        }
    }

    pub fn filters(&self) -> &[CavityFilter] {
        &self.filters
    }

    /// Smallest `kappa` in the chain, which sets the slowest decay.
    pub fn slowest_kappa(&self) -> f64 {
        self.filters
            .iter()
            .map(CavityFilter::kappa)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Uniformly sampled real signal starting at `start_time` (ns).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    start_time: f64,
    dt: f64,
    samples: Vec<f64>,
}

impl SampledSignal {
    pub fn new(start_time: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter("sample spacing dt must be > 0"));
        }
        if samples.is_empty() {
            return Err(Error::InvalidParameter(
                "signal must have at least one sample",
            ));
        }
        Ok(Self {
            start_time,
            dt,
            samples,
        })
    }

    pub fn from_fn(start: f64, dt: f64, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = (0..len).map(|i| f(start + i as f64 * dt)).collect();
        Self::new(start, dt, samples)
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Linear interpolation between samples; `None` outside the grid.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let u = (t - self.start_time) / self.dt;
        if !(u >= 0.0) || u > (self.len() - 1) as f64 {
            return None;
        }
        let i = u as usize;
        if i + 1 >= self.len() {
            return Some(self.samples[self.len() - 1]);
        }
        let frac = u - i as f64;
        Some(self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac)
    }

    /// Index of the largest sample (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.samples.iter().enumerate() {
            if v > self.samples[best] {
                best = i;
            }
        }
        best
    }

    /// Rectangle-rule integral, `sum * dt`.
    pub fn integral(&self) -> f64 {
        crate::math::pairwise_sum(&self.samples) * self.dt
    }

    /// Drops the first `n` samples and shifts the start time accordingly.
    pub fn skip(&self, n: usize) -> Result<Self> {
        Self::new(
            self.time(n),
            self.dt,
            self.samples[n.min(self.len())..].to_vec(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            start_time: self.start_time,
            dt: self.dt,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Causal convolution of `input` with the cascade impulse response.
///
/// Each filter is applied in turn with the exact one-pole recursion
/// `y[n] = e^{-kappa dt} y[n-1] + (1 - e^{-kappa dt}) x[n-1]`, starting from
/// rest. The output shares the input grid and has unit DC gain.
pub fn filter_signal(input: &SampledSignal, chain: &FilterChain) -> Result<SampledSignal> {
    for f in chain.filters() {
        f.check_grid(input.dt)?;
    }
    let mut samples = input.samples.clone();
    for f in chain.filters() {
        f.apply_in_place(&mut samples, input.dt);
    }
    SampledSignal::new(input.start_time, input.dt, samples)
}

/// Pointwise squared magnitude.
pub fn intensity(z: &SampledSignal) -> SampledSignal {
    z.map(|v| v * v)
}

/// Smoothing coefficient of a one-pole low-pass whose power gain is exactly
/// 1/2 at `cutoff_mhz` for a sample spacing of `dt` ns.
pub fn one_pole_coefficient(cutoff_mhz: f64, dt: f64) -> Result<f64> {
    if !(cutoff_mhz > 0.0 && cutoff_mhz.is_finite()) {
        return Err(Error::InvalidParameter("low-pass cutoff must be > 0"));
    }
    let cycles_per_sample = cutoff_mhz * 1e-3 * dt;
    if cycles_per_sample >= 0.5 {
        return Err(Error::InvalidParameter(
            "low-pass cutoff must be below Nyquist",
        ));
    }
    // |H|^2 = a^2 / (1 - 2(1-a)cos w + (1-a)^2) = 1/2
    let c = 1.0 - cos(TAU * cycles_per_sample);
    Ok(-c + sqrt(c * c + 2.0 * c))
}

/// Forward-backward one-pole smoothing, so the overall response is real
/// with power gain `|H|^4` and no phase shift. The recursion is primed with
/// the edge values, so constants pass unchanged.
pub fn zero_phase_smooth(values: &mut [f64], cutoff_mhz: f64, dt: f64) -> Result<()> {
    let alpha = one_pole_coefficient(cutoff_mhz, dt)?;
    let Some(&first) = values.first() else {
        return Ok(());
    };
    let mut state = first;
    for v in values.iter_mut() {
        state += alpha * (*v - state);
        *v = state;
    }
    let mut state = *values.last().unwrap();
    for v in values.iter_mut().rev() {
        state += alpha * (*v - state);
        *v = state;
    }
    Ok(())
}
