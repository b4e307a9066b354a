//! Synthetic heralded homodyne time windows.
//!
//! Every sample carries white vacuum noise of variance 1/2, so each temporal
//! mode is in vacuum except the signal mode, whose quadrature is drawn from
//! the target Fock mixture.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::clicks::AcceptanceGate;
use crate::fock::{QuadratureSampler, FOCK_LEVELS};
use crate::math::{abs, sqrt};
use crate::signal::{
    filter_signal, zero_phase_smooth, CavityFilter, FilterChain, PulseProfile, SampledSignal,
};
use crate::{Error, Result};

/// Per-sample vacuum variance.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Photon-number populations of a phase-invariant state, padded to
/// `FOCK_LEVELS` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    populations: [f64; FOCK_LEVELS],
}

impl TargetState {
    /// Populations must be non-negative and sum to 1 within 1e-12.
    pub fn new(populations: &[f64]) -> Result<Self> {
        if populations.len() > FOCK_LEVELS {
            return Err(Error::UnsupportedOrder(populations.len() - 1));
        }
        if populations.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter("populations must be >= 0"));
        }
        let sum: f64 = populations.iter().sum();
        if abs(sum - 1.0) > 1e-12 {
            return Err(Error::InvalidParameter("populations must sum to 1"));
        }
        let mut p = [0.0; FOCK_LEVELS];
        p[..populations.len()].copy_from_slice(populations);
        Ok(Self { populations: p })
    }

    pub fn vacuum() -> Self {
        Self::new(&[1.0]).unwrap()
    }

    pub fn populations(&self) -> &[f64; FOCK_LEVELS] {
        &self.populations
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Quadrature variance `1/2 + <n>` of the phase-averaged marginal.
    pub fn quadrature_variance(&self) -> f64 {
        VACUUM_VARIANCE + self.mean_photon_number()
    }

    pub fn sampler(&self) -> QuadratureSampler {
        QuadratureSampler::new(&self.populations).expect("validated populations")
    }
}

/// Unit-norm temporal mode on the window grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFunction {
    values: Vec<f64>,
}

impl ModeFunction {
    /// Normalizes `values` to unit sum of squares.
    pub fn from_unnormalized(mut values: Vec<f64>) -> Result<Self> {
        let norm = sqrt(values.iter().map(|v| v * v).sum::<f64>());
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroMode);
        }
        for v in values.iter_mut() {
            *v /= norm;
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn overlap(&self, other: &ModeFunction) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.project(&other.values))
    }

    /// `|<self, other>|^2`.
    pub fn fidelity(&self, other: &ModeFunction) -> Result<f64> {
        let o = self.overlap(other)?;
        Ok(o * o)
    }

    /// `sum_i samples_i * psi_i`.
    pub fn project(&self, samples: &[f64]) -> f64 {
        crate::math::pairwise_sum_by(self.values.len().min(samples.len()), &|i| {
            samples[i] * self.values[i]
        })
    }
}

/// Sampling grid of a homodyne window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGrid {
    pub len: usize,
    pub dt: f64,
}

impl Default for WindowGrid {
    /// 500 samples at 1 ns.
    fn default() -> Self {
        Self { len: 500, dt: 1.0 }
    }
}

/// Pump pulse profile (without leakage floor) filtered by the OPO, shifted by
/// `delay` ns and normalized on the window.
pub fn optimal_mode(
    pulse: &PulseProfile,
    opo: &CavityFilter,
    delay: f64,
    grid: WindowGrid,
) -> Result<ModeFunction> {
    if !(delay >= 0.0 && delay.is_finite()) {
        return Err(Error::InvalidParameter("mode delay must be >= 0"));
    }
    let bare = pulse.with_extinction(0.0)?;
    let z_p = SampledSignal::from_fn(0.0, grid.dt, grid.len, |t| bare.evaluate(t - delay))?;
    let z = filter_signal(&z_p, &FilterChain::single(*opo))?;
    ModeFunction::from_unnormalized(z.into_samples())
}

/// One sampled homodyne window and the delay of the click that heralded it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceWindow {
    pub samples: Vec<f64>,
    pub qualifier_delay: f64,
}

/// Builds a window whose projection onto `mode` is exactly `x` while every
/// orthogonal mode stays in vacuum: `s = w + (x - <w, psi>) psi` with white
/// noise `w` of variance 1/2.
pub fn synthesize_window<R: Rng + ?Sized>(
    x: f64,
    mode: &ModeFunction,
    qualifier_delay: f64,
    rng: &mut R,
) -> TraceWindow {
    let mut samples = vacuum_samples(mode.len(), rng);
    let p = mode.project(&samples);
    for (s, psi) in samples.iter_mut().zip(mode.values()) {
        *s += (x - p) * psi;
    }
    TraceWindow {
        samples,
        qualifier_delay,
    }
}

fn vacuum_samples<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, sqrt(VACUUM_VARIANCE)).unwrap();
    (0..len).map(|_| normal.sample(rng)).collect()
}

/// Additive electronic noise above `min_freq_mhz`: white Gaussian noise minus
/// its own zero-phase low-passed copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectronicNoise {
    pub rms: f64,
    pub min_freq_mhz: f64,
}

/// Homodyne-set metadata kept alongside the windows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceMeta {
    pub seed: u64,
    pub config_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub windows: Vec<TraceWindow>,
    pub vacuum: bool,
    pub dt: f64,
    pub meta: TraceMeta,
}

impl TraceSet {
    /// Checks that every window has the same length.
    pub fn new(windows: Vec<TraceWindow>, vacuum: bool, dt: f64, meta: TraceMeta) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("sample spacing dt must be > 0"));
        }
        if let Some(first) = windows.first() {
            let len = first.samples.len();
            if let Some(bad) = windows.iter().find(|w| w.samples.len() != len) {
                return Err(Error::LengthMismatch {
                    expected: len,
                    got: bad.samples.len(),
                });
            }
        }
        Ok(Self {
            windows,
            vacuum,
            dt,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.windows.first().map_or(0, |w| w.samples.len())
    }
}

/// Parameters of [`generate_trace_set`].
#[derive(Debug, Clone)]
pub struct TraceSetRequest<'a> {
    pub state: &'a TargetState,
    pub mode: &'a ModeFunction,
    pub n_windows: usize,
    pub vacuum: bool,
    pub seed: u64,
    /// Qualifier delays are drawn uniformly inside this gate.
    pub gate: AcceptanceGate,
    pub dt: f64,
    /// Fraction of heralds caused by background clicks; those windows carry
    /// vacuum in the signal mode.
    pub background_herald_fraction: f64,
    /// Added to signal windows only.
    pub electronic_noise: Option<ElectronicNoise>,
    pub config_hash: u64,
}

/// Window `index` of a set; each window owns ChaCha stream `index + 1` of
/// `seed`, so any subset can be regenerated independently and in any order.
pub fn generate_window(
    req: &TraceSetRequest<'_>,
    sampler: &QuadratureSampler,
    index: usize,
) -> Result<TraceWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    rng.set_stream(index as u64 + 1);
    let qualifier_delay = req.gate.start_ns() + rng.random::<f64>() * req.gate.length_ns();
    let len = req.mode.len();
    if req.vacuum {
        return Ok(TraceWindow {
            samples: vacuum_samples(len, &mut rng),
            qualifier_delay,
        });
    }
    let background = rng.random::<f64>() < req.background_herald_fraction;
    let x = if background {
        vacuum_quadrature(&mut rng)
    } else {
        sampler.sample(&mut rng)
    };
    let mut w = synthesize_window(x, req.mode, qualifier_delay, &mut rng);
    if let Some(noise) = req.electronic_noise {
        let mut n: Vec<f64> = {
            let normal = Normal::new(0.0, 1.0).unwrap();
            (0..len).map(|_| normal.sample(&mut rng)).collect()
        };
        let mut low = n.clone();
        zero_phase_smooth(&mut low, noise.min_freq_mhz, req.dt)?;
        for (a, b) in n.iter_mut().zip(&low) {
            *a -= b;
        }
        let (_, var) = crate::math::mean_var(n.iter().copied());
        let scale = if var > 0.0 {
            noise.rms / sqrt(var)
        } else {
            0.0
        };
        for (s, e) in w.samples.iter_mut().zip(&n) {
            *s += scale * e;
        }
    }
    Ok(w)
}

fn vacuum_quadrature<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Normal::new(0.0, sqrt(VACUUM_VARIANCE)).unwrap().sample(rng)
}

/// `n_windows` independent heralded windows (or pure vacuum windows).
pub fn generate_trace_set(req: &TraceSetRequest<'_>) -> Result<TraceSet> {
    if req.n_windows == 0 {
        return Err(Error::InvalidParameter("n_windows must be > 0"));
    }
    if !(0.0..=1.0).contains(&req.background_herald_fraction) {
        return Err(Error::InvalidParameter(
            "background herald fraction must lie in [0, 1]",
        ));
    }
    let sampler = req.state.sampler();
    let windows = (0..req.n_windows)
        .map(|i| generate_window(req, &sampler, i))
        .collect::<Result<Vec<_>>>()?;
    TraceSet::new(
        windows,
        req.vacuum,
        req.dt,
        TraceMeta {
            seed: req.seed,
            config_hash: req.config_hash,
        },
    )
}
