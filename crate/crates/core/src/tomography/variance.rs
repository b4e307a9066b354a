use alloc::vec::Vec;

use crate::homodyne::{ModeFunction, TraceSet};
use crate::math::sqrt;
use crate::signal::zero_phase_smooth;
use crate::{Error, Result};

/// Per-sample variance across windows, in units of the vacuum level.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTrace {
    pub values: Vec<f64>,
    pub n_windows: usize,
    pub dt: f64,
}

fn per_sample_variance(set: &TraceSet) -> Vec<f64> {
    let len = set.window_len();
    let mut mean = alloc::vec![0.0; len];
    let mut m2 = alloc::vec![0.0; len];
    for (k, w) in set.windows.iter().enumerate() {
        let n = (k + 1) as f64;
        for ((mu, acc), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(&w.samples) {
            let d = x - *mu;
            *mu += d / n;
            *acc += d * (x - *mu);
        }
    }
    let denom = (set.len() - 1) as f64;
    m2.into_iter().map(|v| v / denom).collect()
}

/// Signal variance divided by vacuum variance at every sample index.
pub fn variance_trace(signal: &TraceSet, vacuum: &TraceSet) -> Result<VarianceTrace> {
    for set in [signal, vacuum] {
        if set.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: set.len(),
            });
        }
    }
    if signal.window_len() != vacuum.window_len() {
        return Err(Error::LengthMismatch {
            expected: signal.window_len(),
            got: vacuum.window_len(),
        });
    }
    let sig = per_sample_variance(signal);
    let vac = per_sample_variance(vacuum);
    if vac.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter(
            "vacuum variance must be > 0 at every sample",
        ));
    }
    Ok(VarianceTrace {
        values: sig.iter().zip(&vac).map(|(s, v)| s / v).collect(),
        n_windows: signal.len(),
        dt: signal.dt,
    })
}

/// Zero-phase one-pole smoothing with half power at `cutoff_mhz` per pass.
pub fn lowpass(trace: &VarianceTrace, cutoff_mhz: f64) -> Result<VarianceTrace> {
    let mut values = trace.values.clone();
    zero_phase_smooth(&mut values, cutoff_mhz, trace.dt)?;
    Ok(VarianceTrace {
        values,
        n_windows: trace.n_windows,
        dt: trace.dt,
    })
}

/// Inverts `trace = 1 + 2 rho_11 psi^2` up to scale:
/// `psi ∝ sqrt(max(trace - 1, 0))`, taken non-negative.
///
/// Fails with [`Error::NoSignal`] unless the peak excess over the vacuum
/// level exceeds `5 / sqrt(n_windows)`. The inversion assumes a single
/// dominant signal mode.
pub fn estimate_mode_from_variance(trace: &VarianceTrace) -> Result<ModeFunction> {
    if trace.n_windows == 0 {
        return Err(Error::InsufficientData { needed: 2, got: 0 });
    }
    let peak_excess = trace
        .values
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - 1.0;
    let threshold = 5.0 / sqrt(trace.n_windows as f64);
    if !(peak_excess > threshold) {
        return Err(Error::NoSignal {
            peak_excess,
            threshold,
        });
    }
    let values = trace
        .values
        .iter()
        .map(|&v| sqrt((v - 1.0).max(0.0)))
        .collect();
    ModeFunction::from_unnormalized(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clicks::AcceptanceGate;
    use crate::homodyne::{generate_trace_set, TargetState, TraceSetRequest};
    use crate::math::{cos, TAU};
    use libm::sin;

    fn gaussian_mode(len: usize, center: f64, width: f64) -> ModeFunction {
        ModeFunction::from_unnormalized(
            (0..len)
                .map(|i| {
                    let u = (i as f64 - center) / width;
                    libm::exp(-0.5 * u * u)
                })
                .collect(),
        )
        .unwrap()
    }

    fn set(
        state: &TargetState,
        mode: &ModeFunction,
        n: usize,
        vacuum: bool,
        seed: u64,
    ) -> TraceSet {
        generate_trace_set(&TraceSetRequest {
            state,
            mode,
            n_windows: n,
            vacuum,
            seed,
            gate: AcceptanceGate::new(60.0, 40.0).unwrap(),
            dt: 1.0,
            background_herald_fraction: 0.0,
            electronic_noise: None,
            config_hash: 0,
        })
        .unwrap()
    }

    #[test]
    fn identical_sets_give_unit_trace() {
        let m = gaussian_mode(64, 30.0, 4.0);
        let v = set(&TargetState::vacuum(), &m, 50, true, 1);
        let t = variance_trace(&v, &v).unwrap();
        assert!(t.values.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_photon_trace_follows_mode_squared() {
        // a narrow mode keeps psi^2 well above the sampling noise
        let m = gaussian_mode(64, 30.0, 3.0);
        let n = 20_000;
        let sig = set(&TargetState::new(&[0.0, 1.0]).unwrap(), &m, n, false, 2);
        let vac = set(&TargetState::vacuum(), &m, n, true, 3);
        let t = variance_trace(&sig, &vac).unwrap();
        // ratio of two independent sample variances, each with rel. sd sqrt(2/n)
        let sd = sqrt(4.0 / n as f64);
        for (i, &psi) in m.values().iter().enumerate() {
            let expected = 1.0 + 2.0 * psi * psi;
            assert!(
                (t.values[i] - expected).abs() < 5.0 * sd * expected,
                "sample {i}: {} vs {expected}",
                t.values[i]
            );
        }
    }

    #[test]
    fn too_few_windows() {
        let m = gaussian_mode(16, 8.0, 2.0);
        let one = set(&TargetState::vacuum(), &m, 1, true, 1);
        let many = set(&TargetState::vacuum(), &m, 10, true, 1);
        assert!(matches!(
            variance_trace(&one, &many),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn lowpass_keeps_constant() {
        let t = VarianceTrace {
            values: alloc::vec![1.3; 500],
            n_windows: 10,
            dt: 1.0,
        };
        let f = lowpass(&t, 25.0).unwrap();
        assert!(f.values.iter().all(|&v| (v - 1.3).abs() < 1e-9));
    }

    #[test]
    fn lowpass_attenuates_100mhz_by_squared_one_pole_gain() {
        let f = 100.0;
        let t = VarianceTrace {
            values: (0..2000).map(|i| sin(TAU * f * 1e-3 * i as f64)).collect(),
            n_windows: 10,
            dt: 1.0,
        };
        let out = lowpass(&t, 25.0).unwrap();
        // analytic gain of the forward-backward pair: |H(w)|^2, H(z) = a / (1 - (1-a) z^-1)
        let a = crate::signal::one_pole_coefficient(25.0, 1.0).unwrap();
        let w = TAU * f * 1e-3;
        let (re, im) = (1.0 - (1.0 - a) * cos(w), (1.0 - a) * sin(w));
        let gain = a * a / (re * re + im * im);
        // least-squares amplitude in the middle, far from the edges
        let (mut ss, mut sc) = (0.0, 0.0);
        for i in 500..1500 {
            let ph = TAU * f * 1e-3 * i as f64;
            ss += out.values[i] * sin(ph);
            sc += out.values[i] * cos(ph);
        }
        let amp = sqrt(ss * ss + sc * sc) / 500.0;
        assert!((amp - gain).abs() < 1e-6, "{amp} vs {gain}");
        assert!((gain - 0.0567).abs() < 0.01);
    }

    #[test]
    fn mode_round_trip_on_exact_trace() {
        let m = gaussian_mode(200, 80.0, 20.0);
        let t = VarianceTrace {
            values: m.values().iter().map(|p| 1.0 + 2.0 * p * p).collect(),
            n_windows: 13_000,
            dt: 1.0,
        };
        let est = estimate_mode_from_variance(&t).unwrap();
        assert!(est.fidelity(&m).unwrap() > 0.999_999);
    }

    #[test]
    fn flat_trace_has_no_signal() {
        let t = VarianceTrace {
            values: alloc::vec![1.0; 100],
            n_windows: 13_000,
            dt: 1.0,
        };
        assert!(matches!(
            estimate_mode_from_variance(&t),
            Err(Error::NoSignal { .. })
        ));
    }
}
