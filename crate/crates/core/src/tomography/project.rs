use alloc::vec::Vec;

use crate::homodyne::{ModeFunction, TraceSet, VACUUM_VARIANCE};
use crate::math::{mean_var, sqrt};
use crate::{Error, Result};

/// Vacuum-normalized quadrature points, one per window.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSet {
    points: Vec<f64>,
    /// Factor applied to the raw projections.
    pub scale: f64,
}

impl QuadratureSet {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("quadrature points must be finite"));
        }
        Ok(Self { points, scale: 1.0 })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        mean_var(self.points.iter().copied()).1
    }
}

fn raw_projections(set: &TraceSet, mode: &ModeFunction) -> Result<Vec<f64>> {
    if set.window_len() != mode.len() && !set.is_empty() {
        return Err(Error::LengthMismatch {
            expected: mode.len(),
            got: set.window_len(),
        });
    }
    Ok(set
        .windows
        .iter()
        .map(|w| mode.project(&w.samples))
        .collect())
}

/// Projects every window onto `mode` and rescales so that the vacuum set's
/// projections have variance exactly 1/2.
pub fn project(set: &TraceSet, mode: &ModeFunction, vacuum: &TraceSet) -> Result<QuadratureSet> {
    if vacuum.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: vacuum.len(),
        });
    }
    let vac = raw_projections(vacuum, mode)?;
    let (_, vac_var) = mean_var(vac.iter().copied());
    if !(vac_var > 0.0) {
        return Err(Error::InvalidParameter(
            "vacuum projections have zero variance",
        ));
    }
    let scale = sqrt(VACUUM_VARIANCE / vac_var);
    let points = raw_projections(set, mode)?
        .into_iter()
        .map(|q| q * scale)
        .collect();
    Ok(QuadratureSet { points, scale })
}

/// Unit-area histogram of quadrature points.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalHistogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_centers: Vec<f64>,
    pub density: Vec<f64>,
    /// Points that fell inside `[lo, hi)`.
    pub n_in_range: usize,
}

impl MarginalHistogram {
    /// Default binning for marginal plots: 61 bins over [-4.5, 4.5].
    pub const DEFAULT_BINS: usize = 61;
    pub const DEFAULT_RANGE: (f64, f64) = (-4.5, 4.5);

    /// Points outside `[lo, hi)` are dropped and the rest normalized to unit
    /// area.
    pub fn from_points(points: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_bins == 0 || !(hi > lo) {
            return Err(Error::InvalidParameter("histogram needs bins and hi > lo"));
        }
        let width = (hi - lo) / n_bins as f64;
        let mut counts = alloc::vec![0usize; n_bins];
        let mut n_in_range = 0;
        for &p in points {
            if p >= lo && p < hi {
                let i = (((p - lo) / width) as usize).min(n_bins - 1);
                counts[i] += 1;
                n_in_range += 1;
            }
        }
        if n_in_range == 0 {
            return Err(Error::EmptyInput);
        }
        let density = counts
            .iter()
            .map(|&c| c as f64 / (n_in_range as f64 * width))
            .collect();
        let bin_centers = (0..n_bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
        Ok(Self {
            lo,
            hi,
            bin_centers,
            density,
            n_in_range,
        })
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.density.len() as f64
    }

    pub fn n_bins(&self) -> usize {
        self.density.len()
    }

    pub fn area(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clicks::AcceptanceGate;
    use crate::homodyne::{
        generate_trace_set, synthesize_window, TargetState, TraceMeta, TraceSetRequest,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mode(len: usize) -> ModeFunction {
        ModeFunction::from_unnormalized((0..len).map(|i| libm::exp(-(i as f64) / 20.0)).collect())
            .unwrap()
    }

    fn vacuum(m: &ModeFunction, n: usize, seed: u64) -> TraceSet {
        generate_trace_set(&TraceSetRequest {
            state: &TargetState::vacuum(),
            mode: m,
            n_windows: n,
            vacuum: true,
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
    fn vacuum_normalizes_to_half_exactly() {
        let m = mode(100);
        let v = vacuum(&m, 500, 4);
        let q = project(&v, &m, &v).unwrap();
        assert!((q.variance() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn known_quadratures_recovered_up_to_vacuum_scale() {
        let m = mode(100);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs = [-1.2, 0.0, 0.7, 2.2];
        let windows = xs
            .iter()
            .map(|&x| synthesize_window(x, &m, 50.0, &mut rng))
            .collect();
        let set = TraceSet::new(windows, false, 1.0, TraceMeta::default()).unwrap();
        let v = vacuum(&m, 2000, 9);
        let q = project(&set, &m, &v).unwrap();
        for (p, x) in q.points().iter().zip(xs) {
            assert!((p / q.scale - x).abs() < 1e-9);
        }
        // the scale itself is a noisy estimate of 1
        assert!((q.scale - 1.0).abs() < 0.1);
    }

    #[test]
    fn empty_vacuum_rejected() {
        let m = mode(10);
        let v = vacuum(&m, 3, 1);
        let empty = TraceSet::new(alloc::vec![], true, 1.0, TraceMeta::default()).unwrap();
        assert!(matches!(
            project(&v, &m, &empty),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn histogram_has_unit_area() {
        let pts: Vec<f64> = (0..1000).map(|i| -5.0 + 0.01 * i as f64).collect();
        let h = MarginalHistogram::from_points(&pts, 61, -4.5, 4.5).unwrap();
        assert!((h.area() - 1.0).abs() < 1e-9);
        assert_eq!(h.n_bins(), 61);
    }
}
