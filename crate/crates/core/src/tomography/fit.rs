//! Maximum-likelihood and binned least-squares fits of a diagonal Fock
//! mixture to phase-averaged quadrature data.

use alloc::vec::Vec;

use super::project::{MarginalHistogram, QuadratureSet};
use crate::fock::{marginals_into, FOCK_CUTOFF, FOCK_LEVELS};
use crate::math::{abs, ln, CompensatedSum, PI};
use crate::{Error, Result};

/// Photon-number populations `rho_00 .. rho_KK` on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalDensityMatrix {
    rho: Vec<f64>,
}

impl DiagonalDensityMatrix {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::InvalidParameter(
                "density matrix needs at least one level",
            ));
        }
        if rho.len() > FOCK_LEVELS {
            return Err(Error::UnsupportedOrder(rho.len() - 1));
        }
        if rho.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter("populations must be >= 0"));
        }
        if abs(rho.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(Error::InvalidParameter("populations must sum to 1"));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// `rho_nn`, zero above the stored cutoff.
    pub fn population(&self, n: usize) -> f64 {
        self.rho.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.rho.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn wigner_center(&self) -> f64 {
        wigner_center(&self.rho)
    }
}

/// `W(0,0) = sum_n (-1)^n rho_nn / pi` for diagonal populations.
///
/// Takes the raw diagonal, so truncated lists that do not sum to one are
/// evaluated as given.
pub fn wigner_center(populations: &[f64]) -> f64 {
    populations
        .iter()
        .enumerate()
        .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
        .sum::<f64>()
        / PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop when the largest population change in one iteration is below this.
    pub tol: f64,
    pub max_iter: usize,
    pub min_points: usize,
    /// Highest Fock number in the model, at most 6.
    pub cutoff: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
            min_points: 1000,
            cutoff: FOCK_CUTOFF,
        }
    }
}

/// Fock marginals evaluated once at every data point.
#[derive(Debug, Clone)]
pub struct MixtureLikelihood {
    levels: usize,
    n_points: usize,
    // row-major: point i, level n at i * levels + n
    table: Vec<f64>,
}

impl MixtureLikelihood {
    pub fn new(points: &[f64], cutoff: usize) -> Result<Self> {
        if cutoff > FOCK_CUTOFF {
            return Err(Error::UnsupportedOrder(cutoff));
        }
        let levels = cutoff + 1;
        let mut table = alloc::vec![0.0; points.len() * levels];
        for (row, &x) in table.chunks_exact_mut(levels).zip(points) {
            marginals_into(x, row);
        }
        Ok(Self {
            levels,
            n_points: points.len(),
            table,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    fn mixture_density(row: &[f64], rho: &[f64]) -> f64 {
        let s: f64 = row.iter().zip(rho).map(|(p, r)| p * r).sum();
        s.max(f64::MIN_POSITIVE)
    }

    /// `sum_i log(sum_n rho_n P_n(q_i))`.
    pub fn log_likelihood(&self, rho: &[f64]) -> f64 {
        let mut acc = CompensatedSum::default();
        for row in self.table.chunks_exact(self.levels) {
            acc.add(ln(Self::mixture_density(row, rho)));
        }
        acc.value()
    }

    /// One EM update `rho_n <- rho_n / N * sum_i P_n(q_i) / sum_m rho_m P_m(q_i)`,
    /// renormalized onto the simplex. Returns the log-likelihood of the
    /// populations *before* the update.
    pub fn em_step(&self, rho: &mut [f64]) -> f64 {
        let k = self.levels;
        let mut ll = CompensatedSum::default();
        let mut resp = [0.0; FOCK_LEVELS];
        for row in self.table.chunks_exact(k) {
            let s = Self::mixture_density(row, rho);
            ll.add(ln(s));
            let inv = 1.0 / s;
            for (g, p) in resp[..k].iter_mut().zip(row) {
                *g += p * inv;
            }
        }
        let n = self.n_points as f64;
        for (r, g) in rho.iter_mut().zip(&resp[..k]) {
            *r *= g / n;
        }
        let total: f64 = rho.iter().sum();
        for r in rho.iter_mut() {
            *r /= total;
        }
        ll.value()
    }
}

/// Progress of one EM iteration, handed to the observer of [`run_em`].
#[derive(Debug, Clone, Copy)]
pub struct EmStep<'a> {
    pub iteration: usize,
    /// Log-likelihood of the populations before this iteration's update.
    pub log_likelihood: f64,
    /// Populations after the update.
    pub rho: &'a [f64],
    pub max_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome {
    pub rho: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs EM from `init` until the largest population change drops below
/// `opts.tol` or `opts.max_iter` iterations pass.
pub fn run_em(
    lik: &MixtureLikelihood,
    init: &[f64],
    opts: &FitOptions,
    mut observer: impl FnMut(&EmStep<'_>),
) -> Result<EmOutcome> {
    if init.len() != lik.levels() {
        return Err(Error::LengthMismatch {
            expected: lik.levels(),
            got: init.len(),
        });
    }
    if init.iter().any(|&r| !(r >= 0.0)) || !(init.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidParameter(
            "EM start must be a non-negative vector",
        ));
    }
    let total: f64 = init.iter().sum();
    let mut rho: Vec<f64> = init.iter().map(|r| r / total).collect();
    let mut prev = rho.clone();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let ll = lik.em_step(&mut rho);
        iterations += 1;
        debug_assert!(
            ll >= prev_ll - 1e-10 * abs(prev_ll).max(1.0),
            "EM log-likelihood decreased: {prev_ll} -> {ll}"
        );
        prev_ll = ll;
        let max_change = rho
            .iter()
            .zip(&prev)
            .map(|(a, b)| abs(a - b))
            .fold(0.0, f64::max);
        observer(&EmStep {
            iteration: iterations,
            log_likelihood: ll,
            rho: &rho,
            max_change,
        });
        prev.copy_from_slice(&rho);
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    let log_likelihood = lik.log_likelihood(&rho);
    Ok(EmOutcome {
        rho,
        log_likelihood,
        iterations,
        converged,
    })
}

/// Bin-averaged Fock densities, `A[b][n] = (1/w) ∫_bin P_n(x) dx`, via
/// composite Simpson with 16 panels per bin.
fn binned_design(hist: &MarginalHistogram, levels: usize) -> Vec<f64> {
    const PANELS: usize = 16;
    let w = hist.bin_width();
    let h = w / PANELS as f64;
    let mut out = alloc::vec![0.0; hist.n_bins() * levels];
    let mut buf = [0.0; FOCK_LEVELS];
    for (b, row) in out.chunks_exact_mut(levels).enumerate() {
        let start = hist.lo + b as f64 * w;
        for j in 0..=PANELS {
            let weight = if j == 0 || j == PANELS {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            marginals_into(start + j as f64 * h, &mut buf[..levels]);
            for (r, p) in row.iter_mut().zip(&buf[..levels]) {
                *r += weight * p;
            }
        }
        for r in row.iter_mut() {
            *r *= h / 3.0 / w;
        }
    }
    out
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        acc += u;
        let t = (acc - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Least-squares fit of bin-averaged Fock densities to a marginal histogram
/// on the simplex, by accelerated projected gradient.
pub fn fit_binned_least_squares(hist: &MarginalHistogram, cutoff: usize) -> Result<Vec<f64>> {
    if cutoff > FOCK_CUTOFF {
        return Err(Error::UnsupportedOrder(cutoff));
    }
    let k = cutoff + 1;
    let a = binned_design(hist, k);
    // normal equations: G = A^T A, c = A^T d
    let mut g = alloc::vec![0.0; k * k];
    let mut c = alloc::vec![0.0; k];
    for (row, &d) in a.chunks_exact(k).zip(&hist.density) {
        for i in 0..k {
            c[i] += row[i] * d;
            for j in 0..k {
                g[i * k + j] += row[i] * row[j];
            }
        }
    }
    // largest eigenvalue of G by power iteration
    let mut v = alloc::vec![1.0; k];
    let mut lmax = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..k)
            .map(|i| (0..k).map(|j| g[i * k + j] * v[j]).sum())
            .collect();
        let norm = libm::sqrt(w.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::DegenerateModel);
        }
        lmax = norm / libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        v = w.into_iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (lmax * 1.01);
    let mut x = alloc::vec![1.0 / k as f64; k];
    let mut y = x.clone();
    let mut t = 1.0;
    for _ in 0..200_000 {
        let grad: Vec<f64> = (0..k)
            .map(|i| (0..k).map(|j| g[i * k + j] * y[j]).sum::<f64>() - c[i])
            .collect();
        let mut next: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - step * gi).collect();
        project_simplex(&mut next);
        let t_next = (1.0 + libm::sqrt(1.0 + 4.0 * t * t)) / 2.0;
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| abs(a - b))
            .fold(0.0, f64::max);
        y = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + (t - 1.0) / t_next * (n - o))
            .collect();
        x = next;
        t = t_next;
        if change < 1e-13 {
            break;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockFit {
    /// Maximum-likelihood populations.
    pub rho: DiagonalDensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Populations from the binned least-squares fit, for comparison.
    pub binned: DiagonalDensityMatrix,
    pub histogram: MarginalHistogram,
}

impl FockFit {
    /// Model density `sum_n rho_n P_n(x)` for the ML populations.
    pub fn fitted_density(&self, x: f64) -> f64 {
        let mut buf = [0.0; FOCK_LEVELS];
        let k = self.rho.rho().len();
        marginals_into(x, &mut buf[..k]);
        buf[..k]
            .iter()
            .zip(self.rho.rho())
            .map(|(p, r)| p * r)
            .sum()
    }
}

/// Fits a diagonal Fock mixture to phase-averaged quadratures by maximum
/// likelihood (EM from the uniform mixture) and, for comparison, by binned
/// least squares on the default marginal histogram.
pub fn fit_fock_mixture(q: &QuadratureSet, opts: &FitOptions) -> Result<FockFit> {
    let pts = q.points();
    if pts.len() < opts.min_points.max(1) {
        return Err(Error::InsufficientData {
            needed: opts.min_points.max(1),
            got: pts.len(),
        });
    }
    if pts.iter().all(|&p| p == pts[0]) {
        return Err(Error::Degenerate);
    }
    let lik = MixtureLikelihood::new(pts, opts.cutoff)?;
    let init = alloc::vec![1.0 / lik.levels() as f64; lik.levels()];
    let em = run_em(&lik, &init, opts, |_| {})?;
    let (lo, hi) = MarginalHistogram::DEFAULT_RANGE;
    let histogram = MarginalHistogram::from_points(pts, MarginalHistogram::DEFAULT_BINS, lo, hi)?;
    let binned = fit_binned_least_squares(&histogram, opts.cutoff)?;
    Ok(FockFit {
        rho: DiagonalDensityMatrix::new(em.rho)?,
        log_likelihood: em.log_likelihood,
        iterations: em.iterations,
        converged: em.converged,
        binned: DiagonalDensityMatrix::new(binned)?,
        histogram,
    })
}
