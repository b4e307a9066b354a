//! Quadrature marginals of Fock states and sampling from diagonal mixtures.

use alloc::vec::Vec;
use rand::Rng;

use crate::math::{exp, sqrt, PI};
use crate::{Error, Result};

/// Highest photon number kept in every mixture model.
pub const FOCK_CUTOFF: usize = 6;
/// Number of populations, `FOCK_CUTOFF + 1`.
pub const FOCK_LEVELS: usize = FOCK_CUTOFF + 1;

/// Fills `out[n]` with `P_n(x)` for `n < out.len()`.
///
/// Uses the normalized Hermite-function recurrence
/// `phi_{n+1} = sqrt(2/(n+1)) x phi_n - sqrt(n/(n+1)) phi_{n-1}`, which avoids
/// the large factorials in `H_n(x)^2 / (2^n n!)`.
pub(crate) fn marginals_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let mut prev = 0.0;
    let mut cur = exp(-0.5 * x * x) / sqrt(sqrt(PI));
    out[0] = cur * cur;
    for n in 0..out.len() - 1 {
        let nf = n as f64;
        let next = sqrt(2.0 / (nf + 1.0)) * x * cur - sqrt(nf / (nf + 1.0)) * prev;
        prev = cur;
        cur = next;
        out[n + 1] = cur * cur;
    }
}

/// Quadrature density of the Fock state `|n>`,
/// `P_n(x) = H_n(x)^2 exp(-x^2) / (2^n n! sqrt(pi))`.
pub fn fock_marginal(n: usize, x: f64) -> Result<f64> {
    if n > FOCK_CUTOFF {
        return Err(Error::UnsupportedOrder(n));
    }
    let mut out = [0.0; FOCK_LEVELS];
    marginals_into(x, &mut out[..=n]);
    Ok(out[n])
}

const TABLE_HALF_WIDTH: f64 = 10.0;
const TABLE_POINTS: usize = 8001;

/// Inverse-CDF sampler for the phase-averaged marginal of a diagonal mixture.
///
/// A photon number is drawn with probability `rho_nn`, then `x` is read off
/// a tabulated CDF of `P_n` by linear interpolation.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    weights_cdf: Vec<f64>,
    tables: Vec<Option<Vec<f64>>>,
}

impl QuadratureSampler {
    /// `populations` must be non-negative with at most `FOCK_LEVELS` entries.
    /// They are used as relative weights.
    pub fn new(populations: &[f64]) -> Result<Self> {
        if populations.len() > FOCK_LEVELS {
            return Err(Error::UnsupportedOrder(populations.len() - 1));
        }
        if populations.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter("populations must be >= 0"));
        }
        let total: f64 = populations.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("populations must not all vanish"));
        }
        let mut acc = 0.0;
        let weights_cdf = populations
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        let tables = populations
            .iter()
            .enumerate()
            .map(|(n, &p)| (p > 0.0).then(|| cdf_table(n)))
            .collect();
        Ok(Self {
            weights_cdf,
            tables,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let n = self
            .weights_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.weights_cdf.len() - 1);
        // rounding can leave the tail entry with zero weight
        let n = (0..=n)
            .rev()
            .find(|&k| self.tables[k].is_some())
            .or_else(|| (n..self.tables.len()).find(|&k| self.tables[k].is_some()))
            .expect("at least one populated level");
        let table = self.tables[n].as_ref().unwrap();
        invert(table, rng.random())
    }
}

/// Draws a single quadrature from the phase-averaged marginal of `populations`.
pub fn sample_mode_quadrature<R: Rng + ?Sized>(populations: &[f64], rng: &mut R) -> Result<f64> {
    Ok(QuadratureSampler::new(populations)?.sample(rng))
}

fn grid_x(i: usize) -> f64 {
    -TABLE_HALF_WIDTH + 2.0 * TABLE_HALF_WIDTH * i as f64 / (TABLE_POINTS - 1) as f64
}

fn cdf_table(n: usize) -> Vec<f64> {
    let mut buf = [0.0; FOCK_LEVELS];
    let density: Vec<f64> = (0..TABLE_POINTS)
        .map(|i| {
            marginals_into(grid_x(i), &mut buf[..=n]);
            buf[n]
        })
        .collect();
    let dx = 2.0 * TABLE_HALF_WIDTH / (TABLE_POINTS - 1) as f64;
    let mut cdf = Vec::with_capacity(TABLE_POINTS);
    let mut acc = 0.0;
    cdf.push(0.0);
    for w in density.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dx;
        cdf.push(acc);
    }
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    cdf
}

fn invert(cdf: &[f64], u: f64) -> f64 {
    // first index with cdf > u
    let hi = cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1);
    let lo = hi - 1;
    let span = cdf[hi] - cdf[lo];
    let frac = if span > 0.0 {
        (u - cdf[lo]) / span
    } else {
        0.5
    };
    grid_x(lo) + frac * (grid_x(hi) - grid_x(lo))
}
