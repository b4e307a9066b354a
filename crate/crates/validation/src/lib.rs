//! Closed-form and brute-force reference values used to check `gated-core`.
//!
//! Nothing here calls into the library under test.

use std::f64::consts::PI;

/// Physicists' Hermite polynomial, written out term by term for n <= 6.
pub fn hermite(n: usize, x: f64) -> f64 {
    let x2 = x * x;
    match n {
        0 => 1.0,
        1 => 2.0 * x,
        2 => 4.0 * x2 - 2.0,
        3 => 8.0 * x2 * x - 12.0 * x,
        4 => 16.0 * x2 * x2 - 48.0 * x2 + 12.0,
        5 => 32.0 * x2 * x2 * x - 160.0 * x2 * x + 120.0 * x,
        6 => 64.0 * x2 * x2 * x2 - 480.0 * x2 * x2 + 720.0 * x2 - 120.0,
        _ => panic!("hermite: n = {n} not tabulated"),
    }
}

/// Quadrature density of the n-photon state (vacuum variance 1/2).
pub fn fock_density(n: usize, x: f64) -> f64 {
    let h = hermite(n, x);
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    h * h * (-x * x).exp() / (2f64.powi(n as i32) * fact * PI.sqrt())
}

/// Composite Simpson rule on `n` intervals (`n` is rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Wigner function at the origin of a diagonal state, summed directly.
pub fn wigner_origin(populations: &[f64]) -> f64 {
    let mut sign = 1.0;
    let mut w = 0.0;
    for p in populations {
        w += sign * p;
        sign = -sign;
    }
    w / PI
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Pearson statistic `sum (o - e)^2 / e` over bins with `e > 0`, and the
/// number of such bins.
pub fn pearson_chi2(observed: &[u64], expected: &[f64]) -> (f64, usize) {
    let mut chi2 = 0.0;
    let mut used = 0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e > 0.0 {
            chi2 += (o as f64 - e).powi(2) / e;
            used += 1;
        }
    }
    (chi2, used)
}
