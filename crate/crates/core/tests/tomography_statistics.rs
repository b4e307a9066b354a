use gated_core::fock::QuadratureSampler;
use gated_core::tomography::{
    fit_fock_mixture, run_em, wigner_center, DiagonalDensityMatrix, FitOptions, MarginalHistogram,
    MixtureLikelihood, QuadratureSet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn draws(pops: &[f64], n: usize, seed: u64) -> QuadratureSet {
    let s = QuadratureSampler::new(pops).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    QuadratureSet::new((0..n).map(|_| s.sample(&mut rng)).collect()).unwrap()
}

#[test]
fn two_level_mixture_recovered() {
    let mut fails = 0;
    for seed in 0..10 {
        let fit =
            fit_fock_mixture(&draws(&[0.4, 0.6], 13_000, seed), &FitOptions::default()).unwrap();
        let (r0, r1) = (fit.rho.population(0), fit.rho.population(1));
        if (r0 - 0.4).abs() > 0.03 || (r1 - 0.6).abs() > 0.03 {
            fails += 1;
        }
        assert!(fit.converged);
    }
    assert!(fails <= 1, "{fails} of 10 outside +-0.03");
}

#[test]
fn ml_and_binned_agree() {
    let q = draws(&[0.392, 0.595, 0.010, 0.002, 0.001], 13_000, 3);
    let fit = fit_fock_mixture(&q, &FitOptions::default()).unwrap();
    for n in 0..3 {
        let (a, b) = (fit.rho.population(n), fit.binned.population(n));
        assert!((a - b).abs() < 0.02, "n={n}: {a} vs {b}");
    }
    assert!((fit.histogram.area() - 1.0).abs() < 1e-9);
}

#[test]
fn vacuum_points() {
    let fit = fit_fock_mixture(&draws(&[1.0], 10_000, 4), &FitOptions::default()).unwrap();
    assert!(fit.rho.population(0) > 0.99);
    assert!((fit.rho.wigner_center() - 1.0 / std::f64::consts::PI).abs() < 0.01);
}

#[test]
fn fitted_density_integrates_to_one() {
    let fit = fit_fock_mixture(&draws(&[0.5, 0.5], 2000, 5), &FitOptions::default()).unwrap();
    let h = 0.001;
    let area: f64 = (-12_000..12_000)
        .map(|i| fit.fitted_density(i as f64 * h) * h)
        .sum();
    assert!((area - 1.0).abs() < 1e-6);
}

fn random_simplex(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

#[test]
fn em_never_decreases_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let opts = FitOptions {
        max_iter: 200,
        ..FitOptions::default()
    };
    for d in 0..3 {
        let truth = random_simplex(&mut rng, 3);
        let lik = MixtureLikelihood::new(draws(&truth, 1000, d).points(), 6).unwrap();
        for _ in 0..5 {
            let init = random_simplex(&mut rng, 7);
            let mut prev = f64::NEG_INFINITY;
            run_em(&lik, &init, &opts, |step| {
                let ll = step.log_likelihood;
                assert!(ll >= prev - 1e-10 * ll.abs(), "{prev} -> {ll}");
                prev = ll;
                assert!(step.rho.iter().all(|&r| r >= 0.0));
                assert!((step.rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            })
            .unwrap();
        }
    }
}

proptest! {
    #[test]
    fn wigner_is_linear(a in prop::collection::vec(0.0f64..1.0, 7), b in prop::collection::vec(0.0f64..1.0, 7), t in 0.0f64..1.0) {
        let na: f64 = a.iter().sum::<f64>().max(1e-9);
        let nb: f64 = b.iter().sum::<f64>().max(1e-9);
        let ra: Vec<f64> = a.iter().map(|x| x / na).collect();
        let rb: Vec<f64> = b.iter().map(|x| x / nb).collect();
        let mix: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let lhs = wigner_center(&mix);
        let rhs = t * wigner_center(&ra) + (1.0 - t) * wigner_center(&rb);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn density_matrix_accepts_simplex_only(v in prop::collection::vec(0.0f64..1.0, 1..8)) {
        let s: f64 = v.iter().sum();
        prop_assume!(s > 1e-6);
        let rho: Vec<f64> = v.iter().map(|x| x / s).collect();
        prop_assert!(DiagonalDensityMatrix::new(rho.clone()).is_ok());
        let mut bad = rho;
        bad[0] += 0.01;
        prop_assert!(DiagonalDensityMatrix::new(bad).is_err());
    }

    #[test]
    fn marginal_histogram_unit_area(pts in prop::collection::vec(-4.0f64..4.0, 1..500), bins in 1usize..100) {
        let h = MarginalHistogram::from_points(&pts, bins, -4.5, 4.5).unwrap();
        prop_assert!((h.area() - 1.0).abs() < 1e-9);
        prop_assert_eq!(h.n_in_range, pts.len());
    }
}

#[test]
fn lowpass_shrinks_white_noise() {
    use gated_core::tomography::{lowpass, VarianceTrace};
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = VarianceTrace {
        values: (0..500).map(|_| rng.random::<f64>() - 0.5).collect(),
        n_windows: 100,
        dt: 1.0,
    };
    let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let out = lowpass(&t, 25.0).unwrap();
    assert!(var(&out.values) < 0.5 * var(&t.values));
}
