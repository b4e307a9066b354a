use gated_core::clicks::AcceptanceGate;
use gated_core::homodyne::{
    generate_trace_set, optimal_mode, synthesize_window, ElectronicNoise, ModeFunction,
    TargetState, TraceMeta, TraceSet, TraceSetRequest, WindowGrid,
};
use gated_core::signal::{CavityFilter, PulseProfile};
use gated_core::tomography::{fit_fock_mixture, project, FitOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PAPER: [f64; 5] = [0.392, 0.595, 0.010, 0.002, 0.001];

fn paper_mode() -> ModeFunction {
    optimal_mode(
        &PulseProfile::new(49.0, 5.0, 0.015).unwrap(),
        &CavityFilter::from_bandwidth_mhz(4.4).unwrap(),
        0.0,
        WindowGrid::default(),
    )
    .unwrap()
}

fn request<'a>(
    state: &'a TargetState,
    mode: &'a ModeFunction,
    n: usize,
    vacuum: bool,
    seed: u64,
) -> TraceSetRequest<'a> {
    TraceSetRequest {
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
    }
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Unit vector orthogonal to `mode`, built by Gram-Schmidt from a ramp.
fn orthogonal_to(mode: &ModeFunction) -> Vec<f64> {
    let n = mode.len();
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
    let dot: f64 = v.iter().zip(mode.values()).map(|(a, b)| a * b).sum();
    for (a, b) in v.iter_mut().zip(mode.values()) {
        *a -= dot * b;
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / norm).collect()
}

fn raw_projection(set: &TraceSet, direction: &[f64]) -> Vec<f64> {
    set.windows
        .iter()
        .map(|w| w.samples.iter().zip(direction).map(|(a, b)| a * b).sum())
        .collect()
}

#[test]
fn projection_identity_on_every_window() {
    let mode = paper_mode();
    let state = TargetState::new(&PAPER).unwrap();
    let set = generate_trace_set(&request(&state, &mode, 200, false, 1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for x in [-2.5, 0.0, 0.3, 4.0] {
        let w = synthesize_window(x, &mode, 60.0, &mut rng);
        assert!((mode.project(&w.samples) - x).abs() < 1e-12);
    }
    assert_eq!(set.window_len(), 500);
}

#[test]
fn single_photon_projection_variance() {
    let mode = paper_mode();
    let state = TargetState::new(&[0.0, 1.0]).unwrap();
    let set = generate_trace_set(&request(&state, &mode, 20_000, false, 2)).unwrap();
    let q = raw_projection(&set, mode.values());
    // Var(x^2) for the single-photon marginal: 15/4 - 9/4
    let sd = (1.5f64 * 2.0 / 20_000.0).sqrt() * 1.5;
    assert!((variance(&q) - 1.5).abs() < 3.0 * sd, "{}", variance(&q));
}

#[test]
fn orthogonal_mode_sees_vacuum() {
    let mode = paper_mode();
    let state = TargetState::new(&PAPER).unwrap();
    let n = 10_000;
    let set = generate_trace_set(&request(&state, &mode, n, false, 4)).unwrap();
    let v = variance(&raw_projection(&set, &orthogonal_to(&mode)));
    let sd = 0.5 * (2.0 / n as f64).sqrt();
    assert!((v - 0.5).abs() < 3.0 * sd, "{v}");
}

#[test]
fn vacuum_per_sample_variance() {
    let mode = paper_mode();
    let n = 4000;
    let set = generate_trace_set(&request(&TargetState::vacuum(), &mode, n, true, 5)).unwrap();
    let sd = 0.5 * (2.0 / n as f64).sqrt();
    for i in 0..set.window_len() {
        let col: Vec<f64> = set.windows.iter().map(|w| w.samples[i]).collect();
        assert!((variance(&col) - 0.5).abs() < 5.0 * sd, "sample {i}");
    }
}

#[test]
fn paper_mixture_projects_to_expected_variance() {
    let mode = paper_mode();
    let state = TargetState::new(&PAPER).unwrap();
    assert!((state.quadrature_variance() - 1.125).abs() < 1e-12);
    let sig = generate_trace_set(&request(&state, &mode, 13_000, false, 6)).unwrap();
    let vac = generate_trace_set(&request(&TargetState::vacuum(), &mode, 13_000, true, 7)).unwrap();
    let q = project(&sig, &mode, &vac).unwrap();
    // 1/2 + <n>; the three leading populations alone give 1.115
    let want = state.quadrature_variance();
    // <x^4> of |n> is (6n^2 + 6n + 3) / 4
    let m4: f64 = PAPER
        .iter()
        .enumerate()
        .map(|(n, p)| p * (6.0 * (n * n) as f64 + 6.0 * n as f64 + 3.0) / 4.0)
        .sum();
    let n = 13_000.0;
    // spread of the signal variance plus that of the vacuum scale estimate
    let sd = ((m4 - want * want) / n + want * want * 2.0 / n).sqrt();
    assert!(
        (q.variance() - want).abs() < 3.0 * sd,
        "{} vs {want} (sd {sd})",
        q.variance()
    );
}

#[test]
fn mode_mismatch_acts_as_loss() {
    // psi_est = cos(t) psi + sin(t) phi: single photons survive with
    // probability eta = cos^2(t), otherwise the projection is vacuum
    let mode = paper_mode();
    let phi = orthogonal_to(&mode);
    let state = TargetState::new(&[0.0, 1.0]).unwrap();
    let n = 13_000;
    let sig = generate_trace_set(&request(&state, &mode, n, false, 8)).unwrap();
    let vac = generate_trace_set(&request(&TargetState::vacuum(), &mode, n, true, 9)).unwrap();
    for theta in [0.2f64, 0.45, 0.7] {
        let (c, s) = (theta.cos(), theta.sin());
        let est = ModeFunction::from_unnormalized(
            mode.values()
                .iter()
                .zip(&phi)
                .map(|(a, b)| c * a + s * b)
                .collect(),
        )
        .unwrap();
        let eta = est.fidelity(&mode).unwrap();
        assert!((eta - c * c).abs() < 1e-12);
        let q = project(&sig, &est, &vac).unwrap();
        assert!(
            (q.variance() - (0.5 + eta)).abs() < 0.05,
            "theta {theta}: {}",
            q.variance()
        );
        let fit = fit_fock_mixture(&q, &FitOptions::default()).unwrap();
        let rho11 = fit.rho.population(1);
        assert!(
            (rho11 - eta).abs() < 0.03,
            "theta {theta}: {rho11} vs {eta}"
        );
    }
}

#[test]
fn electronic_noise_only_touches_signal_and_high_frequencies() {
    let mode = paper_mode();
    let state = TargetState::new(&PAPER).unwrap();
    let mut req = request(&state, &mode, 300, false, 10);
    let clean = generate_trace_set(&req).unwrap();
    req.electronic_noise = Some(ElectronicNoise {
        rms: 0.3,
        min_freq_mhz: 100.0,
    });
    let noisy = generate_trace_set(&req).unwrap();
    let diff: Vec<f64> = noisy.windows[0]
        .samples
        .iter()
        .zip(&clean.windows[0].samples)
        .map(|(a, b)| a - b)
        .collect();
    assert!((variance(&diff).sqrt() - 0.3).abs() < 0.03);
    // a slow mode barely sees the added noise
    let leak: f64 = noisy
        .windows
        .iter()
        .zip(&clean.windows)
        .map(|(a, b)| (mode.project(&a.samples) - mode.project(&b.samples)).abs())
        .fold(0.0, f64::max);
    assert!(leak < 0.1, "{leak}");
    req.vacuum = true;
    req.electronic_noise = None;
    let v1 = generate_trace_set(&req).unwrap();
    req.electronic_noise = Some(ElectronicNoise {
        rms: 0.3,
        min_freq_mhz: 100.0,
    });
    assert_eq!(generate_trace_set(&req).unwrap(), v1);
}

#[test]
fn seeds_control_every_sample() {
    let mode = paper_mode();
    let state = TargetState::new(&PAPER).unwrap();
    let a = generate_trace_set(&request(&state, &mode, 20, false, 1)).unwrap();
    let b = generate_trace_set(&request(&state, &mode, 20, false, 1)).unwrap();
    let c = generate_trace_set(&request(&state, &mode, 20, false, 2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.windows[0], c.windows[0]);
    assert_eq!(
        a.meta,
        TraceMeta {
            seed: 1,
            config_hash: 0
        }
    );
    assert!(a
        .windows
        .iter()
        .all(|w| (40.0..=80.0).contains(&w.qualifier_delay)));
}

#[test]
fn background_heralds_dilute_toward_vacuum() {
    let mode = paper_mode();
    let state = TargetState::new(&[0.0, 1.0]).unwrap();
    let vac =
        generate_trace_set(&request(&TargetState::vacuum(), &mode, 13_000, true, 11)).unwrap();
    let mut req = request(&state, &mode, 13_000, false, 12);
    req.background_herald_fraction = 0.3;
    let q = project(&generate_trace_set(&req).unwrap(), &mode, &vac).unwrap();
    let fit = fit_fock_mixture(&q, &FitOptions::default()).unwrap();
    assert!(
        (fit.rho.population(1) - 0.7).abs() < 0.03,
        "{}",
        fit.rho.population(1)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn vacuum_is_isotropic(weights in prop::collection::vec(-1.0f64..1.0, 500), seed in 0u64..1000) {
        let mode = paper_mode();
        let n = 3000;
        let vac = generate_trace_set(&request(&TargetState::vacuum(), &mode, n, true, seed)).unwrap();
        let any = ModeFunction::from_unnormalized(weights).unwrap();
        let v = variance(&raw_projection(&vac, any.values()));
        let sd = 0.5 * (2.0 / n as f64).sqrt();
        prop_assert!((v - 0.5).abs() < 4.0 * sd, "{}", v);
    }
}
