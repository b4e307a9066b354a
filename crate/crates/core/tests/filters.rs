use gated_core::signal::{
    filter_signal, intensity, mhz_to_rad_per_ns, CavityFilter, FilterChain, PulseProfile,
    SampledSignal,
};
use proptest::prelude::*;

fn run(chain: &FilterChain, x: &[f64], dt: f64) -> Vec<f64> {
    let s = SampledSignal::new(0.0, dt, x.to_vec()).unwrap();
    filter_signal(&s, chain).unwrap().into_samples()
}

fn chain(kappas: &[f64]) -> FilterChain {
    FilterChain::new(
        kappas
            .iter()
            .map(|&k| CavityFilter::new(k).unwrap())
            .collect(),
    )
    .unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..200)
}

proptest! {
    #[test]
    fn linear(x in signal(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0,
              k in 0.005f64..0.45) {
        let y: Vec<f64> = x.iter().enumerate()
            .map(|(i, v)| v * ((seed.wrapping_add(i as u64) % 7) as f64 - 3.0))
            .collect();
        let c = chain(&[k, 0.5 * k]);
        let combined: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = run(&c, &combined, 1.0);
        let (fx, fy) = (run(&c, &x, 1.0), run(&c, &y, 1.0));
        let rhs: Vec<f64> = fx.iter().zip(&fy).map(|(p, q)| a * p + b * q).collect();
        let scale = max_abs(&rhs).max(max_abs(&combined)).max(1e-300);
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn causal(x in signal(), pad in 1usize..50, k in 0.005f64..0.45) {
        // leading zeros delay the response without changing it
        let c = chain(&[k]);
        let mut padded = vec![0.0; pad];
        padded.extend_from_slice(&x);
        let out = run(&c, &padded, 1.0);
        prop_assert!(out[..pad].iter().all(|&v| v == 0.0));
        let direct = run(&c, &x, 1.0);
        for (a, b) in out[pad..].iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn future_samples_do_not_leak_back(x in signal(), cut in 0usize..199, k in 0.005f64..0.45) {
        let cut = cut.min(x.len() - 1);
        let c = chain(&[k]);
        let mut changed = x.clone();
        for v in &mut changed[cut + 1..] {
            *v += 5.0;
        }
        let (a, b) = (run(&c, &x, 1.0), run(&c, &changed, 1.0));
        prop_assert_eq!(&a[..=cut], &b[..=cut]);
    }

    #[test]
    fn cascade_order_irrelevant(x in signal(), k in prop::collection::vec(0.005f64..0.45, 2..4)) {
        let mut rev = k.clone();
        rev.reverse();
        let (a, b) = (run(&chain(&k), &x, 1.0), run(&chain(&rev), &x, 1.0));
        let scale = max_abs(&a).max(1.0);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn unit_dc_gain(k in 0.01f64..0.45, m in 1usize..3) {
        let c = chain(&vec![k; m]);
        let n = (60.0 / k) as usize + 50;
        let out = run(&c, &vec![1.0; n], 1.0);
        prop_assert!((out[n - 1] - 1.0).abs() < 1e-6);
    }
}

#[test]
fn zero_in_zero_out() {
    let c = chain(&[0.1, 0.2]);
    assert!(run(&c, &[0.0; 64], 1.0).iter().all(|&v| v == 0.0));
}

/// Max |error| of the step response against 1 - exp(-k t) on a fine
/// continuous-time grid, reading the discrete output by linear interpolation.
fn step_error(k: f64, dt: f64, span: f64) -> f64 {
    let n = (span / dt) as usize + 1;
    let s = SampledSignal::new(0.0, dt, vec![1.0; n]).unwrap();
    let y = filter_signal(&s, &chain(&[k])).unwrap();
    let mut worst = 0.0f64;
    let mut t = 0.0;
    while t <= y.end_time() {
        let exact = 1.0 - (-k * t).exp();
        worst = worst.max((y.interpolate(t).unwrap() - exact).abs());
        t += 0.01;
    }
    worst
}

#[test]
fn step_response_samples_exact() {
    let k = mhz_to_rad_per_ns(12.0);
    let s = SampledSignal::new(0.0, 1.0, vec![1.0; 300]).unwrap();
    let y = filter_signal(&s, &chain(&[k])).unwrap();
    for (i, v) in y.samples().iter().enumerate() {
        assert!((v - (1.0 - (-k * i as f64).exp())).abs() < 1e-12);
    }
}

#[test]
fn step_response_error_second_order_in_dt() {
    let k = mhz_to_rad_per_ns(12.0);
    let e1 = step_error(k, 1.0, 200.0);
    let e2 = step_error(k, 0.5, 200.0);
    let e4 = step_error(k, 0.25, 200.0);
    // interpolation error of exp(-kt): k^2 dt^2 / 8
    assert!((e1 - k * k / 8.0).abs() < 0.1 * k * k / 8.0, "{e1}");
    assert!(e2 < 0.5 * e1 && e4 < 0.5 * e2, "{e1} {e2} {e4}");
}

#[test]
fn intensity_of_step_response() {
    let k = 0.1;
    let s = SampledSignal::new(0.0, 1.0, vec![1.0; 100]).unwrap();
    let z = intensity(&filter_signal(&s, &chain(&[k])).unwrap());
    for (i, v) in z.samples().iter().enumerate() {
        let e = 1.0 - (-k * i as f64).exp();
        assert!((v - e * e).abs() < 1e-12);
    }
}

#[test]
fn paper_pulse_through_opo_and_filter_cavity() {
    let pulse = PulseProfile::new(49.0, 5.0, 0.0).unwrap();
    let c = FilterChain::new(vec![
        CavityFilter::from_bandwidth_mhz(4.4).unwrap(),
        CavityFilter::from_half_width_mhz(12.0).unwrap(),
    ])
    .unwrap();
    let z = filter_signal(&pulse.sample(0.0, 1.0, 500).unwrap(), &c).unwrap();
    let peak = z.argmax();
    assert!(peak as f64 > 49.0 && (peak as f64) < 70.0, "{peak}");
    // slow tail: the OPO field decays over ~72 ns
    let v = z.samples();
    let ratio = v[peak + 100] / v[peak];
    assert!(ratio > 0.1 && ratio < 0.5, "{ratio}");
    assert!(v.windows(2).skip(peak + 10).all(|w| w[1] <= w[0]));
}
