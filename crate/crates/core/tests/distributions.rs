use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use switchgraph::distributions::{invert_mean, weibull_from_mean_and_tail, weibull_tail_from, zeta};
use switchgraph::{DistError, DistSpec, Family, ResidualView};

/// Plain left-to-right mean series, stopping once terms underflow.
fn brute_mean(d: &DistSpec) -> f64 {
    let mut s = 0.0;
    for k in 1..=20_000_000u64 {
        let t = d.ccdf(k);
        s += t;
        if t < 1e-18 * s {
            break;
        }
    }
    s
}

#[test]
fn weibull_means_match_brute_series() {
    for &lambda in &[0.5, 1.5, 3.0] {
        for &alpha in &[0.3, 0.5, 1.0, 2.0] {
            let d = DistSpec::weibull(lambda, alpha).unwrap();
            let m = d.mean().unwrap();
            let b = brute_mean(&d);
            assert!((m - b).abs() < 1e-10 * b, "W({lambda},{alpha}): {m} vs {b}");
        }
    }
}

#[test]
fn weibull_tail_closure_matches_direct_sum() {
    for &(lambda, alpha) in &[(0.5, 0.3), (1.5, 0.25), (0.05, 0.8), (0.001, 1.5)] {
        for &a in &[512.0f64, 4096.0] {
            let mut direct = 0.0;
            let mut x = a;
            loop {
                let t = (-lambda * x.powf(alpha)).exp();
                direct += t;
                if t < 1e-20 * direct {
                    break;
                }
                x += 1.0;
            }
            let closed = weibull_tail_from(lambda, alpha, a);
            assert!((closed - direct).abs() < 1e-10 * direct, "W({lambda},{alpha}) from {a}: {closed} vs {direct}");
        }
    }
}

#[test]
fn zeta_matches_known_values() {
    assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
    assert!((zeta(4.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-13);
    assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-13);
}

#[test]
fn residual_pmf_is_normalized() {
    let laws = [
        DistSpec::geometric(0.3).unwrap(),
        DistSpec::weibull(1.5, 0.5).unwrap(),
        DistSpec::weibull(1.5, 0.3).unwrap(),
        DistSpec::weibull(0.5, 2.0).unwrap(),
        DistSpec::zeta(3.0).unwrap(),
        DistSpec::zeta(2.5).unwrap(),
    ];
    for d in laws {
        let view = ResidualView::new(d).unwrap();
        let kmax = 2_000_000u64;
        let mut s: f64 = (1..=kmax).rev().map(|k| view.residual_pmf(k)).sum();
        if let DistSpec::Zeta { alpha } = d {
            // integral estimate of the remaining ccdf mass
            s += (kmax as f64 + 0.5).powf(1.0 - alpha) / (alpha - 1.0) / view.mean();
        }
        assert!((s - 1.0).abs() < 1e-8, "{d}: {s}");
    }
}

#[test]
fn pmf_telescopes_to_ccdf() {
    for d in [
        DistSpec::geometric(0.37).unwrap(),
        DistSpec::weibull(1.5, 0.3).unwrap(),
        DistSpec::zeta(1.7).unwrap(),
    ] {
        for kk in [1u64, 2, 5, 50, 1000] {
            let s: f64 = (1..=kk).map(|k| d.pmf(k)).sum();
            assert!((s - (1.0 - d.ccdf(kk + 1))).abs() < 1e-12);
        }
    }
}

#[test]
fn geometric_residual_is_the_law_itself() {
    for &p in &[0.05, 0.3, 0.4, 0.8, 0.999] {
        let d = DistSpec::geometric(p).unwrap();
        let view = ResidualView::new(d).unwrap();
        for k in 1..200 {
            assert_eq!(view.residual_pmf(k), d.pmf(k), "p={p}, k={k}");
        }
    }
}

fn targets(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..50).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / 50.0)
}

#[test]
fn invert_mean_is_a_right_inverse() {
    for t in targets(1.01, 40.0) {
        let d = invert_mean(&Family::Geometric, t).unwrap();
        assert!((d.mean().unwrap() - t).abs() < 1e-8 * t);
    }
    let floor = 1.0 + (-1.5f64).exp();
    for t in targets(floor + 0.01, 12.0) {
        let d = invert_mean(&Family::Weibull { lambda: Some(1.5) }, t).unwrap();
        assert!((d.mean().unwrap() - t).abs() < 1e-8 * t, "target {t}");
    }
    for t in targets(1.01, 15.0) {
        let d = invert_mean(&Family::Zeta, t).unwrap();
        assert!((d.mean().unwrap() - t).abs() < 1e-8 * t, "target {t}");
    }
}

#[test]
fn invert_mean_examples() {
    assert_eq!(invert_mean(&Family::Geometric, 2.5).unwrap(), DistSpec::geometric(0.4).unwrap());
    let mu = DistSpec::weibull(1.5, 0.5).unwrap().mean().unwrap();
    match invert_mean(&Family::Weibull { lambda: Some(1.5) }, mu).unwrap() {
        DistSpec::DiscreteWeibull { alpha, .. } => assert!((alpha - 0.5).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
    match invert_mean(&Family::Zeta, std::f64::consts::PI.powi(2) / 6.0).unwrap() {
        DistSpec::Zeta { alpha } => assert!((alpha - 2.0).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        invert_mean(&Family::Weibull { lambda: Some(1.5) }, 1.1),
        Err(DistError::MeanOutOfRange { .. })
    ));
}

#[test]
fn weibull_joint_recovery_on_grid() {
    for &lambda in &[0.5, 1.5, 3.0] {
        for &alpha in &[0.3, 0.5, 1.0, 2.0] {
            let d = DistSpec::weibull(lambda, alpha).unwrap();
            let mu = d.mean().unwrap();
            let fbar2 = d.ccdf(2) / mu;
            let (l, a) = weibull_from_mean_and_tail(mu, fbar2).unwrap();
            assert!((l - lambda).abs() < 1e-9, "lambda {l} vs {lambda}");
            assert!((a - alpha).abs() < 1e-9, "alpha {a} vs {alpha}");
        }
    }
    assert!(matches!(weibull_from_mean_and_tail(2.0, 0.5), Err(DistError::InconsistentMoments(_))));
}

#[test]
fn sampled_means_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in [
        DistSpec::geometric(0.4).unwrap(),
        DistSpec::weibull(1.5, 0.5).unwrap(),
        DistSpec::zeta(3.5).unwrap(),
    ] {
        let view = ResidualView::new(d).unwrap();
        let n = 400_000;
        for residual in [false, true] {
            let xs: Vec<f64> = (0..n)
                .map(|_| if residual { view.sample_residual(&mut rng) } else { view.sample(&mut rng) } as f64)
                .collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (v / n as f64).sqrt();
            // residual mean is E X(X+1) / (2 E X)
            let expect = if residual {
                let ex = view.mean();
                let ex2: f64 = (1..2_000_000u64).map(|k| (k * k) as f64 * d.pmf(k)).sum();
                (ex2 + ex) / (2.0 * ex)
            } else {
                view.mean()
            };
            assert!((m - expect).abs() < 4.0 * se, "{d} residual={residual}: {m} vs {expect} (se {se})");
        }
    }
}

#[test]
fn sampled_ccdf_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let d = DistSpec::weibull(1.5, 0.5).unwrap();
    let n = 1_000_000;
    let hits = (0..n).filter(|_| d.sample(&mut rng) >= 2).count() as f64 / n as f64;
    let p = (-1.5f64).exp();
    assert!((hits - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
}

#[test]
fn geometric_residual_samples_match_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let d = DistSpec::geometric(0.4).unwrap();
    let view = ResidualView::new(d).unwrap();
    let n = 1_000_000;
    let mut a = vec![0u64; 64];
    let mut b = vec![0u64; 64];
    for _ in 0..n {
        a[(view.sample(&mut rng) as usize).min(63)] += 1;
        b[(view.sample_residual(&mut rng) as usize).min(63)] += 1;
    }
    let (mut ca, mut cb, mut ks) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..64 {
        ca += a[k] as f64 / n as f64;
        cb += b[k] as f64 / n as f64;
        ks = ks.max((ca - cb).abs());
    }
    assert!(ks < 0.005, "Kolmogorov distance {ks}");
}

proptest! {
    #[test]
    fn geometric_inversion_round_trips(p in 0.01f64..1.0) {
        let d = DistSpec::geometric(p).unwrap();
        let back = invert_mean(&Family::Geometric, d.mean().unwrap());
        if p < 1.0 {
            match back.unwrap() {
                DistSpec::Geometric { p: q } => prop_assert!((q - p).abs() < 1e-12),
                other => prop_assert!(false, "{other:?}"),
            }
        }
    }

    #[test]
    fn weibull_mean_decreases_in_shape(lambda in 0.3f64..3.0, a in 0.3f64..2.5, da in 0.01f64..0.5) {
        let m1 = DistSpec::weibull(lambda, a).unwrap().mean().unwrap();
        let m2 = DistSpec::weibull(lambda, a + da).unwrap().mean().unwrap();
        prop_assert!(m2 < m1);
    }

    #[test]
    fn residual_at_one_is_reciprocal_mean(lambda in 0.3f64..3.0, a in 0.3f64..2.5) {
        let d = DistSpec::weibull(lambda, a).unwrap();
        let view = ResidualView::new(d).unwrap();
        prop_assert_eq!(view.residual_pmf(1), 1.0 / view.mean());
        prop_assert!((view.residual_pmf(2) - d.ccdf(2) / d.mean().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dist_spec_json_round_trips(p in 0.01f64..1.0, l in 0.1f64..5.0, a in 1.1f64..4.0) {
        for d in [DistSpec::geometric(p).unwrap(), DistSpec::weibull(l, a).unwrap(), DistSpec::zeta(a).unwrap()] {
            let s = serde_json::to_string(&d).unwrap();
            prop_assert_eq!(serde_json::from_str::<DistSpec>(&s).unwrap(), d);
        }
    }
}
