mod common;

use common::{brute_cross_trace, brute_trace_sq, normal_tail_quadrature, rel_err};
use proptest::prelude::*;
use rmtgrid::covtest::*;
use rmtgrid::ensembles::{haar_unitary, rng_for};
use rmtgrid::linalg::DataMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(p: usize, n: usize, scale: f64, seed: u64) -> DataMatrix {
    let mut rng = rng_for(seed, 77);
    DataMatrix::from_fn_real(p, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal)).unwrap()
}

#[test]
fn small_integer_matrix_matches_enumeration() {
    let z = DataMatrix::from_rows(&[vec![1.0, -2.0, 0.0, 3.0], vec![2.0, 1.0, -1.0, 1.0]]).unwrap();
    let w = DataMatrix::from_rows(&[vec![0.0, 1.0, 1.0, -1.0], vec![-3.0, 2.0, 0.0, 1.0]]).unwrap();
    assert!(rel_err(trace_sq_estimator(&z).unwrap(), brute_trace_sq(&z)) < 1e-12);
    assert!(rel_err(cross_trace_estimator(&z, &w).unwrap(), brute_cross_trace(&z, &w)) < 1e-12);
}

#[test]
fn fast_forms_match_enumeration_with_unequal_sizes() {
    for seed in 0..20 {
        let zs = gaussian(3, 5, 1.0, seed);
        let zt = gaussian(3, 7, 1.5, seed + 100);
        assert!(rel_err(cross_trace_estimator(&zs, &zt).unwrap(), brute_cross_trace(&zs, &zt)) < 1e-9);
    }
}

#[test]
fn rotation_invariance() {
    let z = gaussian(6, 15, 1.0, 4);
    let u = haar_unitary(6, 9).unwrap();
    // real orthogonal Q from the QR of a real Gaussian, via Gram-Schmidt
    let g = gaussian(6, 6, 1.0, 11);
    let mut q: Vec<Vec<f64>> = Vec::new();
    for j in 0..6 {
        let mut v: Vec<f64> = (0..6).map(|i| g.get(i, j).re).collect();
        for e in &q {
            let d: f64 = e.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(e).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|x| x / n).collect());
    }
    let qm = DataMatrix::from_fn_real(6, 6, |i, j| q[i][j]).unwrap();
    let a0 = trace_sq_estimator(&z).unwrap();
    assert!(rel_err(trace_sq_estimator(&qm.matmul(&z).unwrap()).unwrap(), a0) < 1e-9);
    // complex unitary rotations are rejected rather than silently mishandled
    assert!(trace_sq_estimator(&u.matmul(&z).unwrap()).is_err());
}

#[test]
fn unbiasedness_under_identity() {
    let (mut sa, mut sa2, mut sc, mut sc2) = (0.0, 0.0, 0.0, 0.0);
    let reps = 500;
    for s in 0..reps {
        let a = trace_sq_estimator(&gaussian(20, 25, 1.0, 2 * s)).unwrap();
        let c = cross_trace_estimator(&gaussian(20, 25, 1.0, 2 * s), &gaussian(20, 25, 1.0, 2 * s + 1)).unwrap();
        sa += a;
        sa2 += a * a;
        sc += c;
        sc2 += c * c;
    }
    let n = reps as f64;
    for (s, s2) in [(sa, sa2), (sc, sc2)] {
        let mean = s / n;
        let se = ((s2 / n - mean * mean) / n).sqrt();
        assert!((mean - 20.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }
}

#[test]
fn distance_oracles() {
    let reps = 500;
    let (mut h0, mut h0sq, mut h1) = (0.0, 0.0, 0.0);
    for s in 0..reps {
        let v = pairwise_distance(&gaussian(10, 30, 1.0, 3 * s), &gaussian(10, 30, 1.0, 3 * s + 1)).unwrap();
        h0 += v;
        h0sq += v * v;
        h1 += pairwise_distance(&gaussian(10, 30, 1.0, 3 * s), &gaussian(10, 30, 2.0, 3 * s + 2)).unwrap();
    }
    let n = reps as f64;
    let mean0 = h0 / n;
    let se0 = ((h0sq / n - mean0 * mean0) / n).sqrt();
    assert!(mean0.abs() < 3.0 * se0, "null mean {mean0} se {se0}");
    // tr((I − 4I)²) = 9p
    assert!((h1 / n - 90.0).abs() < 9.0, "{}", h1 / n);
}

#[test]
fn same_window_cross_estimate_tracks_trace_sq() {
    let z = gaussian(10, 30, 1.0, 8);
    let (a, c) = (trace_sq_estimator(&z).unwrap(), cross_trace_estimator(&z, &z).unwrap());
    assert!((a - c).abs() < 0.5 * a, "{a} {c}");
}

#[test]
fn threshold_against_quadrature() {
    assert!((fap_threshold(0.05).unwrap() - 1.6449).abs() < 1e-4);
    for a in [0.001, 0.01, 0.05, 0.3, 0.5, 0.7, 0.95] {
        let x = fap_threshold(a).unwrap();
        assert!((normal_tail_quadrature(x) - a).abs() < 1e-10, "{a}");
    }
}

#[test]
fn null_rate_near_alpha_at_small_scale() {
    let cfg = TestConfig { p: 20, n_g: 30, q: 4, alpha: 0.1 };
    let r = detection_rate_estimate(&cfg, &Alternative::Null, 300, 21).unwrap();
    // binomial 99.9% band around 0.1 at 300 trials, widened for the asymptotic approximation
    assert!((0.04..=0.17).contains(&r), "{r}");
}

#[test]
fn localization_finds_injected_rows() {
    let cfg = TestConfig { p: 12, n_g: 40, q: 4, alpha: 0.05 };
    let (mut single, mut pair) = (0, 0);
    let seeds = 100;
    for s in 0..seeds {
        let alt = Alternative::SensorShift { window: 2, sensors: vec![5], scale: 9.0 };
        let top = localize_sensitive_sensors(&simulate_stream(&cfg, &alt, s).unwrap(), 0.05).unwrap();
        single += (top[0].sensor == 5) as usize;
        let alt = Alternative::SensorShift { window: 1, sensors: vec![2, 9], scale: 9.0 };
        let top = localize_sensitive_sensors(&simulate_stream(&cfg, &alt, 1000 + s).unwrap(), 0.05).unwrap();
        let t2: Vec<usize> = top[..2].iter().map(|x| x.sensor).collect();
        pair += (t2.contains(&2) && t2.contains(&9)) as usize;
    }
    assert!(single >= 95, "{single}");
    assert!(pair >= 90, "{pair}");
}

#[test]
fn localization_is_uniform_under_null() {
    let cfg = TestConfig { p: 8, n_g: 30, q: 3, alpha: 0.05 };
    let mut counts = [0usize; 8];
    let seeds = 400;
    for s in 0..seeds {
        let top = localize_sensitive_sensors(&simulate_stream(&cfg, &Alternative::Null, s).unwrap(), 0.05).unwrap();
        counts[top[0].sensor] += 1;
    }
    let e = seeds as f64 / 8.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // chi-square with 7 dof: P(X > 18.48) = 0.01
    assert!(chi2 < 18.48, "{counts:?} chi2 {chi2}");
}

#[test]
fn single_window_sensor_rejected() {
    let s = WindowedStream::new(vec![gaussian(1, 10, 1.0, 1), gaussian(1, 10, 1.0, 2)], vec![(0.0, 1.0); 2], 1.0).unwrap();
    assert!(localize_sensitive_sensors(&s, 0.05).is_err());
}

#[test]
fn report_serializes_with_all_fields() {
    let s = simulate_stream(&TestConfig { p: 5, n_g: 10, q: 3, alpha: 0.05 }, &Alternative::Null, 2).unwrap();
    let v = serde_json::to_value(pooled_statistic(&s, 0.05).unwrap()).unwrap();
    for k in ["v1", "sigma_v1", "r_statistic", "threshold", "alpha", "decision", "v_st"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_forms_equal_enumeration(p in 1usize..=4, n in 4usize..=8, seed in any::<u64>()) {
        let zs = gaussian(p, n, 1.0, seed);
        let zt = gaussian(p, n, 1.0, seed ^ 0xABCD);
        prop_assert!(rel_err(trace_sq_estimator(&zs).unwrap(), brute_trace_sq(&zs)) < 1e-9);
        prop_assert!(rel_err(cross_trace_estimator(&zs, &zt).unwrap(), brute_cross_trace(&zs, &zt)) < 1e-9);
    }

    #[test]
    fn distance_is_symmetric(p in 1usize..=6, n in 4usize..=12, seed in any::<u64>()) {
        let zs = gaussian(p, n, 1.0, seed);
        let zt = gaussian(p, n, 2.0, seed.wrapping_add(1));
        let (a, b) = (pairwise_distance(&zs, &zt).unwrap(), pairwise_distance(&zt, &zs).unwrap());
        prop_assert!(rel_err(a, b) < 1e-10);
    }

    #[test]
    fn decision_matches_statistic(seed in any::<u64>(), alpha in 0.001f64..0.5) {
        let s = simulate_stream(&TestConfig { p: 6, n_g: 12, q: 3, alpha }, &Alternative::Null, seed).unwrap();
        let r = pooled_statistic(&s, alpha).unwrap();
        prop_assert_eq!(r.decision == Decision::H1, r.r_statistic > r.threshold);
    }
}
