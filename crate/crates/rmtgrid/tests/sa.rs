use rand::Rng;
use rand_distr::StandardNormal;
use rmtgrid::ensembles::rng_for;
use rmtgrid::linalg::DataMatrix;
use rmtgrid::sa::*;

const N: usize = 118;
const T: usize = 240;

fn gaussian(n: usize, t: usize, seed: u64) -> DataMatrix {
    let mut rng = rng_for(seed, 91);
    DataMatrix::from_fn_real(n, t, |_, _| rng.sample::<f64, _>(StandardNormal)).unwrap()
}

fn window(m: DataMatrix) -> AnalysisWindow {
    AnalysisWindow::new(m, 0.0).unwrap()
}

/// Adds `size` to rows `rows` from column `from` on.
fn with_step(m: &DataMatrix, rows: std::ops::Range<usize>, from: usize, size: f64) -> DataMatrix {
    DataMatrix::from_fn_real(m.rows(), m.cols(), |i, k| {
        m.get(i, k).re + if rows.contains(&i) && k >= from { size } else { 0.0 }
    })
    .unwrap()
}

#[test]
fn window_counts() {
    let m = gaussian(2, 2500, 1);
    let times: Vec<f64> = (1..=2500).map(f64::from).collect();
    let w = window_stream(&m, &times, 240, 1).unwrap();
    assert_eq!(w.len(), 2261);
    assert_eq!((w[0].t_end, w[2260].t_end), (240.0, 2500.0));
    assert_eq!(window_stream(&m, &times, 240, 240).unwrap().len(), 2500 / 240);
    assert_eq!(window_stream(&m.column_range(0, 240).unwrap(), &times[..240], 240, 1).unwrap().len(), 1);
}

#[test]
fn ring_law_holds_for_gaussian_windows() {
    let cfg = LawCheckConfig::default();
    for s in 0..10 {
        let r = ring_law_check(&window(gaussian(N, T, s)), &cfg, s).unwrap();
        assert!(r.fraction_inside >= 0.95, "seed {s}: {}", r.fraction_inside);
        assert!(!r.flagged);
    }
}

#[test]
fn step_in_ten_rows_breaks_the_ring() {
    let cfg = LawCheckConfig::default();
    let m = with_step(&gaussian(N, T, 3), 0..10, 120, 5.0);
    let r = ring_law_check(&window(m), &cfg, 3).unwrap();
    assert!(r.fraction_inside < 0.9, "{}", r.fraction_inside);
    assert!(r.flagged);
}

#[test]
fn square_window_gives_a_disk() {
    let r = ring_law_check(&window(gaussian(60, 60, 2)), &LawCheckConfig::default(), 2).unwrap();
    assert_eq!(r.inner_radius, 0.0);
    assert_eq!(r.outer_radius, 1.0);
}

#[test]
fn wide_window_rejected() {
    assert!(ring_law_check(&window(gaussian(30, 20, 2)), &LawCheckConfig::default(), 2).is_err());
}

#[test]
fn msr_matches_theory() {
    let c = N as f64 / T as f64;
    assert!((msr_theoretical(c, 1).unwrap() - 0.8645).abs() < 5e-4);
    assert!((msr_theoretical(1e-6, 1).unwrap() - 1.0).abs() < 1e-6);
    let mean = (0..20).map(|s| msr(&window(gaussian(N, T, 100 + s)), 1, s).unwrap().value).sum::<f64>() / 20.0;
    assert!((mean - 0.8645).abs() < 0.02, "{mean}");
}

#[test]
fn msr_is_mean_modulus() {
    let m = msr(&window(gaussian(N, T, 4)), 1, 4).unwrap();
    let direct = m.spectrum.iter().sum::<f64>() / N as f64;
    assert!((m.value - direct).abs() < 1e-12);
}

#[test]
fn les_trivial_values() {
    let w = window(gaussian(N, T, 5));
    assert_eq!(les(&w, &TestFunction::Count, 5).unwrap().value, N as f64);
    assert!((les(&w, &TestFunction::Moment(1), 5).unwrap().value - N as f64).abs() < 1e-9);
}

#[test]
fn les_recomputable_from_spectrum() {
    let w = window(gaussian(N, T, 6));
    let phis = [
        TestFunction::Count,
        TestFunction::Moment(2),
        TestFunction::Moment(3),
        TestFunction::Moment(4),
        TestFunction::LogDet,
        TestFunction::LikelihoodRatio,
    ];
    for phi in phis {
        let r = les(&w, &phi, 6).unwrap();
        let direct: f64 = r.spectrum.iter().map(|&x| phi.eval(x)).sum();
        assert!((r.value - direct).abs() <= 1e-10 * direct.abs().max(1.0), "{}", phi.name());
        assert_eq!(r.ratio, r.theoretical_mean.map(|m| r.value / m));
    }
}

#[test]
fn moment_two_concentrates() {
    let vals: Vec<f64> =
        (0..30).map(|s| les(&window(gaussian(N, T, 200 + s)), &TestFunction::Moment(2), s).unwrap().value).collect();
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
    assert!(sd / m < 0.05, "{}", sd / m);
    // finite-N mean: E tr S² / N = 1 + c + (1 − 1/N)/T terms, close to the limit 1 + c
    let limit = N as f64 * (1.0 + N as f64 / T as f64);
    assert!((m / limit - 1.0).abs() < 0.02, "{m} {limit}");
}

#[test]
fn log_of_singular_window_is_floored() {
    let g = gaussian(20, 60, 8);
    let dup = DataMatrix::from_fn_real(20, 60, |i, k| g.get(if i == 1 { 0 } else { i }, k).re).unwrap();
    let r = les(&window(dup), &TestFunction::LogDet, 8).unwrap();
    assert!(r.floored);
    assert!(r.value.is_finite());
    assert!(!les(&window(g), &TestFunction::LogDet, 8).unwrap().floored);
}

#[test]
fn mp_check_on_gaussian_spike_and_degenerate_windows() {
    let cfg = LawCheckConfig::default();
    let g = gaussian(N, T, 9);
    let r = mp_bound_check(&window(g.clone()), &cfg, 9).unwrap();
    assert!(r.fraction_inside >= 0.97, "{}", r.fraction_inside);
    assert!(!r.flagged);

    // population covariance I + 10·uuᵀ with u = 1/√N
    let mut rng = rng_for(10, 1);
    let f: Vec<f64> = (0..T).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let amp = (10.0 / N as f64).sqrt();
    let spiked = DataMatrix::from_fn_real(N, T, |i, k| g.get(i, k).re + amp * f[k]).unwrap();
    let r = mp_bound_check(&window(spiked), &cfg, 9).unwrap();
    assert!(r.top_eigenvalue > r.upper);
    assert!(r.flagged);

    let flat = DataMatrix::from_fn_real(N, T, |i, k| if i == 7 { 1.5 } else { g.get(i, k).re }).unwrap();
    let r = mp_bound_check(&window(flat), &cfg, 9).unwrap();
    assert_eq!(r.degenerate_rows, vec![7]);
    assert!(r.flagged);
}

#[test]
fn mp_fraction_invariant_under_row_permutation() {
    let cfg = LawCheckConfig::default();
    let g = with_step(&gaussian(N, T, 12), 0..3, 200, 2.0);
    let perm: Vec<usize> = (0..N).map(|i| (i * 37 + 5) % N).collect();
    let p = DataMatrix::from_fn_real(N, T, |i, k| g.get(perm[i], k).re).unwrap();
    let a = mp_bound_check(&window(g), &cfg, 1).unwrap();
    let b = mp_bound_check(&window(p), &cfg, 1).unwrap();
    assert_eq!(a.fraction_inside, b.fraction_inside);
    assert!((a.top_eigenvalue - b.top_eigenvalue).abs() < 1e-9);
}

fn msr_series(m: &DataMatrix, t: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let times: Vec<f64> = (1..=m.cols()).map(|k| k as f64).collect();
    let ws = window_stream(m, &times, t, 1).unwrap();
    ws.iter().map(|w| (w.t_end, msr(w, 1, seed).unwrap().value)).unzip()
}

#[test]
fn segmentation_of_step_streams() {
    let (n, t) = (30, 60);
    let band = calibrate_msr_band(n, t, 1, 200, 77).unwrap();

    let (te, v) = msr_series(&gaussian(n, 400, 13), t, 77);
    let stages = segment_indicator(&te, &v, &band, t).unwrap();
    assert_eq!(stages.len(), 1);
    assert_eq!(stages[0].kind, StageKind::Steady);

    // step at t0 = 201 (column 200)
    let one = with_step(&gaussian(n, 400, 14), 0..n, 200, 6.0);
    let (te, v) = msr_series(&one, t, 77);
    let stages = segment_indicator(&te, &v, &band, t).unwrap();
    let kinds: Vec<StageKind> = stages.iter().map(|s| s.kind).collect();
    assert_eq!(kinds, [StageKind::Steady, StageKind::Transition, StageKind::Steady]);
    assert_eq!((stages[1].t_start, stages[1].t_end, stages[1].windows), (201.0, 201.0 + t as f64 - 2.0, t - 1));

    let two = with_step(&with_step(&gaussian(n, 500, 15), 0..n, 150, 6.0), 0..n, 350, 6.0);
    let (te, v) = msr_series(&two, t, 77);
    let stages = segment_indicator(&te, &v, &band, t).unwrap();
    let transitions: Vec<&Stage> = stages.iter().filter(|s| s.kind == StageKind::Transition).collect();
    assert_eq!(stages.len(), 5);
    assert_eq!(transitions.len(), 2);
    assert_eq!((transitions[0].t_start, transitions[1].t_start), (151.0, 351.0));
}

#[test]
fn segmentation_rejects_short_series() {
    assert!(stage_segmentation(&[1.0, 2.0], &[false, false], 10).is_err());
}

#[test]
fn concat_null_factor_matches_random_baseline() {
    let phi = TestFunction::Moment(2);
    let b = gaussian(40, 120, 20);
    // spread of the baseline over independent random factors
    let vals: Vec<f64> = (0..20)
        .map(|s| les(&window(b.vstack(&gaussian(10, 120, 500 + s)).unwrap()), &phi, 1).unwrap().value)
        .collect();
    let m = vals.iter().sum::<f64>() / 20.0;
    let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 19.0).sqrt();
    let r = concat_sensitivity(&b, &[gaussian(10, 120, 21)], &phi, 1).unwrap();
    assert!(r[0].score < 3.0 * sd, "{} vs sd {sd}", r[0].score);
}

#[test]
fn concat_ranks_the_anomalous_block_first() {
    let phi = TestFunction::Moment(2);
    let seeds = 20;
    let mut hits = 0;
    for s in 0..seeds {
        let b = with_step(&gaussian(40, 120, 300 + s), 0..5, 60, 1.5);
        let block = DataMatrix::from_fn_real(5, 120, |i, k| b.get(i, k).re).unwrap();
        let factors = [gaussian(5, 120, 600 + s), block, gaussian(5, 120, 700 + s)];
        let r = concat_sensitivity(&b, &factors, &phi, s).unwrap();
        hits += (r[0].factor == 1) as usize;
    }
    assert!(hits * 100 >= 95 * seeds as usize, "{hits}/{seeds}");
}

#[test]
fn concat_is_deterministic_and_checks_shapes() {
    let phi = TestFunction::Moment(2);
    let b = gaussian(20, 80, 30);
    let f = gaussian(4, 80, 31);
    let r = concat_sensitivity(&b, &[f.clone(), f], &phi, 2).unwrap();
    assert_eq!(r[0].score, r[1].score);
    assert_eq!(r[0].value, r[1].value);
    assert!(concat_sensitivity(&b, &[gaussian(4, 79, 1)], &phi, 2).is_err());
}
