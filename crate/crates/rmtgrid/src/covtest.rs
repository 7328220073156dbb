//! Homogeneity test for the covariance matrices of `q` data windows, built on
//! U-statistic estimators of `tr(Σ_s Σ_t)`.

use serde::{Deserialize, Serialize};

use crate::ensembles::{normal, rng_for};
use crate::error::{invalid, Error, Result};
use crate::linalg::DataMatrix;

/// `q` windows of `p` sensors by `n_g` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedStream {
    windows: Vec<DataMatrix>,
    /// `(start, end)` time of each window.
    pub timestamps: Vec<(f64, f64)>,
    pub sampling_hz: f64,
}

impl WindowedStream {
    pub fn new(windows: Vec<DataMatrix>, timestamps: Vec<(f64, f64)>, sampling_hz: f64) -> Result<Self> {
        let first = windows.first().ok_or_else(|| invalid("stream has no windows"))?;
        let shape = first.shape();
        if windows.iter().any(|w| w.shape() != shape) {
            return Err(Error::Shape("all windows must share p and n_g".into()));
        }
        if windows.iter().any(|w| w.real_data().is_none()) {
            return Err(invalid("covariance tests take real-valued windows"));
        }
        if timestamps.len() != windows.len() {
            return Err(invalid("one timestamp pair per window required"));
        }
        if !(sampling_hz > 0.0) {
            return Err(invalid("sampling rate must be positive"));
        }
        Ok(Self { windows, timestamps, sampling_hz })
    }

    /// Splits the first `q·n_g` columns of a `p × total` series into `q`
    /// consecutive windows. Column `k` is taken at time `t0 + k/hz`.
    pub fn from_series(series: &DataMatrix, q: usize, n_g: usize, t0: f64, sampling_hz: f64) -> Result<Self> {
        if q < 1 || n_g < 1 {
            return Err(invalid("q and n_g must be positive"));
        }
        if series.cols() < q * n_g {
            return Err(invalid(format!(
                "series has {} samples but q*n_g = {} are needed",
                series.cols(),
                q * n_g
            )));
        }
        let mut windows = Vec::with_capacity(q);
        let mut ts = Vec::with_capacity(q);
        for g in 0..q {
            windows.push(series.column_range(g * n_g, (g + 1) * n_g)?);
            ts.push((t0 + (g * n_g) as f64 / sampling_hz, t0 + ((g + 1) * n_g - 1) as f64 / sampling_hz));
        }
        Self::new(windows, ts, sampling_hz)
    }

    pub fn windows(&self) -> &[DataMatrix] {
        &self.windows
    }

    pub fn q(&self) -> usize {
        self.windows.len()
    }

    pub fn p(&self) -> usize {
        self.windows[0].rows()
    }

    pub fn n_g(&self) -> usize {
        self.windows[0].cols()
    }

    /// The same stream with sensor row `k` removed from every window.
    pub fn without_sensor(&self, k: usize) -> Result<Self> {
        let windows = self.windows.iter().map(|w| w.without_row(k)).collect::<Result<_>>()?;
        Self::new(windows, self.timestamps.clone(), self.sampling_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    H0,
    H1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub v1: f64,
    pub sigma_v1: f64,
    pub r_statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub decision: Decision,
    /// `V_st` for every ordered pair; `None` on the diagonal and for excluded windows.
    pub v_st: Vec<Vec<Option<f64>>>,
    /// Per-window estimates of `tr Σ²`.
    pub a: Vec<f64>,
    pub excluded_windows: Vec<usize>,
    pub notes: Vec<String>,
}

fn gram(z: &DataMatrix) -> Result<(Vec<f64>, usize)> {
    let (p, n) = z.shape();
    let d = z.real_data_or_err()?;
    let mut g = vec![0.0; n * n];
    for r in 0..p {
        let row = &d[r * n..(r + 1) * n];
        for i in 0..n {
            let x = row[i];
            if x == 0.0 {
                continue;
            }
            for j in i..n {
                g[i * n + j] += x * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[i * n + j] = g[j * n + i];
        }
    }
    Ok((g, n))
}

/// Unbiased U-statistic estimate of `tr(Σ²)` from the `n_g` columns of `z`,
/// computed from the Gram matrix in `O(p·n_g² )`.
pub fn trace_sq_estimator(z: &DataMatrix) -> Result<f64> {
    if z.cols() < 4 {
        return Err(invalid("tr(S^2) estimator needs n_g >= 4"));
    }
    let (g, n) = gram(z)?;
    let nf = n as f64;
    let mut off_sq = 0.0;
    let mut r_sq = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let mut r = 0.0;
        for j in 0..n {
            if i != j {
                let v = g[i * n + j];
                off_sq += v * v;
                r += v;
            }
        }
        r_sq += r * r;
        total += r;
    }
    let t1 = off_sq;
    let t2 = r_sq - off_sq;
    let t4 = total * total - 4.0 * r_sq + 2.0 * off_sq;
    Ok(t1 / (nf * (nf - 1.0)) - 2.0 * t2 / (nf * (nf - 1.0) * (nf - 2.0))
        + t4 / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0)))
}

/// Unbiased U-statistic estimate of `tr(Σ_s Σ_t)` from two independent windows.
pub fn cross_trace_estimator(zs: &DataMatrix, zt: &DataMatrix) -> Result<f64> {
    if zs.rows() != zt.rows() {
        return Err(Error::Shape(format!("windows have {} and {} sensors", zs.rows(), zt.rows())));
    }
    let (ns, nt) = (zs.cols(), zt.cols());
    if ns < 2 || nt < 2 {
        return Err(invalid("tr(S_s S_t) estimator needs n_g >= 2"));
    }
    // M = Zsᵀ Zt
    let m = zs.adjoint().matmul(zt)?;
    let md = m.real_data_or_err()?;
    let mut fro = 0.0;
    let mut rows = vec![0.0; ns];
    let mut cols = vec![0.0; nt];
    for i in 0..ns {
        for j in 0..nt {
            let v = md[i * nt + j];
            fro += v * v;
            rows[i] += v;
            cols[j] += v;
        }
    }
    let total: f64 = rows.iter().sum();
    let rows_sq: f64 = rows.iter().map(|v| v * v).sum();
    let cols_sq: f64 = cols.iter().map(|v| v * v).sum();
    let c2 = cols_sq - fro;
    let c3 = rows_sq - fro;
    let c4 = total * total - rows_sq - c2;
    let (a, b) = (ns as f64, nt as f64);
    Ok(fro / (a * b) - c2 / (a * b * (a - 1.0)) - c3 / (a * b * (b - 1.0)) + c4 / (a * b * (a - 1.0) * (b - 1.0)))
}

/// `V_st = A_s + A_t − 2 C_st`, an unbiased estimate of `tr((Σ_s − Σ_t)²)`.
pub fn pairwise_distance(zs: &DataMatrix, zt: &DataMatrix) -> Result<f64> {
    Ok(trace_sq_estimator(zs)? + trace_sq_estimator(zt)? - 2.0 * cross_trace_estimator(zs, zt)?)
}

/// Null standard deviation of the pooled statistic for `q` windows of `n`
/// samples when `tr Σ² = tau`.
pub fn null_sigma_v1(tau: f64, q: usize, n: usize) -> f64 {
    let (q, n) = (q as f64, n as f64);
    let eg2 = 2.0 * tau * tau;
    (eg2 * (8.0 / (q * n * (n - 1.0)) + 8.0 / (q * (q - 1.0) * n * n))).sqrt()
}

/// Pooled statistic `V₁` (mean of `V_st` over ordered pairs of usable windows),
/// its null scale, and the one-sided level-`alpha` decision on `R = V₁/σ`.
pub fn pooled_statistic(stream: &WindowedStream, alpha: f64) -> Result<TestReport> {
    let q = stream.q();
    if q < 2 {
        return Err(invalid("covariance homogeneity test needs q >= 2 windows"));
    }
    let threshold = fap_threshold(alpha)?;
    let a: Vec<f64> = stream.windows().iter().map(trace_sq_estimator).collect::<Result<_>>()?;
    let mut notes = Vec::new();
    let excluded: Vec<usize> = (0..q).filter(|&l| !(a[l] > 0.0)).collect();
    for &l in &excluded {
        notes.push(format!("window {l} excluded: degenerate tr(S^2) estimate {:e}", a[l]));
    }
    let used: Vec<usize> = (0..q).filter(|l| !excluded.contains(l)).collect();
    if used.len() < 2 {
        return Err(invalid("fewer than two non-degenerate windows remain"));
    }
    let mut v = vec![vec![None; q]; q];
    let mut sum = 0.0;
    for (x, &s) in used.iter().enumerate() {
        for &t in &used[x + 1..] {
            let c = cross_trace_estimator(&stream.windows()[s], &stream.windows()[t])?;
            let vst = a[s] + a[t] - 2.0 * c;
            v[s][t] = Some(vst);
            v[t][s] = Some(vst);
            sum += 2.0 * vst;
        }
    }
    let k = used.len();
    let v1 = sum / (k * (k - 1)) as f64;
    let tau = used.iter().map(|&l| a[l]).sum::<f64>() / k as f64;
    let sigma_v1 = null_sigma_v1(tau, k, stream.n_g());
    let r = v1 / sigma_v1;
    Ok(TestReport {
        v1,
        sigma_v1,
        r_statistic: r,
        threshold,
        alpha,
        decision: if r > threshold { Decision::H1 } else { Decision::H0 },
        v_st: v,
        a,
        excluded_windows: excluded,
        notes,
    })
}

/// Upper tail of the standard normal, `Q(x) = P(N(0,1) > x)`.
pub fn normal_q(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 1.0 - normal_q(-x);
    }
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function for `x ≥ 0`.
fn erfc(x: f64) -> f64 {
    const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
    if x < 2.0 {
        // erf(x) = (2/√π) e^{−x²} Σ 2ⁿ x^{2n+1} / (1·3···(2n+1)), all terms positive
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        while term > 1e-17 * sum {
            k += 1.0;
            term *= 2.0 * x * x / (2.0 * k + 1.0);
            sum += term;
        }
        1.0 - FRAC_2_SQRT_PI * (-x * x).exp() * sum
    } else {
        // continued fraction e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))) by modified Lentz
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..300 {
            let a = k as f64 / 2.0;
            d = x + a * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = x + a / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
    }
}

/// Threshold `Q⁻¹(alpha)` for a one-sided test at false-alarm probability `alpha`.
pub fn fap_threshold(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    // Acklam's rational approximation for the lower quantile at 1 − alpha,
    // polished by Newton steps on Q.
    const A: [f64; 6] = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383577518672690e2, -3.066479806614716e1, 2.506628277459239];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let p = 1.0 - alpha;
    let lower = |p: f64| -> f64 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if alpha > 0.97575 {
        lower(p)
    } else if alpha < 0.02425 {
        -lower(alpha)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..4 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        x += (normal_q(x) - alpha) / pdf;
    }
    Ok(x)
}

/// Test configuration for synthetic power studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub p: usize,
    pub n_g: usize,
    pub q: usize,
    pub alpha: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self { p: 34, n_g: 50, q: 5, alpha: 0.05 }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(invalid("q must be at least 2"));
        }
        if self.n_g < 4 {
            return Err(invalid("n_g must be at least 4"));
        }
        if self.p < 1 {
            return Err(invalid("p must be positive"));
        }
        fap_threshold(self.alpha).map(|_| ())
    }
}

/// Covariance structure of simulated Gaussian windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Alternative {
    /// Every window has `Σ = I`.
    Null,
    /// Window `window` has `Σ = scale·I`; the rest `I`.
    ScaleShift { window: usize, scale: f64 },
    /// Window `window` has variance `scale` on the listed sensors; the rest `I`.
    SensorShift { window: usize, sensors: Vec<usize>, scale: f64 },
}

impl Alternative {
    fn row_scale(&self, g: usize, r: usize) -> f64 {
        match self {
            Self::Null => 1.0,
            Self::ScaleShift { window, scale } => {
                if g == *window {
                    scale.sqrt()
                } else {
                    1.0
                }
            }
            Self::SensorShift { window, sensors, scale } => {
                if g == *window && sensors.contains(&r) {
                    scale.sqrt()
                } else {
                    1.0
                }
            }
        }
    }
}

/// One simulated stream under `alt`.
pub fn simulate_stream(cfg: &TestConfig, alt: &Alternative, seed: u64) -> Result<WindowedStream> {
    cfg.validate()?;
    let mut rng = rng_for(seed, 0x5553);
    let windows = (0..cfg.q)
        .map(|g| DataMatrix::from_fn_real(cfg.p, cfg.n_g, |r, _| alt.row_scale(g, r) * normal(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    let ts = (0..cfg.q).map(|g| ((g * cfg.n_g) as f64, ((g + 1) * cfg.n_g - 1) as f64)).collect();
    WindowedStream::new(windows, ts, 1.0)
}

/// Monte-Carlo rejection rate of the test under `alt` over `trials` streams.
pub fn detection_rate_estimate(cfg: &TestConfig, alt: &Alternative, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let mut hits = 0usize;
    for k in 0..trials {
        let s = simulate_stream(cfg, alt, seed.wrapping_mul(0x9E37_79B9).wrapping_add(k as u64))?;
        if pooled_statistic(&s, cfg.alpha)?.decision == Decision::H1 {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorScore {
    pub sensor: usize,
    /// `R` of the full stream minus `R` with this sensor removed.
    pub drop: f64,
}

/// Sensors ranked by how much the test statistic falls when each is left out.
pub fn localize_sensitive_sensors(stream: &WindowedStream, alpha: f64) -> Result<Vec<SensorScore>> {
    if stream.p() < 2 {
        return Err(invalid("localization needs at least 2 sensors"));
    }
    let full = pooled_statistic(stream, alpha)?.r_statistic;
    let mut out = (0..stream.p())
        .map(|k| {
            let r = pooled_statistic(&stream.without_sensor(k)?, alpha)?.r_statistic;
            Ok(SensorScore { sensor: k, drop: full - r })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.drop.total_cmp(&a.drop).then(a.sensor.cmp(&b.sensor)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(p: usize, n: usize, seed: u64) -> DataMatrix {
        let mut rng = rng_for(seed, 3);
        DataMatrix::from_fn_real(p, n, |_, _| normal(&mut rng)).unwrap()
    }

    #[test]
    fn distance_is_symmetric() {
        let a = window(5, 12, 1);
        let b = window(5, 12, 2);
        let (x, y) = (pairwise_distance(&a, &b).unwrap(), pairwise_distance(&b, &a).unwrap());
        assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
    }

    #[test]
    fn two_window_reduction() {
        let s = WindowedStream::new(vec![window(6, 20, 1), window(6, 20, 2)], vec![(0.0, 1.0); 2], 1.0).unwrap();
        let r = pooled_statistic(&s, 0.05).unwrap();
        let v12 = pairwise_distance(&s.windows()[0], &s.windows()[1]).unwrap();
        assert!((r.v1 - v12).abs() < 1e-10 * v12.abs().max(1.0));
    }

    #[test]
    fn degenerate_window_excluded() {
        let zero = DataMatrix::from_fn_real(4, 10, |_, _| 0.0).unwrap();
        let s = WindowedStream::new(vec![window(4, 10, 1), zero, window(4, 10, 3)], vec![(0.0, 1.0); 3], 1.0).unwrap();
        let r = pooled_statistic(&s, 0.05).unwrap();
        assert_eq!(r.excluded_windows, vec![1]);
        assert!(r.v_st[0][1].is_none() && r.v_st[0][2].is_some());
    }

    #[test]
    fn preconditions() {
        assert!(trace_sq_estimator(&window(3, 3, 1)).is_err());
        assert!(cross_trace_estimator(&window(3, 5, 1), &window(4, 5, 1)).is_err());
        assert!(fap_threshold(0.0).is_err() && fap_threshold(1.0).is_err());
        assert!(detection_rate_estimate(&TestConfig::default(), &Alternative::Null, 0, 1).is_err());
        let one = WindowedStream::new(vec![window(3, 5, 1)], vec![(0.0, 1.0)], 1.0).unwrap();
        assert!(pooled_statistic(&one, 0.05).is_err());
    }

    #[test]
    fn thresholds() {
        assert!(fap_threshold(0.5).unwrap().abs() < 1e-15);
        assert!((fap_threshold(0.05).unwrap() - 1.6448536269514722).abs() < 1e-12);
        for a in [1e-12, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-9] {
            let x = fap_threshold(a).unwrap();
            assert!((normal_q(x) - a).abs() <= 1e-10 * a.max(1e-3), "{a}");
        }
    }

    #[test]
    fn raising_alpha_never_reverts_rejection() {
        let s = simulate_stream(&TestConfig { p: 10, n_g: 20, q: 3, alpha: 0.05 }, &Alternative::Null, 5).unwrap();
        let mut seen_h1 = false;
        for a in [0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9] {
            let d = pooled_statistic(&s, a).unwrap().decision;
            assert!(!(seen_h1 && d == Decision::H0));
            seen_h1 |= d == Decision::H1;
        }
    }
}
