//! Situation awareness on moving windows of multichannel data: ring-law and
//! Marchenko-Pastur checks, linear eigenvalue statistics, and stage segmentation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ensembles::{normal, ring_product_from_eigen, rng_for, standardize};
use crate::error::{invalid, Error, Result};
use crate::laws::{mp_edges, mp_density, ring_mean_modulus, LawSpec};
use crate::linalg::{eig_general, eig_hermitian_vectors, quad_integrate, DataMatrix, SpectrumSample};

/// One `N×T` slice of a stream, labeled by the time of its last column.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisWindow {
    pub matrix: DataMatrix,
    pub t_end: f64,
    /// `N/T`.
    pub c: f64,
    pub standardized: bool,
}

impl AnalysisWindow {
    pub fn new(matrix: DataMatrix, t_end: f64) -> Result<Self> {
        let (n, t) = matrix.shape();
        if n == 0 || t == 0 {
            return Err(invalid("empty analysis window"));
        }
        let standardized = matrix.role() == crate::linalg::Role::Standardized;
        Ok(Self { c: n as f64 / t as f64, matrix, t_end, standardized })
    }
}

/// Windows of `t` consecutive columns every `stride` columns. `times[k]` labels column `k`.
pub fn window_stream(series: &DataMatrix, times: &[f64], t: usize, stride: usize) -> Result<Vec<AnalysisWindow>> {
    let total = series.cols();
    if times.len() != total {
        return Err(invalid(format!("{} time labels for {total} columns", times.len())));
    }
    if t == 0 || stride == 0 {
        return Err(invalid("window length and stride must be positive"));
    }
    if t > total {
        return Err(invalid(format!("window length {t} exceeds the {total} available samples")));
    }
    let mut out = Vec::with_capacity((total - t) / stride + 1);
    let mut start = 0;
    while start + t <= total {
        out.push(AnalysisWindow::new(series.column_range(start, start + t)?, times[start + t - 1])?);
        start += stride;
    }
    Ok(out)
}

/// Tolerances shared by the ring-law and M-P checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawCheckConfig {
    /// Slack on the annulus radii.
    pub delta: f64,
    /// Minimum fraction of eigenvalues inside the reference support.
    pub min_fraction: f64,
    /// Largest covariance eigenvalue allowed, as a multiple of the M-P upper edge.
    pub edge_factor: f64,
    /// Number of singular-value equivalents multiplied for the ring law.
    pub l: usize,
}

impl Default for LawCheckConfig {
    fn default() -> Self {
        Self { delta: 0.04, min_fraction: 0.95, edge_factor: 2.0, l: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingLawReport {
    pub eigenvalues: Vec<(f64, f64)>,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub fraction_inside: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpBoundReport {
    pub lower: f64,
    pub upper: f64,
    pub fraction_inside: f64,
    pub top_eigenvalue: f64,
    /// Rows replaced by noise because they were constant.
    pub degenerate_rows: Vec<usize>,
    pub flagged: bool,
}

/// Standardized window with the eigendecomposition of its sample covariance.
#[derive(Debug, Clone)]
pub struct PreparedWindow {
    pub t_end: f64,
    pub c: f64,
    pub standardized: DataMatrix,
    pub replaced_rows: Vec<usize>,
    pub covariance_spectrum: SpectrumSample,
    eigvecs: DataMatrix,
}

impl PreparedWindow {
    pub fn new(w: &AnalysisWindow, seed: u64) -> Result<Self> {
        let (n, t) = w.matrix.shape();
        if n > t {
            return Err(invalid(format!("window has N={n} > T={t}")));
        }
        let st = standardize(&w.matrix, seed)?;
        let (spec, q) = eig_hermitian_vectors(&st.matrix.gram_rows())?;
        Ok(Self {
            t_end: w.t_end,
            c: w.c,
            standardized: st.matrix,
            replaced_rows: st.replaced_rows,
            covariance_spectrum: spec,
            eigvecs: q,
        })
    }

    /// Eigenvalues of the product of `l` singular-value equivalents.
    pub fn ring_spectrum(&self, l: usize, seed: u64) -> Result<SpectrumSample> {
        eig_general(&ring_product_from_eigen(&self.covariance_spectrum, &self.eigvecs, l, seed)?)
    }
}

fn ring_report(eigs: &SpectrumSample, c: f64, cfg: &LawCheckConfig) -> Result<RingLawReport> {
    let law = LawSpec::ring_for_ratio(c.min(1.0), cfg.l)?;
    let (a, b) = (law.ring_a, law.ring_b);
    let vals = eigs.complex();
    let inside = vals.iter().filter(|z| z.norm() >= a - cfg.delta && z.norm() <= b + cfg.delta).count();
    let fraction = inside as f64 / vals.len() as f64;
    Ok(RingLawReport {
        eigenvalues: vals.iter().map(|z| (z.re, z.im)).collect(),
        inner_radius: a,
        outer_radius: b,
        fraction_inside: fraction,
        flagged: fraction < cfg.min_fraction,
    })
}

/// Standardizes `w`, forms the product of `cfg.l` singular-value equivalents and
/// counts eigenvalues inside the annulus `[(1−c)^{L/2} − δ, 1 + δ]`.
pub fn ring_law_check(w: &AnalysisWindow, cfg: &LawCheckConfig, seed: u64) -> Result<RingLawReport> {
    let p = PreparedWindow::new(w, seed)?;
    ring_report(&p.ring_spectrum(cfg.l, seed)?, w.c, cfg)
}

fn mp_report(p: &PreparedWindow, cfg: &LawCheckConfig) -> Result<MpBoundReport> {
    let (a, b) = mp_edges(p.c);
    let vals = p.covariance_spectrum.real()?;
    let tol = 1e-9;
    let inside = vals.iter().filter(|&&x| x >= a - tol && x <= b + tol).count();
    let fraction = inside as f64 / vals.len() as f64;
    let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MpBoundReport {
        lower: a,
        upper: b,
        fraction_inside: fraction,
        top_eigenvalue: top,
        degenerate_rows: p.replaced_rows.clone(),
        flagged: fraction < cfg.min_fraction || top > cfg.edge_factor * b || !p.replaced_rows.is_empty(),
    })
}

/// Fraction of sample-covariance eigenvalues of the standardized window inside
/// the M-P support, and whether the largest one escapes it.
pub fn mp_bound_check(w: &AnalysisWindow, cfg: &LawCheckConfig, seed: u64) -> Result<MpBoundReport> {
    mp_report(&PreparedWindow::new(w, seed)?, cfg)
}

/// A test function `φ` for linear eigenvalue statistics `Σ φ(λᵢ)`.
#[derive(Clone)]
pub enum TestFunction {
    /// `φ = 1`.
    Count,
    /// `φ(x) = x^k`.
    Moment(u32),
    /// `φ(x) = ln max(x, 1e-12)`.
    LogDet,
    /// `φ(x) = x − ln x − 1`, with the same floor.
    LikelihoodRatio,
    Custom { name: String, phi: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

pub const LOG_FLOOR: f64 = 1e-12;

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            Self::Count => "count".into(),
            Self::Moment(k) => format!("moment-{k}"),
            Self::LogDet => "log-det".into(),
            Self::LikelihoodRatio => "likelihood-ratio".into(),
            Self::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Count => 1.0,
            Self::Moment(k) => x.powi(*k as i32),
            Self::LogDet => x.max(LOG_FLOOR).ln(),
            Self::LikelihoodRatio => {
                let y = x.max(LOG_FLOOR);
                y - y.ln() - 1.0
            }
            Self::Custom { phi, .. } => phi(x),
        }
    }

    fn uses_log(&self) -> bool {
        matches!(self, Self::LogDet | Self::LikelihoodRatio)
    }

    /// Large-`N` value of `Σ φ(λᵢ)` for `N` eigenvalues following M-P(`c`), when known.
    pub fn mp_limit(&self, n: usize, c: f64) -> Option<f64> {
        let nf = n as f64;
        let per = match self {
            Self::Count => 1.0,
            Self::Moment(k) => {
                // Narayana polynomial: Σ_{j<k} N(k, j+1) c^j
                let k = *k as usize;
                if k == 0 {
                    1.0
                } else {
                    (0..k).map(|j| narayana(k, j + 1) * c.powi(j as i32)).sum()
                }
            }
            Self::LogDet | Self::LikelihoodRatio => {
                if !(c < 1.0) {
                    return None;
                }
                let (a, b) = mp_edges(c);
                let el = quad_integrate(|x| x.ln() * mp_density(x, c), a, b, 1e-12).ok()?;
                if matches!(self, Self::LogDet) {
                    el
                } else {
                    -el
                }
            }
            Self::Custom { .. } => return None,
        };
        Some(nf * per)
    }
}

fn narayana(k: usize, j: usize) -> f64 {
    binom(k, j) * binom(k, j - 1) / k as f64
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl std::str::FromStr for TestFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(Self::Count),
            "log-det" => Ok(Self::LogDet),
            "likelihood-ratio" => Ok(Self::LikelihoodRatio),
            _ => match s.strip_prefix("moment-").and_then(|k| k.parse::<u32>().ok()) {
                Some(k) => Ok(Self::Moment(k)),
                None => Err(invalid(format!(
                    "unknown indicator '{s}' (expected msr, count, moment-k, log-det or likelihood-ratio)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesIndicator {
    pub name: String,
    pub t_end: f64,
    pub value: f64,
    pub theoretical_mean: Option<f64>,
    /// `value / theoretical_mean`.
    pub ratio: Option<f64>,
    /// The points `φ` was summed over.
    pub spectrum: Vec<f64>,
    /// Set when a log-type `φ` met a nonpositive eigenvalue and floored it.
    pub floored: bool,
}

impl LesIndicator {
    fn new(name: String, t_end: f64, value: f64, theoretical_mean: Option<f64>, spectrum: Vec<f64>, floored: bool) -> Self {
        let ratio = theoretical_mean.filter(|m| *m != 0.0).map(|m| value / m);
        Self { name, t_end, value, theoretical_mean, ratio, spectrum, floored }
    }
}

/// `E|λ|` for the product of `l` singular-value equivalents of standardized `N×T` data.
pub fn msr_theoretical(c: f64, l: usize) -> Result<f64> {
    let law = LawSpec::ring_for_ratio(c, l)?;
    Ok(ring_mean_modulus(law.ring_a, law.ring_b))
}

fn msr_from_ring(eigs: &SpectrumSample, c: f64, l: usize, t_end: f64) -> Result<LesIndicator> {
    let moduli: Vec<f64> = eigs.complex().iter().map(|z| z.norm()).collect();
    let value = moduli.iter().sum::<f64>() / moduli.len() as f64;
    Ok(LesIndicator::new("msr".into(), t_end, value, Some(msr_theoretical(c.min(1.0), l)?), moduli, false))
}

/// Mean spectral radius `(1/N) Σ |λᵢ|` of the ring-law matrix of `w`.
pub fn msr(w: &AnalysisWindow, l: usize, seed: u64) -> Result<LesIndicator> {
    let p = PreparedWindow::new(w, seed)?;
    msr_from_ring(&p.ring_spectrum(l, seed)?, w.c, l, w.t_end)
}

fn les_from_spectrum(spec: &[f64], phi: &TestFunction, c: f64, t_end: f64) -> LesIndicator {
    let floored = phi.uses_log() && spec.iter().any(|&x| x <= LOG_FLOOR);
    let value = spec.iter().map(|&x| phi.eval(x)).sum();
    LesIndicator::new(phi.name(), t_end, value, phi.mp_limit(spec.len(), c), spec.to_vec(), floored)
}

/// `Σ φ(λᵢ)` over the sample-covariance eigenvalues of the standardized window.
pub fn les(w: &AnalysisWindow, phi: &TestFunction, seed: u64) -> Result<LesIndicator> {
    let p = PreparedWindow::new(w, seed)?;
    Ok(les_from_spectrum(p.covariance_spectrum.real()?, phi, w.c, w.t_end))
}

/// Mean and standard deviation of an LES over `reps` Gaussian `n×t` windows.
pub fn calibrate_les(n: usize, t: usize, phi: &TestFunction, reps: usize, seed: u64) -> Result<(f64, f64)> {
    if reps < 2 {
        return Err(invalid("calibration needs at least two repetitions"));
    }
    let mut vals = Vec::with_capacity(reps);
    for r in 0..reps {
        let w = AnalysisWindow::new(gaussian_window(n, t, seed.wrapping_add(r as u64))?, 0.0)?;
        vals.push(les(&w, phi, seed)?.value);
    }
    Ok(mean_sd(&vals))
}

pub(crate) fn gaussian_window(n: usize, t: usize, seed: u64) -> Result<DataMatrix> {
    let mut rng = rng_for(seed, 0x4741);
    DataMatrix::from_fn_real(n, t, |_, _| normal(&mut rng))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

/// Everything the stream monitor computes for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAnalysis {
    pub t_end: f64,
    pub ring: RingLawReport,
    pub mp: MpBoundReport,
    pub msr: LesIndicator,
    pub indicators: Vec<LesIndicator>,
    pub anomaly: bool,
}

/// Ring-law, M-P and LES analysis of one window. The Haar factor is seeded by
/// `seed` alone so every window of a stream shares it.
pub fn analyze_window(
    w: &AnalysisWindow,
    cfg: &LawCheckConfig,
    indicators: &[TestFunction],
    seed: u64,
) -> Result<WindowAnalysis> {
    let p = PreparedWindow::new(w, seed)?;
    let ring_eigs = p.ring_spectrum(cfg.l, seed)?;
    let ring = ring_report(&ring_eigs, w.c, cfg)?;
    let mp = mp_report(&p, cfg)?;
    let msr = msr_from_ring(&ring_eigs, w.c, cfg.l, w.t_end)?;
    let spec = p.covariance_spectrum.real()?;
    let indicators = indicators.iter().map(|phi| les_from_spectrum(spec, phi, w.c, w.t_end)).collect();
    let anomaly = ring.flagged || mp.flagged;
    Ok(WindowAnalysis { t_end: w.t_end, ring, mp, msr, indicators, anomaly })
}

/// Acceptance band for an indicator under normal operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    /// `mean ± k·SD` of calibration values.
    pub fn from_samples(values: &[f64], k: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid("band calibration needs at least two values"));
        }
        let (m, sd) = mean_sd(values);
        Ok(Self { lo: m - k * sd, hi: m + k * sd })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Band for the MSR of Gaussian `n×t` windows: mean ± 3 SD over `reps` seeds.
pub fn calibrate_msr_band(n: usize, t: usize, l: usize, reps: usize, seed: u64) -> Result<Band> {
    let mut vals = Vec::with_capacity(reps);
    for r in 0..reps {
        let w = AnalysisWindow::new(gaussian_window(n, t, seed.wrapping_add(r as u64))?, 0.0)?;
        vals.push(msr(&w, l, seed.wrapping_add(r as u64))?.value);
    }
    Band::from_samples(&vals, 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    /// Indicator inside the normal band.
    Steady,
    /// Out-of-band run of exactly `T − 1` windows: the window straddles one change.
    Transition,
    /// Any other out-of-band run.
    Anomalous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub kind: StageKind,
    pub t_start: f64,
    pub t_end: f64,
    /// Number of windows in the stage.
    pub windows: usize,
}

/// Splits a stride-1 indicator series into runs inside and outside its normal band.
pub fn stage_segmentation(t_end: &[f64], out_of_band: &[bool], window_t: usize) -> Result<Vec<Stage>> {
    if t_end.len() != out_of_band.len() {
        return Err(invalid("one flag per window label required"));
    }
    if window_t < 2 || t_end.len() < window_t {
        return Err(invalid(format!("series of {} windows is shorter than T = {window_t}", t_end.len())));
    }
    let mut stages = Vec::new();
    let mut start = 0;
    for k in 1..=t_end.len() {
        if k == t_end.len() || out_of_band[k] != out_of_band[start] {
            let len = k - start;
            let kind = if !out_of_band[start] {
                StageKind::Steady
            } else if len == window_t - 1 {
                StageKind::Transition
            } else {
                StageKind::Anomalous
            };
            stages.push(Stage { kind, t_start: t_end[start], t_end: t_end[k - 1], windows: len });
            start = k;
        }
    }
    Ok(stages)
}

/// Stage segmentation of an indicator series against a band.
pub fn segment_indicator(t_end: &[f64], values: &[f64], band: &Band, window_t: usize) -> Result<Vec<Stage>> {
    let flags: Vec<bool> = values.iter().map(|&v| !band.contains(v)).collect();
    stage_segmentation(t_end, &flags, window_t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorScore {
    pub factor: usize,
    /// LES of `[B; Cᵢ]`.
    pub value: f64,
    /// LES of `[B; R]` for a Gaussian `R` shaped like `Cᵢ`.
    pub baseline: f64,
    pub score: f64,
}

/// Ranks factors `Cᵢ` by `|LES([B; Cᵢ]) − LES([B; R])|`, most influential first.
pub fn concat_sensitivity(b: &DataMatrix, factors: &[DataMatrix], phi: &TestFunction, seed: u64) -> Result<Vec<FactorScore>> {
    let les_of = |m: &DataMatrix| -> Result<f64> {
        let w = AnalysisWindow::new(m.clone(), 0.0)?;
        Ok(les(&w, phi, seed)?.value)
    };
    let mut out = Vec::with_capacity(factors.len());
    for (i, f) in factors.iter().enumerate() {
        if f.cols() != b.cols() {
            return Err(Error::Shape(format!("factor {i} has {} columns, B has {}", f.cols(), b.cols())));
        }
        let r = gaussian_window(f.rows(), f.cols(), seed ^ (f.rows() as u64).wrapping_mul(0x51_7CC1))?;
        let value = les_of(&b.vstack(f)?)?;
        let baseline = les_of(&b.vstack(&r)?)?;
        out.push(FactorScore { factor: i, value, baseline, score: (value - baseline).abs() });
    }
    out.sort_by(|x, y| y.score.total_cmp(&x.score).then(x.factor.cmp(&y.factor)));
    Ok(out)
}
