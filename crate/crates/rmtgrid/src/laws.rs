//! Limit laws (semicircle, Marchenko-Pastur, circular, single ring), empirical
//! spectral distributions and convergence diagnostics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{quad_integrate, SpectrumSample};

const CDF_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    Semicircle,
    MarchenkoPastur,
    Circular,
    SingleRing,
}

/// A parametric limit law.
///
/// For `circular` and `single-ring` the density and CDF describe the eigenvalue
/// modulus `r = |λ|`, with `r²` uniform on `[a², b²]`. That profile is exact
/// for the Haar-rotated square root of a Marchenko-Pastur matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawSpec {
    pub kind: LawKind,
    /// Aspect ratio (Marchenko-Pastur only).
    pub c: f64,
    /// Scale: semicircle radius is `2σ`, M-P is scaled by `σ²`, circular radius is `σ`.
    pub sigma: f64,
    pub ring_a: f64,
    pub ring_b: f64,
}

impl LawSpec {
    pub fn semicircle(sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        Ok(Self { kind: LawKind::Semicircle, c: 0.0, sigma, ring_a: 0.0, ring_b: 0.0 })
    }

    pub fn marchenko_pastur(c: f64) -> Result<Self> {
        check_positive("c", c)?;
        Ok(Self { kind: LawKind::MarchenkoPastur, c, sigma: 1.0, ring_a: 0.0, ring_b: 0.0 })
    }

    pub fn circular(radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        Ok(Self { kind: LawKind::Circular, c: 0.0, sigma: radius, ring_a: 0.0, ring_b: radius })
    }

    pub fn single_ring(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && a <= b && b.is_finite() && b > 0.0) {
            return Err(invalid(format!("ring radii need 0 <= a <= b, b > 0; got a={a}, b={b}")));
        }
        Ok(Self { kind: LawKind::SingleRing, c: 0.0, sigma: 1.0, ring_a: a, ring_b: b })
    }

    /// Ring for the L-fold product of singular-value equivalents of standardized `N×T` data.
    pub fn ring_for_ratio(c: f64, l: usize) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(invalid(format!("ring ratio must lie in (0, 1], got {c}")));
        }
        Self::single_ring((1.0 - c).powf(l as f64 / 2.0), 1.0)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        if matches!(self.kind, LawKind::Circular) {
            self.ring_b = sigma;
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Closed support interval of the continuous part.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            LawKind::Semicircle => (-2.0 * self.sigma, 2.0 * self.sigma),
            LawKind::MarchenkoPastur => {
                let (a, b) = mp_edges(self.c);
                let s2 = self.sigma * self.sigma;
                (a * s2, b * s2)
            }
            LawKind::Circular | LawKind::SingleRing => (self.ring_a, self.ring_b),
        }
    }

    /// Point mass `(location, weight)`, present only for M-P with `c > 1`.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match self.kind {
            LawKind::MarchenkoPastur if self.c > 1.0 => Some((0.0, 1.0 - 1.0 / self.c)),
            _ => None,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            LawKind::Semicircle => semicircle_density(x, self.sigma),
            LawKind::MarchenkoPastur => {
                let s2 = self.sigma * self.sigma;
                mp_density(x / s2, self.c) / s2
            }
            LawKind::Circular | LawKind::SingleRing => {
                let (a, b) = (self.ring_a, self.ring_b);
                if x < a || x > b || a == b {
                    0.0
                } else {
                    2.0 * x / (b * b - a * a)
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            LawKind::Semicircle => semicircle_cdf(x, self.sigma),
            LawKind::MarchenkoPastur => mp_cdf(x / (self.sigma * self.sigma), self.c),
            LawKind::Circular | LawKind::SingleRing => {
                let (a, b) = (self.ring_a, self.ring_b);
                if x < a {
                    0.0
                } else if x >= b {
                    1.0
                } else {
                    (x * x - a * a) / (b * b - a * a)
                }
            }
        }
    }

    /// CDF at ascending points. Cheaper than repeated [`LawSpec::cdf`] for M-P,
    /// where consecutive increments are integrated piecewise.
    pub fn cdf_many(&self, xs: &[f64]) -> Vec<f64> {
        if self.kind != LawKind::MarchenkoPastur || xs.windows(2).any(|w| w[1] < w[0]) {
            return xs.iter().map(|&x| self.cdf(x)).collect();
        }
        let (a, b) = self.support();
        let base = self.atom().map_or(0.0, |(_, w)| w);
        let mut out = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        let mut prev = a;
        for &x in xs {
            if x < 0.0 || (x < a && base == 0.0) {
                out.push(0.0);
                continue;
            }
            let hi = x.min(b);
            if hi > prev {
                acc += integrate_or_estimate(|t| self.density(t), prev, hi, CDF_TOL);
                prev = hi;
            }
            out.push(if x >= b { 1.0 } else { (base + acc).min(1.0) });
        }
        out
    }

    /// Mean of the law (of the modulus for ring-type laws).
    pub fn mean(&self) -> f64 {
        match self.kind {
            LawKind::Semicircle => 0.0,
            LawKind::MarchenkoPastur => self.sigma * self.sigma,
            LawKind::Circular | LawKind::SingleRing => ring_mean_modulus(self.ring_a, self.ring_b),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn integrate_or_estimate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    match quad_integrate(f, a, b, tol) {
        Ok(v) => v,
        Err(Error::Quadrature { estimate, .. }) => estimate,
        Err(_) => f64::NAN,
    }
}

/// `(1/2πσ²)√(4σ² − x²)` on `|x| ≤ 2σ`.
pub fn semicircle_density(x: f64, sigma: f64) -> f64 {
    let r2 = 4.0 * sigma * sigma;
    if x * x >= r2 {
        0.0
    } else {
        (r2 - x * x).sqrt() / (2.0 * PI * sigma * sigma)
    }
}

pub fn semicircle_cdf(x: f64, sigma: f64) -> f64 {
    let u = x / sigma;
    if u <= -2.0 {
        0.0
    } else if u >= 2.0 {
        1.0
    } else {
        0.5 + u * (4.0 - u * u).sqrt() / (4.0 * PI) + (u / 2.0).asin() / PI
    }
}

/// Support endpoints `((1−√c)², (1+√c)²)`.
pub fn mp_edges(c: f64) -> (f64, f64) {
    let s = c.sqrt();
    ((1.0 - s).powi(2), (1.0 + s).powi(2))
}

/// Absolutely continuous part of the Marchenko-Pastur law with ratio `c` and
/// unit variance: `√((x−a)(b−x)) / (2π c x)` on `[a, b]`. For `c > 1` the
/// remaining mass `1 − 1/c` sits at 0 (see [`mp_cdf`]).
pub fn mp_density(x: f64, c: f64) -> f64 {
    let (a, b) = mp_edges(c);
    if x <= a || x >= b || x <= 0.0 {
        return 0.0;
    }
    ((x - a) * (b - x)).sqrt() / (2.0 * PI * c * x)
}

/// CDF including the atom `(1 − 1/c)⁺` at 0.
pub fn mp_cdf(x: f64, c: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let (a, b) = mp_edges(c);
    let atom = (1.0 - 1.0 / c).max(0.0);
    if x >= b {
        return 1.0;
    }
    if x <= a {
        return atom;
    }
    (atom + integrate_or_estimate(|t| mp_density(t, c), a, x, CDF_TOL)).min(1.0)
}

/// Annulus radii from the `−2` and `+2` moments of the singular-value law Θ:
/// `a = (∫x⁻²dΘ)^{−1/2}`, `b = (∫x²dΘ)^{1/2}`.
pub fn single_ring_radii(theta_moment_neg2: f64, theta_moment_pos2: f64) -> Result<(f64, f64)> {
    check_positive("negative second moment", theta_moment_neg2)?;
    check_positive("second moment", theta_moment_pos2)?;
    Ok((theta_moment_neg2.powf(-0.5), theta_moment_pos2.sqrt()))
}

/// Mean modulus for `r²` uniform on `[a², b²]`: `(2/3)(b³ − a³)/(b² − a²)`.
pub fn ring_mean_modulus(a: f64, b: f64) -> f64 {
    if (b - a).abs() <= f64::EPSILON * b {
        return b;
    }
    2.0 / 3.0 * (b.powi(3) - a.powi(3)) / (b * b - a * a)
}

/// Empirical spectral distribution.
///
/// `grid` holds the distinct support points ascending, `cdf[i]` the mass at or
/// below `grid[i]`. `hist` holds densities on equal-width bins bounded by `bin_edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Esd {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub bin_edges: Vec<f64>,
    pub hist: Vec<f64>,
}

impl Esd {
    /// Right-continuous step CDF.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let k = self.grid.partition_point(|&g| g <= x);
        if k == 0 {
            0.0
        } else {
            self.cdf[k - 1]
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    fn from_weighted(mut points: Vec<(f64, f64)>, bins: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("empty spectrum"));
        }
        if bins == 0 {
            return Err(invalid("histogram needs at least one bin"));
        }
        if points.iter().any(|p| !p.0.is_finite()) {
            return Err(invalid("spectrum has non-finite values"));
        }
        points.sort_by(|x, y| x.0.total_cmp(&y.0));
        let total: f64 = points.iter().map(|p| p.1).sum();
        let mut grid: Vec<f64> = Vec::new();
        let mut cdf: Vec<f64> = Vec::new();
        let mut acc = 0.0;
        for &(x, w) in &points {
            acc += w / total;
            if grid.last() == Some(&x) {
                *cdf.last_mut().expect("nonempty") = acc;
            } else {
                grid.push(x);
                cdf.push(acc);
            }
        }
        *cdf.last_mut().expect("nonempty") = 1.0;

        let (mut lo, mut hi) = (points[0].0, points[points.len() - 1].0);
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let bin_edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut hist = vec![0.0; bins];
        for &(x, w) in &points {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            hist[k] += w / total;
        }
        hist.iter_mut().for_each(|h| *h /= width);
        Ok(Self { grid, cdf, bin_edges, hist })
    }
}

/// ESD of one real spectrum with `bins` equal-width histogram bins.
pub fn esd_from_spectrum(s: &SpectrumSample, bins: usize) -> Result<Esd> {
    let v = s.real()?;
    Esd::from_weighted(v.iter().map(|&x| (x, 1.0)).collect(), bins)
}

/// Seed-averaged ESD: each sample contributes total mass `1/k`.
pub fn averaged_esd(samples: &[SpectrumSample], bins: usize) -> Result<Esd> {
    let mut pts = Vec::new();
    for s in samples {
        let v = s.real()?;
        let w = 1.0 / v.len() as f64;
        pts.extend(v.iter().map(|&x| (x, w)));
    }
    Esd::from_weighted(pts, bins)
}

/// ESD of eigenvalue moduli, for comparison with circular or ring laws.
pub fn modulus_esd(s: &SpectrumSample, bins: usize) -> Result<Esd> {
    Esd::from_weighted(s.complex().iter().map(|z| (z.norm(), 1.0)).collect(), bins)
}

/// `sup_x |F(x) − G(x)|` between the step ESD and the law CDF, evaluated
/// exactly at every jump (both one-sided limits) and at the law's atom.
pub fn convergence_gap(esd: &Esd, law: &LawSpec) -> f64 {
    let g = law.cdf_many(&esd.grid);
    let mut gap: f64 = 0.0;
    let mut before = 0.0;
    for (i, &gx) in g.iter().enumerate() {
        gap = gap.max((esd.cdf[i] - gx).abs()).max((before - gx).abs());
        before = esd.cdf[i];
    }
    if let Some((x0, w)) = law.atom() {
        let f_left = {
            let k = esd.grid.partition_point(|&v| v < x0);
            if k == 0 {
                0.0
            } else {
                esd.cdf[k - 1]
            }
        };
        let g_left = law.cdf(x0) - w;
        gap = gap.max((f_left - g_left).abs());
    }
    gap
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("slope fit needs at least two paired points"));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(invalid("log-log fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Outcome of [`density_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBoundReport {
    pub interval: (f64, f64),
    pub bins_used: usize,
    pub bin_width: f64,
    /// `max |p̂ − g|` over bins in the interval.
    pub max_abs_error: f64,
    /// `max |p̂ − g| · N · edge(x)`, the empirical constant of the bulk bound.
    pub c_statistic: f64,
}

/// Compares a Freedman-Diaconis histogram of the spectrum with the law density
/// on the bulk interval, shrunk by `N^{-1/3}ε` (semicircle) or `N^{-2/3}ε` (M-P)
/// at each edge. Edge weight is `4 − x²` or `(x−a)(b−x)` in standardized units.
pub fn density_bound_check(s: &SpectrumSample, law: &LawSpec, epsilon: f64) -> Result<DensityBoundReport> {
    let v = s.real()?;
    let n = v.len();
    if n < 4 {
        return Err(invalid("density bound check needs at least 4 eigenvalues"));
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let nf = n as f64;
    // work in standardized units so the theorem's intervals apply unchanged
    let (scale, shrink, edge): (f64, f64, Box<dyn Fn(f64) -> f64>) = match law.kind {
        LawKind::Semicircle => (law.sigma, nf.powf(-1.0 / 3.0) * epsilon, Box::new(|x: f64| 4.0 - x * x)),
        LawKind::MarchenkoPastur => {
            let (a, b) = mp_edges(law.c);
            (
                law.sigma * law.sigma,
                nf.powf(-2.0 / 3.0) * epsilon,
                Box::new(move |x: f64| (x - a) * (b - x)),
            )
        }
        _ => return Err(invalid("density bound check supports semicircle and Marchenko-Pastur laws")),
    };
    let unit = LawSpec { sigma: 1.0, ..*law };
    let (a, b) = unit.support();
    let (lo, hi) = (a + shrink, b - shrink);
    if !(lo < hi) {
        return Err(invalid(format!("bulk interval is empty for N={n}, epsilon={epsilon}")));
    }
    let mut xs: Vec<f64> = v.iter().map(|x| x / scale).collect();
    xs.sort_by(f64::total_cmp);
    let q = |p: f64| xs[((p * (nf - 1.0)).round() as usize).min(n - 1)];
    let iqr = q(0.75) - q(0.25);
    let mut width = 2.0 * iqr * nf.powf(-1.0 / 3.0);
    if !(width > 0.0) {
        width = (xs[n - 1] - xs[0]).max(1e-12) / 10.0;
    }
    let start = xs[0];
    let bins = (((xs[n - 1] - start) / width).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for &x in &xs {
        counts[(((x - start) / width) as usize).min(bins - 1)] += 1;
    }
    let mut used = 0;
    let mut max_err: f64 = 0.0;
    let mut c_stat: f64 = 0.0;
    for (k, &cnt) in counts.iter().enumerate() {
        let center = start + width * (k as f64 + 0.5);
        if center < lo || center > hi {
            continue;
        }
        used += 1;
        let p_hat = cnt as f64 / (nf * width);
        let err = (p_hat - unit.density(center)).abs();
        max_err = max_err.max(err);
        c_stat = c_stat.max(err * nf * edge(center));
    }
    if used == 0 {
        return Err(invalid("no histogram bin falls inside the bulk interval"));
    }
    Ok(DensityBoundReport { interval: (lo * scale, hi * scale), bins_used: used, bin_width: width * scale, max_abs_error: max_err, c_statistic: c_stat })
}
