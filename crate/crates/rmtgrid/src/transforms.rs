//! Stieltjes and Cauchy transforms, density inversion, and numeric R and S
//! transforms.
//!
//! Two sign conventions coexist:
//! * `stieltjes_*`: `G(z) = ∫ dF(x)/(x − z)`, so `sign Im G = sign Im z`;
//! * `cauchy_*`: `G(z) = ∫ dF(x)/(z − x)`, the free-probability convention
//!   under which the R and S transforms are defined.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::laws::{mp_edges, LawKind, LawSpec};
use crate::linalg::SpectrumSample;

type C = Complex64;

const NEWTON_MAX_ITER: usize = 100;

/// Default ε-ladder for density inversion (each step halves ε).
pub const DEFAULT_LADDER: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Product-of-principal-roots form of `√(z−lo)·√(z−hi)`; analytic off `[lo, hi]`
/// and asymptotic to `z − (lo+hi)/2`.
fn edge_root(z: C, lo: f64, hi: f64) -> C {
    (z - lo).sqrt() * (z - hi).sqrt()
}

/// Cauchy transform of the semicircle law of radius `2σ`.
pub fn cauchy_semicircle(z: C, sigma: f64) -> C {
    let u = z / sigma;
    (u - edge_root(u, -2.0, 2.0)) / (2.0 * sigma)
}

fn cauchy_semicircle_derivative(z: C, sigma: f64) -> C {
    let u = z / sigma;
    let r = edge_root(u, -2.0, 2.0);
    (1.0 - u / r) / (2.0 * sigma * sigma)
}

/// Cauchy transform of the Marchenko-Pastur law with ratio `c`, including the
/// atom at 0 when `c > 1`.
pub fn cauchy_mp(z: C, cr: f64) -> C {
    let (a, b) = mp_edges(cr);
    (z + cr - 1.0 - edge_root(z, a, b)) / (2.0 * cr * z)
}

fn cauchy_mp_derivative(z: C, cr: f64) -> C {
    let (a, b) = mp_edges(cr);
    let r = edge_root(z, a, b);
    let dr = (2.0 * z - a - b) / (2.0 * r);
    let num = z + cr - 1.0 - r;
    ((1.0 - dr) * z - num) / (2.0 * cr * z * z)
}

/// `∫ dF(x)/(x − z)` for the semicircle law.
pub fn stieltjes_semicircle(z: C, sigma: f64) -> C {
    -cauchy_semicircle(z, sigma)
}

/// `∫ dF(x)/(x − z)` for the Marchenko-Pastur law.
pub fn stieltjes_mp(z: C, cr: f64) -> C {
    -cauchy_mp(z, cr)
}

/// `(1/N) Σ 1/(λᵢ − z)`.
pub fn stieltjes_from_spectrum(s: &SpectrumSample, z: C) -> Result<C> {
    let v = s.real()?;
    stieltjes_points(v, z)
}

fn stieltjes_points(v: &[f64], z: C) -> Result<C> {
    if v.is_empty() {
        return Err(invalid("empty spectrum"));
    }
    let mut acc = c(0.0, 0.0);
    for &l in v {
        let d = c(l, 0.0) - z;
        if d.norm() <= 1e-14 {
            return Err(invalid(format!("z = {z} coincides with eigenvalue {l}")));
        }
        acc += d.inv();
    }
    Ok(acc / v.len() as f64)
}

/// Where a [`CauchyEvaluator`] draws its values from.
#[derive(Clone)]
pub enum CauchySource {
    /// Empirical spectrum (real eigenvalues).
    Spectrum(Vec<f64>),
    /// Closed-form semicircle or Marchenko-Pastur law.
    Law(LawSpec),
    /// Deterministic variable.
    PointMass(f64),
    /// Density table on an ascending grid, integrated by the trapezoid rule.
    Tabulated { x: Vec<f64>, density: Vec<f64> },
    /// Arbitrary Cauchy transform valid on the upper half-plane.
    Custom(Arc<dyn Fn(C) -> Result<C> + Send + Sync>),
}

impl fmt::Debug for CauchySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Spectrum(v) => write!(f, "Spectrum({} values)", v.len()),
            Self::Law(l) => write!(f, "Law({l:?})"),
            Self::PointMass(m) => write!(f, "PointMass({m})"),
            Self::Tabulated { x, .. } => write!(f, "Tabulated({} points)", x.len()),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Evaluates the transforms of a real probability law.
#[derive(Debug, Clone)]
pub struct CauchyEvaluator {
    source: CauchySource,
    mean: f64,
    second_moment: f64,
}

impl CauchyEvaluator {
    pub fn from_spectrum(s: &SpectrumSample) -> Result<Self> {
        let v = s.real()?.to_vec();
        Self::from_values(v)
    }

    pub fn from_values(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(invalid("empty spectrum"));
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|x| x * x).sum::<f64>() / n;
        Ok(Self { source: CauchySource::Spectrum(v), mean, second_moment: m2 })
    }

    pub fn from_law(law: LawSpec) -> Result<Self> {
        let (mean, m2) = match law.kind {
            LawKind::Semicircle => (0.0, law.sigma * law.sigma),
            LawKind::MarchenkoPastur => {
                let s2 = law.sigma * law.sigma;
                (s2, s2 * s2 * (1.0 + law.c))
            }
            _ => return Err(invalid("Cauchy transforms need a real law (semicircle or Marchenko-Pastur)")),
        };
        Ok(Self { source: CauchySource::Law(law), mean, second_moment: m2 })
    }

    pub fn point_mass(m: f64) -> Self {
        Self { source: CauchySource::PointMass(m), mean: m, second_moment: m * m }
    }

    pub fn tabulated(x: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if x.len() != density.len() || x.len() < 2 {
            return Err(invalid("tabulated law needs matching x and density columns of length >= 2"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("tabulated grid must be strictly ascending"));
        }
        let mut mass = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for i in 1..x.len() {
            let h = 0.5 * (x[i] - x[i - 1]);
            mass += h * (density[i] + density[i - 1]);
            m1 += h * (x[i] * density[i] + x[i - 1] * density[i - 1]);
            m2 += h * (x[i] * x[i] * density[i] + x[i - 1] * x[i - 1] * density[i - 1]);
        }
        if !(mass > 0.0) {
            return Err(invalid("tabulated density has no mass"));
        }
        let density = density.into_iter().map(|d| d / mass).collect();
        Ok(Self { source: CauchySource::Tabulated { x, density }, mean: m1 / mass, second_moment: m2 / mass })
    }

    /// Wraps an upper-half-plane Cauchy transform; the lower half-plane is
    /// reached through `G(z̄) = conj G(z)`.
    pub fn custom(f: impl Fn(C) -> Result<C> + Send + Sync + 'static, mean: f64, second_moment: f64) -> Self {
        Self { source: CauchySource::Custom(Arc::new(f)), mean, second_moment }
    }

    pub fn source(&self) -> &CauchySource {
        &self.source
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `∫ dF(x)/(z − x)`.
    pub fn cauchy(&self, z: C) -> Result<C> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(invalid("non-finite evaluation point"));
        }
        let g = match &self.source {
            CauchySource::Spectrum(v) => -stieltjes_points(v, z)?,
            CauchySource::Law(l) => match l.kind {
                LawKind::Semicircle => cauchy_semicircle(z, l.sigma),
                _ => {
                    let s2 = l.sigma * l.sigma;
                    cauchy_mp(z / s2, l.c) / s2
                }
            },
            CauchySource::PointMass(m) => (z - *m).inv(),
            CauchySource::Tabulated { x, density } => trapezoid(x, density, |t| (z - t).inv()),
            CauchySource::Custom(f) => {
                if z.im > 0.0 {
                    f(z)?
                } else if z.im < 0.0 {
                    f(z.conj())?.conj()
                } else {
                    return Err(invalid("custom Cauchy transforms are defined off the real axis only"));
                }
            }
        };
        check_branch(z, -g)?;
        Ok(g)
    }

    /// `∫ dF(x)/(x − z)`.
    pub fn stieltjes(&self, z: C) -> Result<C> {
        self.cauchy(z).map(|g| -g)
    }

    /// `d/dz` of the Cauchy transform.
    pub fn cauchy_derivative(&self, z: C) -> Result<C> {
        match &self.source {
            CauchySource::Spectrum(v) => {
                let s: C = v.iter().map(|&l| -(z - l).powi(-2)).sum();
                Ok(s / v.len() as f64)
            }
            CauchySource::Law(l) => Ok(match l.kind {
                LawKind::Semicircle => cauchy_semicircle_derivative(z, l.sigma),
                _ => {
                    let s2 = l.sigma * l.sigma;
                    cauchy_mp_derivative(z / s2, l.c) / (s2 * s2)
                }
            }),
            CauchySource::PointMass(m) => Ok(-(z - *m).powi(-2)),
            CauchySource::Tabulated { x, density } => Ok(trapezoid(x, density, |t| -(z - t).powi(-2))),
            CauchySource::Custom(_) => {
                let h = 1e-6 * z.norm().max(1.0);
                let h = h.min(0.5 * z.im.abs().max(1e-300));
                let gp = self.cauchy(z + h)?;
                let gm = self.cauchy(z - h)?;
                let gpi = self.cauchy(z + c(0.0, h))?;
                let gmi = self.cauchy(z - c(0.0, h))?;
                // average the real- and imaginary-direction differences (Cauchy-Riemann)
                Ok(0.5 * ((gp - gm) / (2.0 * h) + (gpi - gmi) / c(0.0, 2.0 * h)))
            }
        }
    }
}

fn trapezoid(x: &[f64], d: &[f64], k: impl Fn(f64) -> C) -> C {
    let mut acc = c(0.0, 0.0);
    for i in 1..x.len() {
        let h = 0.5 * (x[i] - x[i - 1]);
        acc += (k(x[i]) * d[i] + k(x[i - 1]) * d[i - 1]) * h;
    }
    acc
}

/// Asserts `sign Im S(z) = sign Im z` for a Stieltjes value `s`.
fn check_branch(z: C, s: C) -> Result<()> {
    let scale = s.norm().max(1e-300);
    if z.im != 0.0 && s.im.abs() > 1e-12 * scale && s.im.signum() != z.im.signum() {
        return Err(Error::Contract(format!("branch violation: Im z = {:e}, Im G = {:e}", z.im, s.im)));
    }
    Ok(())
}

/// `(1/π) Im S(x + iε)` for Stieltjes `S`, equivalently `−(1/π) Im S(x − iε)`.
pub fn density_from_stieltjes(g: &CauchyEvaluator, x: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let rho = g.stieltjes(c(x, epsilon))?.im / PI;
    if rho < -1e-6 {
        return Err(Error::Contract(format!("negative density {rho:e} at x = {x}; branch misconfigured")));
    }
    Ok(rho.max(0.0))
}

/// Richardson-extrapolated inversion over an ε-ladder whose steps halve.
pub fn density_richardson(g: &CauchyEvaluator, x: f64, ladder: &[f64]) -> Result<f64> {
    if ladder.is_empty() {
        return Err(invalid("empty epsilon ladder"));
    }
    if ladder.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-9) {
        return Err(invalid("epsilon ladder must halve at every step"));
    }
    let mut level: Vec<f64> = ladder
        .iter()
        .map(|&e| g.stieltjes(c(x, e)).map(|s| s.im / PI))
        .collect::<Result<_>>()?;
    let mut factor = 2.0;
    while level.len() > 1 {
        level = level.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
        factor *= 2.0;
    }
    let rho = level[0];
    if rho < -1e-6 {
        return Err(Error::Contract(format!("negative density {rho:e} at x = {x}; branch misconfigured")));
    }
    Ok(rho.max(0.0))
}

/// Solves `G(z) = w` for the Cauchy transform by damped complex Newton,
/// seeded at `1/w + mean`. Returns `z = B(w)`.
pub fn blue_numeric(g: &CauchyEvaluator, w: C) -> Result<C> {
    if w.norm() == 0.0 || !(w.re.is_finite() && w.im.is_finite()) {
        return Err(invalid("inverse Cauchy transform needs a finite nonzero argument"));
    }
    let mut z = w.inv() + g.mean();
    let tol = 1e-14 * w.norm().max(1.0);
    let mut f = g.cauchy(z)? - w;
    for _ in 0..NEWTON_MAX_ITER {
        if f.norm() <= tol {
            return Ok(z);
        }
        let d = g.cauchy_derivative(z)?;
        if d.norm() == 0.0 || !d.re.is_finite() {
            break;
        }
        let step = f / d;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = z - step * lambda;
            if let Ok(gc) = g.cauchy(cand) {
                let fc = gc - w;
                if fc.norm() < f.norm() || fc.norm() <= tol {
                    z = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if f.norm() <= 1e-10 * w.norm().max(1.0) {
        return Ok(z);
    }
    Err(Error::NoConvergence { what: "inverse Cauchy transform", iterations: NEWTON_MAX_ITER, residual: f.norm() })
}

/// `R(w) = B(w) − 1/w`.
pub fn r_transform_numeric(g: &CauchyEvaluator, w: C) -> Result<C> {
    Ok(blue_numeric(g, w)? - w.inv())
}

/// Solves `S(z)·R(z·S(z)) = 1` by secant iteration from `S = 1/mean`.
pub fn s_transform_numeric(g: &CauchyEvaluator, z: C) -> Result<C> {
    if g.mean() == 0.0 {
        return Err(invalid("S transform needs a law with nonzero mean"));
    }
    let f = |s: C| -> Result<C> { Ok(s * r_transform_numeric(g, z * s)? - 1.0) };
    let mut s0 = c(1.0 / g.mean(), 0.0);
    let mut f0 = f(s0)?;
    let mut s1 = s0 * (1.0 - 0.01 * z.norm().max(0.1));
    let mut f1 = f(s1)?;
    for _ in 0..NEWTON_MAX_ITER {
        if f1.norm() <= 1e-12 {
            return Ok(s1);
        }
        let denom = f1 - f0;
        if denom.norm() == 0.0 {
            break;
        }
        let s2 = s1 - f1 * (s1 - s0) / denom;
        s0 = s1;
        f0 = f1;
        s1 = s2;
        f1 = f(s1)?;
    }
    if f1.norm() <= 1e-8 {
        return Ok(s1);
    }
    Err(Error::NoConvergence { what: "S transform", iterations: NEWTON_MAX_ITER, residual: f1.norm() })
}
