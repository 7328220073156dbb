//! Matrix-valued Cauchy transforms of `b_j ⊗ x_j` and the additive
//! subordination fixed point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::small::SmallMat;
use crate::error::{invalid, Error, Result};
use crate::laws::{LawKind, LawSpec};
use crate::linalg::quad_integrate_vec;
use crate::transforms::CauchyEvaluator;

type C = Complex64;

/// How `E[(b − t·b_j)⁻¹]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorMethod {
    /// Diagonalize `b⁻¹b_j` and apply the scalar Cauchy transform to each
    /// eigenvalue; falls back to quadrature when the eigenbasis is ill-conditioned.
    #[default]
    Spectral,
    /// Integrate the resolvent against the law density over its support.
    Quadrature,
}

/// Anything with an `M_N(ℂ)`-valued Cauchy transform `G(b) = E[(b − X)⁻¹]`.
pub trait OperatorCauchy {
    fn dim(&self) -> usize;
    fn cauchy(&self, b: &SmallMat) -> Result<SmallMat>;

    /// `h(b) = G(b)⁻¹ − b`.
    fn h(&self, b: &SmallMat) -> Result<SmallMat> {
        Ok(&self.cauchy(b)?.inverse()? - b)
    }
}

/// The zero operator: `G(b) = b⁻¹`.
#[derive(Debug, Clone)]
pub struct ZeroOperator(pub usize);

impl OperatorCauchy for ZeroOperator {
    fn dim(&self) -> usize {
        self.0
    }
    fn cauchy(&self, b: &SmallMat) -> Result<SmallMat> {
        b.inverse()
    }
}

/// `b_j ⊗ x_j` for a scalar variable `x_j` with a known law.
#[derive(Debug, Clone)]
pub struct OperatorVariable {
    coeff: SmallMat,
    scalar: CauchyEvaluator,
    law: Option<LawSpec>,
    method: OperatorMethod,
}

impl OperatorVariable {
    pub fn from_law(coeff: SmallMat, law: LawSpec) -> Result<Self> {
        Ok(Self { coeff, scalar: CauchyEvaluator::from_law(law)?, law: Some(law), method: OperatorMethod::Spectral })
    }

    /// Spectral method only; there is no density to integrate.
    pub fn from_evaluator(coeff: SmallMat, scalar: CauchyEvaluator) -> Self {
        Self { coeff, scalar, law: None, method: OperatorMethod::Spectral }
    }

    pub fn with_method(mut self, method: OperatorMethod) -> Self {
        self.method = method;
        self
    }

    fn spectral(&self, b: &SmallMat) -> Result<Option<SmallMat>> {
        let binv = b.inverse()?;
        let k = &binv * &self.coeff;
        let (theta, s) = k.eigen()?;
        let sinv = match s.inverse() {
            Ok(m) => m,
            Err(_) => return Ok(None),
        };
        let n = b.dim();
        let d = SmallMat::from_fn(n, |i, j| if i == j { theta[i] } else { C::new(0.0, 0.0) });
        let recon = &(&s * &d) * &sinv;
        if (&recon - &k).norm() > 1e-9 * (1.0 + k.norm()) {
            return Ok(None);
        }
        let (m1, m2) = (self.scalar.mean(), self.scalar.second_moment());
        let mut m = Vec::with_capacity(n);
        for &t in &theta {
            // E[1/(1 − xθ)]
            m.push(if t.norm() < 1e-8 {
                1.0 + t * m1 + t * t * m2
            } else {
                let inv = t.inv();
                inv * self.scalar.cauchy(inv)?
            });
        }
        let dm = SmallMat::from_fn(n, |i, j| if i == j { m[i] } else { C::new(0.0, 0.0) });
        Ok(Some(&(&(&s * &dm) * &sinv) * &binv))
    }

    fn quadrature(&self, b: &SmallMat) -> Result<SmallMat> {
        let law = self
            .law
            .ok_or_else(|| invalid("quadrature method needs a parametric law"))?;
        if !matches!(law.kind, LawKind::Semicircle | LawKind::MarchenkoPastur) {
            return Err(invalid("operator Cauchy transform supports semicircle and Marchenko-Pastur laws"));
        }
        let n = b.dim();
        let (lo, hi) = law.support();
        let mut err = None;
        let v = quad_integrate_vec(
            |t, out| {
                let r = (b - &self.coeff.scale(C::new(t, 0.0))).inverse();
                match r {
                    Ok(r) => {
                        let w = law.density(t);
                        for i in 0..n {
                            for j in 0..n {
                                let g = r.get(i, j) * w;
                                out[2 * (i * n + j)] = g.re;
                                out[2 * (i * n + j) + 1] = g.im;
                            }
                        }
                    }
                    Err(e) => {
                        err = Some(e);
                        out.iter_mut().for_each(|o| *o = 0.0);
                    }
                }
            },
            lo,
            hi,
            2 * n * n,
            1e-11,
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        let mut g = SmallMat::from_fn(n, |i, j| C::new(v[2 * (i * n + j)], v[2 * (i * n + j) + 1]));
        if let Some((_, w)) = law.atom() {
            g = &g + &b.inverse()?.scale(C::new(w, 0.0));
        }
        Ok(g)
    }
}

impl OperatorCauchy for OperatorVariable {
    fn dim(&self) -> usize {
        self.coeff.dim()
    }

    fn cauchy(&self, b: &SmallMat) -> Result<SmallMat> {
        if b.dim() != self.coeff.dim() {
            return Err(Error::Shape("argument and coefficient sizes differ".into()));
        }
        if !b.im_part().is_psd(0.0) {
            return Err(invalid("operator Cauchy transform needs Im b positive definite"));
        }
        match self.method {
            OperatorMethod::Spectral => match self.spectral(b)? {
                Some(g) => Ok(g),
                None if self.law.is_some() => self.quadrature(b),
                None => Err(Error::Contract("ill-conditioned eigenbasis and no density for quadrature".into())),
            },
            OperatorMethod::Quadrature => self.quadrature(b),
        }
    }
}

/// `E[(b − coeff⊗s)⁻¹]` for a standard semicircular `s`.
pub fn operator_cauchy_semicircle(b: &SmallMat, coeff: &SmallMat) -> Result<SmallMat> {
    OperatorVariable::from_law(coeff.clone(), LawSpec::semicircle(1.0)?)?.cauchy(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinationConfig {
    /// Stop when `‖f_b(ω) − ω‖ ≤ tol·(1 + ‖ω‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `α` in `ω ← (1−α)ω + α f_b(ω)`.
    pub alpha: f64,
    /// Damping used once the residual oscillates.
    pub alpha_min: f64,
}

impl Default for SubordinationConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 20_000, alpha: 0.5, alpha_min: 0.1 }
    }
}

/// Converged (or best) subordination state at one argument `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCauchyState {
    pub b: SmallMat,
    pub omega1: SmallMat,
    pub omega2: SmallMat,
    /// `G_{x+y}(b) = G_x(ω₁)`.
    pub g: SmallMat,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after each iteration.
    pub history: Vec<f64>,
}

/// Fixed point `ω₁ = h_y(h_x(ω₁) + b) + b` for free `x`, `y`, by damped
/// iteration from `init` (default `b`).
pub fn subordination_solve(
    x: &dyn OperatorCauchy,
    y: &dyn OperatorCauchy,
    b: &SmallMat,
    cfg: &SubordinationConfig,
    init: Option<&SmallMat>,
) -> Result<OperatorCauchyState> {
    if x.dim() != b.dim() || y.dim() != b.dim() {
        return Err(Error::Shape("subordination operands must share the argument size".into()));
    }
    let im_b = b.im_part();
    if !im_b.is_psd(0.0) {
        return Err(invalid("subordination needs Im b positive definite"));
    }
    let im_floor = 1e-9 * (1.0 + im_b.norm());
    let f = |w: &SmallMat| -> Result<(SmallMat, SmallMat)> {
        let w2 = &x.h(w)? + b;
        Ok((&y.h(&w2)? + b, w2))
    };
    let mut omega = init.cloned().unwrap_or_else(|| b.clone());
    if !(&omega.im_part() - &im_b).is_psd(im_floor) {
        omega = b.clone();
    }
    let mut alpha = cfg.alpha;
    let mut history = Vec::new();
    let mut best: Option<(f64, SmallMat)> = None;
    for it in 0..cfg.max_iter {
        let (fw, _) = f(&omega)?;
        let res = (&fw - &omega).norm();
        history.push(res);
        if best.as_ref().is_none_or(|(r, _)| res < *r) {
            best = Some((res, omega.clone()));
        }
        if !res.is_finite() {
            break;
        }
        if res <= cfg.tol * (1.0 + omega.norm()) {
            return finish(x, b, omega, res, it + 1, true, history);
        }
        if it >= 5 && res > history[it - 1] && alpha > cfg.alpha_min {
            alpha = cfg.alpha_min;
        }
        omega = &omega.scale(C::new(1.0 - alpha, 0.0)) + &fw.scale(C::new(alpha, 0.0));
        if !(&omega.im_part() - &im_b).is_psd(im_floor) {
            return Err(Error::Contract("subordination iterate left the region Im ω ⪰ Im b".into()));
        }
    }
    let (res, omega) = best.ok_or(Error::NoConvergence { what: "subordination", iterations: 0, residual: f64::NAN })?;
    finish(x, b, omega, res, cfg.max_iter, false, history)
}

fn finish(
    x: &dyn OperatorCauchy,
    b: &SmallMat,
    omega1: SmallMat,
    residual: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
) -> Result<OperatorCauchyState> {
    let omega2 = &x.h(&omega1)? + b;
    let g = x.cauchy(&omega1)?;
    Ok(OperatorCauchyState { b: b.clone(), omega1, omega2, g, residual, iterations, converged, history })
}

/// Cauchy transform of `a ⊞ b` at `z ∈ ℂ⁺` through scalar subordination.
pub fn free_additive_cauchy(a: &CauchyEvaluator, b: &CauchyEvaluator, z: C, cfg: &SubordinationConfig) -> Result<C> {
    if z.im == 0.0 {
        return Err(invalid("free additive Cauchy transform is evaluated off the real axis"));
    }
    let flip = z.im < 0.0;
    let zz = if flip { z.conj() } else { z };
    let one = SmallMat::identity(1);
    let x = OperatorVariable::from_evaluator(one.clone(), a.clone());
    let y = OperatorVariable::from_evaluator(one, b.clone());
    let st = subordination_solve(&x, &y, &SmallMat::scalar(1, zz), cfg, None)?;
    if !st.converged {
        return Err(Error::NoConvergence { what: "subordination", iterations: st.iterations, residual: st.residual });
    }
    let g = st.g.get(0, 0);
    Ok(if flip { g.conj() } else { g })
}
