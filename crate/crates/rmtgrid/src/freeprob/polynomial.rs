//! Densities of polynomials in free variables, and their random-matrix
//! Monte-Carlo counterparts.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::{
    subordination_solve, OperatorCauchy, OperatorMethod, OperatorVariable, SubordinationConfig,
};
use super::pencil::{LinearPencil, Polynomial};
use super::small::SmallMat;
use crate::ensembles::{normal, rng_for, standardize};
use crate::error::{invalid, Error, Result};
use crate::laws::{LawKind, LawSpec};
use crate::linalg::{eig_hermitian, DataMatrix};

type C = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySpectrumConfig {
    /// Distance of the evaluation line above the real axis; `Λ_ε` uses `ε = η`.
    pub eta: f64,
    /// Larger distances solved first at each grid point, each warm-starting the next.
    pub continuation: Vec<f64>,
    pub solver: SubordinationConfig,
    pub method: OperatorMethod,
}

impl Default for PolySpectrumConfig {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            continuation: vec![1.0, 0.1, 0.01],
            solver: SubordinationConfig { tol: 1e-10, ..SubordinationConfig::default() },
            method: OperatorMethod::Spectral,
        }
    }
}

/// Density of `p(x₁, …)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    /// Grid indices where the solver failed; their density is interpolated.
    pub flagged: Vec<usize>,
    /// Subordination iterations spent per grid point (all continuation stages).
    pub iterations: Vec<usize>,
}

impl DensityTable {
    /// Trapezoid mass over the grid.
    pub fn mass(&self) -> f64 {
        trapezoid_cumulative(&self.x, &self.density).last().copied().unwrap_or(0.0)
    }
}

/// `Λ_ε(z) = diag(z, iε, …, iε)`.
pub fn lambda_eps(n: usize, z: C, eps: f64) -> SmallMat {
    let mut m = SmallMat::scalar(n, C::new(0.0, eps));
    m.set(0, 0, z);
    m
}

/// Evaluates `−(1/π) Im [G_L(Λ_ε(x + iη) − b₀)]₁₁` on `grid` by operator-valued
/// subordination over the pencil's variables.
pub fn polynomial_spectrum(
    pencil: &LinearPencil,
    laws: &[LawSpec],
    grid: &[f64],
    cfg: &PolySpectrumConfig,
) -> Result<DensityTable> {
    if laws.len() != pencil.var_count() {
        return Err(invalid(format!("pencil has {} variables but {} laws were given", pencil.var_count(), laws.len())));
    }
    if !(1..=2).contains(&laws.len()) {
        return Err(invalid("only one- and two-variable pencils are supported"));
    }
    for l in laws {
        if !matches!(l.kind, LawKind::Semicircle | LawKind::MarchenkoPastur) {
            return Err(invalid("variable laws must be semicircle or Marchenko-Pastur (free Poisson)"));
        }
    }
    if !(cfg.eta > 0.0) || grid.is_empty() {
        return Err(invalid("need eta > 0 and a nonempty grid"));
    }
    let n = pencil.dim();
    let vars: Vec<OperatorVariable> = laws
        .iter()
        .enumerate()
        .map(|(j, l)| Ok(OperatorVariable::from_law(pencil.coeff(j + 1).clone(), *l)?.with_method(cfg.method)))
        .collect::<Result<_>>()?;
    let mut stages: Vec<f64> = cfg.continuation.iter().copied().filter(|&e| e > cfg.eta).collect();
    stages.push(cfg.eta);

    let mut density = vec![f64::NAN; grid.len()];
    let mut iterations = vec![0; grid.len()];
    let mut flagged = Vec::new();
    for (k, &x) in grid.iter().enumerate() {
        let mut omega: Option<SmallMat> = None;
        let mut prev_b: Option<SmallMat> = None;
        let mut ok = true;
        let mut g11 = C::new(0.0, 0.0);
        for &eta in &stages {
            let b = &lambda_eps(n, C::new(x, eta), eta) - pencil.b0();
            let g = if vars.len() == 1 {
                vars[0].cauchy(&b)
            } else {
                let init = match (&omega, &prev_b) {
                    (Some(w), Some(pb)) => Some(&(w - pb) + &b),
                    _ => None,
                };
                subordination_solve(&vars[0], &vars[1], &b, &cfg.solver, init.as_ref()).and_then(|st| {
                    iterations[k] += st.iterations;
                    omega = Some(st.omega1.clone());
                    if st.converged {
                        Ok(st.g)
                    } else {
                        Err(Error::NoConvergence { what: "subordination", iterations: st.iterations, residual: st.residual })
                    }
                })
            };
            match g {
                Ok(g) => g11 = g.get(0, 0),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
            prev_b = Some(b);
        }
        let rho = -g11.im / PI;
        if ok && rho.is_finite() && rho > -1e-6 {
            density[k] = rho.max(0.0);
        } else {
            flagged.push(k);
        }
    }
    if flagged.len() == grid.len() {
        return Err(Error::NoConvergence { what: "polynomial spectrum", iterations: 0, residual: f64::NAN });
    }
    interpolate_flagged(grid, &mut density, &flagged);
    Ok(DensityTable { x: grid.to_vec(), density, flagged, iterations })
}

fn interpolate_flagged(x: &[f64], d: &mut [f64], flagged: &[usize]) {
    for &k in flagged {
        let left = (0..k).rev().find(|&i| d[i].is_finite());
        let right = (k + 1..x.len()).find(|&i| d[i].is_finite() && !flagged.contains(&i));
        d[k] = match (left, right) {
            (Some(l), Some(r)) => d[l] + (d[r] - d[l]) * (x[k] - x[l]) / (x[r] - x[l]),
            (Some(l), None) => d[l],
            (None, Some(r)) => d[r],
            (None, None) => 0.0,
        };
    }
}

fn trapezoid_cumulative(x: &[f64], d: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (d[i] + d[i - 1]);
        out.push(acc);
    }
    out
}

/// Kolmogorov-Smirnov distance between a tabulated density (normalized by its
/// trapezoid mass, CDF linear between grid points) and the empirical CDF of `samples`.
pub fn ks_density_vs_samples(x: &[f64], density: &[f64], samples: &[f64]) -> Result<f64> {
    if x.len() < 2 || x.len() != density.len() || samples.is_empty() {
        return Err(invalid("KS comparison needs a grid of >= 2 points and samples"));
    }
    let cum = trapezoid_cumulative(x, density);
    let total = *cum.last().expect("nonempty");
    if !(total > 0.0) {
        return Err(invalid("density has no mass on the grid"));
    }
    let cdf = |t: f64| -> f64 {
        if t <= x[0] {
            return 0.0;
        }
        if t >= x[x.len() - 1] {
            return 1.0;
        }
        let k = x.partition_point(|&g| g <= t);
        let (x0, x1) = (x[k - 1], x[k]);
        (cum[k - 1] + (cum[k] - cum[k - 1]) * (t - x0) / (x1 - x0)) / total
    };
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    Ok(d)
}

/// Random-matrix model of one free variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McEnsemble {
    /// Real symmetric Gaussian scaled to the standard semicircle.
    Gaussian,
    /// `(1/n) V Vᵀ` for a standardized square `V`: free Poisson with rate 1.
    Wishart,
}

impl McEnsemble {
    /// The limit law the ensemble models.
    pub fn law(self) -> LawSpec {
        match self {
            Self::Gaussian => LawSpec::semicircle(1.0).expect("valid"),
            Self::Wishart => LawSpec::marchenko_pastur(1.0).expect("valid"),
        }
    }
}

impl std::str::FromStr for McEnsemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "semicircle" => Ok(Self::Gaussian),
            "wishart" | "free-poisson" | "poisson" => Ok(Self::Wishart),
            other => Err(invalid(format!("unknown ensemble '{other}' (expected gaussian or wishart)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub reps: usize,
    /// Scale of the white noise added to each sampled data matrix.
    pub eta: f64,
    pub seed: u64,
}

/// One `n×n` draw of `ens`, with white noise of scale `eta` added to the data.
pub fn sample_mc_variable(ens: McEnsemble, n: usize, eta: f64, seed: u64) -> Result<DataMatrix> {
    let mut rng = rng_for(seed, 0);
    let mut data = vec![0.0; n * n];
    for v in data.iter_mut() {
        *v = normal(&mut rng) + eta * normal(&mut rng);
    }
    match ens {
        McEnsemble::Gaussian => {
            let s = 1.0 / (2.0 * n as f64).sqrt();
            DataMatrix::from_fn_real(n, n, |i, j| s * (data[i * n + j] + data[j * n + i]))?.into_hermitian()
        }
        McEnsemble::Wishart => {
            let v = standardize(&DataMatrix::from_real(n, n, data)?, seed)?.matrix;
            Ok(v.gram_rows())
        }
    }
}

/// Pooled eigenvalues of `p` over `reps` independent draws.
pub fn monte_carlo_spectrum(poly: Polynomial, ensembles: &[McEnsemble], cfg: &McConfig) -> Result<Vec<f64>> {
    if cfg.n < 2 || cfg.reps < 1 {
        return Err(invalid("Monte-Carlo spectrum needs n >= 2 and at least one repetition"));
    }
    if ensembles.len() != poly.var_count() {
        return Err(invalid(format!("{poly:?} needs {} ensembles", poly.var_count())));
    }
    let mut out = Vec::with_capacity(cfg.n * cfg.reps);
    for r in 0..cfg.reps {
        let xs: Vec<DataMatrix> = ensembles
            .iter()
            .enumerate()
            .map(|(j, &e)| {
                let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add((r * ensembles.len() + j) as u64);
                sample_mc_variable(e, cfg.n, cfg.eta, seed)
            })
            .collect::<Result<_>>()?;
        out.extend_from_slice(eig_hermitian(&poly.evaluate(&xs)?)?.real()?);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Equally spaced grid spanning `[min − pad, max + pad]` of the samples.
pub fn grid_around(samples: &[f64], points: usize, pad: f64) -> Result<Vec<f64>> {
    if samples.is_empty() || points < 2 {
        return Err(invalid("grid needs samples and at least two points"));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - pad;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}
