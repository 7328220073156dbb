//! Selfadjoint linear pencils `L = b₀⊗1 + Σ b_j⊗X_j` for the shipped polynomials.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::small::SmallMat;
use crate::error::{invalid, Error, Result};
use crate::linalg::DataMatrix;

type C = Complex64;

/// The noncommutative polynomials with built-in linearizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polynomial {
    /// `p = X₁`.
    Identity,
    /// `p = X₁X₂ + X₂X₁`.
    Anticommutator,
    /// `p = X₁X₂ + X₂X₁ + X₁²`.
    AnticommutatorPlusSquare,
}

impl Polynomial {
    pub fn var_count(self) -> usize {
        match self {
            Self::Identity => 1,
            _ => 2,
        }
    }

    pub fn pencil(self) -> LinearPencil {
        match self {
            Self::Identity => pencil_identity(),
            Self::Anticommutator => pencil_anticommutator(),
            Self::AnticommutatorPlusSquare => pencil_anticommutator_plus_square(),
        }
    }

    /// Direct evaluation on Hermitian substitutions; the result is symmetrized.
    pub fn evaluate(self, xs: &[DataMatrix]) -> Result<DataMatrix> {
        if xs.len() != self.var_count() {
            return Err(invalid(format!("{self:?} takes {} variables, got {}", self.var_count(), xs.len())));
        }
        match self {
            Self::Identity => Ok(xs[0].clone()),
            Self::Anticommutator | Self::AnticommutatorPlusSquare => {
                let (x1, x2) = (&xs[0], &xs[1]);
                let mut p = add(&x1.matmul(x2)?, &x2.matmul(x1)?)?;
                if self == Self::AnticommutatorPlusSquare {
                    p = add(&p, &x1.matmul(x1)?)?;
                }
                symmetrized(&p)
            }
        }
    }
}

impl std::str::FromStr for Polynomial {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "anticommutator" => Ok(Self::Anticommutator),
            "anticommutator-plus-square" => Ok(Self::AnticommutatorPlusSquare),
            other => Err(invalid(format!(
                "unknown polynomial '{other}' (expected identity, anticommutator or anticommutator-plus-square)"
            ))),
        }
    }
}

fn add(a: &DataMatrix, b: &DataMatrix) -> Result<DataMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::Shape("matrix sum of different shapes".into()));
    }
    let (r, c) = a.shape();
    match (a.real_data(), b.real_data()) {
        (Some(x), Some(y)) => DataMatrix::from_real(r, c, x.iter().zip(y).map(|(p, q)| p + q).collect()),
        _ => {
            let (x, y) = (a.to_complex_vec(), b.to_complex_vec());
            DataMatrix::from_complex(r, c, x.iter().zip(&y).map(|(p, q)| p + q).collect())
        }
    }
}

fn symmetrized(m: &DataMatrix) -> Result<DataMatrix> {
    add(m, &m.adjoint())?.scaled(0.5).into_hermitian()
}

/// Coefficients `b₀, …, b_k` of a selfadjoint linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPencil {
    dim_n: usize,
    coeffs: Vec<SmallMat>,
}

impl LinearPencil {
    pub fn new(coeffs: Vec<SmallMat>) -> Result<Self> {
        let n = coeffs.first().map(SmallMat::dim).ok_or_else(|| invalid("pencil needs b0"))?;
        if coeffs.len() < 2 {
            return Err(invalid("pencil needs at least one variable coefficient"));
        }
        for b in &coeffs {
            if b.dim() != n {
                return Err(Error::Shape("pencil coefficients must share one size".into()));
            }
            if !b.is_hermitian(1e-14) {
                return Err(Error::Contract("pencil coefficients must be Hermitian".into()));
            }
        }
        Ok(Self { dim_n: n, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim_n
    }

    pub fn var_count(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn b0(&self) -> &SmallMat {
        &self.coeffs[0]
    }

    /// `b_j` for variable `j ≥ 1`.
    pub fn coeff(&self, j: usize) -> &SmallMat {
        &self.coeffs[j]
    }

    /// Evaluates `−u Q⁻¹ v` after substituting the `n×n` matrices `xs` into the
    /// pencil (for `N = 1` the pencil itself).
    pub fn reconstruct(&self, xs: &[DataMatrix]) -> Result<DataMatrix> {
        if xs.len() != self.var_count() {
            return Err(invalid("one substitution per pencil variable required"));
        }
        let n = xs[0].rows();
        if xs.iter().any(|x| x.shape() != (n, n)) {
            return Err(Error::Shape("substitutions must be square and equally sized".into()));
        }
        let big_n = self.dim_n;
        // block (r, s) of Σ b_j ⊗ X_j as an n×n complex matrix
        let block = |r: usize, s: usize| -> Mat<C> {
            Mat::<C>::from_fn(n, n, |i, k| {
                let mut v = if i == k { self.coeffs[0].get(r, s) } else { C::new(0.0, 0.0) };
                for (j, x) in xs.iter().enumerate() {
                    let b = self.coeffs[j + 1].get(r, s);
                    if b.norm() != 0.0 {
                        v += b * x.get(i, k);
                    }
                }
                v
            })
        };
        if big_n == 1 {
            return Ok(DataMatrix::from_faer_complex(&block(0, 0)));
        }
        let m = (big_n - 1) * n;
        let mut q = Mat::<C>::zeros(m, m);
        let mut u = Mat::<C>::zeros(n, m);
        let mut v = Mat::<C>::zeros(m, n);
        for r in 1..big_n {
            let ub = block(0, r);
            let vb = block(r, 0);
            for i in 0..n {
                for k in 0..n {
                    u[(i, (r - 1) * n + k)] = ub[(i, k)];
                    v[((r - 1) * n + i, k)] = vb[(i, k)];
                }
            }
            for s in 1..big_n {
                let qb = block(r, s);
                for i in 0..n {
                    for k in 0..n {
                        q[((r - 1) * n + i, (s - 1) * n + k)] = qb[(i, k)];
                    }
                }
            }
        }
        use faer::linalg::solvers::Solve;
        let qinv_v = q.partial_piv_lu().solve(&v);
        let p = -(&u * &qinv_v);
        Ok(DataMatrix::from_faer_complex(&p))
    }
}

fn e(n: usize, pairs: &[(usize, usize, f64)]) -> SmallMat {
    let mut m = SmallMat::zeros(n);
    for &(i, j, v) in pairs {
        m.set(i, j, m.get(i, j) + C::new(v, 0.0));
        if i != j {
            m.set(j, i, m.get(j, i) + C::new(v, 0.0));
        }
    }
    m
}

/// `L = X₁`.
pub fn pencil_identity() -> LinearPencil {
    LinearPencil { dim_n: 1, coeffs: vec![SmallMat::zeros(1), SmallMat::identity(1)] }
}

/// `[[0, X₁, X₂], [X₁, 0, −1], [X₂, −1, 0]]`.
pub fn pencil_anticommutator() -> LinearPencil {
    LinearPencil {
        dim_n: 3,
        coeffs: vec![e(3, &[(1, 2, -1.0)]), e(3, &[(0, 1, 1.0)]), e(3, &[(0, 2, 1.0)])],
    }
}

/// `[[0, X₁, X₁/2 + X₂], [X₁, 0, −1], [X₁/2 + X₂, −1, 0]]`.
pub fn pencil_anticommutator_plus_square() -> LinearPencil {
    LinearPencil {
        dim_n: 3,
        coeffs: vec![e(3, &[(1, 2, -1.0)]), e(3, &[(0, 1, 1.0), (0, 2, 0.5)]), e(3, &[(0, 2, 1.0)])],
    }
}
