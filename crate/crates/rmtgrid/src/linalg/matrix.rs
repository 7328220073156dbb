use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense entry storage. Real matrices stay real so the fast real kernels apply.
#[derive(Debug, Clone, PartialEq)]
pub enum Entries {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// What a matrix stands for in a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    #[default]
    Raw,
    Standardized,
    Covariance,
}

/// Relative tolerance for the Hermitian tag: `max|A - A^H| <= tol * max|A|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Row-major dense real or complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    entries: Entries,
    role: Role,
    hermitian: bool,
}

impl DataMatrix {
    pub fn from_real(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols, data.len())?;
        Ok(Self {
            rows,
            cols,
            entries: Entries::Real(data),
            role: Role::Raw,
            hermitian: false,
        })
    }

    pub fn from_complex(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dims(rows, cols, data.len())?;
        Ok(Self {
            rows,
            cols,
            entries: Entries::Complex(data),
            role: Role::Raw,
            hermitian: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_real(r, c, rows.concat())
    }

    pub fn from_fn_real(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_real(rows, cols, data)
    }

    pub fn from_fn_complex(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_complex(rows, cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn_real(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Tags the matrix Hermitian after checking the tolerance invariant.
    pub fn into_hermitian(mut self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::Contract(format!(
                "Hermitian tag needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let defect = self.hermitian_defect();
        let scale = self.max_abs();
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::Contract(format!(
                "matrix is not Hermitian: max|A - A^H| = {defect:e}, max|A| = {scale:e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn is_hermitian_tagged(&self) -> bool {
        self.hermitian
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.entries, Entries::Complex(_))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &Entries {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.cols + j;
        match &self.entries {
            Entries::Real(v) => Complex64::new(v[k], 0.0),
            Entries::Complex(v) => v[k],
        }
    }

    /// Real entries, or `None` for a complex matrix.
    pub fn real_data(&self) -> Option<&[f64]> {
        match &self.entries {
            Entries::Real(v) => Some(v),
            Entries::Complex(_) => None,
        }
    }

    pub fn real_data_or_err(&self) -> Result<&[f64]> {
        self.real_data()
            .ok_or_else(|| Error::Contract("operation requires a real matrix".into()))
    }

    pub fn real_row(&self, i: usize) -> Option<&[f64]> {
        self.real_data().map(|v| &v[i * self.cols..(i + 1) * self.cols])
    }

    pub fn to_complex_vec(&self) -> Vec<Complex64> {
        match &self.entries {
            Entries::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Entries::Complex(v) => v.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.entries {
            Entries::Real(v) => v.iter().all(|x| x.is_finite()),
            Entries::Complex(v) => v.iter().all(|x| x.re.is_finite() && x.im.is_finite()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.entries {
            Entries::Real(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Entries::Complex(v) => v.iter().fold(0.0, |m, x| m.max(x.norm())),
        }
    }

    /// `max|A - A^H|`; infinite for non-square input.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        match &self.entries {
            Entries::Real(v) => v.iter().map(|x| x * x).sum(),
            Entries::Complex(v) => v.iter().map(|x| x.norm_sqr()).sum(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let entries = match &self.entries {
            Entries::Real(v) => Entries::Real(v.iter().map(|x| x * s).collect()),
            Entries::Complex(v) => Entries::Complex(v.iter().map(|x| x * s).collect()),
        };
        Self { entries, ..self.clone() }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let (r, c) = (self.rows, self.cols);
        let entries = match &self.entries {
            Entries::Real(v) => Entries::Real((0..r * c).map(|k| v[(k % r) * c + k / r]).collect()),
            Entries::Complex(v) => {
                Entries::Complex((0..r * c).map(|k| v[(k % r) * c + k / r].conj()).collect())
            }
        };
        Self {
            rows: c,
            cols: r,
            entries,
            role: self.role,
            hermitian: self.hermitian,
        }
    }

    /// Stacks `self` on top of `other` (same column count).
    pub fn vstack(&self, other: &DataMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot stack {}x{} over {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let rows = self.rows + other.rows;
        match (&self.entries, &other.entries) {
            (Entries::Real(a), Entries::Real(b)) => {
                Self::from_real(rows, self.cols, [a.as_slice(), b.as_slice()].concat())
            }
            _ => Self::from_complex(
                rows,
                self.cols,
                [self.to_complex_vec(), other.to_complex_vec()].concat(),
            ),
        }
    }

    /// Columns `start..end` as a new matrix.
    pub fn column_range(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.cols {
            return Err(invalid(format!("column range {start}..{end} outside 0..{}", self.cols)));
        }
        let w = end - start;
        match &self.entries {
            Entries::Real(v) => Self::from_fn_real(self.rows, w, |i, j| v[i * self.cols + start + j]),
            Entries::Complex(v) => {
                Self::from_fn_complex(self.rows, w, |i, j| v[i * self.cols + start + j])
            }
        }
        .map(|m| m.with_role(self.role))
    }

    /// Drops row `k`.
    pub fn without_row(&self, k: usize) -> Result<Self> {
        if k >= self.rows || self.rows < 2 {
            return Err(invalid(format!("cannot drop row {k} of {}", self.rows)));
        }
        let keep: Vec<usize> = (0..self.rows).filter(|&i| i != k).collect();
        match &self.entries {
            Entries::Real(v) => {
                Self::from_fn_real(keep.len(), self.cols, |i, j| v[keep[i] * self.cols + j])
            }
            Entries::Complex(v) => {
                Self::from_fn_complex(keep.len(), self.cols, |i, j| v[keep[i] * self.cols + j])
            }
        }
        .map(|m| m.with_role(self.role))
    }

    pub fn to_faer_real(&self) -> Result<Mat<f64>> {
        let v = self.real_data_or_err()?;
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| v[i * self.cols + j]))
    }

    pub fn to_faer_complex(&self) -> Mat<Complex64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub fn from_faer_real(m: &Mat<f64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: r,
            cols: c,
            entries: Entries::Real(data),
            role: Role::Raw,
            hermitian: false,
        }
    }

    pub fn from_faer_complex(m: &Mat<Complex64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: r,
            cols: c,
            entries: Entries::Complex(data),
            role: Role::Raw,
            hermitian: false,
        }
    }

    /// Matrix product, real when both factors are real.
    pub fn matmul(&self, other: &DataMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if !self.is_complex() && !other.is_complex() {
            let p = &self.to_faer_real()? * &other.to_faer_real()?;
            Ok(Self::from_faer_real(&p))
        } else {
            let p = &self.to_faer_complex() * &other.to_faer_complex();
            Ok(Self::from_faer_complex(&p))
        }
    }

    /// `(1/T) A A^H` for a `p x T` matrix, tagged Hermitian covariance.
    pub fn gram_rows(&self) -> Self {
        let t = self.cols as f64;
        let out = if self.is_complex() {
            let a = self.to_faer_complex();
            let g = &a * a.adjoint();
            let mut m = Self::from_faer_complex(&g).scaled(1.0 / t);
            m.symmetrize();
            m
        } else {
            let a = self.to_faer_real().expect("real");
            let g = &a * a.transpose();
            let mut m = Self::from_faer_real(&g).scaled(1.0 / t);
            m.symmetrize();
            m
        };
        Self {
            role: Role::Covariance,
            hermitian: true,
            ..out
        }
    }

    /// Replaces the matrix with `(A + A^H)/2`, removing rounding asymmetry.
    fn symmetrize(&mut self) {
        let n = self.rows;
        match &mut self.entries {
            Entries::Real(v) => {
                for i in 0..n {
                    for j in i + 1..n {
                        let m = 0.5 * (v[i * n + j] + v[j * n + i]);
                        v[i * n + j] = m;
                        v[j * n + i] = m;
                    }
                }
            }
            Entries::Complex(v) => {
                for i in 0..n {
                    v[i * n + i].im = 0.0;
                    for j in i + 1..n {
                        let m = 0.5 * (v[i * n + j] + v[j * n + i].conj());
                        v[i * n + j] = m;
                        v[j * n + i] = m.conj();
                    }
                }
            }
        }
    }
}

fn check_dims(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("matrix dimensions must be positive, got {rows}x{cols}")));
    }
    if rows.checked_mul(cols) != Some(len) {
        return Err(Error::Shape(format!("{rows}x{cols} matrix needs {} entries, got {len}", rows * cols)));
    }
    Ok(())
}

/// Which decomposition produced a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    EigenHermitian,
    EigenGeneral,
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Sorted eigenvalues or singular values plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    values: SpectrumValues,
    source_dims: (usize, Option<usize>),
    kind: SpectrumKind,
}

impl SpectrumSample {
    /// Builds a real spectrum, sorting ascending.
    pub fn from_real(mut values: Vec<f64>, source_dims: (usize, Option<usize>), kind: SpectrumKind) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("spectrum contains non-finite values"));
        }
        if kind == SpectrumKind::Singular && values.iter().any(|&v| v < 0.0) {
            return Err(Error::Contract("singular values must be nonnegative".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            values: SpectrumValues::Real(values),
            source_dims,
            kind,
        })
    }

    /// Builds a complex spectrum sorted by (re, im).
    pub fn from_complex(mut values: Vec<Complex64>, source_dims: (usize, Option<usize>)) -> Result<Self> {
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("spectrum contains non-finite values"));
        }
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(Self {
            values: SpectrumValues::Complex(values),
            source_dims,
            kind: SpectrumKind::EigenGeneral,
        })
    }

    pub fn values(&self) -> &SpectrumValues {
        &self.values
    }

    pub fn real(&self) -> Result<&[f64]> {
        match &self.values {
            SpectrumValues::Real(v) => Ok(v),
            SpectrumValues::Complex(_) => Err(Error::Contract("expected a real spectrum".into())),
        }
    }

    pub fn complex(&self) -> Vec<Complex64> {
        match &self.values {
            SpectrumValues::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            SpectrumValues::Complex(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            SpectrumValues::Real(v) => v.len(),
            SpectrumValues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source_dims(&self) -> (usize, Option<usize>) {
        self.source_dims
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    /// Every value multiplied by `s`; order is kept for `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        match &self.values {
            SpectrumValues::Real(v) => Self::from_real(v.iter().map(|x| x * s).collect(), self.source_dims, self.kind),
            SpectrumValues::Complex(v) => Self::from_complex(v.iter().map(|x| x * s).collect(), self.source_dims),
        }
    }
}
