//! Seeded samplers for the Gaussian ensembles and the conditioning steps
//! applied to data windows before law checks.

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{eig_hermitian_vectors, DataMatrix, Entries, Role, SpectrumSample};

/// Deterministic generator for `(seed, stream)`. Distinct streams are
/// statistically independent.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex Gaussian with `E|z|² = 1`.
pub(crate) fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(s * normal(rng), s * normal(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Gue,
    Lue,
    Ginibre,
    GaussianRect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
    /// Sample count for `lue` and `gaussian-rect`.
    pub t: Option<usize>,
    pub sigma: f64,
    pub seed: u64,
    /// Complex entries for `ginibre` and `gaussian-rect`.
    pub complex: bool,
}

impl EnsembleSpec {
    fn new(kind: EnsembleKind, n: usize, t: Option<usize>, seed: u64) -> Self {
        Self { kind, n, t, sigma: 1.0, seed, complex: false }
    }

    pub fn gue(n: usize, seed: u64) -> Self {
        Self::new(EnsembleKind::Gue, n, None, seed)
    }

    pub fn lue(p: usize, t: usize, seed: u64) -> Self {
        Self::new(EnsembleKind::Lue, p, Some(t), seed)
    }

    pub fn ginibre(n: usize, seed: u64) -> Self {
        Self::new(EnsembleKind::Ginibre, n, None, seed)
    }

    pub fn gaussian_rect(p: usize, t: usize, seed: u64) -> Self {
        Self::new(EnsembleKind::GaussianRect, p, Some(t), seed)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_complex(mut self, complex: bool) -> Self {
        self.complex = complex;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("ensemble dimension n must be >= 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be positive and finite"));
        }
        match (self.kind, self.t) {
            (EnsembleKind::Lue | EnsembleKind::GaussianRect, None) => {
                Err(invalid("lue and gaussian-rect need a sample count t"))
            }
            (_, Some(0)) => Err(invalid("t must be >= 1")),
            _ => Ok(()),
        }
    }

    fn expect(&self, kind: EnsembleKind) -> Result<()> {
        self.validate()?;
        if self.kind != kind {
            return Err(invalid(format!("expected a {kind:?} spec, got {:?}", self.kind)));
        }
        Ok(())
    }
}

/// Draws from whichever ensemble the spec names.
pub fn sample(spec: &EnsembleSpec) -> Result<DataMatrix> {
    match spec.kind {
        EnsembleKind::Gue => sample_gue(spec),
        EnsembleKind::Lue => sample_lue(spec),
        EnsembleKind::Ginibre => sample_ginibre(spec),
        EnsembleKind::GaussianRect => sample_gaussian_rect(spec),
    }
}

/// Hermitian `n×n`; diagonal `N(0, σ²)`, off-diagonal real and imaginary parts `N(0, σ²/2)`.
pub fn sample_gue(spec: &EnsembleSpec) -> Result<DataMatrix> {
    spec.expect(EnsembleKind::Gue)?;
    let n = spec.n;
    let s = spec.sigma;
    let mut rng = rng_for(spec.seed, 0);
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        data[i * n + i] = Complex64::new(s * normal(&mut rng), 0.0);
        for j in i + 1..n {
            let z = complex_normal(&mut rng) * s;
            data[i * n + j] = z;
            data[j * n + i] = z.conj();
        }
    }
    DataMatrix::from_complex(n, n, data)?.into_hermitian()
}

/// `W = (1/T) X Xᴴ` for a `p×T` complex Gaussian `X` with `E|x|² = σ²`.
pub fn sample_lue(spec: &EnsembleSpec) -> Result<DataMatrix> {
    spec.expect(EnsembleKind::Lue)?;
    let (p, t) = (spec.n, spec.t.unwrap_or(1));
    let mut rng = rng_for(spec.seed, 0);
    let x = DataMatrix::from_fn_complex(p, t, |_, _| complex_normal(&mut rng) * spec.sigma)?;
    Ok(x.gram_rows())
}

/// Square iid Gaussian matrix, real by default.
pub fn sample_ginibre(spec: &EnsembleSpec) -> Result<DataMatrix> {
    spec.expect(EnsembleKind::Ginibre)?;
    gaussian(spec.n, spec.n, spec.sigma, spec.complex, spec.seed)
}

pub fn sample_gaussian_rect(spec: &EnsembleSpec) -> Result<DataMatrix> {
    spec.expect(EnsembleKind::GaussianRect)?;
    gaussian(spec.n, spec.t.unwrap_or(1), spec.sigma, spec.complex, spec.seed)
}

fn gaussian(rows: usize, cols: usize, sigma: f64, complex: bool, seed: u64) -> Result<DataMatrix> {
    let mut rng = rng_for(seed, 0);
    if complex {
        DataMatrix::from_fn_complex(rows, cols, |_, _| complex_normal(&mut rng) * sigma)
    } else {
        DataMatrix::from_fn_real(rows, cols, |_, _| sigma * normal(&mut rng))
    }
}

/// Result of [`standardize`]: the normalized matrix plus the rows that were
/// constant and have been replaced by noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub matrix: DataMatrix,
    pub replaced_rows: Vec<usize>,
}

/// Row-wise standardization to mean 0 and variance `(1/T)Σ|x−μ|² = 1`.
///
/// With this normalization `tr((1/T)XXᴴ) = N` holds exactly. Constant rows
/// are replaced by `N(0,1)` noise drawn from `seed` (one stream per row), then
/// standardized like any other row.
pub fn standardize(a: &DataMatrix, seed: u64) -> Result<Standardized> {
    if !a.is_finite() {
        return Err(invalid("standardize: non-finite entries"));
    }
    let (rows, cols) = a.shape();
    if cols < 2 {
        return Err(invalid("standardize needs at least 2 samples per row"));
    }
    let mut replaced = Vec::new();
    let entries = match a.entries() {
        Entries::Real(d) => {
            let mut out = d.clone();
            for (i, row) in out.chunks_mut(cols).enumerate() {
                if row.iter().all(|&v| v == row[0]) {
                    let mut rng = rng_for(seed, 1 + i as u64);
                    row.iter_mut().for_each(|v| *v = normal(&mut rng));
                    replaced.push(i);
                }
                let mean = row.iter().sum::<f64>() / cols as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cols as f64;
                let inv = 1.0 / var.sqrt();
                row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
            }
            Entries::Real(out)
        }
        Entries::Complex(d) => {
            let mut out = d.clone();
            for (i, row) in out.chunks_mut(cols).enumerate() {
                if row.iter().all(|&v| v == row[0]) {
                    let mut rng = rng_for(seed, 1 + i as u64);
                    row.iter_mut().for_each(|v| *v = Complex64::new(normal(&mut rng), 0.0));
                    replaced.push(i);
                }
                let mean = row.iter().sum::<Complex64>() / cols as f64;
                let var = row.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / cols as f64;
                let inv = 1.0 / var.sqrt();
                row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
            }
            Entries::Complex(out)
        }
    };
    let matrix = match entries {
        Entries::Real(d) => DataMatrix::from_real(rows, cols, d)?,
        Entries::Complex(d) => DataMatrix::from_complex(rows, cols, d)?,
    };
    Ok(Standardized { matrix: matrix.with_role(Role::Standardized), replaced_rows: replaced })
}

/// Haar-distributed `n×n` unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn haar_unitary(n: usize, seed: u64) -> Result<DataMatrix> {
    if n == 0 {
        return Err(invalid("haar_unitary: n must be >= 1"));
    }
    let mut rng = rng_for(seed, 0x4841_4152);
    let g = Mat::<Complex64>::from_fn(n, n, |_, _| complex_normal(&mut rng));
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let u = Mat::<Complex64>::from_fn(n, n, |i, j| {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        q[(i, j)] * ph
    });
    Ok(DataMatrix::from_faer_complex(&u))
}

/// Square matrix with the singular values of `X/√T` and Haar eigenvectors:
/// `X_u = U · sqrt(XXᴴ/T)`, scaled so that `‖X_u‖_F² = p`.
pub fn singular_value_equivalent(x: &DataMatrix, seed: u64) -> Result<DataMatrix> {
    check_tall(x)?;
    let s = x.gram_rows();
    let (evals, q) = eig_hermitian_vectors(&s)?;
    svd_equivalent_from_eigen(&evals, &q, seed)
}

/// Same as [`singular_value_equivalent`] when the eigendecomposition of the
/// sample covariance `Q Λ Qᴴ` is already available.
pub fn svd_equivalent_from_eigen(evals: &SpectrumSample, q: &DataMatrix, seed: u64) -> Result<DataMatrix> {
    let p = evals.len();
    let lam = evals.real()?;
    let total: f64 = lam.iter().map(|&l| l.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(invalid("singular-value equivalent of a zero matrix"));
    }
    let scale = (p as f64 / total).sqrt();
    let qf = q.to_faer_complex();
    let root = Mat::<Complex64>::from_fn(p, p, |i, j| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..p {
            acc += qf[(i, k)] * lam[k].max(0.0).sqrt() * qf[(j, k)].conj();
        }
        acc * scale
    });
    let u = haar_unitary(p, seed)?.to_faer_complex();
    Ok(DataMatrix::from_faer_complex(&(&u * &root)))
}

fn check_tall(x: &DataMatrix) -> Result<()> {
    let (p, t) = x.shape();
    if p > t {
        return Err(invalid(format!("singular-value equivalent needs p <= T, got p={p}, T={t}")));
    }
    Ok(())
}

/// Product of `l` independent singular-value equivalents of `x`.
pub fn ring_product(x: &DataMatrix, l: usize, seed: u64) -> Result<DataMatrix> {
    if l == 0 {
        return Err(invalid("ring product needs L >= 1"));
    }
    check_tall(x)?;
    let s = x.gram_rows();
    let (evals, q) = eig_hermitian_vectors(&s)?;
    ring_product_from_eigen(&evals, &q, l, seed)
}

pub(crate) fn ring_product_from_eigen(
    evals: &SpectrumSample,
    q: &DataMatrix,
    l: usize,
    seed: u64,
) -> Result<DataMatrix> {
    if l == 0 {
        return Err(invalid("ring product needs L >= 1"));
    }
    let mut acc = svd_equivalent_from_eigen(evals, q, seed)?;
    for k in 1..l {
        let next = svd_equivalent_from_eigen(evals, q, seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64)))?;
        acc = acc.matmul(&next)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_general, eig_hermitian, svd_values};

    #[test]
    fn gue_n1_is_real() {
        let m = sample_gue(&EnsembleSpec::gue(1, 3)).unwrap();
        assert_eq!(m.get(0, 0).im, 0.0);
    }

    #[test]
    fn gue_is_exactly_hermitian() {
        let m = sample_gue(&EnsembleSpec::gue(2, 11)).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0).conj());
        assert_eq!(m.hermitian_defect(), 0.0);
    }

    #[test]
    fn determinism() {
        let a = sample_ginibre(&EnsembleSpec::ginibre(6, 42)).unwrap();
        let b = sample_ginibre(&EnsembleSpec::ginibre(6, 42)).unwrap();
        let c = sample_ginibre(&EnsembleSpec::ginibre(6, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn lue_scalar_and_psd() {
        let w = sample_lue(&EnsembleSpec::lue(1, 4, 5)).unwrap();
        assert!(w.get(0, 0).re >= 0.0);
        let w = sample_lue(&EnsembleSpec::lue(30, 20, 5)).unwrap();
        let ev = eig_hermitian(&w).unwrap();
        assert!(ev.real().unwrap()[0] >= -1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(EnsembleSpec::gue(0, 1).validate().is_err());
        assert!(EnsembleSpec::gue(3, 1).with_sigma(0.0).validate().is_err());
        assert!(EnsembleSpec::lue(3, 0, 1).validate().is_err());
        assert!(sample_gue(&EnsembleSpec::lue(3, 3, 1)).is_err());
    }

    #[test]
    fn standardize_row_123() {
        let a = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let s = standardize(&a, 0).unwrap();
        let r = s.matrix.real_row(0).unwrap();
        let mean: f64 = r.iter().sum::<f64>() / 3.0;
        let var: f64 = r.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-15);
        assert!((var - 1.0).abs() < 1e-14);
        assert!(s.replaced_rows.is_empty());
        assert_eq!(s.matrix.role(), Role::Standardized);
    }

    #[test]
    fn standardize_is_idempotent() {
        let a = sample_gaussian_rect(&EnsembleSpec::gaussian_rect(4, 50, 9)).unwrap();
        let once = standardize(&a, 0).unwrap().matrix;
        let twice = standardize(&once, 0).unwrap().matrix;
        let (x, y) = (once.real_data().unwrap(), twice.real_data().unwrap());
        assert!(x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn standardize_replaces_constant_rows() {
        let a = DataMatrix::from_rows(&[vec![1.0, 2.0, 4.0, 0.0], vec![5.0; 4]]).unwrap();
        let s = standardize(&a, 17).unwrap();
        assert_eq!(s.replaced_rows, vec![1]);
        let r = s.matrix.real_row(1).unwrap();
        let var: f64 = r.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert!(standardize(&DataMatrix::from_rows(&[vec![f64::NAN, 1.0]]).unwrap(), 0).is_err());
    }

    #[test]
    fn haar_is_unitary() {
        let u = haar_unitary(12, 4).unwrap();
        let prod = u.adjoint().matmul(&u).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn isotropic_svd_equivalent_is_unitary() {
        // rows orthogonal with (1/T) X Xᵀ = I
        let x = DataMatrix::from_rows(&[vec![1.0, 1.0, -1.0, -1.0], vec![1.0, -1.0, 1.0, -1.0]]).unwrap();
        let xu = singular_value_equivalent(&x, 3).unwrap();
        let ev = eig_general(&xu).unwrap();
        for z in ev.complex() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_equivalent_preserves_singular_values() {
        let x = sample_gaussian_rect(&EnsembleSpec::gaussian_rect(7, 19, 8)).unwrap();
        let xu = singular_value_equivalent(&x, 1).unwrap();
        let a = svd_values(&xu).unwrap();
        let b = svd_values(&x.scaled(1.0 / 19f64.sqrt())).unwrap();
        let (a, b) = (a.real().unwrap(), b.real().unwrap());
        let k = a[6] / b[6];
        for i in 0..7 {
            assert!((a[i] - k * b[i]).abs() < 1e-10);
        }
        assert!((xu.frobenius_norm_sq() - 7.0).abs() < 1e-10);
        let wide = sample_gaussian_rect(&EnsembleSpec::gaussian_rect(5, 3, 8)).unwrap();
        assert!(singular_value_equivalent(&wide, 0).is_err());
    }
}
