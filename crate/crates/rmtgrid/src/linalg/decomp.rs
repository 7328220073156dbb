use faer::{Mat, Side};
use num_complex::Complex64;

use super::matrix::{DataMatrix, SpectrumKind, SpectrumSample, HERMITIAN_TOL};
use crate::error::{invalid, Error, Result};

fn check_finite(a: &DataMatrix) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(invalid("matrix has non-finite entries"))
    }
}

fn check_hermitian(a: &DataMatrix) -> Result<()> {
    check_finite(a)?;
    if !a.is_square() {
        return Err(Error::Contract(format!("expected a square Hermitian matrix, got {}x{}", a.rows(), a.cols())));
    }
    if a.is_hermitian_tagged() {
        return Ok(());
    }
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL * a.max_abs() {
        return Err(Error::Contract(format!("matrix is not Hermitian (defect {defect:e})")));
    }
    Ok(())
}

fn backend<E: std::fmt::Debug>(e: E) -> Error {
    Error::Backend(format!("{e:?}"))
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn eig_hermitian(a: &DataMatrix) -> Result<SpectrumSample> {
    check_hermitian(a)?;
    let vals = if a.is_complex() {
        a.to_faer_complex().self_adjoint_eigenvalues(Side::Lower).map_err(backend)?
    } else {
        a.to_faer_real()?.self_adjoint_eigenvalues(Side::Lower).map_err(backend)?
    };
    SpectrumSample::from_real(vals, (a.rows(), None), SpectrumKind::EigenHermitian)
}

/// Eigenvalues plus unitary eigenvectors `Q` (columns) with `A = Q diag(vals) Q^H`.
pub fn eig_hermitian_vectors(a: &DataMatrix) -> Result<(SpectrumSample, DataMatrix)> {
    check_hermitian(a)?;
    let (vals, q) = if a.is_complex() {
        let e = a.to_faer_complex().self_adjoint_eigen(Side::Lower).map_err(backend)?;
        let s = e.S();
        let vals: Vec<f64> = (0..a.rows()).map(|i| s[i].re).collect();
        (vals, DataMatrix::from_faer_complex(&e.U().to_owned()))
    } else {
        let e = a.to_faer_real()?.self_adjoint_eigen(Side::Lower).map_err(backend)?;
        let s = e.S();
        let vals: Vec<f64> = (0..a.rows()).map(|i| s[i]).collect();
        (vals, DataMatrix::from_faer_real(&e.U().to_owned()))
    };
    // faer returns nondecreasing eigenvalues, so column order already matches.
    let spec = SpectrumSample::from_real(vals, (a.rows(), None), SpectrumKind::EigenHermitian)?;
    Ok((spec, q))
}

/// Complex eigenvalues of a general square matrix.
pub fn eig_general(a: &DataMatrix) -> Result<SpectrumSample> {
    check_finite(a)?;
    if !a.is_square() {
        return Err(Error::Shape(format!("eigenvalues need a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let vals = if a.is_complex() {
        a.to_faer_complex().eigenvalues().map_err(backend)?
    } else {
        a.to_faer_real()?.eigenvalues().map_err(backend)?
    };
    SpectrumSample::from_complex(vals, (a.rows(), None))
}

/// Singular values, ascending.
pub fn svd_values(a: &DataMatrix) -> Result<SpectrumSample> {
    check_finite(a)?;
    let vals = if a.is_complex() {
        a.to_faer_complex().singular_values().map_err(backend)?
    } else {
        a.to_faer_real()?.singular_values().map_err(backend)?
    };
    let vals = vals.into_iter().map(|v| v.max(0.0)).collect();
    SpectrumSample::from_real(vals, (a.rows(), Some(a.cols())), SpectrumKind::Singular)
}

/// Applies `f` to the eigenvalues of a Hermitian matrix: `Q f(Λ) Q^H`.
pub fn hermitian_function(a: &DataMatrix, f: impl Fn(f64) -> f64) -> Result<DataMatrix> {
    let (spec, q) = eig_hermitian_vectors(a)?;
    let vals: Vec<f64> = spec.real()?.iter().map(|&v| f(v)).collect();
    let n = a.rows();
    if q.is_complex() {
        let qm = q.to_faer_complex();
        let scaled = Mat::from_fn(n, n, |i, j| qm[(i, j)] * vals[j]);
        let out = &scaled * qm.adjoint();
        DataMatrix::from_faer_complex(&out).into_hermitian_lossy()
    } else {
        let qm = q.to_faer_real()?;
        let scaled = Mat::from_fn(n, n, |i, j| qm[(i, j)] * vals[j]);
        let out = &scaled * qm.transpose();
        DataMatrix::from_faer_real(&out).into_hermitian_lossy()
    }
}

impl DataMatrix {
    /// Symmetrizes away rounding asymmetry and tags the result Hermitian.
    fn into_hermitian_lossy(self) -> Result<DataMatrix> {
        let n = self.rows();
        if self.is_complex() {
            DataMatrix::from_fn_complex(n, n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i).conj()))?.into_hermitian()
        } else {
            let v = self.real_data_or_err()?;
            DataMatrix::from_fn_real(n, n, |i, j| 0.5 * (v[i * n + j] + v[j * n + i]))?.into_hermitian()
        }
    }
}

/// Determinant via partial-pivot LU (complex arithmetic).
pub fn determinant(a: &DataMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::Shape("determinant needs a square matrix".into()));
    }
    let n = a.rows();
    let mut m = a.to_complex_vec();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i * n + k].norm().total_cmp(&m[j * n + k].norm()))
            .unwrap_or(k);
        if m[p * n + k].norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if p != k {
            for j in 0..n {
                m.swap(p * n + j, k * n + j);
            }
            det = -det;
        }
        let piv = m[k * n + k];
        det *= piv;
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            for j in k..n {
                let t = m[k * n + j];
                m[i * n + j] -= f * t;
            }
        }
    }
    Ok(det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Complex64> = (0..n * n).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        DataMatrix::from_fn_complex(n, n, |i, j| x[i * n + j] + x[j * n + i].conj())
            .unwrap()
            .into_hermitian()
            .unwrap()
    }

    #[test]
    fn identity_and_swap() {
        let s = eig_hermitian(&DataMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(s.real().unwrap(), &[1.0, 1.0]);
        let a = DataMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = eig_hermitian(&a).unwrap();
        let v = s.real().unwrap();
        assert!((v[0] + 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trace_identity_8x8() {
        let a = random_hermitian(8, 3);
        let s = eig_hermitian(&a).unwrap();
        let sum: f64 = s.real().unwrap().iter().sum();
        assert!((sum - a.trace().re).abs() < 1e-10);
    }

    #[test]
    fn reconstruction_residual() {
        let a = random_hermitian(12, 5);
        let (s, q) = eig_hermitian_vectors(&a).unwrap();
        let vals = s.real().unwrap();
        let n = 12;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r: Complex64 = (0..n).map(|k| q.get(i, k) * vals[k] * q.get(j, k).conj()).sum();
                err += (r - a.get(i, j)).norm_sqr();
            }
        }
        assert!(err.sqrt() / a.frobenius_norm_sq().sqrt() < 1e-10);
    }

    #[test]
    fn non_hermitian_and_non_finite_rejected() {
        let a = DataMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!(matches!(eig_hermitian(&a), Err(Error::Contract(_))));
        let b = DataMatrix::from_rows(&[vec![f64::NAN, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eig_hermitian(&b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn general_eigenvalue_examples() {
        let d = DataMatrix::from_complex(2, 2, vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 3.0)]).unwrap();
        let v = eig_general(&d).unwrap().complex();
        assert!(v.iter().any(|z| (z - c(2.0, 0.0)).norm() < 1e-12));
        assert!(v.iter().any(|z| (z - c(0.0, 3.0)).norm() < 1e-12));

        let rot = DataMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let v = eig_general(&rot).unwrap().complex();
        assert!(v.iter().any(|z| (z - c(0.0, 1.0)).norm() < 1e-12));
        assert!(v.iter().any(|z| (z - c(0.0, -1.0)).norm() < 1e-12));

        // companion of z^2 - 1; roots are +-1
        let comp = DataMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let v = eig_general(&comp).unwrap().complex();
        assert!((v[0] - c(-1.0, 0.0)).norm() < 1e-12 && (v[1] - c(1.0, 0.0)).norm() < 1e-12);

        assert!(matches!(eig_general(&DataMatrix::from_real(2, 3, vec![0.0; 6]).unwrap()), Err(Error::Shape(_))));
    }

    #[test]
    fn eigenvalue_product_is_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let a = DataMatrix::from_fn_real(n, n, |i, j| rng.random::<f64>() + if i == j { 3.0 } else { 0.0 }).unwrap();
        let prod: Complex64 = eig_general(&a).unwrap().complex().iter().product();
        let det = determinant(&a).unwrap();
        assert!((prod - det).norm() / det.norm() < 1e-8);
    }

    #[test]
    fn svd_examples() {
        let s = svd_values(&DataMatrix::identity(3).unwrap()).unwrap();
        assert_eq!(s.real().unwrap().len(), 3);
        assert!(s.real().unwrap().iter().all(|v| (v - 1.0).abs() < 1e-14));

        let u = [0.6, 0.8];
        let w = [1.0 / 3f64.sqrt(); 3];
        let r1 = DataMatrix::from_fn_real(2, 3, |i, j| u[i] * w[j]).unwrap();
        let v = svd_values(&r1).unwrap();
        let v = v.real().unwrap();
        assert!(v[0].abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DataMatrix::from_fn_real(5, 3, |_, _| rng.random::<f64>() - 0.5).unwrap();
        let ss: f64 = svd_values(&a).unwrap().real().unwrap().iter().map(|x| x * x).sum();
        assert!((ss - a.frobenius_norm_sq()).abs() < 1e-10);
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let a = random_hermitian(5, 9);
        let psd = a.matmul(&a).unwrap();
        let r = hermitian_function(&psd, |x| x.max(0.0).sqrt()).unwrap();
        let back = r.matmul(&r).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((back.get(i, j) - psd.get(i, j)).norm() < 1e-10);
            }
        }
    }
}
