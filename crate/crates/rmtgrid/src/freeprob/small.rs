//! Small dense complex matrices for operator-valued transforms (pencil size N ≤ ~8).

use std::ops::{Add, Mul, Sub};

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct SmallMat {
    n: usize,
    a: Vec<C>,
}

impl SmallMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![C::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, C::new(1.0, 0.0))
    }

    pub fn scalar(n: usize, s: C) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = s;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// Real matrix from row slices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| C::new(rows[i][j], 0.0))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C) {
        self.a[i * self.n + j] = v;
    }

    pub fn scale(&self, s: C) -> Self {
        Self { n: self.n, a: self.a.iter().map(|v| v * s).collect() }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn conj(&self) -> Self {
        Self { n: self.n, a: self.a.iter().map(|v| v.conj()).collect() }
    }

    /// Hermitian imaginary part `(A − Aᴴ)/(2i)`.
    pub fn im_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| (self.get(i, j) - self.get(j, i).conj()) / C::new(0.0, 2.0))
    }

    pub fn norm(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= tol))
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut inv = Self::identity(n).a;
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .expect("nonempty");
            if a[piv * n + col].norm() <= scale * 1e-300 || scale == 0.0 {
                return Err(Error::Contract("singular matrix in operator-valued transform".into()));
            }
            if piv != col {
                for k in 0..n {
                    a.swap(piv * n + k, col * n + k);
                    inv.swap(piv * n + k, col * n + k);
                }
            }
            let d = a[col * n + col].inv();
            for k in 0..n {
                a[col * n + k] *= d;
                inv[col * n + k] *= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r * n + col];
                    if f.norm() != 0.0 {
                        for k in 0..n {
                            let (ack, ick) = (a[col * n + k], inv[col * n + k]);
                            a[r * n + k] -= f * ack;
                            inv[r * n + k] -= f * ick;
                        }
                    }
                }
            }
        }
        let out = Self { n, a: inv };
        if !out.is_finite() {
            return Err(Error::Contract("singular matrix in operator-valued transform".into()));
        }
        Ok(out)
    }

    /// Eigen decomposition `A = S diag(θ) S⁻¹` (general complex matrix).
    pub fn eigen(&self) -> Result<(Vec<C>, Self)> {
        let m = Mat::<C>::from_fn(self.n, self.n, |i, j| self.get(i, j));
        let e = m.eigen().map_err(|e| Error::Backend(format!("{e:?}")))?;
        let s = e.S();
        let u = e.U();
        let vals = (0..self.n).map(|i| s[i]).collect();
        Ok((vals, Self::from_fn(self.n, |i, j| u[(i, j)])))
    }

    /// True when the Hermitian part of `A + tol·I` admits a Cholesky factorization.
    pub fn is_psd(&self, tol: f64) -> bool {
        let n = self.n;
        let h = Self::from_fn(n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i).conj()));
        let mut l = vec![C::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = h.get(j, j).re + tol;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let d = d.sqrt();
            l[j * n + j] = C::new(d, 0.0);
            for i in j + 1..n {
                let mut s = h.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / d;
            }
        }
        true
    }
}

impl Add for &SmallMat {
    type Output = SmallMat;
    fn add(self, o: &SmallMat) -> SmallMat {
        SmallMat { n: self.n, a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect() }
    }
}

impl Sub for &SmallMat {
    type Output = SmallMat;
    fn sub(self, o: &SmallMat) -> SmallMat {
        SmallMat { n: self.n, a: self.a.iter().zip(&o.a).map(|(x, y)| x - y).collect() }
    }
}

impl Mul for &SmallMat {
    type Output = SmallMat;
    fn mul(self, o: &SmallMat) -> SmallMat {
        let n = self.n;
        let mut out = SmallMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += x * o.a[k * n + j];
                }
            }
        }
        out
    }
}
