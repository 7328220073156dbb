//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rmtgrid::linalg::DataMatrix;

fn col(z: &DataMatrix, i: usize) -> Vec<f64> {
    (0..z.rows()).map(|r| z.get(r, i).re).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// tr(Σ²) U-statistic by enumerating all distinct index tuples.
pub fn brute_trace_sq(z: &DataMatrix) -> f64 {
    let n = z.cols();
    let c: Vec<Vec<f64>> = (0..n).map(|i| col(z, i)).collect();
    let ip = |i: usize, j: usize| dot(&c[i], &c[j]);
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            s1 += ip(i, j).powi(2);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                s2 += ip(i, j) * ip(j, k);
                for h in 0..n {
                    if h == i || h == j || h == k {
                        continue;
                    }
                    s3 += ip(i, j) * ip(k, h);
                }
            }
        }
    }
    let nf = n as f64;
    s1 / (nf * (nf - 1.0)) - 2.0 * s2 / (nf * (nf - 1.0) * (nf - 2.0)) + s3 / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0))
}

/// tr(Σ_s Σ_t) two-sample U-statistic by enumeration.
pub fn brute_cross_trace(zs: &DataMatrix, zt: &DataMatrix) -> f64 {
    let (ns, nt) = (zs.cols(), zt.cols());
    let x: Vec<Vec<f64>> = (0..ns).map(|i| col(zs, i)).collect();
    let y: Vec<Vec<f64>> = (0..nt).map(|i| col(zt, i)).collect();
    let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..ns {
        for j in 0..nt {
            s1 += dot(&x[i], &y[j]).powi(2);
        }
    }
    for i in 0..ns {
        for h in 0..ns {
            if i == h {
                continue;
            }
            for j in 0..nt {
                s2 += dot(&x[i], &y[j]) * dot(&y[j], &x[h]);
            }
        }
    }
    for i in 0..nt {
        for k in 0..nt {
            if i == k {
                continue;
            }
            for j in 0..ns {
                s3 += dot(&y[i], &x[j]) * dot(&x[j], &y[k]);
            }
        }
    }
    for i in 0..ns {
        for h in 0..ns {
            if i == h {
                continue;
            }
            for j in 0..nt {
                for k in 0..nt {
                    if j == k {
                        continue;
                    }
                    s4 += dot(&x[i], &y[j]) * dot(&x[h], &y[k]);
                }
            }
        }
    }
    let (a, b) = (ns as f64, nt as f64);
    s1 / (a * b) - s2 / (a * b * (a - 1.0)) - s3 / (a * b * (b - 1.0)) + s4 / (a * b * (a - 1.0) * (b - 1.0))
}

/// Upper normal tail by composite Simpson integration of the density.
pub fn normal_tail_quadrature(x: f64) -> f64 {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (lo, hi) = if x >= 0.0 { (x, x + 40.0) } else { (-x, -x + 40.0) };
    let n = 400_000;
    let h = (hi - lo) / n as f64;
    let mut s = phi(lo) + phi(hi);
    for k in 1..n {
        s += phi(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let tail = s * h / 3.0;
    if x >= 0.0 { tail } else { 1.0 - tail }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
