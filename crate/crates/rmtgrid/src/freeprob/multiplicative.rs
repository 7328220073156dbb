//! Free multiplicative convolution of laws on `[0, ∞)` via scalar subordination.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::transforms::CauchyEvaluator;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplicativeConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MultiplicativeConfig {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 50_000 }
    }
}

/// `η(w) = 1 − w / G(1/w)` for `w ∈ ℂ⁺`.
fn eta(g: &CauchyEvaluator, w: C) -> Result<C> {
    // 1/w lies in the lower half-plane; evaluate by reflection
    let gz = g.cauchy(w.inv().conj())?.conj();
    if gz.norm() == 0.0 {
        return Err(Error::Contract("vanishing Cauchy transform in eta".into()));
    }
    Ok(1.0 - w / gz)
}

/// Cauchy transform of `a ⊠ b` at `ζ` off the real axis. Both laws must live on
/// `[0, ∞)` with positive mean.
///
/// With `z = conj(1/ζ) ∈ ℂ⁺` and `h(w) = η(w)/w`, iterates
/// `ω ← z·h_b(z·h_a(ω))` to its fixed point; then `η_{ab}(z) = η_a(ω)`.
pub fn free_multiplicative_cauchy(
    a: &CauchyEvaluator,
    b: &CauchyEvaluator,
    zeta: C,
    cfg: &MultiplicativeConfig,
) -> Result<C> {
    if zeta.im == 0.0 || !(zeta.re.is_finite() && zeta.im.is_finite()) {
        return Err(invalid("free multiplicative Cauchy transform is evaluated off the real axis"));
    }
    if !(a.mean() > 0.0 && b.mean() > 0.0) {
        return Err(invalid("free multiplicative convolution needs laws on [0, inf) with positive mean"));
    }
    let flip = zeta.im < 0.0;
    let zeta = if flip { zeta.conj() } else { zeta };
    let z = zeta.inv().conj();
    let h = |g: &CauchyEvaluator, w: C| -> Result<C> { Ok(eta(g, w)? / w) };
    let mut omega = z;
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let w2 = z * h(a, omega)?;
        if !(w2.im > 0.0) {
            return Err(Error::Contract("multiplicative subordination left the upper half-plane".into()));
        }
        let next = z * h(b, w2)?;
        residual = (next - omega).norm();
        omega = next;
        if !(omega.im > 0.0) || !residual.is_finite() {
            return Err(Error::Contract("multiplicative subordination left the upper half-plane".into()));
        }
        if residual <= cfg.tol * (1.0 + omega.norm()) {
            let e = eta(a, omega)?;
            // ψ(1/ζ) = conj ψ(z), and G(ζ) = (1 + ψ(1/ζ))/ζ
            let psi = (e / (1.0 - e)).conj();
            let g = (1.0 + psi) / zeta;
            return Ok(if flip { g.conj() } else { g });
        }
    }
    Err(Error::NoConvergence { what: "multiplicative subordination", iterations: cfg.max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::LawSpec;

    fn mp(c: f64) -> CauchyEvaluator {
        CauchyEvaluator::from_law(LawSpec::marchenko_pastur(c).unwrap()).unwrap()
    }

    #[test]
    fn point_mass_rescales() {
        let a = mp(0.5);
        let s = 2.5;
        for zeta in [C::new(1.0, 0.5), C::new(-0.3, 0.1), C::new(4.0, -1.0)] {
            let g = free_multiplicative_cauchy(&a, &CauchyEvaluator::point_mass(s), zeta, &Default::default()).unwrap();
            let want = a.cauchy(zeta / s).unwrap() / s;
            assert!((g - want).norm() < 1e-10, "{zeta}: {g} vs {want}");
        }
    }

    #[test]
    fn free_poisson_square_has_fuss_catalan_moments() {
        // moments of the product of two free Poisson(1) laws: C(3k, k)/(2k + 1)
        let fc = |k: u64| -> f64 {
            let mut num = 1.0;
            for i in 0..k {
                num *= (3 * k - i) as f64 / (k - i) as f64;
            }
            num / (2 * k + 1) as f64
        };
        let zeta = C::new(30.0, 10.0);
        let series: C = (0..40).map(|k| fc(k) / zeta.powu(k as u32 + 1)).sum();
        let g = free_multiplicative_cauchy(&mp(1.0), &mp(1.0), zeta, &Default::default()).unwrap();
        assert!((g - series).norm() < 1e-12, "{g} vs {series}");
    }

    #[test]
    fn symmetric_in_arguments() {
        let zeta = C::new(0.7, 0.4);
        let g1 = free_multiplicative_cauchy(&mp(0.3), &mp(0.8), zeta, &Default::default()).unwrap();
        let g2 = free_multiplicative_cauchy(&mp(0.8), &mp(0.3), zeta, &Default::default()).unwrap();
        assert!((g1 - g2).norm() < 1e-9);
    }

    #[test]
    fn rejects_real_axis_and_signed_laws() {
        assert!(free_multiplicative_cauchy(&mp(0.5), &mp(0.5), C::new(1.0, 0.0), &Default::default()).is_err());
        let sc = CauchyEvaluator::from_law(LawSpec::semicircle(1.0).unwrap()).unwrap();
        assert!(free_multiplicative_cauchy(&sc, &mp(0.5), C::new(1.0, 1.0), &Default::default()).is_err());
    }
}
