//! Adaptive Gauss-Kronrod (10/21) quadrature on finite intervals.
//!
//! The integrand is always pulled back through `x = a + (b-a) sin²θ`,
//! `dx = (b-a) sin 2θ dθ`, θ ∈ [0, π/2]. The Jacobian vanishes like
//! `sqrt(x-a)` and `sqrt(b-x)` at the ends, so inverse square-root endpoint
//! singularities become smooth and square-root edges (semicircle,
//! Marchenko-Pastur) lose their derivative blow-up.

use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_292_349,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7, 9).
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

const MAX_INTERVALS: usize = 4000;

/// One GK21 panel on `[lo, hi]` for a vector integrand of length `dim`.
/// Returns (kronrod, per-component |K - G|).
fn gk21(
    f: &mut dyn FnMut(f64, &mut [f64]),
    lo: f64,
    hi: f64,
    dim: usize,
    buf: &mut [f64],
) -> (Vec<f64>, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    f(c, buf);
    for d in 0..dim {
        k[d] += WGK[10] * buf[d];
    }
    for i in 0..10 {
        let dx = h * XGK[i];
        for &x in &[c - dx, c + dx] {
            f(x, buf);
            for d in 0..dim {
                k[d] += WGK[i] * buf[d];
                if i % 2 == 1 {
                    g[d] += WG[i / 2] * buf[d];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        err = err.max((k[d] - g[d]).abs());
    }
    (k, err)
}

struct Panel {
    lo: f64,
    hi: f64,
    value: Vec<f64>,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive integration of a vector-valued `g` over `[lo, hi]` (no substitution).
/// `g(x, out)` fills `out` with `dim` components. The error criterion is the
/// max-component sum of panel estimates.
pub fn adaptive_vec(
    mut g: impl FnMut(f64, &mut [f64]),
    lo: f64,
    hi: f64,
    dim: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let mut buf = vec![0.0; dim];
    let (v, e) = gk21(&mut g, lo, hi, dim, &mut buf);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { lo, hi, value: v, err: e });
    let mut total_err = e;
    loop {
        let sum = sum_panels(&heap, dim);
        let scale = sum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sum.iter().any(|x| !x.is_finite()) {
            return Err(Error::Quadrature {
                estimate: sum[0],
                error: f64::INFINITY,
            });
        }
        if total_err <= tol || total_err <= 64.0 * f64::EPSILON * scale {
            return Ok(sum);
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                estimate: sum[0],
                error: total_err,
            });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            // interval exhausted at machine resolution
            return Err(Error::Quadrature {
                estimate: sum[0],
                error: total_err,
            });
        }
        let (v1, e1) = gk21(&mut g, worst.lo, mid, dim, &mut buf);
        let (v2, e2) = gk21(&mut g, mid, worst.hi, dim, &mut buf);
        total_err += e1 + e2 - worst.err;
        heap.push(Panel { lo: worst.lo, hi: mid, value: v1, err: e1 });
        heap.push(Panel { lo: mid, hi: worst.hi, value: v2, err: e2 });
        // refresh the running error to avoid drift from cancellation
        if heap.len() % 64 == 0 {
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
}

fn sum_panels(heap: &BinaryHeap<Panel>, dim: usize) -> Vec<f64> {
    let mut s = vec![0.0; dim];
    for p in heap.iter() {
        for d in 0..dim {
            s[d] += p.value[d];
        }
    }
    s
}

/// `∫_a^b f(x) dx` to absolute tolerance `tol`, robust to `(x-a)^(-1/2)`-type
/// endpoint singularities. On failure the error carries the best estimate.
pub fn quad_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    quad_integrate_vec(|x, out| out[0] = f(x), a, b, 1, tol).map(|v| v[0])
}

/// Vector-valued variant of [`quad_integrate`] with the same substitution.
pub fn quad_integrate_vec(
    mut f: impl FnMut(f64, &mut [f64]),
    a: f64,
    b: f64,
    dim: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("integration limits must be finite"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let w = hi - lo;
    let mut inner = vec![0.0; dim];
    let g = |theta: f64, out: &mut [f64]| {
        let s = theta.sin();
        let x = lo + w * s * s;
        let jac = w * (2.0 * theta).sin();
        if jac == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        f(x, &mut inner);
        for d in 0..dim {
            out[d] = inner[d] * jac;
        }
    };
    let v = adaptive_vec(g, 0.0, FRAC_PI_2, dim, tol)?;
    Ok(v.into_iter().map(|x| sign * x).collect())
}

/// Bisection on a sign-changing bracket `[a, b]` until the width is below `tol`.
pub fn bisect_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(invalid(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
