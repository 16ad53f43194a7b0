//! Adaptive Gauss–Kronrod quadrature for complex-valued smooth integrands,
//! plus exact antiderivatives for polynomials.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num::complex::Complex64;
use num::Zero;
use once_cell::sync::Lazy;

use crate::error::{Error, Result};
use crate::scalar::{cq_from_q, CQ, Q};

/// Environment variable overriding the default evaluation budget.
pub const BUDGET_ENV: &str = "FORMALCALC_QUAD_BUDGET";

const DEFAULT_BUDGET: usize = 1_000_000;

static ENV_BUDGET: Lazy<Option<usize>> =
    Lazy::new(|| std::env::var(BUDGET_ENV).ok().and_then(|v| v.trim().parse().ok()));

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    /// Requested absolute tolerance for the whole integral.
    pub abs_tol: f64,
    /// Maximum number of integrand evaluations.
    pub max_evals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-10,
            max_evals: ENV_BUDGET.unwrap_or(DEFAULT_BUDGET),
        }
    }
}

// 15-point Kronrod nodes on [-1, 1] (nonnegative half) with weights; the
// 7-point Gauss rule uses the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Integrate `f` over the bounded ranges `[a, b]`, refining the worst segment first.
pub fn integrate_adaptive<F: FnMut(f64) -> Complex64>(
    mut f: F,
    ranges: &[(f64, f64)],
    cfg: QuadConfig,
) -> Result<Complex64> {
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut total = Complex64::zero();
    let mut total_err = 0.0;
    for &(a, b) in ranges {
        if !(b > a) {
            continue;
        }
        // seed with a few panels so narrow features are not missed
        let n = 8;
        for i in 0..n {
            let lo = a + (b - a) * i as f64 / n as f64;
            let hi = a + (b - a) * (i + 1) as f64 / n as f64;
            let (value, err) = kronrod(&mut f, lo, hi);
            evals += 15;
            total += value;
            total_err += err;
            heap.push(Segment { a: lo, b: hi, value, err });
        }
    }
    while total_err > cfg.abs_tol {
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::Quadrature {
                evaluations: evals,
                estimate: f64::INFINITY,
            });
        }
        if evals + 30 > cfg.max_evals {
            return Err(Error::Quadrature {
                evaluations: evals,
                estimate: total_err,
            });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // cannot split further in floating point
            return Err(Error::Quadrature {
                evaluations: evals,
                estimate: total_err,
            });
        }
        let (v1, e1) = kronrod(&mut f, seg.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, seg.b);
        evals += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
        // recompute occasionally to stop drift in the running sums
        if heap.len() % 512 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
    Ok(total)
}

/// Exact `∫_a^b p(x) dx` for a dense coefficient vector.
pub fn integrate_poly(coeffs: &[CQ], a: &Q, b: &Q) -> CQ {
    let mut acc = CQ::zero();
    let mut pa = a.clone();
    let mut pb = b.clone();
    for (i, c) in coeffs.iter().enumerate() {
        // ∫ c x^i = c (b^{i+1} - a^{i+1}) / (i+1)
        let denom = Q::from_integer((i as i64 + 1).into());
        acc = acc + c * cq_from_q((&pb - &pa) / denom);
        pa *= a;
        pb *= b;
    }
    acc
}

/// Evaluate a dense polynomial exactly.
pub fn eval_poly(coeffs: &[CQ], x: &Q) -> CQ {
    coeffs
        .iter()
        .rev()
        .fold(CQ::zero(), |acc, c| acc * cq_from_q(x.clone()) + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qr};
    use num::One;

    #[test]
    fn exact_polynomial_integral() {
        // ∫_0^1 x^2 = 1/3
        let p = vec![CQ::zero(), CQ::zero(), CQ::one()];
        assert_eq!(integrate_poly(&p, &q(0), &q(1)), cq_from_q(qr(1, 3)));
    }

    #[test]
    fn adaptive_matches_closed_forms() {
        let v = integrate_adaptive(|x| Complex64::new(x.sin(), 0.0), &[(0.0, std::f64::consts::PI)], QuadConfig::default())
            .unwrap();
        assert!((v.re - 2.0).abs() < 1e-10);
        let v = integrate_adaptive(
            |x| Complex64::new(0.0, (-x * x).exp()),
            &[(-10.0, 10.0)],
            QuadConfig::default(),
        )
        .unwrap();
        assert!((v.im - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadConfig {
            abs_tol: 1e-14,
            max_evals: 200,
        };
        let r = integrate_adaptive(|x| Complex64::new(1.0 / x.abs().sqrt().max(1e-300), 0.0), &[(-1.0, 1.0)], cfg);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
