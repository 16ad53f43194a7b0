//! Real interval arithmetic with outward rounding, used for positivity certificates.

use super::expr::{step_f64, SmoothExpr};
use super::sets::{Ext, OpenSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Iv {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

impl Iv {
    pub fn new(lo: f64, hi: f64) -> Iv {
        Iv { lo, hi }
    }

    pub fn point(x: f64) -> Iv {
        Iv { lo: x, hi: x }
    }

    pub fn hull(self, o: Iv) -> Iv {
        Iv::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    pub fn add(self, o: Iv) -> Iv {
        Iv::new(down(self.lo + o.lo), up(self.hi + o.hi))
    }

    pub fn mul(self, o: Iv) -> Option<Iv> {
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        if c.iter().any(|v| v.is_nan()) {
            return None;
        }
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(Iv::new(down(lo), up(hi)))
    }

    pub fn div(self, o: Iv) -> Option<Iv> {
        if o.lo <= 0.0 && o.hi >= 0.0 {
            return None;
        }
        let inv = Iv::new(down(1.0 / o.hi), up(1.0 / o.lo));
        self.mul(inv)
    }

    pub fn powi(self, n: u32) -> Option<Iv> {
        if n == 0 {
            return Some(Iv::point(1.0));
        }
        let mut acc = self;
        for _ in 1..n {
            acc = acc.mul(self)?;
        }
        if n % 2 == 0 {
            acc.lo = acc.lo.max(0.0);
        }
        Some(acc)
    }

    /// Image under the nondecreasing kernel `s`.
    pub fn step(self) -> Iv {
        let s = |t: f64| {
            if t == f64::INFINITY {
                1.0
            } else {
                step_f64(t)
            }
        };
        Iv::new(down(s(self.lo)).max(0.0), up(s(self.hi)).min(1.0))
    }
}

const MAX_DEPTH: u32 = 30;
const MAX_BOXES: usize = 100_000;

fn positive_on(e: &SmoothExpr, iv: Iv, depth: u32, boxes: &mut usize) -> bool {
    *boxes += 1;
    if *boxes > MAX_BOXES {
        return false;
    }
    if let Some(v) = e.eval_interval(iv) {
        if v.lo > 0.0 {
            return true;
        }
    }
    if depth == 0 || !iv.lo.is_finite() || !iv.hi.is_finite() {
        return false;
    }
    let mid = 0.5 * (iv.lo + iv.hi);
    positive_on(e, Iv::new(iv.lo, mid), depth - 1, boxes)
        && positive_on(e, Iv::new(mid, iv.hi), depth - 1, boxes)
}

/// Certify `e > 0` on the closure of each component of `region` by bisection.
///
/// Unbounded components are split into a bounded core, bisected, and two
/// tails that must be certified in one shot.
pub fn certify_positive(e: &SmoothExpr, region: &OpenSet) -> Result<()> {
    let r = 2.0 * (1.0 + e.constant_scale());
    for c in region.components() {
        let (lo, hi) = (c.lo.to_f64(), c.hi.to_f64());
        let mut pieces = Vec::new();
        match (&c.lo, &c.hi) {
            (Ext::Fin(_), Ext::Fin(_)) => pieces.push(Iv::new(lo, hi)),
            _ => {
                let core_lo = if lo.is_finite() {
                    lo
                } else if hi.is_finite() {
                    hi.min(0.0) - r
                } else {
                    -r
                };
                let core_hi = if hi.is_finite() {
                    hi
                } else if lo.is_finite() {
                    lo.max(0.0) + r
                } else {
                    r
                };
                if !lo.is_finite() {
                    pieces.push(Iv::new(f64::NEG_INFINITY, core_lo));
                }
                pieces.push(Iv::new(core_lo, core_hi));
                if !hi.is_finite() {
                    pieces.push(Iv::new(core_hi, f64::INFINITY));
                }
            }
        }
        for p in pieces {
            let mut boxes = 0;
            if !positive_on(e, p, MAX_DEPTH, &mut boxes) {
                return Err(Error::Certificate(format!(
                    "could not certify positivity on [{}, {}]",
                    p.lo, p.hi
                )));
            }
        }
    }
    if region.backend() != super::sets::Backend::Line {
        return Err(Error::BackendMismatch("certificates need the line backend".into()));
    }
    Ok(())
}
