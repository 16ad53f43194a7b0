use serde_json::{json, Value};

use crate::base::sets::endpoint_margin;
use crate::base::{Backend, ClosedInterval, ClosedSet, Ext, OpenInterval, OpenSet, SmoothExpr, Support};
use crate::error::{Error, Result};
use crate::formal::{FormalFunction, SupportedFormalFunction};
use crate::multiindex::MultiIndex;
use crate::scalar::{q_to_f64, Q};

/// Grid size for the numeric partition-of-unity check.
pub const POU_GRID: usize = 101;
/// Tolerance of that check.
pub const POU_GRID_TOL: f64 = 1e-12;

/// A finite open cover `{U_α}` of `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    whole: OpenSet,
    parts: Vec<OpenSet>,
}

impl Cover {
    pub fn new(whole: OpenSet, parts: Vec<OpenSet>) -> Result<Cover> {
        let mut union = match whole.backend() {
            Backend::Discrete => OpenSet::discrete::<&str>(&[]),
            Backend::Line => OpenSet::line(Vec::new()),
        };
        for (i, p) in parts.iter().enumerate() {
            whole.same_backend(p)?;
            if !p.is_subset(&whole) {
                return Err(Error::Precondition(format!("part {i} = {p} is not contained in {whole}")));
            }
            union = union.union(p)?;
        }
        if union != whole {
            return Err(Error::Precondition(format!("parts cover {union}, not {whole}")));
        }
        Ok(Cover { whole, parts })
    }

    pub fn whole(&self) -> &OpenSet {
        &self.whole
    }

    pub fn parts(&self) -> &[OpenSet] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn backend(&self) -> Backend {
        self.whole.backend()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "whole": self.whole.to_json(),
            "parts": self.parts.iter().map(OpenSet::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value, backend: Backend) -> Result<Cover> {
        let whole = OpenSet::from_json(
            v.get("whole").ok_or_else(|| Error::Parse("cover needs \"whole\"".into()))?,
            backend,
        )?;
        let parts = v
            .get("parts")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("cover needs a \"parts\" list".into()))?
            .iter()
            .map(|p| OpenSet::from_json(p, backend))
            .collect::<Result<Vec<_>>>()?;
        Cover::new(whole, parts)
    }
}

/// `y`-constant functions `f_α` with `supp f_α ∩ M ⊆ U_α` and `Σ f_α = 1` on `M`.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    cover: Cover,
    functions: Vec<SupportedFormalFunction>,
}

impl PartitionOfUnity {
    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub fn functions(&self) -> &[SupportedFormalFunction] {
        &self.functions
    }

    pub fn trunc(&self) -> u32 {
        self.functions.first().map(SupportedFormalFunction::trunc).unwrap_or(0)
    }

    /// `f_α|_{U_α}`.
    pub fn local(&self, alpha: usize) -> Result<FormalFunction> {
        self.functions[alpha].inner().restrict(&self.cover.parts[alpha])
    }

    /// `Σ f_α - 1` as a formal function on `M`; exactly zero on the discrete backend.
    pub fn defect(&self) -> Result<FormalFunction> {
        let m = self.cover.whole();
        let f0 = &self.functions[0];
        let mut sum = FormalFunction::zero(m.clone(), f0.k(), f0.trunc());
        for f in &self.functions {
            sum = sum.add(f.inner())?;
        }
        sum.sub(&FormalFunction::one(m.clone(), f0.k(), f0.trunc()))
    }

    /// Largest `|Σ f_α(x) - 1|` over `n` sample points per component of `M`.
    pub fn grid_residual(&self, n: usize) -> f64 {
        match self.cover.whole() {
            OpenSet::Discrete(_) => match self.defect() {
                Ok(d) if d.is_zero() => 0.0,
                _ => 1.0,
            },
            OpenSet::Line(comps) => {
                let zero = MultiIndex::zero(self.functions[0].k());
                let compiled: Vec<_> = self
                    .functions
                    .iter()
                    .filter_map(|f| match f.inner().coeff(&zero) {
                        crate::base::BaseFunction::Smooth(e) => Some(e.compile()),
                        _ => None,
                    })
                    .collect();
                let mut worst: f64 = 0.0;
                for c in comps {
                    let (a, b) = finite_window(c);
                    let (a, b) = (q_to_f64(&a), q_to_f64(&b));
                    for i in 1..=n {
                        let x = a + (b - a) * i as f64 / (n + 1) as f64;
                        let s: f64 = compiled.iter().map(|e| e.eval(x).re).sum();
                        worst = worst.max((s - 1.0).abs());
                    }
                }
                worst
            }
        }
    }
}

/// A bounded window inside a component: the component itself, or a
/// length-8 stretch next to its finite end.
pub(crate) fn finite_window(c: &OpenInterval) -> (Q, Q) {
    let eight = Q::from_integer(8.into());
    match (&c.lo, &c.hi) {
        (Ext::Fin(a), Ext::Fin(b)) => (a.clone(), b.clone()),
        (Ext::Fin(a), _) => (a.clone(), a + &eight),
        (_, Ext::Fin(b)) => (b - &eight, b.clone()),
        _ => (-eight.clone() / Q::from_integer(2.into()), eight / Q::from_integer(2.into())),
    }
}

/// Partition of unity subordinate to `cover`, with coefficients truncated at `trunc`.
pub fn build_pou(cover: &Cover, k: usize, trunc: u32) -> Result<PartitionOfUnity> {
    if cover.is_empty() {
        if cover.whole().is_empty() {
            return Ok(PartitionOfUnity {
                cover: cover.clone(),
                functions: Vec::new(),
            });
        }
        return Err(Error::Precondition("empty cover of a nonempty set".into()));
    }
    let functions = match cover.backend() {
        Backend::Discrete => discrete_pou(cover, k, trunc)?,
        Backend::Line => line_pou(cover, k, trunc)?,
    };
    let pou = PartitionOfUnity {
        cover: cover.clone(),
        functions,
    };
    let r = pou.grid_residual(POU_GRID);
    if r > POU_GRID_TOL {
        return Err(Error::Certificate(format!("partition of unity misses 1 by {r:e}")));
    }
    Ok(pou)
}

fn discrete_pou(cover: &Cover, k: usize, trunc: u32) -> Result<Vec<SupportedFormalFunction>> {
    let labels = cover.whole().labels().cloned().unwrap_or_default();
    let mut assigned: Vec<Vec<String>> = vec![Vec::new(); cover.len()];
    for p in &labels {
        let pt = crate::base::Point::Label(p.clone());
        if let Some(a) = cover.parts().iter().position(|u| u.contains(&pt)) {
            assigned[a].push(p.clone());
        }
    }
    assigned
        .iter()
        .map(|pts| SupportedFormalFunction::discrete_indicator(cover.whole().clone(), k, trunc, pts))
        .collect()
}

/// One side of a component bump: the edge breakpoints and the witness end.
enum Edge {
    Open,
    Ramp(Q, Q),
}

fn left_edge(m: &OpenSet, l: &Ext, delta: &Q) -> Result<(Edge, Ext)> {
    let Ext::Fin(l) = l else {
        return Ok((Edge::Open, Ext::NegInf));
    };
    if m.contains_coord(l) {
        let a = l + delta;
        let b = &a + delta;
        return Ok((Edge::Ramp(a.clone(), b), Ext::Fin(a)));
    }
    if m.components().iter().any(|c| c.hi == Ext::Fin(l.clone())) {
        return Err(Error::Precondition(format!(
            "the whole set has a point gap at {l}; no global bump separates its sides"
        )));
    }
    let a = l - delta;
    Ok((Edge::Ramp(a.clone(), l.clone()), Ext::Fin(a)))
}

fn right_edge(m: &OpenSet, r: &Ext, delta: &Q) -> Result<(Edge, Ext)> {
    let Ext::Fin(r) = r else {
        return Ok((Edge::Open, Ext::PosInf));
    };
    if m.contains_coord(r) {
        let d = r - delta;
        let c = &d - delta;
        return Ok((Edge::Ramp(c, d.clone()), Ext::Fin(d)));
    }
    if m.components().iter().any(|c| c.lo == Ext::Fin(r.clone())) {
        return Err(Error::Precondition(format!(
            "the whole set has a point gap at {r}; no global bump separates its sides"
        )));
    }
    let d = r + delta;
    Ok((Edge::Ramp(r.clone(), d.clone()), Ext::Fin(d)))
}

fn component_bump(m: &OpenSet, c: &OpenInterval, delta: &Q) -> Result<(SmoothExpr, ClosedInterval)> {
    let (le, lo) = left_edge(m, &c.lo, delta)?;
    let (re, hi) = right_edge(m, &c.hi, delta)?;
    let witness = ClosedInterval { lo, hi };
    let bound = ClosedSet::new(vec![witness.clone()]);
    let e = match (le, re) {
        (Edge::Ramp(a, b), Edge::Ramp(cc, d)) => SmoothExpr::bump(&a, &b, &cc, &d)?,
        (Edge::Ramp(a, b), Edge::Open) => SmoothExpr::rising_edge(&a, &b).with_support(&bound),
        (Edge::Open, Edge::Ramp(cc, d)) => SmoothExpr::falling_edge(&cc, &d).with_support(&bound),
        (Edge::Open, Edge::Open) => SmoothExpr::one(),
    };
    e.certify_quotients(&OpenSet::whole_line())?;
    Ok((e, witness))
}

fn line_pou(cover: &Cover, k: usize, trunc: u32) -> Result<Vec<SupportedFormalFunction>> {
    let m = cover.whole();
    let zero = MultiIndex::zero(k);
    let live: Vec<usize> = (0..cover.len()).filter(|&i| !cover.parts()[i].is_empty()).collect();
    if live.len() == 1 {
        return (0..cover.len())
            .map(|i| {
                if i == live[0] {
                    SupportedFormalFunction::with_closed_support(FormalFunction::one(m.clone(), k, trunc), m.closure())
                } else {
                    Ok(SupportedFormalFunction::zero(m.clone(), k, trunc))
                }
            })
            .collect();
    }

    let mut endpoints = Vec::new();
    for c in m.components().iter().chain(cover.parts().iter().flat_map(|p| p.components())) {
        endpoints.extend(c.lo.fin().cloned());
        endpoints.extend(c.hi.fin().cloned());
    }
    let delta = endpoint_margin(&endpoints) / Q::from_integer(2.into());

    let mut bumps = Vec::with_capacity(cover.len());
    for part in cover.parts() {
        let mut b = SmoothExpr::zero();
        let mut w = Vec::new();
        for c in part.components() {
            let (e, iv) = component_bump(m, c, &delta)?;
            b = b.add(&e);
            w.push(iv);
        }
        bumps.push((b, ClosedSet::new(w)));
    }
    let total = bumps.iter().fold(SmoothExpr::zero(), |acc, (b, _)| acc.add(b));
    crate::base::interval::certify_positive(&total, m)?;

    let mut out = Vec::with_capacity(cover.len());
    for ((b, w), part) in bumps.into_iter().zip(cover.parts()) {
        let witness = Support::Line(w);
        if !witness.relative_subset(m, part) {
            return Err(Error::SupportEscapes(format!("bump witness {witness} leaves {part}")));
        }
        let f = b.div_flat(&total);
        let inner = FormalFunction::monomial(m.clone(), k, trunc, zero.clone(), crate::base::BaseFunction::Smooth(f))?;
        out.push(SupportedFormalFunction::with_closed_support(inner, witness)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{BaseFunction, Point};
    use crate::scalar::{cq, q, Scalar};

    #[test]
    fn cover_must_cover() {
        let m = OpenSet::discrete(&["p", "q", "r"]);
        assert!(Cover::new(m.clone(), vec![OpenSet::discrete(&["p"]), OpenSet::discrete(&["q"])]).is_err());
        assert!(Cover::new(m.clone(), vec![OpenSet::discrete(&["p", "x"]), m.clone()]).is_err());
        assert!(Cover::new(m.clone(), vec![m]).is_ok());
    }

    #[test]
    fn single_part_is_one() {
        let m = OpenSet::bounded(q(0), q(1));
        let pou = build_pou(&Cover::new(m.clone(), vec![m.clone()]).unwrap(), 1, 2).unwrap();
        assert_eq!(pou.functions()[0].inner(), &FormalFunction::one(m, 1, 2));
        let d = OpenSet::discrete(&["p"]);
        let pou = build_pou(&Cover::new(d.clone(), vec![d.clone()]).unwrap(), 1, 2).unwrap();
        assert!(pou.defect().unwrap().is_zero());
    }

    #[test]
    fn discrete_first_match() {
        let m = OpenSet::discrete(&["p", "q", "r"]);
        let cover = Cover::new(m.clone(), vec![OpenSet::discrete(&["p", "q"]), OpenSet::discrete(&["q", "r"])]).unwrap();
        let pou = build_pou(&cover, 1, 1).unwrap();
        let z = MultiIndex::zero(1);
        assert_eq!(
            pou.functions()[0].inner().coeff(&z),
            BaseFunction::discrete(&[("p", cq(1)), ("q", cq(1))])
        );
        assert_eq!(pou.functions()[1].inner().coeff(&z), BaseFunction::discrete(&[("r", cq(1))]));
        assert!(pou.defect().unwrap().is_zero());
    }

    #[test]
    fn line_pou_sums_to_one() {
        let m = OpenSet::bounded(q(0), q(3));
        let cover = Cover::new(m, vec![OpenSet::bounded(q(0), q(2)), OpenSet::bounded(q(1), q(3))]).unwrap();
        let pou = build_pou(&cover, 1, 1).unwrap();
        assert!(pou.grid_residual(POU_GRID) <= 1e-12);
        // f_1 vanishes near 3, f_0 vanishes near 0's complement side past 2
        let z = MultiIndex::zero(1);
        let f0 = pou.functions()[0].inner().coeff(&z);
        assert_eq!(f0.eval(&Point::Coord(q(3))).unwrap(), Scalar::zero());
        assert_eq!(f0.eval(&Point::Coord(Q::new(1.into(), 4.into()))).unwrap(), Scalar::one());
    }

    #[test]
    fn unbounded_parts() {
        let m = OpenSet::whole_line();
        let cover = Cover::new(
            m,
            vec![
                OpenSet::interval(Ext::NegInf, Ext::Fin(q(1))),
                OpenSet::interval(Ext::Fin(q(0)), Ext::PosInf),
            ],
        )
        .unwrap();
        let pou = build_pou(&cover, 0, 0).unwrap();
        assert!(pou.grid_residual(POU_GRID) <= 1e-12);
    }

    #[test]
    fn point_gap_is_rejected() {
        let m = OpenSet::line(vec![
            OpenInterval { lo: Ext::Fin(q(0)), hi: Ext::Fin(q(1)) },
            OpenInterval { lo: Ext::Fin(q(1)), hi: Ext::Fin(q(2)) },
        ]);
        let cover = Cover::new(m.clone(), vec![OpenSet::bounded(q(0), q(1)), OpenSet::bounded(q(1), q(2))]).unwrap();
        assert!(matches!(build_pou(&cover, 0, 0), Err(Error::Precondition(_))));
    }
}
