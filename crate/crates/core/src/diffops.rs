//! Compactly supported differential operators in normal form
//! `Σ τ_{I,L} ∘ ∂_x^I ∂_y^L`.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::base::{BaseDensity, BaseFunction, OpenSet, Support};
use crate::densities::{DistributionalBaseDensity, FormalDensity};
use crate::error::{Error, Result};
use crate::formal::{leibniz, x_order, FormalFunction, SupportedFormalFunction};
use crate::multiindex::MultiIndex;
use crate::scalar::{cq_from_q, q_to_f64, Q};

/// Stack `(I, L)`: x-derivative index and y-derivative index.
pub type Stack = (MultiIndex, MultiIndex);

fn factorial_cq(l: &MultiIndex) -> crate::scalar::CQ {
    cq_from_q(Q::from_integer(l.factorial()))
}

/// Operator from formal functions to base densities.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityDiffOp {
    domain: OpenSet,
    k: usize,
    terms: BTreeMap<Stack, BaseDensity>,
}

impl DensityDiffOp {
    pub fn new(domain: OpenSet, k: usize, terms: BTreeMap<Stack, BaseDensity>) -> Result<DensityDiffOp> {
        let backend = domain.backend();
        for ((i, l), tau) in &terms {
            if l.len() != k {
                return Err(Error::LengthMismatch(l.len(), k));
            }
            x_order(backend, i)?;
            if tau.backend() != backend {
                return Err(Error::BackendMismatch("operator coefficient".into()));
            }
        }
        let d = DensityDiffOp {
            domain,
            k,
            terms: terms.into_iter().filter(|(_, t)| !t.is_zero()).collect(),
        };
        let s = d.support();
        if !s.compact_subset_of(&d.domain) {
            return Err(Error::SupportEscapes(format!("{s} is not compact in {}", d.domain)));
        }
        Ok(d)
    }

    pub fn zero(domain: OpenSet, k: usize) -> DensityDiffOp {
        DensityDiffOp {
            domain,
            k,
            terms: BTreeMap::new(),
        }
    }

    /// `τ ∘ ∂_x^I ∂_y^L`.
    pub fn term(domain: OpenSet, k: usize, i: MultiIndex, l: MultiIndex, tau: BaseDensity) -> Result<DensityDiffOp> {
        DensityDiffOp::new(domain, k, BTreeMap::from([((i, l), tau)]))
    }

    pub fn domain(&self) -> &OpenSet {
        &self.domain
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> &BTreeMap<Stack, BaseDensity> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum `|I| + |L|` over nonzero terms.
    pub fn order(&self) -> u32 {
        self.terms
            .keys()
            .map(|(i, l)| i.degree() + l.degree())
            .max()
            .unwrap_or(0)
    }

    /// Maximum `|L|` over nonzero terms; the truncation an argument needs.
    pub fn y_order(&self) -> u32 {
        self.terms.keys().map(|(_, l)| l.degree()).max().unwrap_or(0)
    }

    pub fn support(&self) -> Support {
        let b = self.domain.backend();
        self.terms
            .values()
            .fold(Support::empty(b), |acc, t| acc.union(&t.support()).unwrap_or(acc))
    }

    pub fn add(&self, other: &DensityDiffOp) -> Result<DensityDiffOp> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        if self.k != other.k {
            return Err(Error::DegreeMismatch(self.k, other.k));
        }
        let mut terms = self.terms.clone();
        for (s, t) in &other.terms {
            let v = match terms.remove(s) {
                Some(prev) => prev.add(t)?,
                None => t.clone(),
            };
            if !v.is_zero() {
                terms.insert(s.clone(), v);
            }
        }
        Ok(DensityDiffOp {
            domain: self.domain.clone(),
            k: self.k,
            terms,
        })
    }

    /// `D(u) = Σ τ_{I,L} · L! · ∂_x^I u_L`.
    pub fn apply(&self, u: &FormalFunction) -> Result<BaseDensity> {
        if &self.domain != u.domain() {
            return Err(Error::DomainMismatch);
        }
        if self.k != u.k() {
            return Err(Error::DegreeMismatch(self.k, u.k()));
        }
        if !self.is_zero() && self.y_order() > u.trunc() {
            return Err(Error::Truncation {
                needed: self.y_order(),
                have: u.trunc(),
            });
        }
        let mut acc = BaseDensity::zero(self.domain.backend());
        for ((i, l), tau) in &self.terms {
            let g = u.coeff(l).derivative(x_order(self.domain.backend(), i)?)?;
            acc = acc.add(&tau.mul_function(&g)?.scale(&factorial_cq(l)))?;
        }
        Ok(acc)
    }

    /// `f ∘ D`: multiply every coefficient by the reduction `f_0`.
    pub fn postcompose_function(&self, f: &FormalFunction) -> Result<DensityDiffOp> {
        if &self.domain != f.domain() {
            return Err(Error::DomainMismatch);
        }
        let f0 = f.coeff(&MultiIndex::zero(f.k()));
        let mut terms = BTreeMap::new();
        for (s, t) in &self.terms {
            let v = t.mul_function(&f0)?;
            if !v.is_zero() {
                terms.insert(s.clone(), v);
            }
        }
        Ok(DensityDiffOp {
            domain: self.domain.clone(),
            k: self.k,
            terms,
        })
    }

    /// `D ∘ f`, renormalized by the Leibniz rule so that `(D∘f)(u) = D(f u)`.
    pub fn precompose_function(&self, f: &FormalFunction) -> Result<DensityDiffOp> {
        if &self.domain != f.domain() {
            return Err(Error::DomainMismatch);
        }
        if self.k != f.k() {
            return Err(Error::DegreeMismatch(self.k, f.k()));
        }
        let mut terms: BTreeMap<Stack, BaseDensity> = BTreeMap::new();
        for ((i, l), tau) in &self.terms {
            for t in leibniz(i, l, f)? {
                let d = tau.mul_function(&t.factor)?;
                let key = (t.i, t.j);
                let v = match terms.remove(&key) {
                    Some(prev) => prev.add(&d)?,
                    None => d,
                };
                if !v.is_zero() {
                    terms.insert(key, v);
                }
            }
        }
        Ok(DensityDiffOp {
            domain: self.domain.clone(),
            k: self.k,
            terms,
        })
    }

    /// `ρ(D) = Σ (τ_{I,L} ∂_x^I) (y*)^L`.
    pub fn rho(&self) -> FormalDensity {
        let mut coeffs: BTreeMap<MultiIndex, DistributionalBaseDensity> = BTreeMap::new();
        for ((i, l), tau) in &self.terms {
            let c = coeffs.entry(l.clone()).or_default();
            // keys are unique, so add_term never has to merge
            let _ = c.add_term(i.clone(), tau.clone());
        }
        FormalDensity::from_parts(self.domain.clone(), self.k, coeffs)
    }

    /// Extension by zero to `U ⊇ V`.
    pub fn ext(&self, u: &OpenSet) -> Result<DensityDiffOp> {
        if !self.domain.is_subset(u) {
            return Err(Error::NotSubset);
        }
        Ok(DensityDiffOp {
            domain: u.clone(),
            k: self.k,
            terms: self.terms.clone(),
        })
    }

    /// Restriction to `V`; the support must be compact in `V`.
    pub fn restrict_op(&self, v: &OpenSet) -> Result<DensityDiffOp> {
        if !v.is_subset(&self.domain) {
            return Err(Error::NotSubset);
        }
        let s = self.support();
        if !s.compact_subset_of(v) {
            return Err(Error::SupportEscapes(format!("{s} is not compact in {v}")));
        }
        Ok(DensityDiffOp {
            domain: v.clone(),
            k: self.k,
            terms: self
                .terms
                .iter()
                .map(|(s, t)| (s.clone(), t.restrict(v)))
                .filter(|(_, t)| !t.is_zero())
                .collect(),
        })
    }

    /// `{"terms": [{"I": [...], "L": [...], "coeff": density}, ...]}`.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|((i, l), t)| json!({"I": i, "L": l, "coeff": t.to_json()}))
            .collect();
        json!({ "terms": terms })
    }

    pub fn from_json(v: &Value, domain: &OpenSet, k: usize) -> Result<DensityDiffOp> {
        let backend = domain.backend();
        let items = v
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("operator needs a \"terms\" list".into()))?;
        let mut terms: BTreeMap<Stack, BaseDensity> = BTreeMap::new();
        for it in items {
            let i = match it.get("I") {
                Some(i) => parse_index(i)?,
                None => MultiIndex::zero(backend.x_dim()),
            };
            let l = match it.get("L") {
                Some(l) => parse_index(l)?,
                None => MultiIndex::zero(k),
            };
            let c = it
                .get("coeff")
                .ok_or_else(|| Error::Parse("operator term needs \"coeff\"".into()))?;
            let c = BaseDensity::from_json(c, backend)?;
            let key = (i, l);
            let v = match terms.remove(&key) {
                Some(prev) => prev.add(&c)?,
                None => c,
            };
            terms.insert(key, v);
        }
        DensityDiffOp::new(domain.clone(), k, terms)
    }
}

pub(crate) fn parse_index(v: &Value) -> Result<MultiIndex> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("bad multi-index {v}: {e}")))
}

/// Operator from formal functions to formal functions with supported coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct EndoDiffOp {
    domain: OpenSet,
    k: usize,
    terms: BTreeMap<Stack, SupportedFormalFunction>,
}

/// Number of sample points used by the line seminorm.
pub const SEMINORM_GRID: usize = 1001;

impl EndoDiffOp {
    pub fn new(domain: OpenSet, k: usize, terms: BTreeMap<Stack, SupportedFormalFunction>) -> Result<EndoDiffOp> {
        for ((i, l), c) in &terms {
            if l.len() != k {
                return Err(Error::LengthMismatch(l.len(), k));
            }
            x_order(domain.backend(), i)?;
            if c.domain() != &domain {
                return Err(Error::DomainMismatch);
            }
        }
        Ok(EndoDiffOp { domain, k, terms })
    }

    /// `∂_x^I ∂_y^L` cut off by a supported coefficient.
    pub fn term(domain: OpenSet, k: usize, i: MultiIndex, l: MultiIndex, c: SupportedFormalFunction) -> Result<EndoDiffOp> {
        EndoDiffOp::new(domain, k, BTreeMap::from([((i, l), c)]))
    }

    pub fn support(&self) -> Support {
        let b = self.domain.backend();
        self.terms
            .values()
            .fold(Support::empty(b), |acc, c| acc.union(c.support()).unwrap_or(acc))
    }

    /// The reduction of `X(u)`: `Σ c_0 · L! · ∂_x^I u_L`.
    pub fn apply_reduced(&self, u: &FormalFunction) -> Result<BaseFunction> {
        if &self.domain != u.domain() {
            return Err(Error::DomainMismatch);
        }
        let need = self.terms.keys().map(|(_, l)| l.degree()).max().unwrap_or(0);
        if need > u.trunc() && !self.terms.is_empty() {
            return Err(Error::Truncation {
                needed: need,
                have: u.trunc(),
            });
        }
        let mut acc = BaseFunction::zero(self.domain.backend());
        for ((i, l), c) in &self.terms {
            let c0 = c.inner().coeff(&MultiIndex::zero(self.k));
            let g = u.coeff(l).derivative(x_order(self.domain.backend(), i)?)?;
            acc = acc.add(&c0.mul(&g)?.scale(&factorial_cq(l)))?;
        }
        Ok(acc)
    }

    /// `sup_a |X(u)(a)|`: exact maximum over points (discrete) or over a
    /// 1001-point grid spanning the support hull (line).
    pub fn seminorm(&self, u: &FormalFunction) -> Result<f64> {
        let g = self.apply_reduced(u)?;
        match (&g, &self.domain) {
            (BaseFunction::Discrete(m), _) => Ok(m
                .values()
                .map(|v| crate::scalar::cq_to_c64(v).norm())
                .fold(0.0, f64::max)),
            (BaseFunction::Smooth(e), OpenSet::Line(_)) => {
                let Support::Line(s) = self.support() else {
                    return Ok(0.0);
                };
                let Some(h) = s.hull() else { return Ok(0.0) };
                let (Some(lo), Some(hi)) = (h.lo.fin(), h.hi.fin()) else {
                    return Err(Error::SupportEscapes("seminorm needs a bounded support".into()));
                };
                let c = e.compile();
                let (lo, hi) = (q_to_f64(lo), q_to_f64(hi));
                Ok((0..SEMINORM_GRID)
                    .map(|i| {
                        let x = lo + (hi - lo) * i as f64 / (SEMINORM_GRID - 1) as f64;
                        c.eval(x).norm()
                    })
                    .fold(0.0, f64::max))
            }
            _ => Err(Error::BackendMismatch("seminorm".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::SmoothExpr;
    use crate::scalar::{cq, q, CQ};

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn pq() -> OpenSet {
        OpenSet::discrete(&["p", "q"])
    }

    fn dfun(terms: &[(&[u32], &[(&str, i64)])], trunc: u32) -> FormalFunction {
        let coeffs = terms
            .iter()
            .map(|(j, vals)| {
                let v: Vec<(&str, CQ)> = vals.iter().map(|(p, x)| (*p, cq(*x))).collect();
                (mi(j), BaseFunction::discrete(&v))
            })
            .collect();
        FormalFunction::new(pq(), 1, trunc, coeffs).unwrap()
    }

    fn tau_pq() -> BaseDensity {
        BaseDensity::discrete(&[("p", cq(1)), ("q", cq(1))])
    }

    #[test]
    fn apply_examples() {
        let d = DensityDiffOp::term(pq(), 1, mi(&[]), mi(&[2]), tau_pq()).unwrap();
        let u = dfun(&[(&[2], &[("p", 5)])], 2);
        assert_eq!(d.apply(&u).unwrap(), BaseDensity::discrete(&[("p", cq(10))]));
        let d1 = DensityDiffOp::term(pq(), 1, mi(&[]), mi(&[1]), tau_pq()).unwrap();
        let u = dfun(&[(&[0], &[("p", 4)]), (&[1], &[("p", 2), ("q", 3)])], 1);
        assert_eq!(d1.apply(&u).unwrap(), BaseDensity::discrete(&[("p", cq(2)), ("q", cq(3))]));
        assert!(DensityDiffOp::zero(pq(), 1).apply(&u).unwrap().is_zero());
    }

    #[test]
    fn rho_identity_and_monomial_image() {
        let d = DensityDiffOp::term(pq(), 1, mi(&[]), mi(&[1]), tau_pq()).unwrap();
        let want = FormalDensity::term(pq(), 1, mi(&[1]), mi(&[]), tau_pq()).unwrap();
        assert_eq!(d.rho(), want);
        let u = dfun(&[(&[0], &[("p", 4)]), (&[1], &[("p", 2), ("q", 3)])], 2);
        let lhs = d.rho().pair(&u).unwrap();
        let rhs = d.apply(&u).unwrap().integrate(&pq()).unwrap();
        assert_eq!(lhs, rhs);
        assert!(DensityDiffOp::zero(pq(), 1).rho().is_zero());
    }

    #[test]
    fn composition_with_functions() {
        let d = DensityDiffOp::term(pq(), 1, mi(&[]), mi(&[1]), tau_pq()).unwrap();
        let y = dfun(&[(&[1], &[("p", 1), ("q", 1)])], 3);
        let u = dfun(&[(&[0], &[("p", 6), ("q", -2)]), (&[1], &[("p", 1)])], 3);
        let lhs = d.precompose_function(&y).unwrap().apply(&u).unwrap();
        let rhs = d.apply(&y.multiply(&u).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        let one = FormalFunction::one(pq(), 1, 3);
        assert_eq!(d.precompose_function(&one).unwrap(), d);
        assert_eq!(d.postcompose_function(&one).unwrap(), d);
        assert!(d.postcompose_function(&FormalFunction::zero(pq(), 1, 3)).unwrap().is_zero());
        let f = dfun(&[(&[0], &[("p", 3)])], 3);
        let post = d.postcompose_function(&f).unwrap().apply(&u).unwrap();
        let want = d.apply(&u).unwrap().mul_function(&f.coeff(&mi(&[0]))).unwrap();
        assert_eq!(post, want);
    }

    #[test]
    fn ext_and_restrict() {
        let v = OpenSet::discrete(&["p"]);
        let d = DensityDiffOp::term(v.clone(), 1, mi(&[]), mi(&[0]), BaseDensity::discrete(&[("p", cq(2))])).unwrap();
        let e = d.ext(&pq()).unwrap();
        assert_eq!(e.restrict_op(&v).unwrap(), d);
        assert_eq!(e.rho(), d.rho().ext(&pq()).unwrap());
        assert!(DensityDiffOp::zero(v, 1).ext(&pq()).unwrap().is_zero());
        assert!(e.restrict_op(&OpenSet::discrete(&["q"])).is_err());
    }

    #[test]
    fn line_rho_identity() {
        let dom = OpenSet::bounded(q(-1), q(4));
        let b = SmoothExpr::bump(&q(0), &q(1), &q(2), &q(3)).unwrap();
        let tau = BaseDensity::from_expr(b.mul(&SmoothExpr::parse("(+ 1 x)").unwrap())).unwrap();
        let d = DensityDiffOp::term(dom.clone(), 1, mi(&[1]), mi(&[1]), tau).unwrap();
        let u = FormalFunction::monomial(
            dom.clone(),
            1,
            2,
            mi(&[1]),
            BaseFunction::Smooth(SmoothExpr::parse("(pow x 3)").unwrap()),
        )
        .unwrap();
        let lhs = d.rho().pair(&u).unwrap();
        let rhs = d.apply(&u).unwrap().integrate(&dom).unwrap();
        assert!(lhs.approx_eq(&rhs, 1e-8), "{lhs} vs {rhs}");
    }

    #[test]
    fn seminorm_examples() {
        let one = SupportedFormalFunction::discrete_indicator(pq(), 1, 2, &["p", "q"]).unwrap();
        let x = EndoDiffOp::term(pq(), 1, mi(&[]), mi(&[0]), one).unwrap();
        let u = dfun(&[(&[0], &[("p", 3), ("q", -4)])], 2);
        assert_eq!(x.seminorm(&u).unwrap(), 4.0);
        assert_eq!(x.seminorm(&FormalFunction::zero(pq(), 1, 2)).unwrap(), 0.0);
        let dom = OpenSet::whole_line();
        let c = SupportedFormalFunction::line_cutoff(dom.clone(), 1, 2, &q(0), &q(1), &q(2), &q(3)).unwrap();
        let x = EndoDiffOp::term(dom.clone(), 1, mi(&[0]), mi(&[0]), c).unwrap();
        let u = FormalFunction::constant(dom, 1, 2, cq(5));
        assert!((x.seminorm(&u).unwrap() - 5.0).abs() < 1e-12);
    }
}
