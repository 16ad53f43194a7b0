//! Compactly supported formal densities `Σ_L (Σ_I τ_{I,L} ∂_x^I) (y*)^L` and
//! their pairing with formal functions.

use std::collections::BTreeMap;

use num::Zero;
use serde_json::{json, Map, Value};

use crate::base::{Backend, BaseDensity, BaseFunction, OpenSet, QuadConfig, Support};
use crate::error::{Error, Result};
use crate::formal::{leibniz, x_order, FormalFunction, SupportedFormalFunction};
use crate::multiindex::MultiIndex;
use crate::scalar::{cq_from_q, Scalar, CQ, Q};

/// `Σ_I τ_I ∂_x^I`, acting on smooth functions by `g ↦ Σ_I ∫ τ_I ∂_x^I g`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DistributionalBaseDensity(BTreeMap<MultiIndex, BaseDensity>);

impl DistributionalBaseDensity {
    pub fn new(terms: BTreeMap<MultiIndex, BaseDensity>) -> DistributionalBaseDensity {
        DistributionalBaseDensity(terms.into_iter().filter(|(_, t)| !t.is_zero()).collect())
    }

    pub fn single(i: MultiIndex, tau: BaseDensity) -> DistributionalBaseDensity {
        DistributionalBaseDensity::new(BTreeMap::from([(i, tau)]))
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, BaseDensity> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &DistributionalBaseDensity) -> Result<DistributionalBaseDensity> {
        let mut out = self.0.clone();
        for (i, t) in &other.0 {
            let v = match out.remove(i) {
                Some(prev) => prev.add(t)?,
                None => t.clone(),
            };
            out.insert(i.clone(), v);
        }
        Ok(DistributionalBaseDensity::new(out))
    }

    /// Add `τ ∂_x^I` in place.
    pub fn add_term(&mut self, i: MultiIndex, tau: BaseDensity) -> Result<()> {
        let v = match self.0.remove(&i) {
            Some(prev) => prev.add(&tau)?,
            None => tau,
        };
        if !v.is_zero() {
            self.0.insert(i, v);
        }
        Ok(())
    }

    pub fn scale(&self, c: &CQ) -> DistributionalBaseDensity {
        DistributionalBaseDensity::new(self.0.iter().map(|(i, t)| (i.clone(), t.scale(c))).collect())
    }

    pub fn support(&self, backend: Backend) -> Support {
        self.0
            .values()
            .fold(Support::empty(backend), |acc, t| acc.union(&t.support()).unwrap_or(acc))
    }

    /// `Σ_I ∫_U τ_I ∂_x^I g`.
    pub fn apply_to(&self, g: &BaseFunction, u: &OpenSet, cfg: QuadConfig) -> Result<Scalar> {
        let mut acc = Scalar::zero();
        for (i, tau) in &self.0 {
            let n = x_order(tau.backend(), i)?;
            let d = tau.mul_function(&g.derivative(n)?)?;
            acc = &acc + &d.integrate_with(u, cfg)?;
        }
        Ok(acc)
    }

    pub fn restrict(&self, v: &OpenSet) -> DistributionalBaseDensity {
        DistributionalBaseDensity::new(self.0.iter().map(|(i, t)| (i.clone(), t.restrict(v))).collect())
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.0
                .iter()
                .map(|(i, t)| json!({"I": i, "tau": t.to_json()}))
                .collect(),
        )
    }

    pub fn from_json(v: &Value, backend: Backend) -> Result<DistributionalBaseDensity> {
        let items = v
            .as_array()
            .ok_or_else(|| Error::Parse("density coefficient must be a list of {I, tau}".into()))?;
        let mut out = DistributionalBaseDensity::default();
        for it in items {
            let i = match it.get("I") {
                Some(i) => serde_json::from_value::<MultiIndex>(i.clone())
                    .map_err(|e| Error::Parse(format!("bad I: {e}")))?,
                None => MultiIndex::zero(backend.x_dim()),
            };
            let tau = it
                .get("tau")
                .ok_or_else(|| Error::Parse("missing \"tau\"".into()))?;
            out.add_term(i, BaseDensity::from_json(tau, backend)?)?;
        }
        Ok(out)
    }
}

/// An element of `D_c^∞(U; O)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalDensity {
    domain: OpenSet,
    k: usize,
    coeffs: BTreeMap<MultiIndex, DistributionalBaseDensity>,
}

impl FormalDensity {
    /// Validates index lengths, backend and that the support is compact in `domain`.
    pub fn new(
        domain: OpenSet,
        k: usize,
        coeffs: BTreeMap<MultiIndex, DistributionalBaseDensity>,
    ) -> Result<FormalDensity> {
        let backend = domain.backend();
        for (l, c) in &coeffs {
            if l.len() != k {
                return Err(Error::LengthMismatch(l.len(), k));
            }
            for (i, t) in c.terms() {
                if t.backend() != backend {
                    return Err(Error::BackendMismatch(format!("density coefficient at {l}")));
                }
                x_order(backend, i)?;
            }
        }
        let eta = FormalDensity {
            domain,
            k,
            coeffs: coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        };
        eta.check_support_in(&eta.domain)?;
        Ok(eta)
    }

    pub(crate) fn check_support_in(&self, u: &OpenSet) -> Result<()> {
        let s = self.support();
        if !s.compact_subset_of(u) {
            return Err(Error::SupportEscapes(format!("{s} is not compact in {u}")));
        }
        Ok(())
    }

    /// Skip validation; for callers whose inputs already satisfy the invariants.
    pub(crate) fn from_parts(
        domain: OpenSet,
        k: usize,
        coeffs: BTreeMap<MultiIndex, DistributionalBaseDensity>,
    ) -> FormalDensity {
        FormalDensity {
            domain,
            k,
            coeffs: coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn zero(domain: OpenSet, k: usize) -> FormalDensity {
        FormalDensity {
            domain,
            k,
            coeffs: BTreeMap::new(),
        }
    }

    /// `(τ ∂_x^I) (y*)^L`.
    pub fn term(domain: OpenSet, k: usize, l: MultiIndex, i: MultiIndex, tau: BaseDensity) -> Result<FormalDensity> {
        FormalDensity::new(domain, k, BTreeMap::from([(l, DistributionalBaseDensity::single(i, tau))]))
    }

    pub fn domain(&self) -> &OpenSet {
        &self.domain
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn backend(&self) -> Backend {
        self.domain.backend()
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, DistributionalBaseDensity> {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|L|` with a nonzero coefficient (0 for the zero density).
    pub fn star_degree(&self) -> u32 {
        self.coeffs.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    fn check_same_space(&self, other: &FormalDensity) -> Result<()> {
        if self.k != other.k {
            return Err(Error::DegreeMismatch(self.k, other.k));
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &FormalDensity) -> Result<FormalDensity> {
        self.check_same_space(other)?;
        let mut coeffs = self.coeffs.clone();
        for (l, c) in &other.coeffs {
            let v = match coeffs.remove(l) {
                Some(prev) => prev.add(c)?,
                None => c.clone(),
            };
            if !v.is_zero() {
                coeffs.insert(l.clone(), v);
            }
        }
        Ok(FormalDensity {
            domain: self.domain.clone(),
            k: self.k,
            coeffs,
        })
    }

    pub fn scale(&self, c: &CQ) -> FormalDensity {
        FormalDensity {
            domain: self.domain.clone(),
            k: self.k,
            coeffs: self
                .coeffs
                .iter()
                .map(|(l, d)| (l.clone(), d.scale(c)))
                .filter(|(_, d)| !d.is_zero())
                .collect(),
        }
    }

    pub fn neg(&self) -> FormalDensity {
        self.scale(&crate::scalar::cq(-1))
    }

    pub fn sub(&self, other: &FormalDensity) -> Result<FormalDensity> {
        self.add(&other.neg())
    }

    pub fn pair(&self, u: &FormalFunction) -> Result<Scalar> {
        self.pair_with(u, QuadConfig::default())
    }

    /// `Σ_L L! Σ_I ∫_U τ_{I,L} ∂_x^I u_L`.
    pub fn pair_with(&self, u: &FormalFunction, cfg: QuadConfig) -> Result<Scalar> {
        self.pair_terms(u, cfg)
            .map(|t| t.into_iter().map(|(_, v)| v).sum())
    }

    /// Per-`L` contributions to the pairing (already weighted by `L!`).
    pub fn pair_terms(&self, u: &FormalFunction, cfg: QuadConfig) -> Result<Vec<(MultiIndex, Scalar)>> {
        if self.k != u.k() {
            return Err(Error::DegreeMismatch(self.k, u.k()));
        }
        if &self.domain != u.domain() {
            return Err(Error::DomainMismatch);
        }
        if self.star_degree() > u.trunc() && !self.is_zero() {
            return Err(Error::Truncation {
                needed: self.star_degree(),
                have: u.trunc(),
            });
        }
        let mut out = Vec::with_capacity(self.coeffs.len());
        for (l, c) in &self.coeffs {
            let v = c.apply_to(&u.coeff(l), &self.domain, cfg)?;
            let w = cq_from_q(Q::from_integer(l.factorial()));
            out.push((l.clone(), v.scale_cq(&w)));
        }
        Ok(out)
    }

    /// `η ∘ f`, characterized by `⟨η∘f, u⟩ = ⟨η, f u⟩`.
    pub fn module_action(&self, f: &FormalFunction) -> Result<FormalDensity> {
        if self.k != f.k() {
            return Err(Error::DegreeMismatch(self.k, f.k()));
        }
        if &self.domain != f.domain() {
            return Err(Error::DomainMismatch);
        }
        let mut coeffs: BTreeMap<MultiIndex, DistributionalBaseDensity> = BTreeMap::new();
        for (l, c) in &self.coeffs {
            for (i, tau) in c.terms() {
                for t in leibniz(i, l, f)? {
                    let d = tau.mul_function(&t.factor)?;
                    coeffs.entry(t.j).or_default().add_term(t.i, d)?;
                }
            }
        }
        coeffs.retain(|_, c| !c.is_zero());
        Ok(FormalDensity {
            domain: self.domain.clone(),
            k: self.k,
            coeffs,
        })
    }

    /// Extension by zero to `U ⊇ V`.
    pub fn ext(&self, u: &OpenSet) -> Result<FormalDensity> {
        if !self.domain.is_subset(u) {
            return Err(Error::NotSubset);
        }
        Ok(FormalDensity {
            domain: u.clone(),
            k: self.k,
            coeffs: self.coeffs.clone(),
        })
    }

    /// The same density viewed on `V`; its support must be compact in `V`.
    pub fn restrict_to(&self, v: &OpenSet) -> Result<FormalDensity> {
        if !v.is_subset(&self.domain) {
            return Err(Error::NotSubset);
        }
        let out = FormalDensity {
            domain: v.clone(),
            k: self.k,
            coeffs: self
                .coeffs
                .iter()
                .map(|(l, c)| (l.clone(), c.restrict(v)))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
        };
        self.check_support_in(v)?;
        Ok(out)
    }

    /// `(η ∘ f)|_U` for a cutoff `f` supported in `U`.
    pub fn cutoff_restrict(&self, f: &SupportedFormalFunction, u: &OpenSet) -> Result<FormalDensity> {
        let acted = self.module_action(f.inner())?;
        let s = acted.support().intersect(f.support())?;
        if !s.compact_subset_of(u) {
            return Err(Error::SupportEscapes(format!("{} is not compact in {u}", f.support())));
        }
        acted.restrict_to(u)
    }

    pub fn support(&self) -> Support {
        let b = self.backend();
        self.coeffs
            .values()
            .fold(Support::empty(b), |acc, c| acc.union(&c.support(b)).unwrap_or(acc))
    }

    /// `{"coeffs": {"<L>": [{"I": [...], "tau": density}, ...]}}`.
    pub fn to_json(&self) -> Value {
        let coeffs: Map<String, Value> = self
            .coeffs
            .iter()
            .map(|(l, c)| (l.to_key(), c.to_json()))
            .collect();
        json!({ "coeffs": coeffs })
    }

    pub fn from_json(v: &Value, domain: &OpenSet, k: usize) -> Result<FormalDensity> {
        let domain = match v.get("domain") {
            Some(d) => OpenSet::from_json(d, domain.backend())?,
            None => domain.clone(),
        };
        let mut coeffs = BTreeMap::new();
        if let Some(obj) = v.get("coeffs") {
            let obj = obj
                .as_object()
                .ok_or_else(|| Error::Parse("\"coeffs\" must be an object".into()))?;
            for (key, c) in obj {
                let l = MultiIndex::from_key(key)?;
                coeffs.insert(l, DistributionalBaseDensity::from_json(c, domain.backend())?);
            }
        }
        FormalDensity::new(domain, k, coeffs)
    }

    /// Exact structural zero test on the discrete backend.
    pub fn is_exactly_zero(&self) -> bool {
        self.coeffs.values().all(|c| {
            c.terms().values().all(|t| match t {
                BaseDensity::Discrete(m) => m.values().all(CQ::is_zero),
                BaseDensity::Smooth(p) => p.is_empty(),
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ClosedSet, SmoothExpr};
    use crate::scalar::{cq, q};

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn pts() -> OpenSet {
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
        FormalFunction::new(pts(), 1, trunc, coeffs).unwrap()
    }

    fn dden(l: &[u32], vals: &[(&str, i64)]) -> FormalDensity {
        let v: Vec<(&str, CQ)> = vals.iter().map(|(p, x)| (*p, cq(*x))).collect();
        FormalDensity::term(pts(), 1, mi(l), MultiIndex::zero(0), BaseDensity::discrete(&v)).unwrap()
    }

    #[test]
    fn pairing_weights_by_factorial() {
        let eta = dden(&[2], &[("p", 1)]);
        let u = dfun(&[(&[2], &[("p", 5)])], 2);
        assert_eq!(eta.pair(&u).unwrap(), Scalar::int(10));
    }

    #[test]
    fn pairing_two_points() {
        let eta = dden(&[1], &[("p", 1), ("q", 1)]);
        let u = dfun(&[(&[0], &[("p", 1), ("q", 2)]), (&[1], &[("p", 3)]), (&[2], &[("q", 1)])], 2);
        assert_eq!(eta.pair(&u).unwrap(), Scalar::int(3));
        assert_eq!(FormalDensity::zero(pts(), 1).pair(&u).unwrap(), Scalar::zero());
    }

    #[test]
    fn pairing_requires_truncation() {
        let eta = dden(&[2], &[("p", 1)]);
        let u = dfun(&[], 1);
        assert!(matches!(eta.pair(&u), Err(Error::Truncation { needed: 2, have: 1 })));
    }

    #[test]
    fn module_action_identity() {
        let eta = dden(&[1], &[("p", 2), ("q", -1)]);
        let f = dfun(&[(&[0], &[("p", 1), ("q", 3)]), (&[1], &[("p", 2)])], 2);
        let u = dfun(&[(&[0], &[("p", 7), ("q", 2)]), (&[1], &[("p", -1), ("q", 4)])], 2);
        let lhs = eta.module_action(&f).unwrap().pair(&u).unwrap();
        let rhs = eta.pair(&f.multiply(&u).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        let one = FormalFunction::one(pts(), 1, 3);
        assert_eq!(eta.module_action(&one).unwrap(), eta);
        assert!(eta.module_action(&FormalFunction::zero(pts(), 1, 3)).unwrap().is_zero());
    }

    #[test]
    fn ext_transposes_restriction() {
        let v = OpenSet::discrete(&["p"]);
        let eta = FormalDensity::term(v.clone(), 1, mi(&[0]), MultiIndex::zero(0), BaseDensity::discrete(&[("p", cq(3))])).unwrap();
        let u = dfun(&[(&[0], &[("p", 2), ("q", 9)])], 1);
        let e = eta.ext(&pts()).unwrap();
        assert_eq!(e.pair(&u).unwrap(), eta.pair(&u.restrict(&v).unwrap()).unwrap());
        assert!(eta.ext(&OpenSet::discrete(&["q"])).is_err());
    }

    #[test]
    fn cutoff_restrict_examples() {
        let m = OpenSet::discrete(&["p", "q", "r"]);
        let u = OpenSet::discrete(&["p", "q"]);
        let eta = FormalDensity::term(m.clone(), 1, mi(&[1]), MultiIndex::zero(0), BaseDensity::discrete(&[("p", cq(2))])).unwrap();
        let f = SupportedFormalFunction::discrete_indicator(m.clone(), 1, 2, &["p"]).unwrap();
        let r = eta.cutoff_restrict(&f, &u).unwrap();
        assert_eq!(r.ext(&m).unwrap(), eta.module_action(f.inner()).unwrap());
        assert_eq!(r.support(), Support::points(&["p"]));
        let g = SupportedFormalFunction::discrete_indicator(m, 1, 2, &["q"]).unwrap();
        assert!(eta.cutoff_restrict(&g, &u).unwrap().is_zero());
    }

    #[test]
    fn line_pairing_differentiates_the_function() {
        // τ = bump on [0,3], ∂_x applied to u_0 = x: ∫ τ · 1
        let b = SmoothExpr::bump(&q(0), &q(1), &q(2), &q(3)).unwrap();
        let tau = BaseDensity::from_expr(b.clone()).unwrap();
        let dom = OpenSet::bounded(q(-1), q(4));
        let eta = FormalDensity::term(dom.clone(), 1, mi(&[0]), mi(&[1]), tau.clone()).unwrap();
        let u = FormalFunction::monomial(dom.clone(), 1, 1, mi(&[0]), BaseFunction::Smooth(SmoothExpr::x())).unwrap();
        let want = tau.integrate(&dom).unwrap();
        assert!(eta.pair(&u).unwrap().approx_eq(&want, 1e-12));
        assert!(FormalDensity::term(
            OpenSet::bounded(q(0), q(2)),
            1,
            mi(&[0]),
            mi(&[0]),
            BaseDensity::smooth(SmoothExpr::one(), ClosedSet::interval(q(1), q(3))).unwrap()
        )
        .is_err());
    }

    #[test]
    fn json_roundtrip() {
        let eta = dden(&[1], &[("p", 1), ("q", -2)]);
        assert_eq!(FormalDensity::from_json(&eta.to_json(), &pts(), 1).unwrap(), eta);
    }
}
