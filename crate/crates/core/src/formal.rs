//! Truncated formal power series in `y_1, …, y_k` with base-function coefficients.

use std::collections::BTreeMap;

use num::{BigInt, One, Zero};
use serde_json::{json, Map, Value};

use crate::base::{Backend, BaseFunction, ClosedSet, OpenSet, Point, SmoothExpr, Support};
use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use crate::scalar::{cq, cq_from_q, Scalar, CQ, Q};

fn big_to_cq(n: &BigInt) -> CQ {
    cq_from_q(Q::from_integer(n.clone()))
}

/// An element of `O(U)` known exactly up to `y`-degree `trunc`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalFunction {
    domain: OpenSet,
    k: usize,
    trunc: u32,
    coeffs: BTreeMap<MultiIndex, BaseFunction>,
}

impl FormalFunction {
    /// Build from coefficients; zero coefficients are dropped and discrete
    /// coefficients are restricted to `domain`.
    pub fn new(
        domain: OpenSet,
        k: usize,
        trunc: u32,
        coeffs: BTreeMap<MultiIndex, BaseFunction>,
    ) -> Result<FormalFunction> {
        let backend = domain.backend();
        let mut out = BTreeMap::new();
        for (j, c) in coeffs {
            if j.len() != k {
                return Err(Error::LengthMismatch(j.len(), k));
            }
            if j.degree() > trunc {
                return Err(Error::Truncation {
                    needed: j.degree(),
                    have: trunc,
                });
            }
            if c.backend() != backend {
                return Err(Error::BackendMismatch(format!("coefficient at {j}")));
            }
            let c = c.restrict(&domain);
            if !c.is_zero() {
                out.insert(j, c);
            }
        }
        Ok(FormalFunction {
            domain,
            k,
            trunc,
            coeffs: out,
        })
    }

    pub fn zero(domain: OpenSet, k: usize, trunc: u32) -> FormalFunction {
        FormalFunction {
            domain,
            k,
            trunc,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(domain: OpenSet, k: usize, trunc: u32, c: CQ) -> FormalFunction {
        let f = BaseFunction::constant(&domain, c);
        let mut coeffs = BTreeMap::new();
        if !f.is_zero() {
            coeffs.insert(MultiIndex::zero(k), f);
        }
        FormalFunction {
            domain,
            k,
            trunc,
            coeffs,
        }
    }

    pub fn one(domain: OpenSet, k: usize, trunc: u32) -> FormalFunction {
        FormalFunction::constant(domain, k, trunc, cq(1))
    }

    /// `f · y^J`.
    pub fn monomial(domain: OpenSet, k: usize, trunc: u32, j: MultiIndex, f: BaseFunction) -> Result<FormalFunction> {
        FormalFunction::new(domain, k, trunc, BTreeMap::from([(j, f)]))
    }

    pub fn domain(&self) -> &OpenSet {
        &self.domain
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn backend(&self) -> Backend {
        self.domain.backend()
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, BaseFunction> {
        &self.coeffs
    }

    /// Coefficient `u_J` (zero when absent).
    pub fn coeff(&self, j: &MultiIndex) -> BaseFunction {
        self.coeffs
            .get(j)
            .cloned()
            .unwrap_or_else(|| BaseFunction::zero(self.backend()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub(crate) fn check_same_space(&self, other: &FormalFunction) -> Result<()> {
        if self.backend() != other.backend() {
            return Err(Error::BackendMismatch("formal functions".into()));
        }
        if self.k != other.k {
            return Err(Error::DegreeMismatch(self.k, other.k));
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &FormalFunction) -> Result<FormalFunction> {
        self.check_same_space(other)?;
        let trunc = self.trunc.min(other.trunc);
        let mut coeffs: BTreeMap<MultiIndex, BaseFunction> = BTreeMap::new();
        for (j, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            if j.degree() > trunc {
                continue;
            }
            let v = match coeffs.get(j) {
                Some(prev) => prev.add(c)?,
                None => c.clone(),
            };
            coeffs.insert(j.clone(), v);
        }
        coeffs.retain(|_, c| !c.is_zero());
        Ok(FormalFunction {
            domain: self.domain.clone(),
            k: self.k,
            trunc,
            coeffs,
        })
    }

    pub fn scale(&self, c: &CQ) -> FormalFunction {
        let mut coeffs = BTreeMap::new();
        for (j, f) in &self.coeffs {
            let g = f.scale(c);
            if !g.is_zero() {
                coeffs.insert(j.clone(), g);
            }
        }
        FormalFunction {
            coeffs,
            ..self.clone()
        }
    }

    pub fn neg(&self) -> FormalFunction {
        self.scale(&cq(-1))
    }

    pub fn sub(&self, other: &FormalFunction) -> Result<FormalFunction> {
        self.add(&other.neg())
    }

    /// Truncated Cauchy product.
    pub fn multiply(&self, other: &FormalFunction) -> Result<FormalFunction> {
        self.check_same_space(other)?;
        let trunc = self.trunc.min(other.trunc);
        let coeffs = cauchy(&self.coeffs, &other.coeffs, trunc)?;
        Ok(FormalFunction {
            domain: self.domain.clone(),
            k: self.k,
            trunc,
            coeffs,
        })
    }

    /// Forget coefficients above degree `t` (no-op when `t >= trunc`).
    pub fn truncate(&self, t: u32) -> FormalFunction {
        let trunc = self.trunc.min(t);
        FormalFunction {
            domain: self.domain.clone(),
            k: self.k,
            trunc,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(j, _)| j.degree() <= trunc)
                .map(|(j, c)| (j.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn restrict(&self, v: &OpenSet) -> Result<FormalFunction> {
        if !v.is_subset(&self.domain) {
            return Err(Error::NotSubset);
        }
        let mut coeffs = BTreeMap::new();
        for (j, c) in &self.coeffs {
            let r = c.restrict(v);
            if !r.is_zero() {
                coeffs.insert(j.clone(), r);
            }
        }
        Ok(FormalFunction {
            domain: v.clone(),
            k: self.k,
            trunc: self.trunc,
            coeffs,
        })
    }

    /// Same coefficients viewed on a larger domain; callers guarantee they vanish off the old one.
    pub(crate) fn with_domain(&self, m: &OpenSet) -> FormalFunction {
        FormalFunction {
            domain: m.clone(),
            ..self.clone()
        }
    }

    /// `(∂_x^I ∂_y^J u)(a) = J! (∂_x^I u_J)(a)`.
    pub fn jet(&self, a: &Point, i: &MultiIndex, j: &MultiIndex) -> Result<Scalar> {
        if j.len() != self.k {
            return Err(Error::LengthMismatch(j.len(), self.k));
        }
        if j.degree() > self.trunc {
            return Err(Error::Truncation {
                needed: j.degree(),
                have: self.trunc,
            });
        }
        let n = x_order(self.backend(), i)?;
        if !self.domain.contains(a) {
            return Err(Error::PointNotInDomain(a.to_string()));
        }
        let v = self.coeff(j).derivative(n)?.eval(a)?;
        Ok(v.scale_cq(&big_to_cq(&j.factorial())))
    }

    /// The character `Ev_a`: `u_0(a)`.
    pub fn ev(&self, a: &Point) -> Result<Scalar> {
        if !self.domain.contains(a) {
            return Err(Error::PointNotInDomain(a.to_string()));
        }
        self.coeff(&MultiIndex::zero(self.k)).eval(a)
    }

    /// Union of coefficient supports; `None` when some coefficient has no known bound.
    pub fn support(&self) -> Option<Support> {
        let mut acc = Support::empty(self.backend());
        for c in self.coeffs.values() {
            acc = acc.union(&c.support()?).ok()?;
        }
        Some(acc)
    }

    /// `{"trunc": T, "coeffs": {"<J>": coefficient}}`.
    pub fn to_json(&self) -> Value {
        let coeffs: Map<String, Value> = self
            .coeffs
            .iter()
            .map(|(j, c)| (j.to_key(), c.to_json()))
            .collect();
        json!({"trunc": self.trunc, "coeffs": coeffs})
    }

    /// Parse the wire format; `domain` is used unless the object carries its own.
    pub fn from_json(v: &Value, domain: &OpenSet, k: usize) -> Result<FormalFunction> {
        let domain = match v.get("domain") {
            Some(d) => OpenSet::from_json(d, domain.backend())?,
            None => domain.clone(),
        };
        let trunc = v
            .get("trunc")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("formal function needs integer \"trunc\"".into()))?
            as u32;
        let mut coeffs = BTreeMap::new();
        if let Some(obj) = v.get("coeffs") {
            let obj = obj
                .as_object()
                .ok_or_else(|| Error::Parse("\"coeffs\" must be an object".into()))?;
            for (key, c) in obj {
                let j = MultiIndex::from_key(key)?;
                let f = BaseFunction::from_json(c, domain.backend())?;
                let f = match coeffs.remove(&j) {
                    Some(prev) => f.add(&prev)?,
                    None => f,
                };
                coeffs.insert(j, f);
            }
        }
        FormalFunction::new(domain, k, trunc, coeffs)
    }
}

/// Order of an x-derivative index on the given backend.
pub(crate) fn x_order(backend: Backend, i: &MultiIndex) -> Result<u32> {
    match backend {
        Backend::Discrete if i.degree() > 0 => Err(Error::XDerivativeOnDiscrete),
        Backend::Discrete => Ok(0),
        Backend::Line if i.len() != 1 => Err(Error::LengthMismatch(i.len(), 1)),
        Backend::Line => Ok(i.degree()),
    }
}

pub(crate) fn cauchy(
    a: &BTreeMap<MultiIndex, BaseFunction>,
    b: &BTreeMap<MultiIndex, BaseFunction>,
    trunc: u32,
) -> Result<BTreeMap<MultiIndex, BaseFunction>> {
    let mut out: BTreeMap<MultiIndex, BaseFunction> = BTreeMap::new();
    for (j1, f) in a {
        for (j2, g) in b {
            if j1.degree() + j2.degree() > trunc {
                continue;
            }
            let j = j1.add(j2)?;
            let p = f.mul(g)?;
            let v = match out.remove(&j) {
                Some(prev) => prev.add(&p)?,
                None => p,
            };
            out.insert(j, v);
        }
    }
    out.retain(|_, c| !c.is_zero());
    Ok(out)
}

/// One term of the Leibniz renormalization of `c ∘ ∂_x^I ∂_y^L` composed with
/// multiplication by `f`: the new stack `(I', J'')` and the function factor
/// `binom(I, I') · (L! / J''!) · ∂_x^{I-I'} f_{L-J''}`.
pub(crate) struct LeibnizTerm {
    pub i: MultiIndex,
    pub j: MultiIndex,
    pub factor: BaseFunction,
}

pub(crate) fn leibniz(i: &MultiIndex, l: &MultiIndex, f: &FormalFunction) -> Result<Vec<LeibnizTerm>> {
    if l.degree() > f.trunc() {
        return Err(Error::Truncation {
            needed: l.degree(),
            have: f.trunc(),
        });
    }
    if l.len() != f.k() {
        return Err(Error::LengthMismatch(l.len(), f.k()));
    }
    x_order(f.backend(), i)?;
    let lfact = l.factorial();
    let mut out = Vec::new();
    for (j1, fj) in f.coeffs() {
        if !j1.le(l) {
            continue;
        }
        let j2 = l.sub(j1)?;
        let weight = Q::new(lfact.clone(), j2.factorial());
        for i2 in i.lower_set() {
            let di = i.sub(&i2)?;
            let b = i.binomial(&i2);
            let coef = cq_from_q(&weight * Q::from_integer(b));
            let factor = fj.derivative(di.degree())?.scale(&coef);
            if factor.is_zero() {
                continue;
            }
            out.push(LeibnizTerm {
                i: i2,
                j: j2.clone(),
                factor,
            });
        }
    }
    Ok(out)
}

/// A section of `F_c(U)` together with a witness for its support.
///
/// Ordinary constructors require a compact witness inside the domain.
/// Partition-of-unity members use [`SupportedFormalFunction::with_closed_support`],
/// whose witness only needs to be closed relative to the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportedFormalFunction {
    inner: FormalFunction,
    support: Support,
    plateau: Option<ClosedSet>,
}

fn coefficients_within(f: &FormalFunction, s: &Support) -> Result<()> {
    for (j, c) in f.coeffs() {
        let ok = match (c, s) {
            (BaseFunction::Discrete(m), Support::Points(p)) => m.keys().all(|k| p.contains(k)),
            (BaseFunction::Smooth(e), Support::Line(w)) => match e.support() {
                Some(b) => {
                    b.restricted_to(f.domain().components()).is_subset(w)
                }
                None => f.domain().closure().is_subset(s),
            },
            _ => false,
        };
        if !ok {
            return Err(Error::SupportEscapes(format!(
                "coefficient at {j} is not supported in {s}"
            )));
        }
    }
    Ok(())
}

impl SupportedFormalFunction {
    /// Validates that `support` is a compact subset of the domain containing every coefficient support.
    pub fn new(inner: FormalFunction, support: Support) -> Result<SupportedFormalFunction> {
        if !support.compact_subset_of(inner.domain()) {
            return Err(Error::SupportEscapes(format!(
                "{support} is not a compact subset of {}",
                inner.domain()
            )));
        }
        coefficients_within(&inner, &support)?;
        Ok(SupportedFormalFunction {
            inner,
            support,
            plateau: None,
        })
    }

    /// Witness is only required to contain the coefficient supports.
    pub fn with_closed_support(inner: FormalFunction, support: Support) -> Result<SupportedFormalFunction> {
        coefficients_within(&inner, &support)?;
        Ok(SupportedFormalFunction {
            inner,
            support,
            plateau: None,
        })
    }

    /// Use the coefficients' own support bounds as the witness.
    pub fn from_function(inner: FormalFunction) -> Result<SupportedFormalFunction> {
        let s = inner
            .support()
            .ok_or_else(|| Error::SupportEscapes("coefficient without support bound".into()))?;
        let s = s.restricted_to(inner.domain());
        SupportedFormalFunction::new(inner, s)
    }

    pub fn zero(domain: OpenSet, k: usize, trunc: u32) -> SupportedFormalFunction {
        let b = domain.backend();
        SupportedFormalFunction {
            inner: FormalFunction::zero(domain, k, trunc),
            support: Support::empty(b),
            plateau: None,
        }
    }

    /// The y-constant cutoff `bump(a, b, c, d)` on a line domain; it is 1 on `[b, c]`.
    pub fn line_cutoff(domain: OpenSet, k: usize, trunc: u32, a: &Q, b: &Q, c: &Q, d: &Q) -> Result<SupportedFormalFunction> {
        let e = SmoothExpr::bump(a, b, c, d)?;
        let f = FormalFunction::monomial(domain, k, trunc, MultiIndex::zero(k), BaseFunction::Smooth(e))?;
        let mut s = SupportedFormalFunction::new(f, Support::Line(ClosedSet::interval(a.clone(), d.clone())))?;
        s.plateau = Some(ClosedSet::interval(b.clone(), c.clone()));
        Ok(s)
    }

    /// The y-constant indicator of a finite set of points.
    pub fn discrete_indicator<S: AsRef<str>>(domain: OpenSet, k: usize, trunc: u32, points: &[S]) -> Result<SupportedFormalFunction> {
        let vals: Vec<(&str, CQ)> = points.iter().map(|p| (p.as_ref(), CQ::one())).collect();
        let f = FormalFunction::monomial(domain, k, trunc, MultiIndex::zero(k), BaseFunction::discrete(&vals))?;
        SupportedFormalFunction::new(f, Support::points(points))
    }

    pub fn inner(&self) -> &FormalFunction {
        &self.inner
    }

    pub fn into_inner(self) -> FormalFunction {
        self.inner
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn domain(&self) -> &OpenSet {
        self.inner.domain()
    }

    pub fn trunc(&self) -> u32 {
        self.inner.trunc()
    }

    pub fn k(&self) -> usize {
        self.inner.k()
    }

    /// Closed region on which the function is known to be identically 1.
    ///
    /// Exact on the discrete backend; on the line it is the plateau recorded at construction.
    pub fn plateau(&self) -> Option<Support> {
        match self.inner.backend() {
            Backend::Discrete => {
                let labels = self.inner.domain().labels()?;
                let zero = MultiIndex::zero(self.inner.k());
                let pts = labels
                    .iter()
                    .filter(|p| {
                        self.inner.coeffs().iter().all(|(j, c)| {
                            let v = match c {
                                BaseFunction::Discrete(m) => m.get(*p).cloned().unwrap_or_else(CQ::zero),
                                _ => CQ::zero(),
                            };
                            if *j == zero {
                                v.is_one()
                            } else {
                                v.is_zero()
                            }
                        }) && self.inner.coeffs().contains_key(&zero)
                    })
                    .cloned()
                    .collect();
                Some(Support::Points(pts))
            }
            Backend::Line => self.plateau.clone().map(Support::Line),
        }
    }

    /// `f ≡ 1` on an open neighbourhood of `s`.
    pub fn is_one_near(&self, s: &Support) -> bool {
        match (self.plateau(), s) {
            (Some(Support::Points(p)), Support::Points(q)) => q.is_subset(&p),
            (Some(Support::Line(p)), Support::Line(q)) => q.inside_interior_of(&p),
            _ => s.is_empty(),
        }
    }

    pub fn add(&self, other: &SupportedFormalFunction) -> Result<SupportedFormalFunction> {
        Ok(SupportedFormalFunction {
            inner: self.inner.add(&other.inner)?,
            support: self.support.union(&other.support)?,
            plateau: None,
        })
    }

    pub fn scale(&self, c: &CQ) -> SupportedFormalFunction {
        SupportedFormalFunction {
            inner: self.inner.scale(c),
            support: self.support.clone(),
            plateau: None,
        }
    }

    /// Extension by zero to `M ⊇ domain`.
    pub fn extend_by_zero(&self, m: &OpenSet) -> Result<SupportedFormalFunction> {
        if !self.domain().is_subset(m) {
            return Err(Error::NotSubset);
        }
        if !self.support.compact_subset_of(self.domain()) {
            return Err(Error::SupportEscapes(format!("{} not compact in {}", self.support, self.domain())));
        }
        Ok(SupportedFormalFunction {
            inner: self.inner.with_domain(m),
            support: self.support.clone(),
            plateau: self.plateau.clone(),
        })
    }

    /// Restriction to `V` (the witness is trimmed to `V`).
    pub fn restrict(&self, v: &OpenSet) -> Result<SupportedFormalFunction> {
        let inner = self.inner.restrict(v)?;
        let support = match (&self.support, v) {
            (Support::Points(p), OpenSet::Discrete(d)) => Support::Points(p.intersection(d).cloned().collect()),
            _ => self.support.restricted_to(v),
        };
        Ok(SupportedFormalFunction {
            inner,
            support,
            plateau: None,
        })
    }

    /// The global section `f u`: equal to `f|_U · u` on `U` and zero off `supp f`.
    pub fn cutoff_product(&self, u: &FormalFunction) -> Result<SupportedFormalFunction> {
        if !u.domain().is_subset(self.domain()) {
            return Err(Error::NotSubset);
        }
        if !self.support.compact_subset_of(u.domain()) {
            return Err(Error::SupportEscapes(format!(
                "cutoff support {} is not compact in {}",
                self.support,
                u.domain()
            )));
        }
        let f = self.inner.restrict(u.domain())?;
        let prod = f.multiply(u)?;
        let inner = prod.with_domain(self.domain());
        Ok(SupportedFormalFunction {
            inner,
            support: self.support.clone(),
            plateau: None,
        })
    }

    /// Product with a formal function on the same domain; the witness is kept.
    pub fn multiply(&self, u: &FormalFunction) -> Result<SupportedFormalFunction> {
        Ok(SupportedFormalFunction {
            inner: self.inner.multiply(u)?,
            support: self.support.clone(),
            plateau: None,
        })
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.inner.to_json();
        v["support"] = self.support.to_json();
        v
    }

    pub fn from_json(v: &Value, domain: &OpenSet, k: usize) -> Result<SupportedFormalFunction> {
        let inner = FormalFunction::from_json(v, domain, k)?;
        match v.get("support") {
            Some(s) => SupportedFormalFunction::new(inner.clone(), Support::from_json(s, inner.backend())?),
            None => SupportedFormalFunction::from_function(inner),
        }
    }
}
