//! Formal distributions, generalized functions and point distributions with
//! values in a finite-dimensional coordinate space `E = C^m`.

use std::collections::BTreeMap;

use num::{BigInt, One, Zero};
use serde_json::{json, Map, Value};

use crate::base::{Backend, BaseDensity, BaseFunction, ClosedSet, OpenSet, Point, QuadConfig, SmoothExpr, Support};
use crate::densities::{DistributionalBaseDensity, FormalDensity};
use crate::diffops::parse_index;
use crate::error::{Error, Result};
use crate::formal::{x_order, FormalFunction, SupportedFormalFunction};
use crate::multiindex::{binomial, enumerate_upto, MultiIndex};
use crate::scalar::{cq_from_json, cq_from_q, format_cq, parse_rational, Scalar, CQ, Q};

/// A vector in `E`.
pub type EVec = Vec<Scalar>;

fn factorial_cq(l: &MultiIndex) -> CQ {
    cq_from_q(Q::from_integer(l.factorial()))
}

fn zero_vec(m: usize) -> EVec {
    vec![Scalar::zero(); m]
}

fn add_vec(a: &mut EVec, b: &EVec) {
    for (x, y) in a.iter_mut().zip(b) {
        *x = &*x + y;
    }
}

/// One term of a distribution on the line.
#[derive(Clone, Debug, PartialEq)]
pub enum LineTerm {
    /// `τ ↦ ∫ g τ`.
    Smooth(SmoothExpr),
    /// `τ ↦ w · (∂_x^order φ)(at)` where `φ` is the coefficient of `τ` against `|dx|`.
    Point { at: Q, order: u32, weight: Scalar },
}

/// A distribution on the base: a weighted point sum (discrete) or a finite
/// sum of smooth and point-derivative terms (line).
#[derive(Clone, Debug, PartialEq)]
pub enum BaseDistribution {
    Discrete(BTreeMap<String, CQ>),
    Line(Vec<LineTerm>),
}

impl BaseDistribution {
    pub fn zero(backend: Backend) -> BaseDistribution {
        match backend {
            Backend::Discrete => BaseDistribution::Discrete(BTreeMap::new()),
            Backend::Line => BaseDistribution::Line(Vec::new()),
        }
    }

    pub fn discrete<S: AsRef<str>>(values: &[(S, CQ)]) -> BaseDistribution {
        BaseDistribution::Discrete(
            values
                .iter()
                .filter(|(_, v)| !v.is_zero())
                .map(|(k, v)| (k.as_ref().to_string(), v.clone()))
                .collect(),
        )
    }

    pub fn smooth(g: SmoothExpr) -> BaseDistribution {
        BaseDistribution::Line(vec![LineTerm::Smooth(g)]).canonical()
    }

    /// `w · δ_a^{(i)}` in the sense of acting on a density's coefficient.
    pub fn point(at: Q, order: u32, weight: CQ) -> BaseDistribution {
        BaseDistribution::Line(vec![LineTerm::Point {
            at,
            order,
            weight: Scalar::Exact(weight),
        }])
        .canonical()
    }

    /// The distribution given by a smooth function.
    pub fn from_function(f: &BaseFunction) -> BaseDistribution {
        match f {
            BaseFunction::Discrete(m) => BaseDistribution::Discrete(m.clone()),
            BaseFunction::Smooth(e) => BaseDistribution::smooth(e.clone()),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            BaseDistribution::Discrete(_) => Backend::Discrete,
            BaseDistribution::Line(_) => Backend::Line,
        }
    }

    fn canonical(self) -> BaseDistribution {
        match self {
            BaseDistribution::Discrete(m) => {
                BaseDistribution::Discrete(m.into_iter().filter(|(_, v)| !v.is_zero()).collect())
            }
            BaseDistribution::Line(terms) => {
                let mut smooth: Option<SmoothExpr> = None;
                let mut points: BTreeMap<(Q, u32), Scalar> = BTreeMap::new();
                for t in terms {
                    match t {
                        LineTerm::Smooth(g) => {
                            smooth = Some(match smooth {
                                Some(s) => s.add(&g),
                                None => g,
                            })
                        }
                        LineTerm::Point { at, order, weight } => {
                            let e = points.entry((at, order)).or_insert_with(Scalar::zero);
                            *e = &*e + &weight;
                        }
                    }
                }
                let mut out = Vec::new();
                if let Some(g) = smooth.filter(|g| !g.is_zero()) {
                    out.push(LineTerm::Smooth(g));
                }
                for ((at, order), weight) in points {
                    if !weight.is_exact_zero() {
                        out.push(LineTerm::Point { at, order, weight });
                    }
                }
                BaseDistribution::Line(out)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BaseDistribution::Discrete(m) => m.is_empty(),
            BaseDistribution::Line(t) => t.is_empty(),
        }
    }

    pub fn add(&self, other: &BaseDistribution) -> Result<BaseDistribution> {
        match (self, other) {
            (BaseDistribution::Discrete(a), BaseDistribution::Discrete(b)) => {
                let mut m = a.clone();
                for (k, v) in b {
                    let e = m.entry(k.clone()).or_insert_with(CQ::zero);
                    *e = &*e + v;
                }
                Ok(BaseDistribution::Discrete(m).canonical())
            }
            (BaseDistribution::Line(a), BaseDistribution::Line(b)) => {
                Ok(BaseDistribution::Line(a.iter().chain(b).cloned().collect()).canonical())
            }
            _ => Err(Error::BackendMismatch("distribution addition".into())),
        }
    }

    pub fn scale(&self, c: &CQ) -> BaseDistribution {
        match self {
            BaseDistribution::Discrete(m) => {
                BaseDistribution::Discrete(m.iter().map(|(k, v)| (k.clone(), v * c)).collect()).canonical()
            }
            BaseDistribution::Line(t) => BaseDistribution::Line(
                t.iter()
                    .map(|t| match t {
                        LineTerm::Smooth(g) => LineTerm::Smooth(g.scale(c)),
                        LineTerm::Point { at, order, weight } => LineTerm::Point {
                            at: at.clone(),
                            order: *order,
                            weight: weight.scale_cq(c),
                        },
                    })
                    .collect(),
            )
            .canonical(),
        }
    }

    /// `⟨T, g⟩` for a smooth function supported in `window`.
    pub fn apply_function(&self, g: &BaseFunction, window: &Support, cfg: QuadConfig) -> Result<Scalar> {
        match (self, g) {
            (BaseDistribution::Discrete(t), BaseFunction::Discrete(m)) => Ok(Scalar::Exact(
                t.iter()
                    .filter_map(|(p, v)| m.get(p).map(|w| v * w))
                    .fold(CQ::zero(), |a, b| a + b),
            )),
            (BaseDistribution::Line(terms), BaseFunction::Smooth(e)) => {
                let mut acc = Scalar::zero();
                for t in terms {
                    let v = match t {
                        LineTerm::Smooth(h) => {
                            let Support::Line(w) = window else {
                                return Err(Error::BackendMismatch("support witness".into()));
                            };
                            if w.is_empty() {
                                Scalar::zero()
                            } else {
                                BaseDensity::smooth(h.mul(e), w.clone())?
                                    .integrate_with(&OpenSet::whole_line(), cfg)?
                            }
                        }
                        LineTerm::Point { at, order, weight } => weight * &e.nth_derivative(*order).eval(at),
                    };
                    acc = &acc + &v;
                }
                Ok(acc)
            }
            _ => Err(Error::BackendMismatch("distribution applied to function".into())),
        }
    }

    /// `⟨T, Σ_I τ_I ∂_x^I⟩`, moving the derivative stacks onto `T`.
    pub fn apply_density(&self, d: &DistributionalBaseDensity, u: &OpenSet, cfg: QuadConfig) -> Result<Scalar> {
        let mut acc = Scalar::zero();
        for (i, tau) in d.terms() {
            let n = x_order(tau.backend(), i)?;
            let v = match (self, tau) {
                (BaseDistribution::Discrete(t), BaseDensity::Discrete(m)) => Scalar::Exact(
                    t.iter()
                        .filter_map(|(p, v)| m.get(p).map(|w| v * w))
                        .fold(CQ::zero(), |a, b| a + b),
                ),
                (BaseDistribution::Line(terms), BaseDensity::Smooth(_)) => {
                    let mut s = Scalar::zero();
                    for t in terms {
                        let v = match t {
                            LineTerm::Smooth(h) => tau
                                .mul_function(&BaseFunction::Smooth(h.nth_derivative(n)))?
                                .integrate_with(u, cfg)?,
                            LineTerm::Point { at, order, weight } => {
                                let sign = if n % 2 == 0 { 1 } else { -1 };
                                let dv = tau.coefficient_derivative_at(&Point::Coord(at.clone()), order + n)?;
                                (weight * &dv).scale_cq(&crate::scalar::cq(sign))
                            }
                        };
                        s = &s + &v;
                    }
                    s
                }
                _ => return Err(Error::BackendMismatch("distribution applied to density".into())),
            };
            acc = &acc + &v;
        }
        Ok(acc)
    }

    /// `f · T`.
    pub fn mul_function(&self, f: &BaseFunction) -> Result<BaseDistribution> {
        match (self, f) {
            (BaseDistribution::Discrete(t), BaseFunction::Discrete(m)) => Ok(BaseDistribution::Discrete(
                t.iter()
                    .filter_map(|(p, v)| m.get(p).map(|w| (p.clone(), v * w)))
                    .collect(),
            )
            .canonical()),
            (BaseDistribution::Line(terms), BaseFunction::Smooth(e)) => {
                let mut out = Vec::new();
                for t in terms {
                    match t {
                        LineTerm::Smooth(h) => out.push(LineTerm::Smooth(h.mul(e))),
                        LineTerm::Point { at, order, weight } => {
                            // ⟨f T, φ⟩ = w (f φ)^{(i)}(a) = Σ binom(i, i') f^{(i-i')}(a) w φ^{(i')}(a)
                            for i2 in 0..=*order {
                                let fv = e.nth_derivative(order - i2).eval(at);
                                let b = cq_from_q(Q::from_integer(binomial(*order, i2)));
                                out.push(LineTerm::Point {
                                    at: at.clone(),
                                    order: i2,
                                    weight: (weight * &fv).scale_cq(&b),
                                });
                            }
                        }
                    }
                }
                Ok(BaseDistribution::Line(out).canonical())
            }
            _ => Err(Error::BackendMismatch("function times distribution".into())),
        }
    }

    /// Drop point masses outside `V`.
    pub fn restrict(&self, v: &OpenSet) -> BaseDistribution {
        match self {
            BaseDistribution::Discrete(m) => BaseDistribution::Discrete(
                m.iter()
                    .filter(|(p, _)| v.contains(&Point::Label((*p).clone())))
                    .map(|(p, x)| (p.clone(), x.clone()))
                    .collect(),
            ),
            BaseDistribution::Line(t) => BaseDistribution::Line(
                t.iter()
                    .filter(|t| match t {
                        LineTerm::Point { at, .. } => v.contains_coord(at),
                        LineTerm::Smooth(_) => true,
                    })
                    .cloned()
                    .collect(),
            ),
        }
    }

    /// Support witness; `None` if a smooth term has no bound.
    pub fn support(&self) -> Option<Support> {
        match self {
            BaseDistribution::Discrete(m) => Some(Support::Points(m.keys().cloned().collect())),
            BaseDistribution::Line(terms) => {
                let mut acc = ClosedSet::empty();
                for t in terms {
                    let s = match t {
                        LineTerm::Smooth(h) => h.support()?.clone(),
                        LineTerm::Point { at, .. } => ClosedSet::interval(at.clone(), at.clone()),
                    };
                    acc = acc.union(&s);
                }
                Some(Support::Line(acc))
            }
        }
    }

    /// `[term, …]` with kinds `"smooth"`, `"point"`, `"discrete"`.
    pub fn to_json(&self) -> Value {
        match self {
            BaseDistribution::Discrete(m) => {
                let values: Map<String, Value> = m.iter().map(|(p, v)| (p.clone(), json!(format_cq(v)))).collect();
                json!([{"kind": "discrete", "values": values}])
            }
            BaseDistribution::Line(terms) => Value::Array(
                terms
                    .iter()
                    .map(|t| match t {
                        LineTerm::Smooth(g) => match g.support() {
                            Some(b) => json!({"kind": "smooth", "expr": g.to_sexpr(), "support": b.to_json()}),
                            None => json!({"kind": "smooth", "expr": g.to_sexpr()}),
                        },
                        LineTerm::Point { at, order, weight } => json!({
                            "kind": "point",
                            "at": at.to_string(),
                            "order": order,
                            "weight": serde_json::to_value(weight).unwrap_or(Value::Null),
                        }),
                    })
                    .collect(),
            ),
        }
    }

    pub fn from_json(v: &Value, backend: Backend) -> Result<BaseDistribution> {
        let items = v
            .as_array()
            .ok_or_else(|| Error::Parse(format!("distribution must be a list of terms, got {v}")))?;
        let mut acc = BaseDistribution::zero(backend);
        for t in items {
            let kind = t.get("kind").and_then(Value::as_str).unwrap_or("");
            let term = match (kind, backend) {
                ("discrete", Backend::Discrete) => {
                    let vals = t
                        .get("values")
                        .and_then(Value::as_object)
                        .ok_or_else(|| Error::Parse("discrete term needs \"values\"".into()))?;
                    let mut m = BTreeMap::new();
                    for (p, x) in vals {
                        m.insert(p.clone(), cq_from_json(x)?);
                    }
                    BaseDistribution::Discrete(m)
                }
                ("smooth", Backend::Line) => {
                    let e = t
                        .get("expr")
                        .and_then(Value::as_str)
                        .ok_or_else(|| Error::Parse("smooth term needs \"expr\"".into()))?;
                    let g = SmoothExpr::parse(e)?;
                    match t.get("support") {
                        Some(b) => BaseDistribution::smooth(g.with_support(&ClosedSet::from_json(b)?)),
                        None => BaseDistribution::smooth(g),
                    }
                }
                ("point", Backend::Line) => {
                    let at = match t.get("at") {
                        Some(Value::String(s)) => parse_rational(s)?,
                        Some(Value::Number(n)) => parse_rational(&n.to_string())?,
                        _ => return Err(Error::Parse("point term needs \"at\"".into())),
                    };
                    let order = t.get("order").and_then(Value::as_u64).unwrap_or(0) as u32;
                    let weight = match t.get("weight") {
                        Some(w) => cq_from_json(w)?,
                        None => CQ::one(),
                    };
                    BaseDistribution::point(at, order, weight)
                }
                (k, b) => return Err(Error::Parse(format!("term kind {k:?} not valid on the {b} backend"))),
            };
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }
}

fn check_evec(v: &[BaseDistribution], m: usize, backend: Backend) -> Result<()> {
    if v.len() != m {
        return Err(Error::ValueDimMismatch(v.len(), m));
    }
    if v.iter().any(|d| d.backend() != backend) {
        return Err(Error::BackendMismatch("distribution coefficient".into()));
    }
    Ok(())
}

fn add_coeffs(
    a: &BTreeMap<MultiIndex, Vec<BaseDistribution>>,
    b: &BTreeMap<MultiIndex, Vec<BaseDistribution>>,
) -> Result<BTreeMap<MultiIndex, Vec<BaseDistribution>>> {
    let mut out = a.clone();
    for (l, v) in b {
        let w = match out.remove(l) {
            Some(prev) => prev.iter().zip(v).map(|(x, y)| x.add(y)).collect::<Result<Vec<_>>>()?,
            None => v.clone(),
        };
        out.insert(l.clone(), w);
    }
    Ok(strip(out))
}

fn strip(m: BTreeMap<MultiIndex, Vec<BaseDistribution>>) -> BTreeMap<MultiIndex, Vec<BaseDistribution>> {
    m.into_iter().filter(|(_, v)| v.iter().any(|d| !d.is_zero())).collect()
}

fn coeffs_to_json(m: &BTreeMap<MultiIndex, Vec<BaseDistribution>>) -> Value {
    Value::Object(
        m.iter()
            .map(|(l, v)| (l.to_key(), Value::Array(v.iter().map(BaseDistribution::to_json).collect())))
            .collect(),
    )
}

fn coeffs_from_json(v: Option<&Value>, backend: Backend, m: usize) -> Result<BTreeMap<MultiIndex, Vec<BaseDistribution>>> {
    let mut out = BTreeMap::new();
    let Some(v) = v else { return Ok(out) };
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse("\"coeffs\" must be an object".into()))?;
    for (key, comps) in obj {
        let l = MultiIndex::from_key(key)?;
        let comps = comps
            .as_array()
            .ok_or_else(|| Error::Parse("coefficient must be a list of E-components".into()))?;
        let v: Vec<BaseDistribution> = comps
            .iter()
            .map(|c| BaseDistribution::from_json(c, backend))
            .collect::<Result<_>>()?;
        check_evec(&v, m, backend)?;
        out.insert(l, v);
    }
    Ok(strip(out))
}

fn support_of(m: &BTreeMap<MultiIndex, Vec<BaseDistribution>>, backend: Backend) -> Option<Support> {
    let mut acc = Support::empty(backend);
    for v in m.values() {
        for d in v {
            acc = acc.union(&d.support()?).ok()?;
        }
    }
    Some(acc)
}

/// `E`-valued formal distribution `Σ_L T_L (y*)^L`, acting on `F_c(U)` by
/// `u ↦ Σ_L L! ⟨T_L, u_L⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalDistribution {
    domain: OpenSet,
    k: usize,
    e_dim: usize,
    coeffs: BTreeMap<MultiIndex, Vec<BaseDistribution>>,
}

impl FormalDistribution {
    pub fn new(
        domain: OpenSet,
        k: usize,
        e_dim: usize,
        coeffs: BTreeMap<MultiIndex, Vec<BaseDistribution>>,
    ) -> Result<FormalDistribution> {
        if e_dim == 0 {
            return Err(Error::ValueDimMismatch(0, 1));
        }
        for (l, v) in &coeffs {
            if l.len() != k {
                return Err(Error::LengthMismatch(l.len(), k));
            }
            check_evec(v, e_dim, domain.backend())?;
        }
        Ok(FormalDistribution {
            domain,
            k,
            e_dim,
            coeffs: strip(coeffs),
        })
    }

    pub fn zero(domain: OpenSet, k: usize, e_dim: usize) -> FormalDistribution {
        FormalDistribution {
            domain,
            k,
            e_dim,
            coeffs: BTreeMap::new(),
        }
    }

    /// Scalar-valued `T (y*)^L`.
    pub fn term(domain: OpenSet, k: usize, l: MultiIndex, t: BaseDistribution) -> Result<FormalDistribution> {
        FormalDistribution::new(domain, k, 1, BTreeMap::from([(l, vec![t])]))
    }

    pub fn domain(&self) -> &OpenSet {
        &self.domain
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn e_dim(&self) -> usize {
        self.e_dim
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Vec<BaseDistribution>> {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_degree(&self) -> u32 {
        self.coeffs.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    fn check_same(&self, other: &FormalDistribution) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        if self.k != other.k {
            return Err(Error::DegreeMismatch(self.k, other.k));
        }
        if self.e_dim != other.e_dim {
            return Err(Error::ValueDimMismatch(self.e_dim, other.e_dim));
        }
        Ok(())
    }

    pub fn add(&self, other: &FormalDistribution) -> Result<FormalDistribution> {
        self.check_same(other)?;
        Ok(FormalDistribution {
            coeffs: add_coeffs(&self.coeffs, &other.coeffs)?,
            ..self.clone()
        })
    }

    pub fn scale(&self, c: &CQ) -> FormalDistribution {
        FormalDistribution {
            coeffs: strip(
                self.coeffs
                    .iter()
                    .map(|(l, v)| (l.clone(), v.iter().map(|d| d.scale(c)).collect()))
                    .collect(),
            ),
            ..self.clone()
        }
    }

    /// The scalar distribution in slot `e`.
    pub fn component(&self, e: usize) -> Result<FormalDistribution> {
        if e >= self.e_dim {
            return Err(Error::ValueDimMismatch(e, self.e_dim));
        }
        Ok(FormalDistribution {
            domain: self.domain.clone(),
            k: self.k,
            e_dim: 1,
            coeffs: strip(self.coeffs.iter().map(|(l, v)| (l.clone(), vec![v[e].clone()])).collect()),
        })
    }

    pub fn apply_dist(&self, u: &SupportedFormalFunction) -> Result<EVec> {
        self.apply_dist_with(u, QuadConfig::default())
    }

    /// `Σ_L L! ⟨T_L, u_L⟩`, componentwise in `E`.
    pub fn apply_dist_with(&self, u: &SupportedFormalFunction, cfg: QuadConfig) -> Result<EVec> {
        if u.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        if u.k() != self.k {
            return Err(Error::DegreeMismatch(self.k, u.k()));
        }
        if !self.is_zero() && self.max_degree() > u.trunc() {
            return Err(Error::Truncation {
                needed: self.max_degree(),
                have: u.trunc(),
            });
        }
        let mut out = zero_vec(self.e_dim);
        for (l, v) in &self.coeffs {
            let g = u.inner().coeff(l);
            let w = factorial_cq(l);
            for (slot, t) in out.iter_mut().zip(v) {
                let x = t.apply_function(&g, u.support(), cfg)?.scale_cq(&w);
                *slot = &*slot + &x;
            }
        }
        Ok(out)
    }

    /// `η ∘ f`: coefficient at `J''` is `Σ_{L ≥ J''} (L!/J''!) f_{L-J''} T_L`.
    pub fn module_action_dist(&self, f: &FormalFunction) -> Result<FormalDistribution> {
        if f.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        if f.k() != self.k {
            return Err(Error::DegreeMismatch(self.k, f.k()));
        }
        if !self.is_zero() && self.max_degree() > f.trunc() {
            return Err(Error::Truncation {
                needed: self.max_degree(),
                have: f.trunc(),
            });
        }
        let mut out: BTreeMap<MultiIndex, Vec<BaseDistribution>> = BTreeMap::new();
        for (l, v) in &self.coeffs {
            for (j1, fj) in f.coeffs() {
                if !j1.le(l) {
                    continue;
                }
                let j2 = l.sub(j1)?;
                let w = cq_from_q(Q::new(l.factorial(), j2.factorial()));
                let f_scaled = fj.scale(&w);
                let terms: Vec<BaseDistribution> = v.iter().map(|t| t.mul_function(&f_scaled)).collect::<Result<_>>()?;
                let single = BTreeMap::from([(j2, terms)]);
                out = add_coeffs(&out, &single)?;
            }
        }
        Ok(FormalDistribution {
            coeffs: out,
            ..self.clone()
        })
    }

    /// Restriction to `V ⊆ U`.
    pub fn restrict(&self, v: &OpenSet) -> Result<FormalDistribution> {
        if !v.is_subset(&self.domain) {
            return Err(Error::NotSubset);
        }
        Ok(FormalDistribution {
            domain: v.clone(),
            coeffs: strip(
                self.coeffs
                    .iter()
                    .map(|(l, t)| (l.clone(), t.iter().map(|d| d.restrict(v)).collect()))
                    .collect(),
            ),
            ..self.clone()
        })
    }

    /// Extension by zero to `M`; the support must be closed in `M` and lie in the domain.
    pub fn ext(&self, m: &OpenSet) -> Result<FormalDistribution> {
        if !self.domain.is_subset(m) {
            return Err(Error::NotSubset);
        }
        let s = self
            .support()
            .ok_or_else(|| Error::SupportEscapes("smooth term without support bound".into()))?;
        if !s.relative_subset(m, &self.domain) {
            return Err(Error::SupportEscapes(format!("{s} leaves {} inside {m}", self.domain)));
        }
        Ok(FormalDistribution {
            domain: m.clone(),
            ..self.clone()
        })
    }

    pub fn support(&self) -> Option<Support> {
        support_of(&self.coeffs, self.domain.backend())
    }

    /// `{"E_dim": m, "coeffs": {"<L>": [[term, …] per component]}}`.
    pub fn to_json(&self) -> Value {
        json!({"E_dim": self.e_dim, "coeffs": coeffs_to_json(&self.coeffs)})
    }

    pub fn from_json(v: &Value, domain: &OpenSet, k: usize) -> Result<FormalDistribution> {
        let domain = match v.get("domain") {
            Some(d) => OpenSet::from_json(d, domain.backend())?,
            None => domain.clone(),
        };
        let m = v.get("E_dim").and_then(Value::as_u64).unwrap_or(1) as usize;
        let coeffs = coeffs_from_json(v.get("coeffs"), domain.backend(), m)?;
        FormalDistribution::new(domain, k, m, coeffs)
    }
}

/// A formal distribution with a compact support witness.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactFormalDistribution {
    inner: FormalDistribution,
    support: Support,
}

impl CompactFormalDistribution {
    pub fn new(inner: FormalDistribution, support: Support) -> Result<CompactFormalDistribution> {
        if !support.compact_subset_of(inner.domain()) {
            return Err(Error::SupportEscapes(format!("{support} is not compact in {}", inner.domain())));
        }
        let s = inner
            .support()
            .ok_or_else(|| Error::SupportEscapes("smooth term without support bound".into()))?;
        if !s.restricted_to(inner.domain()).is_subset(&support) {
            return Err(Error::SupportEscapes(format!("terms supported in {s}, witness {support}")));
        }
        Ok(CompactFormalDistribution { inner, support })
    }

    /// Witness taken from the terms themselves.
    pub fn from_inner(inner: FormalDistribution) -> Result<CompactFormalDistribution> {
        let s = inner
            .support()
            .ok_or_else(|| Error::SupportEscapes("smooth term without support bound".into()))?;
        let s = s.restricted_to(inner.domain());
        CompactFormalDistribution::new(inner, s)
    }

    pub fn inner(&self) -> &FormalDistribution {
        &self.inner
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn domain(&self) -> &OpenSet {
        self.inner.domain()
    }

    pub fn apply(&self, u: &SupportedFormalFunction) -> Result<EVec> {
        self.inner.apply_dist(u)
    }

    pub fn add(&self, other: &CompactFormalDistribution) -> Result<CompactFormalDistribution> {
        Ok(CompactFormalDistribution {
            inner: self.inner.add(&other.inner)?,
            support: self.support.union(&other.support)?,
        })
    }

    pub fn module_action(&self, f: &FormalFunction) -> Result<CompactFormalDistribution> {
        Ok(CompactFormalDistribution {
            inner: self.inner.module_action_dist(f)?,
            support: self.support.clone(),
        })
    }

    /// Extension by zero to `M ⊇ domain`.
    pub fn ext(&self, m: &OpenSet) -> Result<CompactFormalDistribution> {
        if !self.domain().is_subset(m) {
            return Err(Error::NotSubset);
        }
        Ok(CompactFormalDistribution {
            inner: FormalDistribution {
                domain: m.clone(),
                ..self.inner.clone()
            },
            support: self.support.clone(),
        })
    }

    /// The same functional viewed on `V`; the witness must be compact in `V`.
    pub fn restrict_to(&self, v: &OpenSet) -> Result<CompactFormalDistribution> {
        CompactFormalDistribution::new(self.inner.restrict(v)?, self.support.clone())
    }

    /// `⟨η', u⟩ := ⟨η, f u⟩` for a cutoff `f` that is 1 near the support of `η`.
    pub fn cutoff_extend(&self, f: &SupportedFormalFunction) -> Result<ExtendedDistribution> {
        if f.domain() != self.domain() {
            return Err(Error::DomainMismatch);
        }
        if !f.is_one_near(&self.support) {
            return Err(Error::Precondition(format!(
                "cutoff is not identically 1 near the support {}",
                self.support
            )));
        }
        Ok(ExtendedDistribution {
            eta: self.clone(),
            cutoff: f.clone(),
        })
    }
}

/// A compactly supported distribution extended to all of `F(M)` by a cutoff.
#[derive(Clone, Debug)]
pub struct ExtendedDistribution {
    eta: CompactFormalDistribution,
    cutoff: SupportedFormalFunction,
}

impl ExtendedDistribution {
    pub fn eval(&self, u: &FormalFunction) -> Result<EVec> {
        self.eta.apply(&self.cutoff.cutoff_product(u)?)
    }
}

/// `Σ_J T_J y^J` with distribution coefficients, acting on formal densities.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedFunction {
    domain: OpenSet,
    k: usize,
    e_dim: usize,
    trunc: u32,
    coeffs: BTreeMap<MultiIndex, Vec<BaseDistribution>>,
}

impl GeneralizedFunction {
    pub fn new(
        domain: OpenSet,
        k: usize,
        e_dim: usize,
        trunc: u32,
        coeffs: BTreeMap<MultiIndex, Vec<BaseDistribution>>,
    ) -> Result<GeneralizedFunction> {
        if e_dim == 0 {
            return Err(Error::ValueDimMismatch(0, 1));
        }
        for (j, v) in &coeffs {
            if j.len() != k {
                return Err(Error::LengthMismatch(j.len(), k));
            }
            if j.degree() > trunc {
                return Err(Error::Truncation {
                    needed: j.degree(),
                    have: trunc,
                });
            }
            check_evec(v, e_dim, domain.backend())?;
        }
        Ok(GeneralizedFunction {
            domain,
            k,
            e_dim,
            trunc,
            coeffs: strip(coeffs),
        })
    }

    pub fn zero(domain: OpenSet, k: usize, e_dim: usize, trunc: u32) -> GeneralizedFunction {
        GeneralizedFunction {
            domain,
            k,
            e_dim,
            trunc,
            coeffs: BTreeMap::new(),
        }
    }

    /// A smooth formal function viewed as a scalar generalized function.
    pub fn embed(u: &FormalFunction) -> GeneralizedFunction {
        GeneralizedFunction::embed_many(std::slice::from_ref(u)).unwrap_or_else(|_| {
            GeneralizedFunction::zero(u.domain().clone(), u.k(), 1, u.trunc())
        })
    }

    /// `E`-valued embedding of `(u_1, …, u_m)`.
    pub fn embed_many(us: &[FormalFunction]) -> Result<GeneralizedFunction> {
        let first = us.first().ok_or(Error::ValueDimMismatch(0, 1))?;
        let m = us.len();
        let trunc = us.iter().map(FormalFunction::trunc).min().unwrap_or(0);
        let mut coeffs: BTreeMap<MultiIndex, Vec<BaseDistribution>> = BTreeMap::new();
        for (e, u) in us.iter().enumerate() {
            first.check_same_space(u)?;
            for (j, c) in u.coeffs() {
                if j.degree() > trunc {
                    continue;
                }
                let slot = coeffs
                    .entry(j.clone())
                    .or_insert_with(|| vec![BaseDistribution::zero(first.backend()); m]);
                slot[e] = BaseDistribution::from_function(c);
            }
        }
        GeneralizedFunction::new(first.domain().clone(), first.k(), m, trunc, coeffs)
    }

    pub fn domain(&self) -> &OpenSet {
        &self.domain
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn e_dim(&self) -> usize {
        self.e_dim
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Vec<BaseDistribution>> {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn check_same(&self, other: &GeneralizedFunction) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        if self.k != other.k {
            return Err(Error::DegreeMismatch(self.k, other.k));
        }
        if self.e_dim != other.e_dim {
            return Err(Error::ValueDimMismatch(self.e_dim, other.e_dim));
        }
        Ok(())
    }

    pub fn add(&self, other: &GeneralizedFunction) -> Result<GeneralizedFunction> {
        self.check_same(other)?;
        let trunc = self.trunc.min(other.trunc);
        let coeffs = add_coeffs(&self.coeffs, &other.coeffs)?
            .into_iter()
            .filter(|(j, _)| j.degree() <= trunc)
            .collect();
        Ok(GeneralizedFunction {
            trunc,
            coeffs,
            ..self.clone()
        })
    }

    pub fn scale(&self, c: &CQ) -> GeneralizedFunction {
        GeneralizedFunction {
            coeffs: strip(
                self.coeffs
                    .iter()
                    .map(|(j, v)| (j.clone(), v.iter().map(|d| d.scale(c)).collect()))
                    .collect(),
            ),
            ..self.clone()
        }
    }

    pub fn component(&self, e: usize) -> Result<GeneralizedFunction> {
        if e >= self.e_dim {
            return Err(Error::ValueDimMismatch(e, self.e_dim));
        }
        Ok(GeneralizedFunction {
            e_dim: 1,
            coeffs: strip(self.coeffs.iter().map(|(j, v)| (j.clone(), vec![v[e].clone()])).collect()),
            ..self.clone()
        })
    }

    pub fn apply_gen(&self, eta: &FormalDensity) -> Result<EVec> {
        self.apply_gen_with(eta, QuadConfig::default())
    }

    /// `Σ_L L! ⟨T_L, η_L⟩`.
    pub fn apply_gen_with(&self, eta: &FormalDensity, cfg: QuadConfig) -> Result<EVec> {
        if eta.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        if eta.k() != self.k {
            return Err(Error::DegreeMismatch(self.k, eta.k()));
        }
        if !eta.is_zero() && eta.star_degree() > self.trunc {
            return Err(Error::Truncation {
                needed: eta.star_degree(),
                have: self.trunc,
            });
        }
        let mut out = zero_vec(self.e_dim);
        for (l, d) in eta.coeffs() {
            let Some(v) = self.coeffs.get(l) else { continue };
            let w = factorial_cq(l);
            let mut part = Vec::with_capacity(self.e_dim);
            for t in v {
                part.push(t.apply_density(d, &self.domain, cfg)?.scale_cq(&w));
            }
            add_vec(&mut out, &part);
        }
        Ok(out)
    }

    /// Product with a formal function (truncated Cauchy product).
    pub fn multiply(&self, f: &FormalFunction) -> Result<GeneralizedFunction> {
        if f.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        if f.k() != self.k {
            return Err(Error::DegreeMismatch(self.k, f.k()));
        }
        let trunc = self.trunc.min(f.trunc());
        let mut out = BTreeMap::new();
        for (j1, fj) in f.coeffs() {
            for (j2, v) in &self.coeffs {
                if j1.degree() + j2.degree() > trunc {
                    continue;
                }
                let terms: Vec<BaseDistribution> = v.iter().map(|t| t.mul_function(fj)).collect::<Result<_>>()?;
                out = add_coeffs(&out, &BTreeMap::from([(j1.add(j2)?, terms)]))?;
            }
        }
        Ok(GeneralizedFunction {
            trunc,
            coeffs: out,
            ..self.clone()
        })
    }

    pub fn restrict(&self, v: &OpenSet) -> Result<GeneralizedFunction> {
        if !v.is_subset(&self.domain) {
            return Err(Error::NotSubset);
        }
        Ok(GeneralizedFunction {
            domain: v.clone(),
            coeffs: strip(
                self.coeffs
                    .iter()
                    .map(|(j, t)| (j.clone(), t.iter().map(|d| d.restrict(v)).collect()))
                    .collect(),
            ),
            ..self.clone()
        })
    }

    /// Extension by zero to `M`; the support must be closed in `M` and lie in the domain.
    pub fn ext(&self, m: &OpenSet) -> Result<GeneralizedFunction> {
        if !self.domain.is_subset(m) {
            return Err(Error::NotSubset);
        }
        let s = self
            .support()
            .ok_or_else(|| Error::SupportEscapes("smooth term without support bound".into()))?;
        if !s.relative_subset(m, &self.domain) {
            return Err(Error::SupportEscapes(format!("{s} leaves {} inside {m}", self.domain)));
        }
        Ok(GeneralizedFunction {
            domain: m.clone(),
            ..self.clone()
        })
    }

    pub fn support(&self) -> Option<Support> {
        support_of(&self.coeffs, self.domain.backend())
    }

    /// `{"E_dim": m, "trunc": T, "coeffs": {"<J>": [[term, …] per component]}}`.
    pub fn to_json(&self) -> Value {
        json!({"E_dim": self.e_dim, "trunc": self.trunc, "coeffs": coeffs_to_json(&self.coeffs)})
    }

    pub fn from_json(v: &Value, domain: &OpenSet, k: usize) -> Result<GeneralizedFunction> {
        let domain = match v.get("domain") {
            Some(d) => OpenSet::from_json(d, domain.backend())?,
            None => domain.clone(),
        };
        let m = v.get("E_dim").and_then(Value::as_u64).unwrap_or(1) as usize;
        let trunc = v
            .get("trunc")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("generalized function needs \"trunc\"".into()))? as u32;
        let coeffs = coeffs_from_json(v.get("coeffs"), domain.backend(), m)?;
        GeneralizedFunction::new(domain, k, m, trunc, coeffs)
    }
}

/// `Σ c_{I,J} Ev_a ∘ ∂_x^I ∂_y^J` with `E`-valued coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PointDistribution {
    point: Point,
    k: usize,
    e_dim: usize,
    coeffs: BTreeMap<(MultiIndex, MultiIndex), Vec<CQ>>,
}

impl PointDistribution {
    pub fn new(
        point: Point,
        k: usize,
        e_dim: usize,
        coeffs: BTreeMap<(MultiIndex, MultiIndex), Vec<CQ>>,
    ) -> Result<PointDistribution> {
        let backend = point.backend();
        for ((i, j), v) in &coeffs {
            x_order(backend, i)?;
            if j.len() != k {
                return Err(Error::LengthMismatch(j.len(), k));
            }
            if v.len() != e_dim {
                return Err(Error::ValueDimMismatch(v.len(), e_dim));
            }
        }
        Ok(PointDistribution {
            point,
            k,
            e_dim,
            coeffs: coeffs.into_iter().filter(|(_, v)| v.iter().any(|c| !c.is_zero())).collect(),
        })
    }

    /// The basis element `Ev_a ∘ ∂_x^I ∂_y^J`.
    pub fn basis(point: Point, k: usize, i: MultiIndex, j: MultiIndex) -> Result<PointDistribution> {
        PointDistribution::new(point, k, 1, BTreeMap::from([((i, j), vec![CQ::one()])]))
    }

    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn coeffs(&self) -> &BTreeMap<(MultiIndex, MultiIndex), Vec<CQ>> {
        &self.coeffs
    }

    /// `Σ c_{I,J} · jet(u, a, I, J)`.
    pub fn point_apply(&self, u: &FormalFunction) -> Result<EVec> {
        let mut out = zero_vec(self.e_dim);
        for ((i, j), c) in &self.coeffs {
            let v = u.jet(&self.point, i, j)?;
            for (slot, ce) in out.iter_mut().zip(c) {
                *slot = &*slot + &v.scale_cq(ce);
            }
        }
        Ok(out)
    }

    /// The same functional as a compactly supported formal distribution on `domain`.
    pub fn to_compact(&self, domain: &OpenSet) -> Result<CompactFormalDistribution> {
        if !domain.contains(&self.point) {
            return Err(Error::PointNotInDomain(self.point.to_string()));
        }
        let backend = domain.backend();
        let mut coeffs: BTreeMap<MultiIndex, Vec<BaseDistribution>> = BTreeMap::new();
        for ((i, j), c) in &self.coeffs {
            let comps: Vec<BaseDistribution> = c
                .iter()
                .map(|ce| match &self.point {
                    Point::Label(p) => BaseDistribution::discrete(&[(p.as_str(), ce.clone())]),
                    Point::Coord(a) => BaseDistribution::point(a.clone(), i.degree(), ce.clone()),
                })
                .collect();
            coeffs = add_coeffs(&coeffs, &BTreeMap::from([(j.clone(), comps)]))?;
        }
        let support = match &self.point {
            Point::Label(p) => Support::points(&[p]),
            Point::Coord(a) => Support::Line(ClosedSet::interval(a.clone(), a.clone())),
        };
        let _ = backend;
        CompactFormalDistribution::new(FormalDistribution::new(domain.clone(), self.k, self.e_dim, coeffs)?, support)
    }

    /// `{"point": a, "E_dim": m, "terms": [{"I": [...], "J": [...], "c": [...]}, ...]}`.
    pub fn to_json(&self) -> Value {
        let point = match &self.point {
            Point::Label(p) => json!(p),
            Point::Coord(a) => json!(a.to_string()),
        };
        let terms: Vec<Value> = self
            .coeffs
            .iter()
            .map(|((i, j), c)| json!({"I": i, "J": j, "c": c.iter().map(format_cq).collect::<Vec<_>>()}))
            .collect();
        json!({"point": point, "E_dim": self.e_dim, "terms": terms})
    }

    pub fn from_json(v: &Value, backend: Backend, k: usize) -> Result<PointDistribution> {
        let point = parse_point(v.get("point").ok_or_else(|| Error::Parse("missing \"point\"".into()))?, backend)?;
        let m = v.get("E_dim").and_then(Value::as_u64).unwrap_or(1) as usize;
        let mut coeffs = BTreeMap::new();
        for t in v.get("terms").and_then(Value::as_array).into_iter().flatten() {
            let i = match t.get("I") {
                Some(i) => parse_index(i)?,
                None => MultiIndex::zero(backend.x_dim()),
            };
            let j = match t.get("J") {
                Some(j) => parse_index(j)?,
                None => MultiIndex::zero(k),
            };
            let c = match t.get("c") {
                Some(Value::Array(a)) => a.iter().map(cq_from_json).collect::<Result<Vec<_>>>()?,
                Some(x) => vec![cq_from_json(x)?],
                None => vec![CQ::one()],
            };
            coeffs.insert((i, j), c);
        }
        PointDistribution::new(point, k, m, coeffs)
    }
}

/// Parse a point: a label (discrete) or a rational coordinate (line).
pub fn parse_point(v: &Value, backend: Backend) -> Result<Point> {
    match (backend, v) {
        (Backend::Discrete, Value::String(s)) => Ok(Point::Label(s.clone())),
        (Backend::Line, Value::String(s)) => Ok(Point::Coord(parse_rational(s)?)),
        (Backend::Line, Value::Number(n)) => Ok(Point::Coord(parse_rational(&n.to_string())?)),
        _ => Err(Error::Parse(format!("bad point {v} for the {backend} backend"))),
    }
}

/// All jets `(I, J, value)` with `|I| + |J| ≤ r`, in graded order.
pub fn jet_table(u: &FormalFunction, a: &Point, r: u32) -> Result<Vec<(MultiIndex, MultiIndex, Scalar)>> {
    if u.trunc() < r {
        return Err(Error::Truncation { needed: r, have: u.trunc() });
    }
    let n = u.backend().x_dim();
    let mut out = Vec::new();
    for ij in enumerate_upto(n + u.k(), r) {
        let (i, j) = ij.entries().split_at(n);
        let (i, j) = (MultiIndex::new(i.to_vec()), MultiIndex::new(j.to_vec()));
        let v = u.jet(a, &i, &j)?;
        out.push((i, j, v));
    }
    Ok(out)
}

/// `true` iff every jet of total order `< r` vanishes at `a` (membership in `m_a^r`).
pub fn jet_kernel_check(u: &FormalFunction, a: &Point, r: u32) -> Result<bool> {
    if u.trunc() < r {
        return Err(Error::Truncation { needed: r, have: u.trunc() });
    }
    if r == 0 {
        return Ok(true);
    }
    Ok(jet_table(u, a, r - 1)?.iter().all(|(_, _, v)| v.is_zero()))
}

/// `dim` of point distributions of order `≤ r`: `binom(n + k + r, n + k)`.
pub fn dist_space_dimension(n: usize, k: usize, r: u32) -> BigInt {
    binomial((n + k) as u32 + r, (n + k) as u32)
}

/// The unit vector of dimension `m` with slot `e` set to `v`.
pub fn unit_evec(m: usize, e: usize, v: Scalar) -> EVec {
    let mut out = zero_vec(m);
    out[e] = v;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{cq, q, qr};

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn pqset() -> OpenSet {
        OpenSet::discrete(&["p", "q"])
    }

    fn dfun(dom: &OpenSet, k: usize, trunc: u32, terms: &[(&[u32], &[(&str, i64)])]) -> FormalFunction {
        let coeffs = terms
            .iter()
            .map(|(j, vals)| {
                let v: Vec<(&str, CQ)> = vals.iter().map(|(p, x)| (*p, cq(*x))).collect();
                (mi(j), BaseFunction::discrete(&v))
            })
            .collect();
        FormalFunction::new(dom.clone(), k, trunc, coeffs).unwrap()
    }

    fn line_fun(terms: &[(&[u32], &str)], trunc: u32) -> FormalFunction {
        let coeffs = terms
            .iter()
            .map(|(j, s)| (mi(j), BaseFunction::Smooth(SmoothExpr::parse(s).unwrap())))
            .collect();
        FormalFunction::new(OpenSet::whole_line(), 1, trunc, coeffs).unwrap()
    }

    #[test]
    fn apply_dist_examples() {
        let eta = FormalDistribution::term(pqset(), 1, mi(&[0]), BaseDistribution::discrete(&[("p", cq(1))])).unwrap();
        let u = dfun(&pqset(), 1, 1, &[(&[0], &[("p", 7), ("q", 1)])]);
        let u = SupportedFormalFunction::new(u, Support::points(&["p", "q"])).unwrap();
        assert_eq!(eta.apply_dist(&u).unwrap(), vec![Scalar::int(7)]);
        assert_eq!(FormalDistribution::zero(pqset(), 1, 2).apply_dist(&u).unwrap(), vec![Scalar::zero(); 2]);
    }

    #[test]
    fn point_term_on_bump() {
        let dom = OpenSet::whole_line();
        let eta = FormalDistribution::term(dom.clone(), 1, mi(&[1]), BaseDistribution::point(q(0), 0, cq(1))).unwrap();
        let b = SmoothExpr::bump(&q(-2), &q(-1), &q(1), &q(2)).unwrap();
        let u = FormalFunction::monomial(dom, 1, 1, mi(&[1]), BaseFunction::Smooth(b)).unwrap();
        let u = SupportedFormalFunction::from_function(u).unwrap();
        assert_eq!(eta.apply_dist(&u).unwrap(), vec![Scalar::int(1)]);
    }

    #[test]
    fn apply_gen_examples() {
        let g = GeneralizedFunction::new(
            pqset(),
            1,
            1,
            2,
            BTreeMap::from([(mi(&[1]), vec![BaseDistribution::discrete(&[("p", cq(2))])])]),
        )
        .unwrap();
        let eta = FormalDensity::term(pqset(), 1, mi(&[1]), mi(&[]), BaseDensity::discrete(&[("p", cq(3))])).unwrap();
        assert_eq!(g.apply_gen(&eta).unwrap(), vec![Scalar::int(6)]);
        let z = GeneralizedFunction::zero(pqset(), 1, 1, 2);
        assert_eq!(z.apply_gen(&eta).unwrap(), vec![Scalar::zero()]);
    }

    #[test]
    fn embedding_matches_pairing_on_the_line() {
        let dom = OpenSet::bounded(q(-1), q(4));
        let u = FormalFunction::new(
            dom.clone(),
            1,
            2,
            BTreeMap::from([
                (mi(&[0]), BaseFunction::Smooth(SmoothExpr::parse("(pow x 2)").unwrap())),
                (mi(&[1]), BaseFunction::Smooth(SmoothExpr::parse("(s x)").unwrap())),
            ]),
        )
        .unwrap();
        let b = SmoothExpr::bump(&q(0), &q(1), &q(2), &q(3)).unwrap();
        let tau = BaseDensity::from_expr(b).unwrap();
        let eta = FormalDensity::term(dom.clone(), 1, mi(&[1]), mi(&[1]), tau.clone())
            .unwrap()
            .add(&FormalDensity::term(dom, 1, mi(&[0]), mi(&[2]), tau).unwrap())
            .unwrap();
        let a = GeneralizedFunction::embed(&u).apply_gen(&eta).unwrap();
        let b = eta.pair(&u).unwrap();
        assert!(a[0].approx_eq(&b, 1e-8));
    }

    #[test]
    fn point_term_transposes_derivatives() {
        // ⟨δ_0 ∂_x, τ⟩ = -τ'(0) for τ = x·bump
        let dom = OpenSet::whole_line();
        let b = SmoothExpr::bump(&q(-2), &q(-1), &q(1), &q(2)).unwrap();
        let tau = BaseDensity::from_expr(b.mul(&SmoothExpr::x())).unwrap();
        let t = BaseDistribution::point(q(0), 0, cq(1));
        let d = DistributionalBaseDensity::single(mi(&[1]), tau);
        assert_eq!(t.apply_density(&d, &dom, QuadConfig::default()).unwrap(), Scalar::int(-1));
    }

    #[test]
    fn module_action_dist_identity() {
        let eta = FormalDistribution::new(
            pqset(),
            1,
            1,
            BTreeMap::from([
                (mi(&[2]), vec![BaseDistribution::discrete(&[("p", cq(1)), ("q", cq(2))])]),
                (mi(&[0]), vec![BaseDistribution::discrete(&[("q", cq(-3))])]),
            ]),
        )
        .unwrap();
        let f = dfun(&pqset(), 1, 2, &[(&[0], &[("p", 2), ("q", 1)]), (&[1], &[("p", 1), ("q", 5)])]);
        let u = dfun(&pqset(), 1, 2, &[(&[0], &[("p", 1)]), (&[1], &[("p", 3), ("q", -1)]), (&[2], &[("q", 4)])]);
        let su = SupportedFormalFunction::new(u.clone(), Support::points(&["p", "q"])).unwrap();
        let fu = SupportedFormalFunction::new(f.multiply(&u).unwrap(), Support::points(&["p", "q"])).unwrap();
        assert_eq!(eta.module_action_dist(&f).unwrap().apply_dist(&su).unwrap(), eta.apply_dist(&fu).unwrap());
        assert_eq!(eta.module_action_dist(&FormalFunction::one(pqset(), 1, 3)).unwrap(), eta);
        assert!(eta.module_action_dist(&FormalFunction::zero(pqset(), 1, 3)).unwrap().is_zero());
    }

    #[test]
    fn point_distribution_examples() {
        let a = Point::Coord(q(0));
        let u = line_fun(&[(&[1], "x"), (&[0], "(pow x 2)")], 2);
        let d = PointDistribution::basis(a.clone(), 1, mi(&[1]), mi(&[1])).unwrap();
        assert_eq!(d.point_apply(&u).unwrap(), vec![Scalar::int(1)]);
        let ev = PointDistribution::basis(Point::Coord(qr(1, 2)), 1, mi(&[0]), mi(&[0])).unwrap();
        assert_eq!(ev.point_apply(&u).unwrap()[0], u.ev(&Point::Coord(qr(1, 2))).unwrap());
        let c = d.to_compact(&OpenSet::whole_line()).unwrap();
        assert_eq!(c.support(), &Support::Line(ClosedSet::interval(q(0), q(0))));
    }

    #[test]
    fn jet_kernel_examples() {
        let a = Point::Coord(q(0));
        let u = line_fun(&[(&[1], "(pow x 2)")], 4);
        assert!(jet_kernel_check(&u, &a, 3).unwrap());
        assert!(!jet_kernel_check(&u, &a, 4).unwrap());
        let z = line_fun(&[], 5);
        assert!((0..=5).all(|r| jet_kernel_check(&z, &a, r).unwrap()));
        let one = line_fun(&[(&[0], "1")], 3);
        assert!(!jet_kernel_check(&one, &a, 1).unwrap());
        let table = jet_table(&u.truncate(3), &a, 3).unwrap();
        let nz: Vec<_> = table.iter().filter(|(_, _, v)| !v.is_zero()).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!((nz[0].0.clone(), nz[0].1.clone(), nz[0].2.clone()), (mi(&[2]), mi(&[1]), Scalar::int(2)));
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(dist_space_dimension(0, 0, 5), BigInt::from(1));
        assert_eq!(dist_space_dimension(1, 1, 2), BigInt::from(6));
        assert_eq!(dist_space_dimension(1, 2, 3), BigInt::from(20));
    }

    #[test]
    fn cutoff_extension_is_independent_of_cutoff() {
        let m = OpenSet::discrete(&["p", "q", "r"]);
        let eta = FormalDistribution::term(m.clone(), 1, mi(&[1]), BaseDistribution::discrete(&[("p", cq(3))])).unwrap();
        let eta = CompactFormalDistribution::from_inner(eta).unwrap();
        let f1 = SupportedFormalFunction::discrete_indicator(m.clone(), 1, 2, &["p", "q"]).unwrap();
        let f2 = SupportedFormalFunction::discrete_indicator(m.clone(), 1, 2, &["p"]).unwrap();
        let u = dfun(&m, 1, 2, &[(&[1], &[("p", 2), ("q", 9), ("r", 1)])]);
        let a = eta.cutoff_extend(&f1).unwrap().eval(&u).unwrap();
        let b = eta.cutoff_extend(&f2).unwrap().eval(&u).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, vec![Scalar::int(6)]);
        let bad = SupportedFormalFunction::discrete_indicator(m, 1, 2, &["q"]).unwrap();
        assert!(matches!(eta.cutoff_extend(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn json_roundtrip() {
        let dom = OpenSet::whole_line();
        let eta = FormalDistribution::new(
            dom.clone(),
            1,
            2,
            BTreeMap::from([(
                mi(&[1]),
                vec![
                    BaseDistribution::point(qr(1, 2), 1, cq(3)),
                    BaseDistribution::smooth(SmoothExpr::bump(&q(0), &q(1), &q(2), &q(3)).unwrap()),
                ],
            )]),
        )
        .unwrap();
        assert_eq!(FormalDistribution::from_json(&eta.to_json(), &dom, 1).unwrap(), eta);
        let pd = PointDistribution::basis(Point::label("p"), 2, mi(&[]), mi(&[1, 0])).unwrap();
        assert_eq!(PointDistribution::from_json(&pd.to_json(), Backend::Discrete, 2).unwrap(), pd);
    }
}
