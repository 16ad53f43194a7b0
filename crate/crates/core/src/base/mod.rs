//! The two models of the reduced space: a finite discrete set of labeled
//! points (exact arithmetic throughout) and the real line with symbolic
//! smooth functions and quadrature.

pub mod expr;
pub mod interval;
pub mod quad;
pub mod sets;

use std::collections::{BTreeMap, BTreeSet};

use num::Zero;
use serde_json::{json, Map, Value};

pub use expr::SmoothExpr;
pub use quad::QuadConfig;
pub use sets::{Backend, ClosedInterval, ClosedSet, Ext, OpenInterval, OpenSet, Point, Support};

use crate::error::{Error, Result};
use crate::scalar::{cq_from_json, cq_to_c64, format_cq, Scalar, CQ};

/// The reduced space `N`.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseSpace {
    /// Finite ordered list of uniquely labeled points.
    Discrete(Vec<String>),
    /// The real line with global coordinate `x`.
    SmoothLine,
}

impl BaseSpace {
    pub fn discrete<S: AsRef<str>>(labels: &[S]) -> Result<BaseSpace> {
        let v: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        let unique: BTreeSet<&String> = v.iter().collect();
        if unique.len() != v.len() {
            return Err(Error::Parse("duplicate point label".into()));
        }
        Ok(BaseSpace::Discrete(v))
    }

    pub fn backend(&self) -> Backend {
        match self {
            BaseSpace::Discrete(_) => Backend::Discrete,
            BaseSpace::SmoothLine => Backend::Line,
        }
    }

    pub fn whole(&self) -> OpenSet {
        match self {
            BaseSpace::Discrete(p) => OpenSet::discrete(p),
            BaseSpace::SmoothLine => OpenSet::whole_line(),
        }
    }
}

fn strip_zeros(m: BTreeMap<String, CQ>) -> BTreeMap<String, CQ> {
    m.into_iter().filter(|(_, v)| !v.is_zero()).collect()
}

fn map_add(a: &BTreeMap<String, CQ>, b: &BTreeMap<String, CQ>) -> BTreeMap<String, CQ> {
    let mut out = a.clone();
    for (k, v) in b {
        let e = out.entry(k.clone()).or_insert_with(CQ::zero);
        *e = &*e + v;
    }
    strip_zeros(out)
}

fn map_to_json(m: &BTreeMap<String, CQ>) -> Value {
    Value::Object(
        m.iter()
            .map(|(k, v)| (k.clone(), json!(format_cq(v))))
            .collect::<Map<_, _>>(),
    )
}

fn map_from_json(v: &Value) -> Result<BTreeMap<String, CQ>> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse(format!("expected point→value object, got {v}")))?;
    obj.iter()
        .map(|(k, v)| Ok((k.clone(), cq_from_json(v)?)))
        .collect::<Result<BTreeMap<_, _>>>()
        .map(strip_zeros)
}

/// A smooth function on (an open subset of) the base.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseFunction {
    /// Point → value; absent points are zero.
    Discrete(BTreeMap<String, CQ>),
    Smooth(SmoothExpr),
}

impl BaseFunction {
    pub fn zero(backend: Backend) -> BaseFunction {
        match backend {
            Backend::Discrete => BaseFunction::Discrete(BTreeMap::new()),
            Backend::Line => BaseFunction::Smooth(SmoothExpr::zero()),
        }
    }

    /// Constant function on `domain`.
    pub fn constant(domain: &OpenSet, c: CQ) -> BaseFunction {
        match domain {
            OpenSet::Discrete(pts) => BaseFunction::Discrete(strip_zeros(
                pts.iter().map(|p| (p.clone(), c.clone())).collect(),
            )),
            OpenSet::Line(_) => BaseFunction::Smooth(SmoothExpr::constant(c)),
        }
    }

    pub fn discrete<S: AsRef<str>>(values: &[(S, CQ)]) -> BaseFunction {
        BaseFunction::Discrete(strip_zeros(
            values
                .iter()
                .map(|(k, v)| (k.as_ref().to_string(), v.clone()))
                .collect(),
        ))
    }

    pub fn backend(&self) -> Backend {
        match self {
            BaseFunction::Discrete(_) => Backend::Discrete,
            BaseFunction::Smooth(_) => Backend::Line,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BaseFunction::Discrete(m) => m.is_empty(),
            BaseFunction::Smooth(e) => e.is_zero(),
        }
    }

    pub fn add(&self, other: &BaseFunction) -> Result<BaseFunction> {
        match (self, other) {
            (BaseFunction::Discrete(a), BaseFunction::Discrete(b)) => {
                Ok(BaseFunction::Discrete(map_add(a, b)))
            }
            (BaseFunction::Smooth(a), BaseFunction::Smooth(b)) => Ok(BaseFunction::Smooth(a.add(b))),
            _ => Err(Error::BackendMismatch("function addition".into())),
        }
    }

    pub fn scale(&self, c: &CQ) -> BaseFunction {
        match self {
            BaseFunction::Discrete(m) => BaseFunction::Discrete(strip_zeros(
                m.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
            )),
            BaseFunction::Smooth(e) => BaseFunction::Smooth(e.scale(c)),
        }
    }

    pub fn mul(&self, other: &BaseFunction) -> Result<BaseFunction> {
        match (self, other) {
            (BaseFunction::Discrete(a), BaseFunction::Discrete(b)) => Ok(BaseFunction::Discrete(
                strip_zeros(
                    a.iter()
                        .filter_map(|(k, v)| b.get(k).map(|w| (k.clone(), v * w)))
                        .collect(),
                ),
            )),
            (BaseFunction::Smooth(a), BaseFunction::Smooth(b)) => Ok(BaseFunction::Smooth(a.mul(b))),
            _ => Err(Error::BackendMismatch("function product".into())),
        }
    }

    /// Restriction to an open subset; a no-op on the line (expressions are global).
    pub fn restrict(&self, v: &OpenSet) -> BaseFunction {
        match (self, v) {
            (BaseFunction::Discrete(m), OpenSet::Discrete(pts)) => BaseFunction::Discrete(
                m.iter()
                    .filter(|(k, _)| pts.contains(*k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            ),
            _ => self.clone(),
        }
    }

    /// `∂_x^n`; only `n = 0` exists on the discrete backend.
    pub fn derivative(&self, n: u32) -> Result<BaseFunction> {
        match self {
            BaseFunction::Discrete(_) if n > 0 => Err(Error::XDerivativeOnDiscrete),
            BaseFunction::Discrete(_) => Ok(self.clone()),
            BaseFunction::Smooth(e) => Ok(BaseFunction::Smooth(e.nth_derivative(n))),
        }
    }

    pub fn eval(&self, p: &Point) -> Result<Scalar> {
        match (self, p) {
            (BaseFunction::Discrete(m), Point::Label(l)) => {
                Ok(Scalar::Exact(m.get(l).cloned().unwrap_or_else(CQ::zero)))
            }
            (BaseFunction::Smooth(e), Point::Coord(x)) => Ok(e.eval(x)),
            _ => Err(Error::BackendMismatch(format!("evaluation at {p}"))),
        }
    }

    /// Closed support witness, when one is known.
    pub fn support(&self) -> Option<Support> {
        match self {
            BaseFunction::Discrete(m) => Some(Support::Points(m.keys().cloned().collect())),
            BaseFunction::Smooth(e) => e.support().cloned().map(Support::Line),
        }
    }

    /// Attach a support witness to a smooth coefficient (discrete values are exact already).
    pub fn with_support(&self, s: &Support) -> BaseFunction {
        match (self, s) {
            (BaseFunction::Smooth(e), Support::Line(c)) => BaseFunction::Smooth(e.with_support(c)),
            (BaseFunction::Discrete(m), Support::Points(p)) => BaseFunction::Discrete(
                m.iter()
                    .filter(|(k, _)| p.contains(*k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            ),
            _ => self.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            BaseFunction::Discrete(m) => map_to_json(m),
            BaseFunction::Smooth(e) => json!(e.to_sexpr()),
        }
    }

    pub fn from_json(v: &Value, backend: Backend) -> Result<BaseFunction> {
        match backend {
            Backend::Discrete => map_from_json(v).map(BaseFunction::Discrete),
            Backend::Line => match v {
                Value::String(s) => SmoothExpr::parse(s).map(BaseFunction::Smooth),
                Value::Number(_) => Ok(BaseFunction::Smooth(SmoothExpr::constant(cq_from_json(v)?))),
                other => Err(Error::Parse(format!("expected expression string, got {other}"))),
            },
        }
    }
}

/// One piece of a line density: `expr · |dx|` on a bounded closed window, zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityPiece {
    pub expr: SmoothExpr,
    pub window: ClosedSet,
}

impl DensityPiece {
    /// Window narrowed by the expression's own support bound.
    pub fn effective_window(&self) -> ClosedSet {
        match self.expr.support() {
            Some(s) => self.window.intersect(s),
            None => self.window.clone(),
        }
    }
}

/// A compactly supported smooth density on the base.
///
/// On the discrete backend a density is a finitely supported function and
/// integration is summation. On the line it is a sum of pieces, each an
/// expression against `|dx|` cut to a bounded window.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseDensity {
    Discrete(BTreeMap<String, CQ>),
    Smooth(Vec<DensityPiece>),
}

impl BaseDensity {
    pub fn zero(backend: Backend) -> BaseDensity {
        match backend {
            Backend::Discrete => BaseDensity::Discrete(BTreeMap::new()),
            Backend::Line => BaseDensity::Smooth(Vec::new()),
        }
    }

    pub fn discrete<S: AsRef<str>>(values: &[(S, CQ)]) -> BaseDensity {
        BaseDensity::Discrete(strip_zeros(
            values
                .iter()
                .map(|(k, v)| (k.as_ref().to_string(), v.clone()))
                .collect(),
        ))
    }

    pub fn from_map(m: BTreeMap<String, CQ>) -> BaseDensity {
        BaseDensity::Discrete(strip_zeros(m))
    }

    /// Line density `expr · |dx|` on `window`; the window must be bounded.
    pub fn smooth(expr: SmoothExpr, window: ClosedSet) -> Result<BaseDensity> {
        if !window.is_bounded() {
            return Err(Error::SupportEscapes("density window must be bounded".into()));
        }
        Ok(BaseDensity::Smooth(vec![DensityPiece { expr, window }]).canonical())
    }

    /// Line density whose window is the expression's own (bounded) support bound.
    pub fn from_expr(expr: SmoothExpr) -> Result<BaseDensity> {
        let window = expr
            .support()
            .cloned()
            .ok_or_else(|| Error::SupportEscapes("expression has no compact support bound".into()))?;
        BaseDensity::smooth(expr, window)
    }

    pub fn backend(&self) -> Backend {
        match self {
            BaseDensity::Discrete(_) => Backend::Discrete,
            BaseDensity::Smooth(_) => Backend::Line,
        }
    }

    fn canonical(self) -> BaseDensity {
        match self {
            BaseDensity::Discrete(m) => BaseDensity::Discrete(strip_zeros(m)),
            BaseDensity::Smooth(pieces) => {
                let mut out: Vec<DensityPiece> = Vec::new();
                for p in pieces {
                    if p.expr.is_zero() || p.effective_window().is_empty() {
                        continue;
                    }
                    match out.iter_mut().find(|q| q.window == p.window) {
                        Some(q) => q.expr = q.expr.add(&p.expr),
                        None => out.push(p),
                    }
                }
                out.retain(|p| !p.expr.is_zero());
                out.sort_by(|a, b| a.window.intervals().cmp(b.window.intervals()));
                BaseDensity::Smooth(out)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BaseDensity::Discrete(m) => m.is_empty(),
            BaseDensity::Smooth(p) => p.is_empty(),
        }
    }

    pub fn add(&self, other: &BaseDensity) -> Result<BaseDensity> {
        match (self, other) {
            (BaseDensity::Discrete(a), BaseDensity::Discrete(b)) => {
                Ok(BaseDensity::Discrete(map_add(a, b)))
            }
            (BaseDensity::Smooth(a), BaseDensity::Smooth(b)) => {
                Ok(BaseDensity::Smooth(a.iter().chain(b).cloned().collect()).canonical())
            }
            _ => Err(Error::BackendMismatch("density addition".into())),
        }
    }

    pub fn scale(&self, c: &CQ) -> BaseDensity {
        match self {
            BaseDensity::Discrete(m) => BaseDensity::Discrete(strip_zeros(
                m.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
            )),
            BaseDensity::Smooth(p) => BaseDensity::Smooth(
                p.iter()
                    .map(|p| DensityPiece {
                        expr: p.expr.scale(c),
                        window: p.window.clone(),
                    })
                    .collect(),
            )
            .canonical(),
        }
    }

    pub fn neg(&self) -> BaseDensity {
        self.scale(&crate::scalar::cq(-1))
    }

    /// Pointwise product with a smooth function.
    pub fn mul_function(&self, f: &BaseFunction) -> Result<BaseDensity> {
        match (self, f) {
            (BaseDensity::Discrete(a), BaseFunction::Discrete(b)) => Ok(BaseDensity::Discrete(
                strip_zeros(
                    a.iter()
                        .filter_map(|(k, v)| b.get(k).map(|w| (k.clone(), v * w)))
                        .collect(),
                ),
            )),
            (BaseDensity::Smooth(p), BaseFunction::Smooth(g)) => Ok(BaseDensity::Smooth(
                p.iter()
                    .map(|p| DensityPiece {
                        expr: p.expr.mul(g),
                        window: p.window.clone(),
                    })
                    .collect(),
            )
            .canonical()),
            _ => Err(Error::BackendMismatch("density times function".into())),
        }
    }

    /// `∂_x` of the density coefficient (line only).
    pub fn derivative(&self) -> Result<BaseDensity> {
        match self {
            BaseDensity::Discrete(_) => Err(Error::XDerivativeOnDiscrete),
            BaseDensity::Smooth(p) => Ok(BaseDensity::Smooth(
                p.iter()
                    .map(|p| DensityPiece {
                        expr: p.expr.derivative(),
                        window: p.window.clone(),
                    })
                    .collect(),
            )
            .canonical()),
        }
    }

    /// `n`-th derivative of the coefficient function at a point (zero outside all windows).
    pub fn coefficient_derivative_at(&self, p: &Point, n: u32) -> Result<Scalar> {
        match (self, p) {
            (BaseDensity::Discrete(m), Point::Label(l)) => {
                if n > 0 {
                    return Err(Error::XDerivativeOnDiscrete);
                }
                Ok(Scalar::Exact(m.get(l).cloned().unwrap_or_else(CQ::zero)))
            }
            (BaseDensity::Smooth(pieces), Point::Coord(x)) => Ok(pieces
                .iter()
                .filter(|pc| pc.window.contains(x))
                .map(|pc| pc.expr.nth_derivative(n).eval(x))
                .sum()),
            _ => Err(Error::BackendMismatch(format!("density at {p}"))),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            BaseDensity::Discrete(m) => Support::Points(m.keys().cloned().collect()),
            BaseDensity::Smooth(p) => Support::Line(
                p.iter()
                    .fold(ClosedSet::empty(), |acc, pc| acc.union(&pc.effective_window())),
            ),
        }
    }

    /// Drop the part outside `v` (discrete) / keep pieces as they are (line).
    pub fn restrict(&self, v: &OpenSet) -> BaseDensity {
        match (self, v) {
            (BaseDensity::Discrete(m), OpenSet::Discrete(pts)) => BaseDensity::Discrete(
                m.iter()
                    .filter(|(k, _)| pts.contains(*k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            ),
            _ => self.clone(),
        }
    }

    pub fn integrate(&self, u: &OpenSet) -> Result<Scalar> {
        self.integrate_with(u, QuadConfig::default())
    }

    /// `∫_U` of the density: exact sums on the discrete backend, exact
    /// antiderivatives for polynomial pieces, adaptive quadrature otherwise.
    pub fn integrate_with(&self, u: &OpenSet, cfg: QuadConfig) -> Result<Scalar> {
        match (self, u) {
            (BaseDensity::Discrete(m), OpenSet::Discrete(pts)) => Ok(Scalar::Exact(
                m.iter()
                    .filter(|(k, _)| pts.contains(*k))
                    .fold(CQ::zero(), |acc, (_, v)| acc + v),
            )),
            (BaseDensity::Smooth(pieces), OpenSet::Line(comps)) => {
                let mut total = Scalar::zero();
                for pc in pieces {
                    let ranges = pc.effective_window().clip_to_open(comps)?;
                    if ranges.is_empty() {
                        continue;
                    }
                    let v = match pc.expr.to_poly() {
                        Some(poly) => Scalar::Exact(
                            ranges
                                .iter()
                                .map(|(a, b)| quad::integrate_poly(&poly, a, b))
                                .fold(CQ::zero(), |acc, v| acc + v),
                        ),
                        None => {
                            let c = pc.expr.compile();
                            let fr: Vec<(f64, f64)> = ranges
                                .iter()
                                .map(|(a, b)| (crate::scalar::q_to_f64(a), crate::scalar::q_to_f64(b)))
                                .collect();
                            Scalar::Approx(quad::integrate_adaptive(|x| c.eval(x), &fr, cfg)?)
                        }
                    };
                    total = &total + &v;
                }
                Ok(total)
            }
            _ => Err(Error::BackendMismatch("integration domain".into())),
        }
    }

    /// Largest absolute coefficient value on a sample grid (diagnostic).
    pub fn sup_on_grid(&self, n: usize) -> f64 {
        match self {
            BaseDensity::Discrete(m) => m.values().map(|v| cq_to_c64(v).norm()).fold(0.0, f64::max),
            BaseDensity::Smooth(pieces) => pieces
                .iter()
                .flat_map(|pc| {
                    let c = pc.expr.compile();
                    let hull = pc.effective_window().hull();
                    let (lo, hi) = hull
                        .map(|h| (h.lo.to_f64(), h.hi.to_f64()))
                        .unwrap_or((0.0, 0.0));
                    (0..n).map(move |i| {
                        let x = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
                        c.eval(x).norm()
                    })
                })
                .fold(0.0, f64::max),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            BaseDensity::Discrete(m) => map_to_json(m),
            BaseDensity::Smooth(pieces) => {
                let items: Vec<Value> = pieces
                    .iter()
                    .map(|p| json!({"expr": p.expr.to_sexpr(), "support": p.window.to_json()}))
                    .collect();
                if items.len() == 1 {
                    items.into_iter().next().unwrap_or(Value::Null)
                } else {
                    Value::Array(items)
                }
            }
        }
    }

    /// Discrete: `{point: value}`; line: `{"expr": "...", "support": [[a,b],…]}` or a list of those.
    pub fn from_json(v: &Value, backend: Backend) -> Result<BaseDensity> {
        match backend {
            Backend::Discrete => map_from_json(v).map(BaseDensity::Discrete),
            Backend::Line => {
                let one = |v: &Value| -> Result<BaseDensity> {
                    let expr = v
                        .get("expr")
                        .and_then(Value::as_str)
                        .ok_or_else(|| Error::Parse(format!("line density needs \"expr\": {v}")))?;
                    let expr = SmoothExpr::parse(expr)?;
                    match v.get("support") {
                        Some(s) => BaseDensity::smooth(expr, ClosedSet::from_json(s)?),
                        None => BaseDensity::from_expr(expr),
                    }
                };
                match v {
                    Value::Array(items) => items.iter().try_fold(BaseDensity::zero(Backend::Line), |acc, it| {
                        acc.add(&one(it)?)
                    }),
                    _ => one(v),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{cq, q, qr};

    #[test]
    fn discrete_integration_is_a_sum() {
        let d = BaseDensity::discrete(&[("p", cq(1)), ("q", cq(2))]);
        assert_eq!(d.integrate(&OpenSet::discrete(&["p", "q"])).unwrap(), Scalar::int(3));
        assert_eq!(d.integrate(&OpenSet::discrete(&["q", "r"])).unwrap(), Scalar::int(2));
    }

    #[test]
    fn zero_density_integrates_to_zero() {
        let z = BaseDensity::zero(Backend::Line);
        assert!(z.integrate(&OpenSet::whole_line()).unwrap().is_exact_zero());
    }

    #[test]
    fn polynomial_density_uses_exact_antiderivative() {
        let d = BaseDensity::smooth(
            SmoothExpr::parse("(pow x 2)").unwrap(),
            ClosedSet::interval(q(0), q(1)),
        )
        .unwrap();
        let v = d.integrate(&OpenSet::whole_line()).unwrap();
        assert_eq!(v, Scalar::Exact(crate::scalar::cq_from_q(qr(1, 3))));
        let half = d.integrate(&OpenSet::bounded(qr(1, 2), q(5))).unwrap();
        assert_eq!(half, Scalar::Exact(crate::scalar::cq_from_q(qr(7, 24))));
    }

    #[test]
    fn total_derivative_integrates_to_zero() {
        let b = SmoothExpr::bump(&q(0), &q(1), &q(2), &q(3)).unwrap();
        let d = BaseDensity::from_expr(b.mul(&SmoothExpr::parse("(+ 1 (pow x 3))").unwrap())).unwrap();
        let v = d.derivative().unwrap().integrate(&OpenSet::whole_line()).unwrap();
        assert!(v.abs() < 1e-8, "{v}");
    }

    #[test]
    fn bump_density_integral_is_positive_and_bounded() {
        let b = SmoothExpr::bump(&q(0), &q(1), &q(2), &q(3)).unwrap();
        let v = BaseDensity::from_expr(b).unwrap().integrate(&OpenSet::whole_line()).unwrap();
        let r = v.to_c64().re;
        assert!(r > 1.0 && r < 3.0);
        // symmetric bump: exactly half of its mass lies left of the midpoint
        let b = SmoothExpr::bump(&q(0), &q(1), &q(2), &q(3)).unwrap();
        let left = BaseDensity::from_expr(b)
            .unwrap()
            .integrate(&OpenSet::interval(Ext::NegInf, Ext::Fin(qr(3, 2))))
            .unwrap();
        assert!((left.to_c64().re - r / 2.0).abs() < 1e-10);
    }

    #[test]
    fn discrete_additivity_over_disjoint_sets() {
        let d = BaseDensity::discrete(&[("p", cq(1)), ("q", cq(-2)), ("r", cq(5))]);
        let a = OpenSet::discrete(&["p"]);
        let b = OpenSet::discrete(&["q", "r"]);
        let ab = a.union(&b).unwrap();
        assert_eq!(
            d.integrate(&ab).unwrap(),
            &d.integrate(&a).unwrap() + &d.integrate(&b).unwrap()
        );
    }

    #[test]
    fn base_space_rejects_duplicates() {
        assert!(BaseSpace::discrete(&["p", "p"]).is_err());
        assert_eq!(BaseSpace::discrete(&["p", "q"]).unwrap().whole(), OpenSet::discrete(&["p", "q"]));
    }

    #[test]
    fn density_json_roundtrip() {
        let d = BaseDensity::smooth(
            SmoothExpr::parse("(* (bump 0 1 2 3) x)").unwrap(),
            ClosedSet::interval(q(0), q(3)),
        )
        .unwrap();
        let back = BaseDensity::from_json(&d.to_json(), Backend::Line).unwrap();
        let u = OpenSet::whole_line();
        assert!(back.integrate(&u).unwrap().approx_eq(&d.integrate(&u).unwrap(), 1e-12));
        let dd = BaseDensity::discrete(&[("p", cq(1))]);
        assert_eq!(BaseDensity::from_json(&dd.to_json(), Backend::Discrete).unwrap(), dd);
    }
}
