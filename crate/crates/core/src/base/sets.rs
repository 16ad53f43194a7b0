//! Open sets, closed support witnesses and points of the two base backends.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num::{Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{parse_rational, q_to_f64, Q};

/// Which model of the reduced space a value lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Discrete,
    Line,
}

impl Backend {
    /// Number of base coordinates `x`.
    pub fn x_dim(self) -> usize {
        match self {
            Backend::Discrete => 0,
            Backend::Line => 1,
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Discrete => f.write_str("discrete"),
            Backend::Line => f.write_str("line"),
        }
    }
}

/// A point of the base: a label on the discrete backend, a rational coordinate on the line.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Point {
    Label(String),
    Coord(Q),
}

impl Point {
    pub fn label(s: &str) -> Point {
        Point::Label(s.to_string())
    }

    pub fn backend(&self) -> Backend {
        match self {
            Point::Label(_) => Backend::Discrete,
            Point::Coord(_) => Backend::Line,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Label(s) => f.write_str(s),
            Point::Coord(c) => write!(f, "{c}"),
        }
    }
}

/// Extended rational: an interval endpoint.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ext {
    NegInf,
    Fin(Q),
    PosInf,
}

impl Ext {
    pub fn fin(&self) -> Option<&Q> {
        match self {
            Ext::Fin(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ext::NegInf => f64::NEG_INFINITY,
            Ext::Fin(v) => q_to_f64(v),
            Ext::PosInf => f64::INFINITY,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Ext::NegInf => json!("-inf"),
            Ext::PosInf => json!("inf"),
            Ext::Fin(v) => json!(v.to_string()),
        }
    }

    fn from_json(v: &Value) -> Result<Ext> {
        match v {
            Value::String(s) => match s.trim() {
                "-inf" | "-oo" => Ok(Ext::NegInf),
                "inf" | "+inf" | "oo" => Ok(Ext::PosInf),
                other => Ok(Ext::Fin(parse_rational(other)?)),
            },
            Value::Number(n) => Ok(Ext::Fin(parse_rational(&n.to_string())?)),
            other => Err(Error::Parse(format!("bad interval endpoint {other}"))),
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::NegInf => f.write_str("-inf"),
            Ext::PosInf => f.write_str("inf"),
            Ext::Fin(v) => write!(f, "{v}"),
        }
    }
}

/// Open interval `(lo, hi)` with `lo < hi`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpenInterval {
    pub lo: Ext,
    pub hi: Ext,
}

impl OpenInterval {
    pub fn contains(&self, x: &Q) -> bool {
        let x = Ext::Fin(x.clone());
        self.lo < x && x < self.hi
    }
}

/// Closed interval `[lo, hi]`; an infinite endpoint makes it a closed ray.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClosedInterval {
    pub lo: Ext,
    pub hi: Ext,
}

impl ClosedInterval {
    pub fn new(lo: Q, hi: Q) -> Self {
        ClosedInterval {
            lo: Ext::Fin(lo),
            hi: Ext::Fin(hi),
        }
    }

    pub fn contains(&self, x: &Q) -> bool {
        let x = Ext::Fin(x.clone());
        self.lo <= x && x <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.fin().is_some() && self.hi.fin().is_some()
    }

    fn inside_open(&self, c: &OpenInterval) -> bool {
        // closed [s,t] inside open (l,r): l < s and t < r
        c.lo < self.lo && self.hi < c.hi
    }

    fn disjoint_from_open(&self, c: &OpenInterval) -> bool {
        self.hi <= c.lo || self.lo >= c.hi
    }
}

/// An open subset of the base, in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum OpenSet {
    Discrete(BTreeSet<String>),
    /// Disjoint, sorted, nonempty open intervals.
    Line(Vec<OpenInterval>),
}

impl OpenSet {
    pub fn discrete<S: AsRef<str>>(labels: &[S]) -> OpenSet {
        OpenSet::Discrete(labels.iter().map(|s| s.as_ref().to_string()).collect())
    }

    pub fn whole_line() -> OpenSet {
        OpenSet::Line(vec![OpenInterval {
            lo: Ext::NegInf,
            hi: Ext::PosInf,
        }])
    }

    pub fn interval(lo: Ext, hi: Ext) -> OpenSet {
        OpenSet::line(vec![OpenInterval { lo, hi }])
    }

    pub fn bounded(lo: Q, hi: Q) -> OpenSet {
        OpenSet::interval(Ext::Fin(lo), Ext::Fin(hi))
    }

    /// Canonical form of a finite union of open intervals.
    pub fn line(mut parts: Vec<OpenInterval>) -> OpenSet {
        parts.retain(|p| p.lo < p.hi);
        parts.sort();
        let mut out: Vec<OpenInterval> = Vec::with_capacity(parts.len());
        for p in parts {
            match out.last_mut() {
                Some(last) if p.lo < last.hi => {
                    if p.hi > last.hi {
                        last.hi = p.hi;
                    }
                }
                _ => out.push(p),
            }
        }
        OpenSet::Line(out)
    }

    pub fn canonical(&self) -> OpenSet {
        match self {
            OpenSet::Discrete(s) => OpenSet::Discrete(s.clone()),
            OpenSet::Line(p) => OpenSet::line(p.clone()),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            OpenSet::Discrete(_) => Backend::Discrete,
            OpenSet::Line(_) => Backend::Line,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            OpenSet::Discrete(s) => s.is_empty(),
            OpenSet::Line(p) => p.is_empty(),
        }
    }

    pub fn labels(&self) -> Option<&BTreeSet<String>> {
        match self {
            OpenSet::Discrete(s) => Some(s),
            OpenSet::Line(_) => None,
        }
    }

    pub fn components(&self) -> &[OpenInterval] {
        match self {
            OpenSet::Discrete(_) => &[],
            OpenSet::Line(p) => p,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (OpenSet::Discrete(s), Point::Label(l)) => s.contains(l),
            (OpenSet::Line(parts), Point::Coord(x)) => parts.iter().any(|c| c.contains(x)),
            _ => false,
        }
    }

    pub fn contains_coord(&self, x: &Q) -> bool {
        self.contains(&Point::Coord(x.clone()))
    }

    pub fn same_backend(&self, other: &OpenSet) -> Result<()> {
        if self.backend() != other.backend() {
            return Err(Error::BackendMismatch(format!(
                "{} vs {}",
                self.backend(),
                other.backend()
            )));
        }
        Ok(())
    }

    pub fn is_subset(&self, other: &OpenSet) -> bool {
        match (self, other) {
            (OpenSet::Discrete(a), OpenSet::Discrete(b)) => a.is_subset(b),
            (OpenSet::Line(a), OpenSet::Line(b)) => a
                .iter()
                .all(|i| b.iter().any(|c| c.lo <= i.lo && i.hi <= c.hi)),
            _ => false,
        }
    }

    pub fn intersect(&self, other: &OpenSet) -> Result<OpenSet> {
        self.same_backend(other)?;
        Ok(match (self, other) {
            (OpenSet::Discrete(a), OpenSet::Discrete(b)) => {
                OpenSet::Discrete(a.intersection(b).cloned().collect())
            }
            (OpenSet::Line(a), OpenSet::Line(b)) => {
                let mut out = Vec::new();
                for i in a {
                    for j in b {
                        let lo = i.lo.clone().max(j.lo.clone());
                        let hi = i.hi.clone().min(j.hi.clone());
                        if lo < hi {
                            out.push(OpenInterval { lo, hi });
                        }
                    }
                }
                OpenSet::line(out)
            }
            _ => unreachable!(),
        })
    }

    pub fn union(&self, other: &OpenSet) -> Result<OpenSet> {
        self.same_backend(other)?;
        Ok(match (self, other) {
            (OpenSet::Discrete(a), OpenSet::Discrete(b)) => {
                OpenSet::Discrete(a.union(b).cloned().collect())
            }
            (OpenSet::Line(a), OpenSet::Line(b)) => {
                OpenSet::line(a.iter().chain(b.iter()).cloned().collect())
            }
            _ => unreachable!(),
        })
    }

    /// `self \ closed`, which is again open.
    pub fn minus(&self, closed: &Support) -> Result<OpenSet> {
        match (self, closed) {
            (OpenSet::Discrete(a), Support::Points(b)) => {
                Ok(OpenSet::Discrete(a.difference(b).cloned().collect()))
            }
            (OpenSet::Line(a), Support::Line(c)) => {
                let mut pieces = a.clone();
                for k in c.intervals() {
                    let mut next = Vec::new();
                    for p in pieces {
                        if k.hi <= p.lo || k.lo >= p.hi {
                            next.push(p);
                            continue;
                        }
                        if p.lo < k.lo {
                            next.push(OpenInterval {
                                lo: p.lo.clone(),
                                hi: k.lo.clone(),
                            });
                        }
                        if k.hi < p.hi {
                            next.push(OpenInterval {
                                lo: k.hi.clone(),
                                hi: p.hi.clone(),
                            });
                        }
                    }
                    pieces = next;
                }
                Ok(OpenSet::line(pieces))
            }
            _ => Err(Error::BackendMismatch("open set vs support".into())),
        }
    }

    /// Closure in the ambient line (or the set itself on the discrete backend).
    pub fn closure(&self) -> Support {
        match self {
            OpenSet::Discrete(s) => Support::Points(s.clone()),
            OpenSet::Line(p) => Support::Line(ClosedSet::new(
                p.iter()
                    .map(|c| ClosedInterval {
                        lo: c.lo.clone(),
                        hi: c.hi.clone(),
                    })
                    .collect(),
            )),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            OpenSet::Discrete(s) => json!(s.iter().collect::<Vec<_>>()),
            OpenSet::Line(p) => Value::Array(
                p.iter()
                    .map(|c| json!([c.lo.to_json(), c.hi.to_json()]))
                    .collect(),
            ),
        }
    }

    /// Parse `[[lo,hi],…]` (line) or `["p","q",…]` (discrete).
    pub fn from_json(v: &Value, backend: Backend) -> Result<OpenSet> {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::Parse(format!("open set must be an array, got {v}")))?;
        match backend {
            Backend::Discrete => arr
                .iter()
                .map(|p| {
                    p.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| Error::Parse(format!("bad point label {p}")))
                })
                .collect::<Result<BTreeSet<_>>>()
                .map(OpenSet::Discrete),
            Backend::Line => arr
                .iter()
                .map(|pair| {
                    let pair = pair
                        .as_array()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| Error::Parse(format!("bad interval {pair}")))?;
                    Ok(OpenInterval {
                        lo: Ext::from_json(&pair[0])?,
                        hi: Ext::from_json(&pair[1])?,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(OpenSet::line),
        }
    }
}

impl fmt::Display for OpenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpenSet::Discrete(s) => {
                write!(f, "{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(","))
            }
            OpenSet::Line(p) if p.is_empty() => f.write_str("{}"),
            OpenSet::Line(p) => {
                let parts: Vec<String> = p.iter().map(|c| format!("({}, {})", c.lo, c.hi)).collect();
                f.write_str(&parts.join(" u "))
            }
        }
    }
}

/// A closed subset of the line given as a finite union of closed intervals or rays.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ClosedSet(Vec<ClosedInterval>);

impl ClosedSet {
    pub fn new(mut parts: Vec<ClosedInterval>) -> ClosedSet {
        parts.retain(|p| p.lo <= p.hi);
        parts.sort();
        let mut out: Vec<ClosedInterval> = Vec::with_capacity(parts.len());
        for p in parts {
            match out.last_mut() {
                Some(last) if p.lo <= last.hi => {
                    if p.hi > last.hi {
                        last.hi = p.hi;
                    }
                }
                _ => out.push(p),
            }
        }
        ClosedSet(out)
    }

    pub fn empty() -> ClosedSet {
        ClosedSet(Vec::new())
    }

    pub fn whole() -> ClosedSet {
        ClosedSet(vec![ClosedInterval {
            lo: Ext::NegInf,
            hi: Ext::PosInf,
        }])
    }

    pub fn interval(lo: Q, hi: Q) -> ClosedSet {
        ClosedSet::new(vec![ClosedInterval::new(lo, hi)])
    }

    pub fn intervals(&self) -> &[ClosedInterval] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.0.iter().all(ClosedInterval::is_bounded)
    }

    pub fn contains(&self, x: &Q) -> bool {
        self.0.iter().any(|i| i.contains(x))
    }

    pub fn union(&self, other: &ClosedSet) -> ClosedSet {
        ClosedSet::new(self.0.iter().chain(other.0.iter()).cloned().collect())
    }

    pub fn intersect(&self, other: &ClosedSet) -> ClosedSet {
        let mut out = Vec::new();
        for a in &self.0 {
            for b in &other.0 {
                let lo = a.lo.clone().max(b.lo.clone());
                let hi = a.hi.clone().min(b.hi.clone());
                if lo <= hi {
                    out.push(ClosedInterval { lo, hi });
                }
            }
        }
        ClosedSet::new(out)
    }

    /// Smallest closed interval containing the set; `None` when empty.
    pub fn hull(&self) -> Option<ClosedInterval> {
        Some(ClosedInterval {
            lo: self.0.first()?.lo.clone(),
            hi: self.0.last()?.hi.clone(),
        })
    }

    pub fn is_subset(&self, other: &ClosedSet) -> bool {
        self.0
            .iter()
            .all(|a| other.0.iter().any(|b| b.lo <= a.lo && a.hi <= b.hi))
    }

    /// Sound test for `self ∩ U` being compact in `U`: every piece is either
    /// disjoint from `U` or sits strictly inside one component.
    pub fn compact_in(&self, u: &[OpenInterval]) -> bool {
        self.0.iter().all(|i| {
            u.iter().all(|c| i.disjoint_from_open(c)) || u.iter().any(|c| i.inside_open(c))
        })
    }

    /// Every piece lies in the interior of a single piece of `other`.
    pub fn inside_interior_of(&self, other: &ClosedSet) -> bool {
        self.0.iter().all(|i| {
            other.0.iter().any(|c| {
                (c.lo < i.lo || c.lo == Ext::NegInf) && (i.hi < c.hi || c.hi == Ext::PosInf)
            })
        })
    }

    /// Pieces lying in `U`, clipped away from pieces disjoint from it.
    pub fn restricted_to(&self, u: &[OpenInterval]) -> ClosedSet {
        ClosedSet(
            self.0
                .iter()
                .filter(|i| !u.iter().all(|c| i.disjoint_from_open(c)))
                .cloned()
                .collect(),
        )
    }

    /// `(self ∩ M) ⊆ U` for open `M`, `U`.
    pub fn relative_subset(&self, m: &[OpenInterval], u: &[OpenInterval]) -> bool {
        for i in &self.0 {
            for c in m {
                // piece = i ∩ c, with closedness flags on each end
                let (lo, lo_closed) = if i.lo > c.lo {
                    (i.lo.clone(), true)
                } else {
                    (c.lo.clone(), false)
                };
                let (hi, hi_closed) = if i.hi < c.hi {
                    (i.hi.clone(), true)
                } else {
                    (c.hi.clone(), false)
                };
                let empty = match lo.cmp(&hi) {
                    Ordering::Greater => true,
                    Ordering::Equal => !(lo_closed && hi_closed),
                    Ordering::Less => false,
                };
                if empty {
                    continue;
                }
                let inside = u.iter().any(|v| {
                    let lo_ok = if lo_closed { v.lo < lo } else { v.lo <= lo };
                    let hi_ok = if hi_closed { hi < v.hi } else { hi <= v.hi };
                    lo_ok && hi_ok
                });
                if !inside {
                    return false;
                }
            }
        }
        true
    }

    /// Bounded pieces of `self ∩ U` as exact closed intervals (integration ranges).
    pub fn clip_to_open(&self, u: &[OpenInterval]) -> Result<Vec<(Q, Q)>> {
        let mut out = Vec::new();
        for i in &self.0 {
            for c in u {
                let lo = i.lo.clone().max(c.lo.clone());
                let hi = i.hi.clone().min(c.hi.clone());
                if lo >= hi {
                    continue;
                }
                match (lo, hi) {
                    (Ext::Fin(a), Ext::Fin(b)) => out.push((a, b)),
                    _ => {
                        return Err(Error::SupportEscapes(
                            "integration range is unbounded".into(),
                        ))
                    }
                }
            }
        }
        Ok(out)
    }

    /// Closed set grown by `margin` on each side.
    pub fn widened(&self, margin: &Q) -> ClosedSet {
        ClosedSet::new(
            self.0
                .iter()
                .map(|i| ClosedInterval {
                    lo: match &i.lo {
                        Ext::Fin(v) => Ext::Fin(v - margin),
                        e => e.clone(),
                    },
                    hi: match &i.hi {
                        Ext::Fin(v) => Ext::Fin(v + margin),
                        e => e.clone(),
                    },
                })
                .collect(),
        )
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.0
                .iter()
                .map(|c| json!([c.lo.to_json(), c.hi.to_json()]))
                .collect(),
        )
    }

    pub fn from_json(v: &Value) -> Result<ClosedSet> {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::Parse(format!("closed set must be an array, got {v}")))?;
        arr.iter()
            .map(|pair| {
                let pair = pair
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| Error::Parse(format!("bad interval {pair}")))?;
                Ok(ClosedInterval {
                    lo: Ext::from_json(&pair[0])?,
                    hi: Ext::from_json(&pair[1])?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(ClosedSet::new)
    }
}

impl fmt::Display for ClosedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self.0.iter().map(|c| format!("[{}, {}]", c.lo, c.hi)).collect();
        f.write_str(&parts.join(" u "))
    }
}

/// A closed support witness: outside it a section vanishes identically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Support {
    Points(BTreeSet<String>),
    Line(ClosedSet),
}

impl Support {
    pub fn empty(backend: Backend) -> Support {
        match backend {
            Backend::Discrete => Support::Points(BTreeSet::new()),
            Backend::Line => Support::Line(ClosedSet::empty()),
        }
    }

    pub fn points<S: AsRef<str>>(labels: &[S]) -> Support {
        Support::Points(labels.iter().map(|s| s.as_ref().to_string()).collect())
    }

    pub fn backend(&self) -> Backend {
        match self {
            Support::Points(_) => Backend::Discrete,
            Support::Line(_) => Backend::Line,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Support::Points(s) => s.is_empty(),
            Support::Line(c) => c.is_empty(),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (Support::Points(s), Point::Label(l)) => s.contains(l),
            (Support::Line(c), Point::Coord(x)) => c.contains(x),
            _ => false,
        }
    }

    pub fn union(&self, other: &Support) -> Result<Support> {
        match (self, other) {
            (Support::Points(a), Support::Points(b)) => {
                Ok(Support::Points(a.union(b).cloned().collect()))
            }
            (Support::Line(a), Support::Line(b)) => Ok(Support::Line(a.union(b))),
            _ => Err(Error::BackendMismatch("support union".into())),
        }
    }

    pub fn intersect(&self, other: &Support) -> Result<Support> {
        match (self, other) {
            (Support::Points(a), Support::Points(b)) => {
                Ok(Support::Points(a.intersection(b).cloned().collect()))
            }
            (Support::Line(a), Support::Line(b)) => Ok(Support::Line(a.intersect(b))),
            _ => Err(Error::BackendMismatch("support intersection".into())),
        }
    }

    pub fn is_subset(&self, other: &Support) -> bool {
        match (self, other) {
            (Support::Points(a), Support::Points(b)) => a.is_subset(b),
            (Support::Line(a), Support::Line(b)) => a.is_subset(b),
            _ => false,
        }
    }

    /// The witness cuts out a compact subset of `U`.
    pub fn compact_in(&self, u: &OpenSet) -> bool {
        match (self, u) {
            (Support::Points(_), OpenSet::Discrete(_)) => true,
            (Support::Line(c), OpenSet::Line(p)) => c.compact_in(p),
            _ => false,
        }
    }

    /// Witness trimmed to the part relevant for `U` (points of `U`, pieces meeting `U`).
    pub fn restricted_to(&self, u: &OpenSet) -> Support {
        match (self, u) {
            (Support::Points(s), OpenSet::Discrete(d)) => {
                Support::Points(s.intersection(d).cloned().collect())
            }
            (Support::Line(c), OpenSet::Line(p)) => Support::Line(c.restricted_to(p)),
            _ => self.clone(),
        }
    }

    /// `(self ∩ M) ⊆ U`.
    pub fn relative_subset(&self, m: &OpenSet, u: &OpenSet) -> bool {
        match (self, m, u) {
            (Support::Points(s), OpenSet::Discrete(m), OpenSet::Discrete(u)) => {
                s.intersection(m).all(|p| u.contains(p))
            }
            (Support::Line(c), OpenSet::Line(m), OpenSet::Line(u)) => c.relative_subset(m, u),
            _ => false,
        }
    }

    /// Witness is compact and lies inside `U`.
    pub fn compact_subset_of(&self, u: &OpenSet) -> bool {
        match (self, u) {
            (Support::Points(s), OpenSet::Discrete(d)) => s.is_subset(d),
            (Support::Line(c), OpenSet::Line(p)) => {
                c.intervals().iter().all(|i| p.iter().any(|o| i.inside_open(o)))
            }
            _ => false,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Support::Points(s) => json!(s.iter().collect::<Vec<_>>()),
            Support::Line(c) => c.to_json(),
        }
    }

    pub fn from_json(v: &Value, backend: Backend) -> Result<Support> {
        match backend {
            Backend::Discrete => match OpenSet::from_json(v, backend)? {
                OpenSet::Discrete(s) => Ok(Support::Points(s)),
                OpenSet::Line(_) => unreachable!(),
            },
            Backend::Line => ClosedSet::from_json(v).map(Support::Line),
        }
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Support::Points(s) => {
                write!(f, "{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(","))
            }
            Support::Line(c) => write!(f, "{c}"),
        }
    }
}

/// Half the smallest positive gap between distinct finite endpoints, or 1.
pub fn endpoint_margin(endpoints: &[Q]) -> Q {
    let mut v: Vec<&Q> = endpoints.iter().collect();
    v.sort();
    v.dedup();
    v.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.is_positive())
        .min()
        .map(|d| d / Q::from_integer(2.into()))
        .filter(|d| !d.is_zero())
        .unwrap_or_else(|| Q::from_integer(1.into()))
}
