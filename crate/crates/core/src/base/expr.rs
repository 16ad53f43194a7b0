//! Symbolic smooth functions of one real variable `x`.
//!
//! Expressions are immutable DAGs over exact complex rational constants with
//! a single transcendental primitive, the flat kernel
//! `s(t) = 0` for `t <= 0` and `s(t) = exp(-1/t)` for `t > 0`.
//! The set is closed under differentiation.
//!
//! A quotient is either *certified* (its denominator has been shown positive
//! by interval arithmetic on the region where it is used) or *flat*: its
//! numerator vanishes to infinite order wherever the denominator vanishes.
//! Flat quotients come out of differentiating `s` and out of normalizing
//! partitions of unity; they evaluate to zero where the numerator is an exact
//! zero.
//!
//! Textual form is a prefix S-expression:
//! `(+ e e)`, `(* e e)`, `(/ e e)`, `(pow e n)`, `(s e)`, `x`, `<rational>`.
//! The printer also emits `(/! e e)` for flat quotients; the parser accepts
//! n-ary `+`/`*`, unary and binary `-`, and `(bump a b c d)` as shorthand.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num::complex::Complex64;
use num::{One, Signed, Zero};

use super::interval::{certify_positive, Iv};
use super::sets::{ClosedSet, OpenSet};
use crate::error::{Error, Result};
use crate::scalar::{cq, cq_from_q, cq_to_c64, format_cq, parse_complex, parse_rational, Scalar, CQ, Q};

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    Const(CQ),
    X,
    Add(SmoothExpr, SmoothExpr),
    Mul(SmoothExpr, SmoothExpr),
    Div {
        num: SmoothExpr,
        den: SmoothExpr,
        flat: bool,
    },
    Pow(SmoothExpr, u32),
    Step(SmoothExpr),
}

#[derive(Debug, PartialEq)]
struct Node {
    kind: Kind,
    /// Closed set outside which the expression is identically zero; `None` = whole line.
    support: Option<ClosedSet>,
}

/// A smooth function of `x`, shared by reference counting.
#[derive(Clone, Debug)]
pub struct SmoothExpr(Arc<Node>);

impl PartialEq for SmoothExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

fn intersect_opt(a: &Option<ClosedSet>, b: &Option<ClosedSet>) -> Option<ClosedSet> {
    match (a, b) {
        (None, None) => None,
        (Some(a), None) | (None, Some(a)) => Some(a.clone()),
        (Some(a), Some(b)) => Some(a.intersect(b)),
    }
}

fn union_opt(a: &Option<ClosedSet>, b: &Option<ClosedSet>) -> Option<ClosedSet> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.union(b)),
        _ => None,
    }
}

impl SmoothExpr {
    fn make(kind: Kind, support: Option<ClosedSet>) -> SmoothExpr {
        SmoothExpr(Arc::new(Node { kind, support }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn support(&self) -> Option<&ClosedSet> {
        self.0.support.as_ref()
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(c: CQ) -> SmoothExpr {
        let support = c.is_zero().then(ClosedSet::empty);
        SmoothExpr::make(Kind::Const(c), support)
    }

    pub fn real(c: Q) -> SmoothExpr {
        SmoothExpr::constant(cq_from_q(c))
    }

    pub fn int(n: i64) -> SmoothExpr {
        SmoothExpr::constant(cq(n))
    }

    pub fn zero() -> SmoothExpr {
        SmoothExpr::int(0)
    }

    pub fn one() -> SmoothExpr {
        SmoothExpr::int(1)
    }

    pub fn x() -> SmoothExpr {
        SmoothExpr::make(Kind::X, None)
    }

    pub fn as_const(&self) -> Option<&CQ> {
        match &self.0.kind {
            Kind::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Structurally the zero constant (not a decision procedure for zero functions).
    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_one())
    }

    pub fn add(&self, other: &SmoothExpr) -> SmoothExpr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return SmoothExpr::constant(a + b);
        }
        let support = union_opt(&self.0.support, &other.0.support);
        SmoothExpr::make(Kind::Add(self.clone(), other.clone()), support)
    }

    pub fn neg(&self) -> SmoothExpr {
        self.scale(&cq(-1))
    }

    pub fn sub(&self, other: &SmoothExpr) -> SmoothExpr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &SmoothExpr) -> SmoothExpr {
        if self.is_zero() || other.is_zero() {
            return SmoothExpr::zero();
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return SmoothExpr::constant(a * b);
        }
        // keep constants on the left so scaling chains fold
        if let (Some(a), Kind::Mul(l, r)) = (self.as_const(), &other.0.kind) {
            if let Some(b) = l.as_const() {
                return SmoothExpr::constant(a * b).mul(r);
            }
        }
        if other.as_const().is_some() {
            return other.mul(self);
        }
        let support = intersect_opt(&self.0.support, &other.0.support);
        SmoothExpr::make(Kind::Mul(self.clone(), other.clone()), support)
    }

    pub fn scale(&self, c: &CQ) -> SmoothExpr {
        SmoothExpr::constant(c.clone()).mul(self)
    }

    /// Certified quotient; the caller is responsible for a positivity certificate
    /// of `den` on the region of use (see [`SmoothExpr::certify_quotients`]).
    pub fn div(&self, den: &SmoothExpr) -> SmoothExpr {
        self.div_impl(den, false)
    }

    /// Flat quotient: `num` vanishes to infinite order wherever `den` vanishes.
    pub fn div_flat(&self, den: &SmoothExpr) -> SmoothExpr {
        self.div_impl(den, true)
    }

    fn div_impl(&self, den: &SmoothExpr, flat: bool) -> SmoothExpr {
        if self.is_zero() {
            return SmoothExpr::zero();
        }
        if den.is_one() {
            return self.clone();
        }
        if let Some(d) = den.as_const() {
            if !d.is_zero() {
                return self.scale(&(CQ::one() / d));
            }
        }
        let support = self.0.support.clone();
        SmoothExpr::make(
            Kind::Div {
                num: self.clone(),
                den: den.clone(),
                flat,
            },
            support,
        )
    }

    pub fn pow(&self, n: u32) -> SmoothExpr {
        match n {
            0 => SmoothExpr::one(),
            1 => self.clone(),
            _ => {
                if let Some(c) = self.as_const() {
                    return SmoothExpr::constant(num::pow(c.clone(), n as usize));
                }
                SmoothExpr::make(Kind::Pow(self.clone(), n), self.0.support.clone())
            }
        }
    }

    /// The flat kernel `s(e)`.
    pub fn step(&self) -> SmoothExpr {
        if let Some(c) = self.as_const() {
            if c.im.is_zero() && !c.re.is_positive() {
                return SmoothExpr::zero();
            }
        }
        SmoothExpr::make(Kind::Step(self.clone()), None)
    }

    /// Same expression with the support bound intersected with `bound`.
    ///
    /// Only sound when the expression is known to vanish outside `bound`.
    pub fn with_support(&self, bound: &ClosedSet) -> SmoothExpr {
        let support = intersect_opt(&self.0.support, &Some(bound.clone()));
        if support.as_ref() == self.0.support.as_ref() {
            return self.clone();
        }
        SmoothExpr::make(self.0.kind.clone(), support)
    }

    /// `x - a`.
    pub fn shifted_x(a: &Q) -> SmoothExpr {
        SmoothExpr::x().add(&SmoothExpr::real(-a.clone()))
    }

    /// Smooth edge equal to 0 for `x <= a` and 1 for `x >= b`.
    pub fn rising_edge(a: &Q, b: &Q) -> SmoothExpr {
        let up = SmoothExpr::shifted_x(a).step();
        let down = SmoothExpr::real(b.clone()).sub(&SmoothExpr::x()).step();
        up.div(&up.add(&down))
    }

    /// Smooth edge equal to 1 for `x <= c` and 0 for `x >= d`.
    pub fn falling_edge(c: &Q, d: &Q) -> SmoothExpr {
        let down = SmoothExpr::real(d.clone()).sub(&SmoothExpr::x()).step();
        let up = SmoothExpr::shifted_x(c).step();
        down.div(&down.add(&up))
    }

    /// Smooth bump: 1 on `[b, c]`, 0 outside `(a, d)`, values in `[0, 1]`.
    pub fn bump(a: &Q, b: &Q, c: &Q, d: &Q) -> Result<SmoothExpr> {
        if !(a < b && b <= c && c < d) {
            return Err(Error::InvalidBump);
        }
        let e = SmoothExpr::rising_edge(a, b)
            .mul(&SmoothExpr::falling_edge(c, d))
            .with_support(&ClosedSet::interval(a.clone(), d.clone()));
        e.certify_quotients(&OpenSet::whole_line())?;
        Ok(e)
    }

    pub fn is_polynomial(&self) -> bool {
        self.to_poly().is_some()
    }

    /// Dense coefficient vector (constant term first) when the expression is a polynomial.
    pub fn to_poly(&self) -> Option<Vec<CQ>> {
        fn rec(e: &SmoothExpr, memo: &mut HashMap<usize, Option<Vec<CQ>>>) -> Option<Vec<CQ>> {
            if let Some(v) = memo.get(&e.key()) {
                return v.clone();
            }
            let out = match &e.0.kind {
                Kind::Const(c) => Some(vec![c.clone()]),
                Kind::X => Some(vec![CQ::zero(), CQ::one()]),
                Kind::Add(a, b) => {
                    let (a, b) = (rec(a, memo)?, rec(b, memo)?);
                    Some(poly_add(&a, &b))
                }
                Kind::Mul(a, b) => {
                    let (a, b) = (rec(a, memo)?, rec(b, memo)?);
                    Some(poly_mul(&a, &b))
                }
                Kind::Pow(a, n) => {
                    let a = rec(a, memo)?;
                    let mut acc = vec![CQ::one()];
                    for _ in 0..*n {
                        acc = poly_mul(&acc, &a);
                    }
                    Some(acc)
                }
                Kind::Div { num, den, .. } => {
                    let d = den.as_const().filter(|d| !d.is_zero())?;
                    let inv = CQ::one() / d;
                    Some(rec(num, memo)?.iter().map(|c| c * &inv).collect())
                }
                Kind::Step(_) => None,
            };
            memo.insert(e.key(), out.clone());
            out
        }
        rec(self, &mut HashMap::new())
    }

    /// Exact symbolic derivative; the support bound is kept.
    pub fn derivative(&self) -> SmoothExpr {
        fn rec(e: &SmoothExpr, memo: &mut HashMap<usize, SmoothExpr>) -> SmoothExpr {
            if let Some(v) = memo.get(&e.key()) {
                return v.clone();
            }
            let d = match &e.0.kind {
                Kind::Const(_) => SmoothExpr::zero(),
                Kind::X => SmoothExpr::one(),
                Kind::Add(a, b) => rec(a, memo).add(&rec(b, memo)),
                Kind::Mul(a, b) => rec(a, memo).mul(b).add(&a.mul(&rec(b, memo))),
                Kind::Div { num, den, flat } => {
                    let top = rec(num, memo).mul(den).sub(&num.mul(&rec(den, memo)));
                    top.div_impl(&den.pow(2), *flat)
                }
                Kind::Pow(a, n) => a
                    .pow(n - 1)
                    .scale(&cq(*n as i64))
                    .mul(&rec(a, memo)),
                // s'(t) = s(t) / t^2, flat at t = 0
                Kind::Step(a) => e.div_flat(&a.pow(2)).mul(&rec(a, memo)),
            };
            let d = match &e.0.support {
                Some(s) => d.with_support(s),
                None => d,
            };
            memo.insert(e.key(), d.clone());
            d
        }
        rec(self, &mut HashMap::new())
    }

    pub fn nth_derivative(&self, n: u32) -> SmoothExpr {
        (0..n).fold(self.clone(), |e, _| e.derivative())
    }

    /// Evaluate at a rational point; exact unless the kernel `s` fires at a positive argument.
    pub fn eval(&self, x: &Q) -> Scalar {
        fn rec(e: &SmoothExpr, x: &Q, memo: &mut HashMap<usize, Scalar>) -> Scalar {
            if let Some(v) = memo.get(&e.key()) {
                return v.clone();
            }
            if let Some(s) = &e.0.support {
                if !s.contains(x) {
                    return Scalar::zero();
                }
            }
            let v = match &e.0.kind {
                Kind::Const(c) => Scalar::Exact(c.clone()),
                Kind::X => Scalar::Exact(cq_from_q(x.clone())),
                Kind::Add(a, b) => &rec(a, x, memo) + &rec(b, x, memo),
                Kind::Mul(a, b) => {
                    let l = rec(a, x, memo);
                    if l.is_exact_zero() {
                        Scalar::zero()
                    } else {
                        &l * &rec(b, x, memo)
                    }
                }
                Kind::Div { num, den, flat } => {
                    let n = rec(num, x, memo);
                    if n.is_exact_zero() {
                        Scalar::zero()
                    } else {
                        // num / (num + b) with b exactly zero
                        if let Kind::Add(p, r) = &den.0.kind {
                            let other = if p.key() == num.key() {
                                Some(r)
                            } else if r.key() == num.key() {
                                Some(p)
                            } else {
                                None
                            };
                            if let Some(o) = other {
                                if rec(o, x, memo).is_exact_zero() {
                                    let v = Scalar::one();
                                    memo.insert(e.key(), v.clone());
                                    return v;
                                }
                            }
                        }
                        let d = rec(den, x, memo);
                        match (&n, &d) {
                            (Scalar::Exact(n), Scalar::Exact(d)) if !d.is_zero() => {
                                Scalar::Exact(n / d)
                            }
                            _ => {
                                let (nf, df) = (n.to_c64(), d.to_c64());
                                if *flat && nf.norm() == 0.0 {
                                    Scalar::zero()
                                } else {
                                    Scalar::Approx(nf / df)
                                }
                            }
                        }
                    }
                }
                Kind::Pow(a, n) => match rec(a, x, memo) {
                    Scalar::Exact(v) => Scalar::Exact(num::pow(v, *n as usize)),
                    Scalar::Approx(v) => Scalar::Approx(v.powu(*n)),
                },
                Kind::Step(a) => match rec(a, x, memo) {
                    Scalar::Exact(t) if !t.re.is_positive() => Scalar::zero(),
                    t => Scalar::real(step_f64(t.to_c64().re)),
                },
            };
            memo.insert(e.key(), v.clone());
            v
        }
        rec(self, x, &mut HashMap::new())
    }

    pub fn eval_f64(&self, x: f64) -> Complex64 {
        self.compile().eval(x)
    }

    pub fn compile(&self) -> Compiled {
        Compiled::new(self)
    }

    /// Every certified quotient has a denominator that is positive on `region`.
    pub fn certify_quotients(&self, region: &OpenSet) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.key()) {
                continue;
            }
            match &e.0.kind {
                Kind::Const(_) | Kind::X => {}
                Kind::Add(a, b) | Kind::Mul(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Kind::Pow(a, _) | Kind::Step(a) => stack.push(a.clone()),
                Kind::Div { num, den, flat } => {
                    if !flat {
                        certify_positive(den, region).map_err(|_| {
                            Error::Certificate(format!("denominator {den} not certified positive on {region}"))
                        })?;
                    }
                    stack.push(num.clone());
                    stack.push(den.clone());
                }
            }
        }
        Ok(())
    }

    /// Interval enclosure over `iv`; `None` when no real enclosure is available.
    pub fn eval_interval(&self, iv: Iv) -> Option<Iv> {
        fn rec(e: &SmoothExpr, iv: Iv, memo: &mut HashMap<usize, Option<Iv>>) -> Option<Iv> {
            if let Some(v) = memo.get(&e.key()) {
                return *v;
            }
            let out = match &e.0.kind {
                Kind::Const(c) => {
                    if !c.im.is_zero() {
                        None
                    } else {
                        Some(Iv::point(crate::scalar::q_to_f64(&c.re)))
                    }
                }
                Kind::X => Some(iv),
                Kind::Add(a, b) => Some(rec(a, iv, memo)?.add(rec(b, iv, memo)?)),
                Kind::Mul(a, b) => rec(a, iv, memo)?.mul(rec(b, iv, memo)?),
                Kind::Div { num, den, .. } => rec(num, iv, memo)?.div(rec(den, iv, memo)?),
                Kind::Pow(a, n) => rec(a, iv, memo)?.powi(*n),
                Kind::Step(a) => Some(rec(a, iv, memo)?.step()),
            };
            let out = match (&e.0.support, out) {
                // outside the support the value is exactly zero
                (Some(s), Some(v)) if !iv_inside(s, iv) => Some(v.hull(Iv::point(0.0))),
                (_, v) => v,
            };
            memo.insert(e.key(), out);
            out
        }
        rec(self, iv, &mut HashMap::new())
    }

    /// Largest absolute rational constant, used to size certification regions.
    pub fn constant_scale(&self) -> f64 {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        let mut m: f64 = 0.0;
        while let Some(e) = stack.pop() {
            if !seen.insert(e.key()) {
                continue;
            }
            match &e.0.kind {
                Kind::Const(c) => m = m.max(cq_to_c64(c).norm()),
                Kind::X => {}
                Kind::Add(a, b) | Kind::Mul(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Kind::Div { num, den, .. } => {
                    stack.push(num.clone());
                    stack.push(den.clone());
                }
                Kind::Pow(a, _) | Kind::Step(a) => stack.push(a.clone()),
            }
        }
        m
    }

    pub fn to_sexpr(&self) -> String {
        self.to_string()
    }

    pub fn parse(src: &str) -> Result<SmoothExpr> {
        let tokens = tokenize(src);
        let mut pos = 0;
        let e = parse_tokens(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::Parse(format!("trailing input in {src:?}")));
        }
        Ok(e)
    }
}

fn iv_inside(s: &ClosedSet, iv: Iv) -> bool {
    s.intervals()
        .iter()
        .any(|c| c.lo.to_f64() <= iv.lo && iv.hi <= c.hi.to_f64())
}

/// `s(t)` in floating point.
pub fn step_f64(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn poly_add(a: &[CQ], b: &[CQ]) -> Vec<CQ> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(CQ::zero);
            let y = b.get(i).cloned().unwrap_or_else(CQ::zero);
            x + y
        })
        .collect()
}

fn poly_mul(a: &[CQ], b: &[CQ]) -> Vec<CQ> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![CQ::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = &out[i + j] + x * y;
        }
    }
    out
}

impl fmt::Display for SmoothExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            Kind::Const(c) => f.write_str(&format_cq(c)),
            Kind::X => f.write_str("x"),
            Kind::Add(a, b) => write!(f, "(+ {a} {b})"),
            Kind::Mul(a, b) => write!(f, "(* {a} {b})"),
            Kind::Div { num, den, flat } => {
                write!(f, "({} {num} {den})", if *flat { "/!" } else { "/" })
            }
            Kind::Pow(a, n) => write!(f, "(pow {a} {n})"),
            Kind::Step(a) => write!(f, "(s {a})"),
        }
    }
}

fn tokenize(src: &str) -> Vec<String> {
    let spaced = src.replace('(', " ( ").replace(')', " ) ");
    spaced.split_whitespace().map(str::to_string).collect()
}

fn parse_tokens(tokens: &[String], pos: &mut usize) -> Result<SmoothExpr> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
    *pos += 1;
    if tok == ")" {
        return Err(Error::Parse("unexpected ')'".into()));
    }
    if tok != "(" {
        if tok == "x" {
            return Ok(SmoothExpr::x());
        }
        return parse_complex(tok).map(SmoothExpr::constant);
    }
    let head = tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end after '('".into()))?
        .clone();
    *pos += 1;
    let mut raw_args = Vec::new();
    while tokens.get(*pos).map(String::as_str) != Some(")") {
        if *pos >= tokens.len() {
            return Err(Error::Parse("missing ')'".into()));
        }
        raw_args.push(*pos);
        skip_expr(tokens, pos)?;
    }
    *pos += 1;
    let arg = |i: usize| -> Result<SmoothExpr> {
        let mut p = raw_args[i];
        parse_tokens(tokens, &mut p)
    };
    let atom = |i: usize| -> Result<&str> {
        let p = raw_args[i];
        match tokens[p].as_str() {
            "(" | ")" => Err(Error::Parse(format!("expected atom in ({head} …)"))),
            s => Ok(s),
        }
    };
    let arity = |n: usize| -> Result<()> {
        if raw_args.len() != n {
            return Err(Error::Parse(format!(
                "({head} …) takes {n} arguments, got {}",
                raw_args.len()
            )));
        }
        Ok(())
    };
    match head.as_str() {
        "+" | "*" => {
            if raw_args.is_empty() {
                return Err(Error::Parse(format!("({head}) needs arguments")));
            }
            let mut acc = arg(0)?;
            for i in 1..raw_args.len() {
                acc = if head == "+" {
                    acc.add(&arg(i)?)
                } else {
                    acc.mul(&arg(i)?)
                };
            }
            Ok(acc)
        }
        "-" => match raw_args.len() {
            1 => Ok(arg(0)?.neg()),
            2 => Ok(arg(0)?.sub(&arg(1)?)),
            _ => Err(Error::Parse("(- …) takes 1 or 2 arguments".into())),
        },
        "/" | "/!" => {
            arity(2)?;
            let (n, d) = (arg(0)?, arg(1)?);
            if d.as_const().is_some_and(|c| c.is_zero()) {
                return Err(Error::Parse("division by the zero constant".into()));
            }
            Ok(if head == "/" { n.div(&d) } else { n.div_flat(&d) })
        }
        "pow" => {
            arity(2)?;
            let n: u32 = atom(1)?
                .parse()
                .map_err(|_| Error::Parse("pow exponent must be a nonnegative integer".into()))?;
            Ok(arg(0)?.pow(n))
        }
        "s" => {
            arity(1)?;
            Ok(arg(0)?.step())
        }
        "bump" => {
            arity(4)?;
            let v = (0..4)
                .map(|i| atom(i).and_then(parse_rational))
                .collect::<Result<Vec<_>>>()?;
            SmoothExpr::bump(&v[0], &v[1], &v[2], &v[3])
        }
        other => Err(Error::Parse(format!("unknown operator {other:?}"))),
    }
}

fn skip_expr(tokens: &[String], pos: &mut usize) -> Result<()> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
    *pos += 1;
    if tok != "(" {
        return Ok(());
    }
    let mut depth = 1;
    while depth > 0 {
        let t = tokens
            .get(*pos)
            .ok_or_else(|| Error::Parse("missing ')'".into()))?;
        *pos += 1;
        match t.as_str() {
            "(" => depth += 1,
            ")" => depth -= 1,
            _ => {}
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(Complex64),
    X,
    Add(usize, usize),
    Mul(usize, usize),
    Div(usize, usize, bool),
    Pow(usize, u32),
    Step(usize),
}

/// Flattened floating-point evaluator for hot loops (quadrature, grids).
#[derive(Clone, Debug)]
pub struct Compiled {
    ops: Vec<Op>,
    supports: Vec<Option<Vec<(f64, f64)>>>,
}

impl Compiled {
    fn new(e: &SmoothExpr) -> Compiled {
        let mut ops = Vec::new();
        let mut supports = Vec::new();
        let mut index: HashMap<usize, usize> = HashMap::new();
        // iterative post-order over the DAG
        let mut stack: Vec<(SmoothExpr, bool)> = vec![(e.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if index.contains_key(&node.key()) {
                continue;
            }
            let children: Vec<SmoothExpr> = match &node.0.kind {
                Kind::Const(_) | Kind::X => vec![],
                Kind::Add(a, b) | Kind::Mul(a, b) => vec![a.clone(), b.clone()],
                Kind::Div { num, den, .. } => vec![num.clone(), den.clone()],
                Kind::Pow(a, _) | Kind::Step(a) => vec![a.clone()],
            };
            if !expanded && children.iter().any(|c| !index.contains_key(&c.key())) {
                stack.push((node.clone(), true));
                for c in children {
                    stack.push((c, false));
                }
                continue;
            }
            let ix = |c: &SmoothExpr| index[&c.key()];
            let op = match &node.0.kind {
                Kind::Const(c) => Op::Const(cq_to_c64(c)),
                Kind::X => Op::X,
                Kind::Add(a, b) => Op::Add(ix(a), ix(b)),
                Kind::Mul(a, b) => Op::Mul(ix(a), ix(b)),
                Kind::Div { num, den, flat } => Op::Div(ix(num), ix(den), *flat),
                Kind::Pow(a, n) => Op::Pow(ix(a), *n),
                Kind::Step(a) => Op::Step(ix(a)),
            };
            index.insert(node.key(), ops.len());
            ops.push(op);
            supports.push(node.0.support.as_ref().map(|s| {
                s.intervals()
                    .iter()
                    .map(|c| (c.lo.to_f64(), c.hi.to_f64()))
                    .collect()
            }));
        }
        Compiled { ops, supports }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let mut vals: Vec<Complex64> = Vec::with_capacity(self.ops.len());
        for (op, sup) in self.ops.iter().zip(&self.supports) {
            if let Some(s) = sup {
                if !s.iter().any(|&(lo, hi)| lo <= x && x <= hi) {
                    vals.push(zero);
                    continue;
                }
            }
            let v = match *op {
                Op::Const(c) => c,
                Op::X => Complex64::new(x, 0.0),
                Op::Add(a, b) => vals[a] + vals[b],
                Op::Mul(a, b) => {
                    if vals[a] == zero || vals[b] == zero {
                        zero
                    } else {
                        vals[a] * vals[b]
                    }
                }
                Op::Div(n, d, flat) => {
                    if vals[n] == zero && (flat || vals[d] != zero) {
                        zero
                    } else {
                        vals[n] / vals[d]
                    }
                }
                Op::Pow(a, n) => vals[a].powu(n),
                Op::Step(a) => Complex64::new(step_f64(vals[a].re), 0.0),
            };
            vals.push(v);
        }
        vals.last().copied().unwrap_or(zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qr};

    fn p(s: &str) -> SmoothExpr {
        SmoothExpr::parse(s).unwrap()
    }

    fn central_diff(e: &SmoothExpr, x: f64) -> f64 {
        let h = 1e-5;
        (e.eval_f64(x + h).re - e.eval_f64(x - h).re) / (2.0 * h)
    }

    #[test]
    fn derivative_examples() {
        let d = p("(pow x 2)").derivative();
        assert_eq!(d.to_poly().unwrap(), vec![cq(0), cq(2)]);
        assert!(p("1").derivative().is_zero());
    }

    #[test]
    fn derivative_of_kernel_product_matches_finite_differences() {
        let e = p("(* (s x) (s (- 1 x)))");
        let d = e.derivative();
        let exact = d.eval(&qr(1, 2)).to_c64().re;
        assert!((exact - central_diff(&e, 0.5)).abs() < 1e-8);
        // at x = 1/2 both factors are e^-2, derivative of the product is 0 by symmetry
        assert!(exact.abs() < 1e-15);
        let x = 0.3;
        assert!((d.eval_f64(x).re - central_diff(&e, x)).abs() < 1e-8);
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(p("(+ (pow x 2) 1)").eval(&q(2)), Scalar::int(5));
        assert!(p("(s x)").eval(&q(-1)).is_exact_zero());
        let v = p("(s x)").eval(&q(1));
        assert!((v.to_c64().re - 0.36787944117144233).abs() < 1e-10);
    }

    #[test]
    fn kernel_derivative_is_zero_at_origin() {
        let d = p("(s x)").nth_derivative(3);
        assert!(d.eval(&q(0)).is_exact_zero());
        assert_eq!(d.eval_f64(0.0).re, 0.0);
    }

    #[test]
    fn bump_examples() {
        let b = SmoothExpr::bump(&q(0), &q(1), &q(2), &q(3)).unwrap();
        assert_eq!(b.eval(&qr(3, 2)), Scalar::int(1));
        assert!(b.eval(&qr(7, 2)).is_exact_zero());
        let mid = b.eval(&qr(1, 2)).to_c64().re;
        assert!(mid > 0.0 && mid < 1.0);
        let d = b.derivative().eval(&qr(1, 2)).to_c64().re;
        assert!((d - central_diff(&b, 0.5)).abs() < 1e-8);
        assert_eq!(SmoothExpr::bump(&q(0), &q(2), &q(1), &q(3)), Err(Error::InvalidBump));
        assert_eq!(
            b.support().unwrap(),
            &ClosedSet::interval(q(0), q(3))
        );
    }

    #[test]
    fn bump_values_in_unit_interval() {
        let b = SmoothExpr::bump(&qr(-1, 3), &q(0), &qr(1, 2), &q(2)).unwrap();
        let c = b.compile();
        for i in 0..=100 {
            let x = -1.0 + 4.0 * i as f64 / 100.0;
            let v = c.eval(x).re;
            assert!((0.0..=1.0).contains(&v), "{x} -> {v}");
        }
    }

    #[test]
    fn parse_print_roundtrip() {
        for s in [
            "x",
            "3/2",
            "(+ x 1)",
            "(* 2 (pow x 3))",
            "(/ 1 (+ 1 (pow x 2)))",
            "(s (+ x -1))",
            "(/! (s x) (pow x 2))",
        ] {
            let e = p(s);
            assert_eq!(p(&e.to_sexpr()), e, "{s}");
        }
        assert!(SmoothExpr::parse("(+ x").is_err());
        assert!(SmoothExpr::parse("(foo x)").is_err());
        assert!(SmoothExpr::parse("(/ x 0)").is_err());
        assert!(SmoothExpr::parse("x x").is_err());
    }

    #[test]
    fn compiled_agrees_with_exact() {
        let e = p("(+ (* (bump 0 1 2 3) (pow x 2)) (/ x (+ 2 (pow x 2))))");
        let c = e.compile();
        for x in [qr(-1, 2), qr(1, 3), qr(3, 2), qr(5, 2), q(4)] {
            let a = e.eval(&x).to_c64();
            let b = c.eval(crate::scalar::q_to_f64(&x));
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn quotient_certificates() {
        let ok = p("(/ 1 (+ 1 (pow x 2)))");
        assert!(ok.certify_quotients(&OpenSet::whole_line()).is_ok());
        let bad = p("(/ 1 x)");
        assert!(bad.certify_quotients(&OpenSet::bounded(q(-1), q(1))).is_err());
        assert!(bad.certify_quotients(&OpenSet::bounded(q(1), q(2))).is_ok());
    }

    #[test]
    fn polynomial_detection() {
        assert_eq!(
            p("(* (+ x 1) (+ x 1))").to_poly().unwrap(),
            vec![cq(1), cq(2), cq(1)]
        );
        assert!(p("(s x)").to_poly().is_none());
        assert_eq!(p("(/ x 2)").to_poly().unwrap(), vec![cq(0), cq_from_q(qr(1, 2))]);
    }
}
