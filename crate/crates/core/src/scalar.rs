//! Complex scalars: exact rational pairs, with a floating-point fallback
//! once a transcendental evaluation or quadrature has been involved.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::complex::Complex64;
use num::{BigRational, Complex, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational number.
pub type Q = BigRational;
/// Exact complex rational number.
pub type CQ = Complex<BigRational>;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn cq(n: i64) -> CQ {
    CQ::new(q(n), Q::zero())
}

pub fn cq_from_q(re: Q) -> CQ {
    CQ::new(re, Q::zero())
}

pub fn q_to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or_else(|| {
        // very large numerators/denominators
        let n = v.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = v.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

pub fn cq_to_c64(v: &CQ) -> Complex64 {
    Complex64::new(q_to_f64(&v.re), q_to_f64(&v.im))
}

/// Parse a rational literal: `3`, `-3/4`, `0.125`, `1e-3`.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational literal".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Q::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(format!("bad rational literal {s:?}")));
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("bad rational literal {s:?}")));
    }
    let n: BigInt = digits.parse().unwrap_or_else(|_| BigInt::zero());
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut v = Q::from_integer(n);
    if scale >= 0 {
        v *= Q::from_integer(num::pow(ten, scale as usize));
    } else {
        v /= Q::from_integer(num::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -v } else { v })
}

/// Parse a complex rational literal: `2`, `-1/2`, `3i`, `-i`, `1+2i`, `1/2-3/4i`.
pub fn parse_complex(s: &str) -> Result<CQ> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(Error::Parse("empty complex literal".into()));
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(cq_from_q(parse_rational(&t)?));
    };
    // split at the last sign that is not the leading one and not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
            split = Some(i);
            break;
        }
    }
    let (re_s, im_s) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("", body),
    };
    let im = match im_s {
        "" | "+" => Q::one(),
        "-" => -Q::one(),
        other => parse_rational(other)?,
    };
    let re = if re_s.is_empty() {
        Q::zero()
    } else {
        parse_rational(re_s)?
    };
    Ok(CQ::new(re, im))
}

pub fn format_cq(v: &CQ) -> String {
    if v.im.is_zero() {
        return v.re.to_string();
    }
    let im = if v.im.is_one() {
        String::new()
    } else if v.im == -Q::one() {
        "-".to_string()
    } else {
        v.im.to_string()
    };
    if v.re.is_zero() {
        format!("{im}i")
    } else if v.im.is_positive() {
        format!("{}+{im}i", v.re)
    } else {
        format!("{}{im}i", v.re)
    }
}

/// A complex scalar that stays exact for as long as possible.
#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(CQ),
    Approx(Complex64),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(CQ::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(CQ::one())
    }

    pub fn int(n: i64) -> Self {
        Scalar::Exact(cq(n))
    }

    pub fn real(x: f64) -> Self {
        Scalar::Approx(Complex64::new(x, 0.0))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    /// True only for an exact zero.
    pub fn is_exact_zero(&self) -> bool {
        matches!(self, Scalar::Exact(v) if v.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(v) => v.is_zero(),
            Scalar::Approx(v) => v.re == 0.0 && v.im == 0.0,
        }
    }

    pub fn as_exact(&self) -> Option<&CQ> {
        match self {
            Scalar::Exact(v) => Some(v),
            Scalar::Approx(_) => None,
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        match self {
            Scalar::Exact(v) => cq_to_c64(v),
            Scalar::Approx(v) => *v,
        }
    }

    pub fn abs(&self) -> f64 {
        self.to_c64().norm()
    }

    /// Exact equality when both sides are exact, otherwise `|a - b| <= tol`.
    pub fn approx_eq(&self, other: &Scalar, tol: f64) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => (self.to_c64() - other.to_c64()).norm() <= tol,
        }
    }

    /// `|a - b|` as a float; zero for exactly equal values.
    pub fn distance(&self, other: &Scalar) -> f64 {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) if a == b => 0.0,
            _ => (self.to_c64() - other.to_c64()).norm(),
        }
    }

    pub fn scale_cq(&self, c: &CQ) -> Scalar {
        match self {
            Scalar::Exact(v) => Scalar::Exact(v * c),
            Scalar::Approx(v) => Scalar::Approx(v * cq_to_c64(c)),
        }
    }
}

impl From<CQ> for Scalar {
    fn from(v: CQ) -> Self {
        Scalar::Exact(v)
    }
}

impl From<Complex64> for Scalar {
    fn from(v: Complex64) -> Self {
        Scalar::Approx(v)
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => self.to_c64() == other.to_c64(),
        }
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            _ => Scalar::Approx(self.to_c64() + rhs.to_c64()),
        }
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a - b),
            _ => Scalar::Approx(self.to_c64() - rhs.to_c64()),
        }
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            // an exact zero annihilates even non-finite floats
            (Scalar::Exact(a), _) | (_, Scalar::Exact(a)) if a.is_zero() => Scalar::zero(),
            _ => Scalar::Approx(self.to_c64() * rhs.to_c64()),
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(-a.clone()),
            Scalar::Approx(a) => Scalar::Approx(-a),
        }
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        &self + &rhs
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        &self - &rhs
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        &self * &rhs
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, v| &acc + &v)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(v) => f.write_str(&format_cq(v)),
            Scalar::Approx(v) => {
                if v.im == 0.0 {
                    write!(f, "~{}", v.re)
                } else if v.im < 0.0 {
                    write!(f, "~{}{}i", v.re, v.im)
                } else {
                    write!(f, "~{}+{}i", v.re, v.im)
                }
            }
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Parse a JSON scalar: integer, float (converted exactly) or complex literal string.
pub fn cq_from_json(v: &serde_json::Value) -> Result<CQ> {
    match v {
        serde_json::Value::String(s) => parse_complex(s),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(cq(i))
            } else {
                // decimal text is exact where binary floats are not
                parse_complex(&n.to_string())
            }
        }
        other => Err(Error::Parse(format!("expected a scalar, got {other}"))),
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        cq_from_json(&v)
            .map(Scalar::Exact)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("3").unwrap(), q(3));
        assert_eq!(parse_rational("-3/4").unwrap(), qr(-3, 4));
        assert_eq!(parse_rational("0.125").unwrap(), qr(1, 8));
        assert_eq!(parse_rational("1e-3").unwrap(), qr(1, 1000));
        assert_eq!(parse_rational("-.5").unwrap(), qr(-1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn parses_complex() {
        assert_eq!(parse_complex("i").unwrap(), CQ::new(q(0), q(1)));
        assert_eq!(parse_complex("-i").unwrap(), CQ::new(q(0), q(-1)));
        assert_eq!(parse_complex("1+2i").unwrap(), CQ::new(q(1), q(2)));
        assert_eq!(parse_complex("1/2-3/4i").unwrap(), CQ::new(qr(1, 2), qr(-3, 4)));
        assert_eq!(parse_complex("-2").unwrap(), cq(-2));
    }

    #[test]
    fn display_roundtrips() {
        for s in ["0", "3/2", "i", "-i", "1+2i", "-1/2-3i", "5i"] {
            let v = parse_complex(s).unwrap();
            assert_eq!(parse_complex(&format_cq(&v)).unwrap(), v, "{s}");
        }
    }

    #[test]
    fn exact_zero_annihilates_nan() {
        let z = Scalar::zero();
        let nan = Scalar::real(f64::NAN);
        assert!((&z * &nan).is_exact_zero());
    }

    #[test]
    fn mixed_arithmetic_promotes() {
        let a = Scalar::int(2);
        let b = Scalar::real(0.5);
        let c = &a * &b;
        assert!(!c.is_exact());
        assert!(c.approx_eq(&Scalar::int(1), 1e-15));
    }
}
