//! Exponent vectors for the base coordinates `x` and the formal variables `y`.

use std::cmp::Ordering;
use std::fmt;

use num::{BigInt, One};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multi-index of fixed length.
///
/// Ordering is graded lexicographic: lower total degree first, then the
/// index with the larger leading entry first, so `(1,0)` precedes `(0,1)`.
/// Indices of different length are ordered by length; they are never
/// combined arithmetically.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// The unit index `e_i` of the given length.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = vec![0; len];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Product of the entry factorials.
    pub fn factorial(&self) -> BigInt {
        self.0
            .iter()
            .fold(BigInt::one(), |acc, &e| acc * factorial(e))
    }

    fn check_len(&self, other: &MultiIndex) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(())
    }

    pub fn add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        self.check_len(other)?;
        Ok(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// Componentwise difference; fails if any entry would go negative.
    pub fn sub(&self, other: &MultiIndex) -> Result<MultiIndex> {
        self.check_len(other)?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b).ok_or(Error::NegativeIndex))
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Product of binomial coefficients `binom(self_i, sub_i)`.
    pub fn binomial(&self, sub: &MultiIndex) -> BigInt {
        self.0
            .iter()
            .zip(&sub.0)
            .fold(BigInt::one(), |acc, (&n, &k)| acc * binomial(n, k))
    }

    /// All `l <= self` componentwise, in graded lexicographic order.
    pub fn lower_set(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::with_capacity(self.len())];
        for &bound in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=bound).map(move |e| {
                        let mut p = prefix.clone();
                        p.push(e);
                        p
                    })
                })
                .collect();
        }
        let mut out: Vec<_> = out.into_iter().map(MultiIndex).collect();
        out.sort();
        out
    }

    /// Comma-separated form used as a JSON object key; empty for length 0.
    pub fn to_key(&self) -> String {
        self.0
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_key(key: &str) -> Result<MultiIndex> {
        let key = key.trim();
        if key.is_empty() {
            return Ok(MultiIndex(Vec::new()));
        }
        key.split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad multi-index key {key:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then(self.degree().cmp(&other.degree()))
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_key())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_key())
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

pub fn factorial(n: u32) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::from(0);
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// All indices of the given length with degree at most `r`, graded lexicographic.
pub fn enumerate_upto(len: usize, r: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in 0..=r {
        enumerate_degree(len, d, &mut out);
    }
    out
}

/// All indices of the given length with degree exactly `d`, graded lexicographic.
pub fn enumerate_degree(len: usize, d: u32, out: &mut Vec<MultiIndex>) {
    fn rec(len: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == len {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(len, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    if len == 0 {
        if d == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    rec(len, d, &mut Vec::with_capacity(len), out);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn degree_examples() {
        assert_eq!(mi(&[0, 0]).degree(), 0);
        assert_eq!(mi(&[2, 1]).degree(), 3);
        assert_eq!(mi(&[0, 5]).degree(), 5);
    }

    #[test]
    fn factorial_examples() {
        assert_eq!(mi(&[0, 0]).factorial(), BigInt::from(1));
        assert_eq!(mi(&[2, 1]).factorial(), BigInt::from(2));
        assert_eq!(mi(&[3, 2]).factorial(), BigInt::from(6 * 2));
    }

    #[test]
    fn factorial_is_unbounded() {
        assert_eq!(
            mi(&[25]).factorial().to_string(),
            "15511210043330985984000000"
        );
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(enumerate_upto(1, 2), vec![mi(&[0]), mi(&[1]), mi(&[2])]);
        assert_eq!(enumerate_upto(2, 0), vec![mi(&[0, 0])]);
        assert_eq!(
            enumerate_upto(2, 2),
            vec![
                mi(&[0, 0]),
                mi(&[1, 0]),
                mi(&[0, 1]),
                mi(&[2, 0]),
                mi(&[1, 1]),
                mi(&[0, 2])
            ]
        );
        assert_eq!(enumerate_upto(0, 3), vec![mi(&[])]);
    }

    #[test]
    fn enumeration_matches_ord() {
        let v = enumerate_upto(3, 4);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(v, sorted);
    }

    #[test]
    fn sub_examples() {
        assert_eq!(mi(&[2, 1]).sub(&mi(&[0, 0])).unwrap(), mi(&[2, 1]));
        assert_eq!(mi(&[2, 1]).sub(&mi(&[2, 1])).unwrap(), mi(&[0, 0]));
        assert_eq!(mi(&[3, 2]).sub(&mi(&[1, 2])).unwrap(), mi(&[2, 0]));
        assert_eq!(mi(&[1, 2]).sub(&mi(&[3, 2])), Err(Error::NegativeIndex));
        assert_eq!(mi(&[1]).sub(&mi(&[0, 0])), Err(Error::LengthMismatch(1, 2)));
    }

    #[test]
    fn lower_set_and_binomial() {
        let l = mi(&[2, 1]).lower_set();
        assert_eq!(l.len(), 6);
        assert_eq!(mi(&[4, 2]).binomial(&mi(&[2, 1])), BigInt::from(12));
    }

    #[test]
    fn keys_roundtrip() {
        assert_eq!(MultiIndex::from_key("1,0").unwrap(), mi(&[1, 0]));
        assert_eq!(MultiIndex::from_key("").unwrap(), mi(&[]));
        assert_eq!(mi(&[3, 2]).to_key(), "3,2");
        assert!(MultiIndex::from_key("1,-1").is_err());
    }

    #[test]
    fn json_is_integer_array() {
        assert_eq!(serde_json::to_string(&mi(&[2, 1])).unwrap(), "[2,1]");
        let back: MultiIndex = serde_json::from_str("[0,5]").unwrap();
        assert_eq!(back, mi(&[0, 5]));
    }
}
