use std::fmt;
use std::str::FromStr;

use crate::base::OpenSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::family::{rank, test_densities, test_distributions, test_functions};

/// Which precosheaf of compactly supported sections to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceTag {
    Densities,
    CompactFunctions,
    CompactDistributions,
}

impl FromStr for SpaceTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<SpaceTag> {
        match s {
            "densities" => Ok(SpaceTag::Densities),
            "compact_functions" => Ok(SpaceTag::CompactFunctions),
            "compact_distributions" => Ok(SpaceTag::CompactDistributions),
            _ => Err(Error::Parse(format!("unknown space {s:?}"))),
        }
    }
}

impl fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceTag::Densities => "densities",
            SpaceTag::CompactFunctions => "compact_functions",
            SpaceTag::CompactDistributions => "compact_distributions",
        })
    }
}

/// Ranks of the spanning family before and after extension by zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlabbyOutcome {
    pub family_size: usize,
    pub rank_on_v: usize,
    pub rank_on_u: usize,
}

impl FlabbyOutcome {
    /// `ext_{U,V}` is injective on the span of the family.
    pub fn injective(&self) -> bool {
        self.rank_on_v == self.rank_on_u
    }
}

const RANK_TOL: f64 = 1e-9;

/// Compare the pairing matrices of a spanning family on `V` and of its extension to `U`.
pub fn flabby_ranks(tag: SpaceTag, v: &OpenSet, u: &OpenSet, k: usize, trunc: u32) -> Result<FlabbyOutcome> {
    if !v.is_subset(u) {
        return Err(Error::NotSubset);
    }
    let (on_v, on_u): (Vec<Vec<Scalar>>, Vec<Vec<Scalar>>) = match tag {
        SpaceTag::Densities => {
            let fam = test_densities(v, k, trunc)?;
            let (tv, tu) = (test_functions(v, k, trunc)?, test_functions(u, k, trunc)?);
            let mut a = Vec::new();
            let mut b = Vec::new();
            for eta in &fam {
                a.push(tv.iter().map(|t| eta.pair(t.inner())).collect::<Result<_>>()?);
                let e = eta.ext(u)?;
                b.push(tu.iter().map(|t| e.pair(t.inner())).collect::<Result<_>>()?);
            }
            (a, b)
        }
        SpaceTag::CompactFunctions => {
            let fam = test_functions(v, k, trunc)?;
            let (tv, tu) = (test_densities(v, k, trunc)?, test_densities(u, k, trunc)?);
            let mut a = Vec::new();
            let mut b = Vec::new();
            for f in &fam {
                a.push(tv.iter().map(|t| t.pair(f.inner())).collect::<Result<_>>()?);
                let e = f.extend_by_zero(u)?;
                b.push(tu.iter().map(|t| t.pair(e.inner())).collect::<Result<_>>()?);
            }
            (a, b)
        }
        SpaceTag::CompactDistributions => {
            let fam = test_distributions(v, k, trunc)?;
            let (tv, tu) = (test_functions(v, k, trunc)?, test_functions(u, k, trunc)?);
            let mut a = Vec::new();
            let mut b = Vec::new();
            for d in &fam {
                a.push(tv.iter().map(|t| Ok(d.apply(t)?[0].clone())).collect::<Result<_>>()?);
                let e = d.ext(u)?;
                b.push(tu.iter().map(|t| Ok(e.apply(t)?[0].clone())).collect::<Result<_>>()?);
            }
            (a, b)
        }
    };
    Ok(FlabbyOutcome {
        family_size: on_v.len(),
        rank_on_v: rank(&on_v, RANK_TOL),
        rank_on_u: rank(&on_u, RANK_TOL),
    })
}

/// `true` iff extension by zero from `V` to `U` has trivial kernel on the spanning family.
pub fn flabby_check(tag: SpaceTag, v: &OpenSet, u: &OpenSet, k: usize, trunc: u32) -> Result<bool> {
    Ok(flabby_ranks(tag, v, u, k, trunc)?.injective())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_dual_basis_is_injective() {
        let u = OpenSet::discrete(&["a", "b", "c"]);
        let v = OpenSet::discrete(&["a", "c"]);
        for tag in [SpaceTag::Densities, SpaceTag::CompactFunctions, SpaceTag::CompactDistributions] {
            let o = flabby_ranks(tag, &v, &u, 1, 2).unwrap();
            assert!(o.injective());
            assert_eq!(o.rank_on_v, 2 * 3);
        }
    }

    #[test]
    fn empty_subset_is_trivially_injective() {
        let u = OpenSet::discrete(&["a"]);
        let v = OpenSet::discrete::<&str>(&[]);
        assert!(flabby_check(SpaceTag::Densities, &v, &u, 0, 0).unwrap());
    }

    #[test]
    fn tags_parse() {
        assert_eq!("densities".parse::<SpaceTag>().unwrap(), SpaceTag::Densities);
        assert!("nope".parse::<SpaceTag>().is_err());
    }
}
