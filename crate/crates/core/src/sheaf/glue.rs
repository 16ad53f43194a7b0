use crate::base::OpenSet;
use crate::distributions::{EVec, FormalDistribution, GeneralizedFunction};
use crate::error::{Error, Result};
use crate::formal::FormalFunction;

use super::cover::{build_pou, PartitionOfUnity};
use super::family::{evec_gap, test_densities, test_functions};

/// Sections of a sheaf of functionals: restrictable, weightable by functions, extendable.
pub trait GlobalSection: Clone + Sized {
    fn section_domain(&self) -> &OpenSet;
    fn restrict_to(&self, v: &OpenSet) -> Result<Self>;
    /// `f · s` for a `y`-constant formal function `f` on the same domain.
    fn weight(&self, f: &FormalFunction) -> Result<Self>;
    fn extend(&self, m: &OpenSet) -> Result<Self>;
    fn plus(&self, other: &Self) -> Result<Self>;
    /// Truncation needed from partition-of-unity functions.
    fn needed_trunc(&self) -> u32;
    /// Values on the spanning family of the section's domain, with a label per probe.
    fn probe(&self) -> Result<Vec<(String, EVec)>>;
}

impl GlobalSection for FormalDistribution {
    fn section_domain(&self) -> &OpenSet {
        self.domain()
    }

    fn restrict_to(&self, v: &OpenSet) -> Result<Self> {
        self.restrict(v)
    }

    fn weight(&self, f: &FormalFunction) -> Result<Self> {
        self.module_action_dist(f)
    }

    fn extend(&self, m: &OpenSet) -> Result<Self> {
        self.ext(m)
    }

    fn plus(&self, other: &Self) -> Result<Self> {
        self.add(other)
    }

    fn needed_trunc(&self) -> u32 {
        self.max_degree()
    }

    fn probe(&self) -> Result<Vec<(String, EVec)>> {
        test_functions(self.domain(), self.k(), self.max_degree())?
            .iter()
            .enumerate()
            .map(|(i, u)| Ok((format!("test function #{i} {}", u.inner().to_json()), self.apply_dist(u)?)))
            .collect()
    }
}

impl GlobalSection for GeneralizedFunction {
    fn section_domain(&self) -> &OpenSet {
        self.domain()
    }

    fn restrict_to(&self, v: &OpenSet) -> Result<Self> {
        self.restrict(v)
    }

    fn weight(&self, f: &FormalFunction) -> Result<Self> {
        self.multiply(f)
    }

    fn extend(&self, m: &OpenSet) -> Result<Self> {
        self.ext(m)
    }

    fn plus(&self, other: &Self) -> Result<Self> {
        self.add(other)
    }

    fn needed_trunc(&self) -> u32 {
        self.trunc()
    }

    fn probe(&self) -> Result<Vec<(String, EVec)>> {
        test_densities(self.domain(), self.k(), self.trunc())?
            .iter()
            .enumerate()
            .map(|(i, eta)| Ok((format!("test density #{i} {}", eta.to_json()), self.apply_gen(eta)?)))
            .collect()
    }
}

/// Largest disagreement of two sections on the spanning family of their domain.
pub fn section_residual<S: GlobalSection>(a: &S, b: &S) -> Result<f64> {
    if a.section_domain() != b.section_domain() {
        return Err(Error::DomainMismatch);
    }
    let (pa, pb) = (a.probe()?, b.probe()?);
    Ok(pa.iter().zip(&pb).map(|((_, x), (_, y))| evec_gap(x, y)).fold(0.0, f64::max))
}

fn show(v: &EVec) -> String {
    let parts: Vec<String> = v.iter().map(|s| s.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Restrictions to every pairwise overlap agree (exactly when `tol == 0`).
pub fn check_compatible<S: GlobalSection>(locals: &[S], parts: &[OpenSet], tol: f64) -> Result<()> {
    for a in 0..locals.len() {
        for b in a + 1..locals.len() {
            let w = parts[a].intersect(&parts[b])?;
            if w.is_empty() {
                continue;
            }
            let ra = locals[a].restrict_to(&w)?.probe()?;
            let rb = locals[b].restrict_to(&w)?.probe()?;
            for ((label, x), (_, y)) in ra.iter().zip(&rb) {
                let gap = evec_gap(x, y);
                if gap > tol {
                    return Err(Error::Incompatible {
                        first: a,
                        second: b,
                        detail: format!("on {w}, {label}: {} vs {} (gap {gap:e})", show(x), show(y)),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Glue a compatible family: `Σ_α ext_{M,U_α}(f_α|_{U_α} · s_α)`.
pub fn sheaf_glue<S: GlobalSection>(locals: &[S], pou: &PartitionOfUnity, tol: f64) -> Result<S> {
    let cover = pou.cover();
    if locals.len() != cover.len() {
        return Err(Error::Precondition(format!("{} locals for {} parts", locals.len(), cover.len())));
    }
    for (s, u) in locals.iter().zip(cover.parts()) {
        if s.section_domain() != u {
            return Err(Error::DomainMismatch);
        }
    }
    check_compatible(locals, cover.parts(), tol)?;
    let m = cover.whole();
    let mut out: Option<S> = None;
    for (alpha, s) in locals.iter().enumerate() {
        let piece = s.weight(&pou.local(alpha)?)?.extend(m)?;
        out = Some(match out {
            Some(acc) => acc.plus(&piece)?,
            None => piece,
        });
    }
    out.ok_or_else(|| Error::Precondition("empty cover".into()))
}

/// Build a partition of unity with enough truncation and glue.
pub fn sheaf_glue_auto<S: GlobalSection>(locals: &[S], cover: &super::cover::Cover, k: usize, tol: f64) -> Result<S> {
    let trunc = locals.iter().map(GlobalSection::needed_trunc).max().unwrap_or(0);
    let pou = build_pou(cover, k, trunc)?;
    sheaf_glue(locals, &pou, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::BaseDistribution;
    use crate::multiindex::MultiIndex;
    use crate::scalar::cq;
    use crate::sheaf::cover::Cover;
    use std::collections::BTreeMap;

    fn gen_fn(dom: &OpenSet, vals: &[(&str, i64)]) -> GeneralizedFunction {
        let v: Vec<(&str, num::Complex<num::BigRational>)> = vals.iter().map(|(p, x)| (*p, cq(*x))).collect();
        GeneralizedFunction::new(
            dom.clone(),
            1,
            1,
            1,
            BTreeMap::from([(MultiIndex::new(vec![1]), vec![BaseDistribution::discrete(&v)])]),
        )
        .unwrap()
    }

    #[test]
    fn restrict_then_glue_roundtrip() {
        let m = OpenSet::discrete(&["a", "b", "c", "d"]);
        let parts = vec![OpenSet::discrete(&["a", "b"]), OpenSet::discrete(&["b", "c"]), OpenSet::discrete(&["c", "d"])];
        let cover = Cover::new(m.clone(), parts.clone()).unwrap();
        let g = gen_fn(&m, &[("a", 1), ("b", 2), ("c", -3), ("d", 4)]);
        let locals: Vec<_> = parts.iter().map(|u| g.restrict(u).unwrap()).collect();
        let glued = sheaf_glue_auto(&locals, &cover, 1, 0.0).unwrap();
        assert_eq!(section_residual(&glued, &g).unwrap(), 0.0);
    }

    #[test]
    fn single_part_and_zero() {
        let m = OpenSet::discrete(&["a", "b"]);
        let cover = Cover::new(m.clone(), vec![m.clone()]).unwrap();
        let g = gen_fn(&m, &[("a", 5)]);
        assert_eq!(section_residual(&sheaf_glue_auto(&[g.clone()], &cover, 1, 0.0).unwrap(), &g).unwrap(), 0.0);
        let z = GeneralizedFunction::zero(m.clone(), 1, 1, 1);
        assert!(sheaf_glue_auto(&[z], &cover, 1, 0.0).unwrap().is_zero());
    }

    #[test]
    fn incompatible_locals_are_reported() {
        let m = OpenSet::discrete(&["a", "b", "c"]);
        let parts = vec![OpenSet::discrete(&["a", "b"]), OpenSet::discrete(&["b", "c"])];
        let cover = Cover::new(m, parts.clone()).unwrap();
        let l0 = gen_fn(&parts[0], &[("b", 1)]);
        let l1 = gen_fn(&parts[1], &[("b", 2)]);
        match sheaf_glue_auto(&[l0, l1], &cover, 1, 0.0) {
            Err(Error::Incompatible { first: 0, second: 1, .. }) => {}
            other => panic!("expected incompatibility, got {other:?}"),
        }
    }
}
