//! Seeded random instances for property suites.
//!
//! All randomness comes from a [`ChaCha8Rng`] seeded with a user-supplied
//! `u64`, so every suite is reproducible from its seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base::{BaseDensity, BaseFunction, OpenSet, SmoothExpr};
use crate::densities::{DistributionalBaseDensity, FormalDensity};
use crate::diffops::DensityDiffOp;
use crate::distributions::{BaseDistribution, CompactFormalDistribution, FormalDistribution, GeneralizedFunction};
use crate::error::Result;
use crate::formal::{FormalFunction, SupportedFormalFunction};
use crate::multiindex::{enumerate_upto, MultiIndex};
use crate::scalar::{CQ, Q};
use crate::sheaf::Cover;

use num::Zero;

pub struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn range(&mut self, lo: u32, hi: u32) -> u32 {
        self.rng.gen_range(lo..=hi)
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    /// Small Gaussian-rational scalars: mostly integers, some fractions, some imaginary parts.
    pub fn scalar(&mut self) -> CQ {
        let re = self.small_q();
        let im = if self.coin(0.2) { self.small_q() } else { Q::zero() };
        CQ::new(re, im)
    }

    pub fn nonzero_scalar(&mut self) -> CQ {
        loop {
            let c = self.scalar();
            if !c.is_zero() {
                return c;
            }
        }
    }

    fn small_q(&mut self) -> Q {
        let n: i64 = self.rng.gen_range(-4..=4);
        let d: i64 = if self.coin(0.25) { self.rng.gen_range(1..=3) } else { 1 };
        Q::new(n.into(), d.into())
    }

    /// Point labels `p0, p1, …`.
    pub fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    pub fn discrete_base(&mut self, min: usize, max: usize) -> OpenSet {
        let n = self.rng.gen_range(min..=max);
        OpenSet::discrete(&Gen::labels(n))
    }

    /// Uniform random subset of a discrete set.
    pub fn subset(&mut self, of: &OpenSet) -> OpenSet {
        let pts: Vec<&String> = of.labels().into_iter().flatten().filter(|_| self.rng.gen_bool(0.5)).collect();
        OpenSet::discrete(&pts)
    }

    pub fn nonempty_subset(&mut self, of: &OpenSet) -> OpenSet {
        loop {
            let s = self.subset(of);
            if !s.is_empty() || of.is_empty() {
                return s;
            }
        }
    }

    fn discrete_values(&mut self, dom: &OpenSet) -> BTreeMap<String, CQ> {
        dom.labels()
            .into_iter()
            .flatten()
            .filter_map(|p| {
                if self.rng.gen_bool(0.7) {
                    Some((p.clone(), self.scalar()))
                } else {
                    None
                }
            })
            .filter(|(_, v)| !v.is_zero())
            .collect()
    }

    pub fn discrete_base_function(&mut self, dom: &OpenSet) -> BaseFunction {
        BaseFunction::Discrete(self.discrete_values(dom))
    }

    pub fn discrete_base_density(&mut self, dom: &OpenSet) -> BaseDensity {
        BaseDensity::from_map(self.discrete_values(dom))
    }

    pub fn discrete_base_distribution(&mut self, dom: &OpenSet) -> BaseDistribution {
        BaseDistribution::Discrete(self.discrete_values(dom))
    }

    /// Random `y`-multi-indices of degree at most `d`.
    fn indices(&mut self, k: usize, d: u32) -> Vec<MultiIndex> {
        enumerate_upto(k, d).into_iter().filter(|_| self.rng.gen_bool(0.6)).collect()
    }

    pub fn discrete_function(&mut self, dom: &OpenSet, k: usize, trunc: u32) -> Result<FormalFunction> {
        let coeffs = self
            .indices(k, trunc)
            .into_iter()
            .map(|j| (j, self.discrete_base_function(dom)))
            .collect();
        FormalFunction::new(dom.clone(), k, trunc, coeffs)
    }

    pub fn discrete_supported(&mut self, dom: &OpenSet, k: usize, trunc: u32) -> Result<SupportedFormalFunction> {
        let u = self.discrete_function(dom, k, trunc)?;
        let witness = crate::base::Support::Points(dom.labels().cloned().unwrap_or_default());
        SupportedFormalFunction::new(u, witness)
    }

    pub fn discrete_density(&mut self, dom: &OpenSet, k: usize, star: u32) -> Result<FormalDensity> {
        let coeffs = self
            .indices(k, star)
            .into_iter()
            .map(|l| (l, DistributionalBaseDensity::single(MultiIndex::zero(0), self.discrete_base_density(dom))))
            .collect();
        FormalDensity::new(dom.clone(), k, coeffs)
    }

    pub fn discrete_diffop(&mut self, dom: &OpenSet, k: usize, y_order: u32) -> Result<DensityDiffOp> {
        let terms = self
            .indices(k, y_order)
            .into_iter()
            .map(|l| ((MultiIndex::zero(0), l), self.discrete_base_density(dom)))
            .collect();
        DensityDiffOp::new(dom.clone(), k, terms)
    }

    pub fn discrete_distribution(&mut self, dom: &OpenSet, k: usize, e_dim: usize, star: u32) -> Result<FormalDistribution> {
        let coeffs = self
            .indices(k, star)
            .into_iter()
            .map(|l| (l, (0..e_dim).map(|_| self.discrete_base_distribution(dom)).collect()))
            .collect();
        FormalDistribution::new(dom.clone(), k, e_dim, coeffs)
    }

    pub fn discrete_compact_distribution(&mut self, dom: &OpenSet, k: usize, star: u32) -> Result<CompactFormalDistribution> {
        CompactFormalDistribution::from_inner(self.discrete_distribution(dom, k, 1, star)?)
    }

    pub fn discrete_generalized(&mut self, dom: &OpenSet, k: usize, e_dim: usize, trunc: u32) -> Result<GeneralizedFunction> {
        let coeffs = self
            .indices(k, trunc)
            .into_iter()
            .map(|j| (j, (0..e_dim).map(|_| self.discrete_base_distribution(dom)).collect()))
            .collect();
        GeneralizedFunction::new(dom.clone(), k, e_dim, trunc, coeffs)
    }

    /// A cover of a discrete set by `parts` subsets: every point lands in a random
    /// part, then each part picks up extra points at random.
    pub fn discrete_cover(&mut self, m: &OpenSet, parts: usize) -> Result<Cover> {
        let labels: Vec<String> = m.labels().cloned().unwrap_or_default().into_iter().collect();
        let mut members: Vec<Vec<String>> = vec![Vec::new(); parts];
        for p in &labels {
            let a = self.below(parts);
            members[a].push(p.clone());
            for (b, part) in members.iter_mut().enumerate() {
                if b != a && self.rng.gen_bool(0.3) {
                    part.push(p.clone());
                }
            }
        }
        members.shuffle(&mut self.rng);
        Cover::new(m.clone(), members.iter().map(|v| OpenSet::discrete(v)).collect())
    }

    /// A dyadic rational in `[lo, hi]` on a grid of `2^-3`.
    pub fn grid_point(&mut self, lo: i64, hi: i64) -> Q {
        let n = self.rng.gen_range(lo * 8..=hi * 8);
        Q::new(n.into(), 8.into())
    }

    pub fn poly(&mut self, max_degree: u32) -> SmoothExpr {
        let deg = self.range(0, max_degree);
        let mut e = SmoothExpr::zero();
        for d in 0..=deg {
            e = e.add(&SmoothExpr::constant(self.scalar()).mul(&SmoothExpr::x().pow(d)));
        }
        e
    }

    /// A bump with four sorted breakpoints strictly inside `(lo, hi)`.
    pub fn bump_in(&mut self, lo: &Q, hi: &Q) -> SmoothExpr {
        let mut ticks: Vec<i64> = (1..16).collect();
        ticks.shuffle(&mut self.rng);
        let mut t: Vec<i64> = ticks[..4].to_vec();
        t.sort();
        let w = hi - lo;
        let at = |n: i64| lo + &w * Q::new(n.into(), 16.into());
        SmoothExpr::bump(&at(t[0]), &at(t[1]), &at(t[2]), &at(t[3])).expect("sorted distinct breakpoints")
    }

    /// `poly · bump` density supported in `(lo, hi)`.
    pub fn line_base_density(&mut self, lo: &Q, hi: &Q) -> Result<BaseDensity> {
        let p = self.poly(2);
        let b = self.bump_in(lo, hi);
        BaseDensity::from_expr(p.mul(&b))
    }

    pub fn line_function(&mut self, dom: &OpenSet, k: usize, trunc: u32) -> Result<FormalFunction> {
        let coeffs = self
            .indices(k, trunc)
            .into_iter()
            .map(|j| (j, BaseFunction::Smooth(self.poly(3))))
            .collect();
        FormalFunction::new(dom.clone(), k, trunc, coeffs)
    }

    /// Differential operator with `poly · bump` coefficients supported in `(lo, hi)`.
    pub fn line_diffop(&mut self, dom: &OpenSet, k: usize, x_order: u32, y_order: u32, lo: &Q, hi: &Q) -> Result<DensityDiffOp> {
        let mut terms = BTreeMap::new();
        for l in self.indices(k, y_order) {
            let i = MultiIndex::new(vec![self.range(0, x_order)]);
            terms.insert((i, l), self.line_base_density(lo, hi)?);
        }
        DensityDiffOp::new(dom.clone(), k, terms)
    }

    pub fn line_density(&mut self, dom: &OpenSet, k: usize, star: u32, lo: &Q, hi: &Q) -> Result<FormalDensity> {
        let mut coeffs = BTreeMap::new();
        for l in self.indices(k, star) {
            let mut d = DistributionalBaseDensity::default();
            d.add_term(MultiIndex::new(vec![self.range(0, 1)]), self.line_base_density(lo, hi)?)?;
            coeffs.insert(l, d);
        }
        FormalDensity::new(dom.clone(), k, coeffs)
    }

    /// Point masses, point derivatives and smooth terms located in `(lo, hi)`.
    pub fn line_base_distribution(&mut self, lo: &Q, hi: &Q) -> BaseDistribution {
        let mut d = BaseDistribution::zero(crate::base::Backend::Line);
        let w = hi - lo;
        for _ in 0..self.range(0, 2) {
            let at = lo + &w * Q::new(self.rng.gen_range(1..16).into(), 16.into());
            let order = self.range(0, 1);
            let term = BaseDistribution::point(at, order, self.nonzero_scalar());
            d = d.add(&term).expect("same backend");
        }
        if self.coin(0.5) {
            let p = self.poly(1);
            d = d.add(&BaseDistribution::smooth(p)).expect("same backend");
        }
        d
    }

    pub fn line_generalized(&mut self, dom: &OpenSet, k: usize, trunc: u32, lo: &Q, hi: &Q) -> Result<GeneralizedFunction> {
        let coeffs = self
            .indices(k, trunc)
            .into_iter()
            .map(|j| (j, vec![self.line_base_distribution(lo, hi)]))
            .collect();
        GeneralizedFunction::new(dom.clone(), k, 1, trunc, coeffs)
    }

    pub fn line_distribution(&mut self, dom: &OpenSet, k: usize, star: u32, lo: &Q, hi: &Q) -> Result<FormalDistribution> {
        let coeffs = self
            .indices(k, star)
            .into_iter()
            .map(|l| (l, vec![self.line_base_distribution(lo, hi)]))
            .collect();
        FormalDistribution::new(dom.clone(), k, 1, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_a_seed() {
        let m = OpenSet::discrete(&Gen::labels(4));
        let a = Gen::new(7).discrete_density(&m, 2, 3).unwrap();
        let b = Gen::new(7).discrete_density(&m, 2, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn covers_cover() {
        let mut g = Gen::new(1);
        for _ in 0..20 {
            let m = g.discrete_base(1, 6);
            let c = g.discrete_cover(&m, 3).unwrap();
            assert_eq!(c.len(), 3);
        }
    }
}
