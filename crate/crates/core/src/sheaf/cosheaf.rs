use crate::base::OpenSet;
use crate::densities::FormalDensity;
use crate::distributions::CompactFormalDistribution;
use crate::error::{Error, Result};
use crate::formal::SupportedFormalFunction;

use super::cover::PartitionOfUnity;
use super::family::{density_residual, distribution_residual, function_residual};

/// Compactly supported sections that can be cut off, extended by zero and added.
pub trait CompactSection: Clone + Sized {
    fn section_domain(&self) -> &OpenSet;
    /// `(s ∘ f)|_U` for `f` supported in `U` relative to the domain.
    fn localize(&self, f: &SupportedFormalFunction, u: &OpenSet) -> Result<Self>;
    fn extend(&self, m: &OpenSet) -> Result<Self>;
    fn plus(&self, other: &Self) -> Result<Self>;
    /// Largest disagreement on the spanning family of the common domain.
    fn residual(&self, other: &Self) -> Result<f64>;
}

impl CompactSection for FormalDensity {
    fn section_domain(&self) -> &OpenSet {
        self.domain()
    }

    fn localize(&self, f: &SupportedFormalFunction, u: &OpenSet) -> Result<Self> {
        self.cutoff_restrict(f, u)
    }

    fn extend(&self, m: &OpenSet) -> Result<Self> {
        self.ext(m)
    }

    fn plus(&self, other: &Self) -> Result<Self> {
        self.add(other)
    }

    fn residual(&self, other: &Self) -> Result<f64> {
        if self.backend() == crate::base::Backend::Discrete {
            return Ok(if self.sub(other)?.is_exactly_zero() { 0.0 } else { density_residual(self, other)?.max(f64::MIN_POSITIVE) });
        }
        density_residual(self, other)
    }
}

impl CompactSection for SupportedFormalFunction {
    fn section_domain(&self) -> &OpenSet {
        self.domain()
    }

    fn localize(&self, f: &SupportedFormalFunction, u: &OpenSet) -> Result<Self> {
        let witness = self.support().intersect(f.support())?;
        let prod = f.inner().multiply(self.inner())?.restrict(u)?;
        SupportedFormalFunction::new(prod, witness.restricted_to(u))
    }

    fn extend(&self, m: &OpenSet) -> Result<Self> {
        self.extend_by_zero(m)
    }

    fn plus(&self, other: &Self) -> Result<Self> {
        self.add(other)
    }

    fn residual(&self, other: &Self) -> Result<f64> {
        function_residual(self, other)
    }
}

impl CompactSection for CompactFormalDistribution {
    fn section_domain(&self) -> &OpenSet {
        self.domain()
    }

    fn localize(&self, f: &SupportedFormalFunction, u: &OpenSet) -> Result<Self> {
        let acted = self.inner().module_action_dist(f.inner())?;
        let witness = self.support().intersect(f.support())?.restricted_to(u);
        CompactFormalDistribution::new(acted.restrict(u)?, witness)
    }

    fn extend(&self, m: &OpenSet) -> Result<Self> {
        self.ext(m)
    }

    fn plus(&self, other: &Self) -> Result<Self> {
        self.add(other)
    }

    fn residual(&self, other: &Self) -> Result<f64> {
        distribution_residual(self.inner(), other.inner())
    }
}

/// Local pieces `(s ∘ f_α)|_{U_α}`; their extensions by zero sum back to `s`.
pub fn cosheaf_decompose<S: CompactSection>(s: &S, pou: &PartitionOfUnity) -> Result<Vec<S>> {
    if s.section_domain() != pou.cover().whole() {
        return Err(Error::DomainMismatch);
    }
    pou.functions()
        .iter()
        .zip(pou.cover().parts())
        .map(|(f, u)| s.localize(f, u))
        .collect()
}

/// `Σ_α ext_{M,U_α}(s_α)`.
pub fn cosheaf_reassemble<S: CompactSection>(locals: &[S], m: &OpenSet) -> Result<S> {
    let mut it = locals.iter();
    let first = it
        .next()
        .ok_or_else(|| Error::Precondition("nothing to reassemble".into()))?
        .extend(m)?;
    it.try_fold(first, |acc, s| acc.plus(&s.extend(m)?))
}
