use crate::base::{ClosedSet, Ext, OpenSet, Support};
use crate::densities::FormalDensity;
use crate::error::{Error, Result};
use crate::scalar::Q;

use super::cover::{build_pou, Cover};
use super::family::density_residual;

/// `φ(η1, η2) = ext(η1) + ext(η2)` on `U = U1 ∪ U2`.
pub fn mv_phi(eta1: &FormalDensity, eta2: &FormalDensity) -> Result<FormalDensity> {
    let u = eta1.domain().union(eta2.domain())?;
    eta1.ext(&u)?.add(&eta2.ext(&u)?)
}

/// `ψ(η) = (ext_{U1}(η), -ext_{U2}(η))` for `η` on `V = U1 ∩ U2`.
pub fn mv_psi(eta: &FormalDensity, u1: &OpenSet, u2: &OpenSet) -> Result<(FormalDensity, FormalDensity)> {
    let v = u1.intersect(u2)?;
    if eta.domain() != &v {
        return Err(Error::DomainMismatch);
    }
    Ok((eta.ext(u1)?, eta.ext(u2)?.neg()))
}

/// Half the distance from a compact `K ⊂ V` to the boundary of `V`.
fn shrink_margin(k: &ClosedSet, v: &OpenSet) -> Result<Q> {
    let mut best: Option<Q> = None;
    for piece in k.intervals() {
        let c = v
            .components()
            .iter()
            .find(|c| c.lo < piece.lo && piece.hi < c.hi)
            .ok_or_else(|| Error::SupportEscapes(format!("{k} is not compact in {v}")))?;
        let mut gaps = Vec::new();
        if let (Ext::Fin(l), Ext::Fin(s)) = (&c.lo, &piece.lo) {
            gaps.push(s - l);
        }
        if let (Ext::Fin(r), Ext::Fin(t)) = (&c.hi, &piece.hi) {
            gaps.push(r - t);
        }
        for g in gaps {
            best = Some(match best {
                Some(b) if b <= g => b,
                _ => g,
            });
        }
    }
    Ok(best.unwrap_or_else(|| Q::from_integer(2.into())) / Q::from_integer(2.into()))
}

/// Given `φ(η1, η2) = 0`, return `η'` on `V` with `ext_{U1}(η') = η1` and `ext_{U2}(η') = -η2`.
///
/// `K = supp η1 ∩ supp η2` is fattened to a closed `V̄1 ⊂ V`, a partition of unity
/// `{g1, g1'}` subordinate to `{V, U1 \ V̄1}` is built, and `η' = (η1 ∘ g1)|_V`.
pub fn mv_split(eta1: &FormalDensity, eta2: &FormalDensity, tol: f64) -> Result<FormalDensity> {
    eta1.domain().same_backend(eta2.domain())?;
    if eta1.k() != eta2.k() {
        return Err(Error::DegreeMismatch(eta1.k(), eta2.k()));
    }
    let k = eta1.k();
    let (u1, u2) = (eta1.domain(), eta2.domain());
    let v = u1.intersect(u2)?;

    let phi = mv_phi(eta1, eta2)?;
    let exact = phi.backend() == crate::base::Backend::Discrete;
    let residual = if exact {
        if phi.is_exactly_zero() {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        density_residual(&phi, &FormalDensity::zero(phi.domain().clone(), k))?
    };
    if residual > tol {
        return Err(Error::Precondition(format!(
            "ext(η1) + ext(η2) is not zero (residual {residual:e})"
        )));
    }

    let kset = eta1.support().intersect(&eta2.support())?;
    if kset.is_empty() {
        return Ok(FormalDensity::zero(v, k));
    }
    let vbar = match &kset {
        Support::Points(_) => kset.clone(),
        Support::Line(c) => Support::Line(c.widened(&shrink_margin(c, &v)?)),
    };
    let cover = Cover::new(u1.clone(), vec![v.clone(), u1.minus(&vbar)?])?;
    let pou = build_pou(&cover, k, eta1.star_degree())?;
    eta1.cutoff_restrict(&pou.functions()[0], &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseDensity;
    use crate::multiindex::MultiIndex;
    use crate::scalar::{cq, q, qr};

    fn delta_q(dom: &OpenSet) -> FormalDensity {
        FormalDensity::term(dom.clone(), 1, MultiIndex::zero(1), MultiIndex::zero(0), BaseDensity::discrete(&[("q", cq(1))])).unwrap()
    }

    #[test]
    fn zero_pair_splits_to_zero() {
        let u1 = OpenSet::discrete(&["p", "q"]);
        let u2 = OpenSet::discrete(&["q", "r"]);
        let out = mv_split(&FormalDensity::zero(u1, 1), &FormalDensity::zero(u2, 1), 0.0).unwrap();
        assert!(out.is_exactly_zero());
    }

    #[test]
    fn discrete_delta_example() {
        let u1 = OpenSet::discrete(&["p", "q"]);
        let u2 = OpenSet::discrete(&["q", "r"]);
        let eta1 = delta_q(&u1);
        let eta2 = delta_q(&u2).neg();
        let out = mv_split(&eta1, &eta2, 0.0).unwrap();
        assert_eq!(out.domain(), &OpenSet::discrete(&["q"]));
        assert!(out.ext(&u1).unwrap().sub(&eta1).unwrap().is_exactly_zero());
        assert!(out.ext(&u2).unwrap().add(&eta2).unwrap().is_exactly_zero());
        let (a, b) = mv_psi(&out, &u1, &u2).unwrap();
        assert!(mv_phi(&a, &b).unwrap().is_exactly_zero());
    }

    #[test]
    fn precondition_is_enforced() {
        let u1 = OpenSet::discrete(&["p", "q"]);
        let u2 = OpenSet::discrete(&["q", "r"]);
        let r = mv_split(&delta_q(&u1), &delta_q(&u2), 0.0);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn line_split() {
        let u1 = OpenSet::bounded(q(0), q(2));
        let u2 = OpenSet::bounded(q(1), q(3));
        let v = OpenSet::bounded(q(1), q(2));
        let b = crate::base::SmoothExpr::bump(&qr(5, 4), &qr(3, 2), &qr(3, 2), &qr(7, 4)).unwrap();
        let zeta = FormalDensity::term(v.clone(), 1, MultiIndex::unit(1, 0), MultiIndex::zero(1), BaseDensity::from_expr(b).unwrap()).unwrap();
        let (e1, e2) = mv_psi(&zeta, &u1, &u2).unwrap();
        let out = mv_split(&e1, &e2, 1e-9).unwrap();
        assert!(density_residual(&out.ext(&u1).unwrap(), &e1).unwrap() < 1e-8);
        assert!(density_residual(&out.ext(&u2).unwrap().neg(), &e2).unwrap() < 1e-8);
    }
}
