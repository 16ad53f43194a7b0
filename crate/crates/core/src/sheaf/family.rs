//! Spanning families used to compare functionals.
//!
//! On a discrete base the families are the full dual bases, so agreement on
//! them is equality. On the line they are a fixed catalogue of
//! bump x {1, x, x^2} x y-monomial probes.

use num::{One, Zero};

use crate::base::{BaseDensity, BaseFunction, ClosedSet, OpenInterval, OpenSet, SmoothExpr, Support};
use crate::densities::FormalDensity;
use crate::distributions::{BaseDistribution, CompactFormalDistribution, EVec, FormalDistribution};
use crate::error::Result;
use crate::formal::{FormalFunction, SupportedFormalFunction};
use crate::multiindex::{enumerate_upto, MultiIndex};
use crate::scalar::{cq, Scalar, CQ, Q};

use super::cover::finite_window;

/// Breakpoints of the probe bumps as fractions (in sixteenths) of a component window.
const PROBE_BUMPS: [[i64; 4]; 3] = [[1, 2, 14, 15], [2, 4, 6, 8], [8, 10, 12, 14]];
const PROBE_X_DEGREE: u32 = 2;

/// Probe bumps compactly supported in each component of a line set.
pub fn probe_bumps(domain: &OpenSet) -> Vec<(SmoothExpr, (Q, Q))> {
    let mut out = Vec::new();
    for c in domain.components() {
        out.extend(component_bumps(c));
    }
    out
}

fn component_bumps(c: &OpenInterval) -> Vec<(SmoothExpr, (Q, Q))> {
    let (a, b) = finite_window(c);
    let w = &b - &a;
    let at = |n: i64| &a + &w * Q::new(n.into(), 16.into());
    PROBE_BUMPS
        .iter()
        .filter_map(|t| {
            let e = SmoothExpr::bump(&at(t[0]), &at(t[1]), &at(t[2]), &at(t[3])).ok()?;
            Some((e, (at(t[0]), at(t[3]))))
        })
        .collect()
}

fn line_probes(domain: &OpenSet) -> Vec<(SmoothExpr, (Q, Q))> {
    let mut out = Vec::new();
    for (b, w) in probe_bumps(domain) {
        for m in 0..=PROBE_X_DEGREE {
            out.push((b.mul(&SmoothExpr::x().pow(m)), w.clone()));
        }
    }
    out
}

/// `1_p y^J` (discrete) or `bump · x^m · y^J` (line), for `|J| ≤ trunc`.
pub fn test_functions(domain: &OpenSet, k: usize, trunc: u32) -> Result<Vec<SupportedFormalFunction>> {
    let mut out = Vec::new();
    for j in enumerate_upto(k, trunc) {
        match domain {
            OpenSet::Discrete(labels) => {
                for p in labels {
                    let f = FormalFunction::monomial(
                        domain.clone(),
                        k,
                        trunc,
                        j.clone(),
                        BaseFunction::discrete(&[(p.as_str(), CQ::one())]),
                    )?;
                    out.push(SupportedFormalFunction::new(f, Support::points(&[p]))?);
                }
            }
            OpenSet::Line(_) => {
                for (e, (lo, hi)) in line_probes(domain) {
                    let f = FormalFunction::monomial(domain.clone(), k, trunc, j.clone(), BaseFunction::Smooth(e))?;
                    out.push(SupportedFormalFunction::new(f, Support::Line(ClosedSet::interval(lo, hi)))?);
                }
            }
        }
    }
    Ok(out)
}

/// `δ_p (y*)^L` (discrete) or `bump · x^m (y*)^L`, plus one `∂_x` term per bump (line).
pub fn test_densities(domain: &OpenSet, k: usize, star: u32) -> Result<Vec<FormalDensity>> {
    let mut out = Vec::new();
    for l in enumerate_upto(k, star) {
        match domain {
            OpenSet::Discrete(labels) => {
                for p in labels {
                    out.push(FormalDensity::term(
                        domain.clone(),
                        k,
                        l.clone(),
                        MultiIndex::zero(0),
                        BaseDensity::discrete(&[(p.as_str(), CQ::one())]),
                    )?);
                }
            }
            OpenSet::Line(_) => {
                for (e, _) in line_probes(domain) {
                    out.push(FormalDensity::term(domain.clone(), k, l.clone(), MultiIndex::zero(1), BaseDensity::from_expr(e)?)?);
                }
                for (b, _) in probe_bumps(domain) {
                    out.push(FormalDensity::term(domain.clone(), k, l.clone(), MultiIndex::unit(1, 0), BaseDensity::from_expr(b)?)?);
                }
            }
        }
    }
    Ok(out)
}

/// `δ_p (y*)^L` (discrete) or point masses, point derivatives and smooth bumps (line).
pub fn test_distributions(domain: &OpenSet, k: usize, star: u32) -> Result<Vec<CompactFormalDistribution>> {
    let mut out = Vec::new();
    for l in enumerate_upto(k, star) {
        let mut terms = Vec::new();
        match domain {
            OpenSet::Discrete(labels) => {
                for p in labels {
                    terms.push(BaseDistribution::discrete(&[(p.as_str(), CQ::one())]));
                }
            }
            OpenSet::Line(_) => {
                for (b, (lo, hi)) in probe_bumps(domain) {
                    let mid = (&lo + &hi) / Q::from_integer(2.into());
                    terms.push(BaseDistribution::point(mid.clone(), 0, cq(1)));
                    terms.push(BaseDistribution::point(mid, 1, cq(1)));
                    terms.push(BaseDistribution::smooth(b));
                }
            }
        }
        for t in terms {
            let d = FormalDistribution::term(domain.clone(), k, l.clone(), t)?;
            out.push(CompactFormalDistribution::from_inner(d)?);
        }
    }
    Ok(out)
}

/// `|a - b|`, with exact disagreement never reported as zero.
pub fn scalar_gap(a: &Scalar, b: &Scalar) -> f64 {
    let d = a.distance(b);
    if d == 0.0 && a != b {
        f64::MIN_POSITIVE
    } else {
        d
    }
}

pub fn evec_gap(a: &EVec, b: &EVec) -> f64 {
    a.iter().zip(b).map(|(x, y)| scalar_gap(x, y)).fold(0.0, f64::max)
}

/// Largest pairing gap between two densities on their common domain.
pub fn density_residual(a: &FormalDensity, b: &FormalDensity) -> Result<f64> {
    let star = a.star_degree().max(b.star_degree());
    let mut worst: f64 = 0.0;
    for u in test_functions(a.domain(), a.k(), star)? {
        worst = worst.max(scalar_gap(&a.pair(u.inner())?, &b.pair(u.inner())?));
    }
    Ok(worst)
}

/// Largest gap between two compactly supported functions, probed by densities.
pub fn function_residual(a: &SupportedFormalFunction, b: &SupportedFormalFunction) -> Result<f64> {
    if let OpenSet::Discrete(_) = a.domain() {
        let d = a.inner().sub(b.inner())?;
        return Ok(if d.is_zero() { 0.0 } else { discrete_sup(&d) });
    }
    let star = a.trunc().min(b.trunc());
    let mut worst: f64 = 0.0;
    for eta in test_densities(a.domain(), a.k(), star)? {
        worst = worst.max(scalar_gap(&eta.pair(a.inner())?, &eta.pair(b.inner())?));
    }
    Ok(worst)
}

fn discrete_sup(f: &FormalFunction) -> f64 {
    let mut worst: f64 = f64::MIN_POSITIVE;
    for c in f.coeffs().values() {
        if let BaseFunction::Discrete(m) = c {
            for v in m.values() {
                worst = worst.max(crate::scalar::cq_to_c64(v).norm());
            }
        }
    }
    worst
}

/// Largest gap between two formal distributions on test functions of their domain.
pub fn distribution_residual(a: &FormalDistribution, b: &FormalDistribution) -> Result<f64> {
    let trunc = a.max_degree().max(b.max_degree());
    let mut worst: f64 = 0.0;
    for u in test_functions(a.domain(), a.k(), trunc)? {
        worst = worst.max(evec_gap(&a.apply_dist(&u)?, &b.apply_dist(&u)?));
    }
    Ok(worst)
}

/// Rank of a matrix of scalars: exact over `Q(i)` when every entry is exact.
pub fn rank(rows: &[Vec<Scalar>], tol: f64) -> usize {
    if rows.iter().flatten().all(Scalar::is_exact) {
        let m: Vec<Vec<CQ>> = rows
            .iter()
            .map(|r| r.iter().map(|s| s.as_exact().cloned().unwrap_or_else(CQ::zero)).collect())
            .collect();
        exact_rank(m)
    } else {
        let m: Vec<Vec<num::complex::Complex64>> = rows.iter().map(|r| r.iter().map(Scalar::to_c64).collect()).collect();
        float_rank(m, tol)
    }
}

fn exact_rank(mut m: Vec<Vec<CQ>>) -> usize {
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = &m[i][c] / &pivot;
                for j in c..cols {
                    let d = &f * &m[r][j];
                    m[i][j] = &m[i][j] - &d;
                }
            }
        }
        r += 1;
    }
    r
}

fn float_rank(mut m: Vec<Vec<num::complex::Complex64>>, tol: f64) -> usize {
    let cols = m.first().map_or(0, Vec::len);
    let scale = m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).max_by(|&a, &b| m[a][c].norm().total_cmp(&m[b][c].norm())) else {
            break;
        };
        if m[p][c].norm() <= tol * scale {
            continue;
        }
        m.swap(r, p);
        let pivot = m[r][c];
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c] / pivot;
                for j in c..cols {
                    let d = f * m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        r += 1;
    }
    r
}
