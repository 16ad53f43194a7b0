//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p formalcalc --test acceptance`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use formalcalc::gen::Gen;
use formalcalc::sheaf::{
    build_pou, cosheaf_decompose, cosheaf_reassemble, flabby_ranks, mv_phi, mv_psi, mv_split, section_residual,
    sheaf_glue_auto, CompactSection, Cover, SpaceTag, POU_GRID,
};
use formalcalc::{
    dist_space_dimension, enumerate_upto, BaseDensity, BaseFunction, CompactFormalDistribution,
    Ext, FormalDensity, FormalDistribution, FormalFunction, GeneralizedFunction, MultiIndex, OpenSet, Point,
    PointDistribution, Scalar, SmoothExpr, Support, SupportedFormalFunction, CQ, Q,
};
use num::{BigInt, One, Zero};

type Outcome = Result<String, String>;

fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

fn qr(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("runtime {elapsed:?} exceeds {limit:?}"))
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

/// `Σ_L L! Σ_p τ_L(p) u_L(p)` by direct summation over the coefficient tables.
fn brute_pair(eta: &FormalDensity, u: &FormalFunction) -> CQ {
    let mut total = CQ::zero();
    for (l, d) in eta.coeffs() {
        let mut fact: u64 = 1;
        for &n in l.entries() {
            for m in 2..=n as u64 {
                fact *= m;
            }
        }
        let uf = match u.coeffs().get(l) {
            Some(BaseFunction::Discrete(m)) => m.clone(),
            _ => BTreeMap::new(),
        };
        for tau in d.terms().values() {
            let BaseDensity::Discrete(tm) = tau else { continue };
            for (p, t) in tm {
                if let Some(v) = uf.get(p) {
                    total = total + t * v * CQ::new(Q::from_integer(BigInt::from(fact)), Q::zero());
                }
            }
        }
    }
    total
}

fn c1_pairing() -> Outcome {
    let start = Instant::now();
    let mut g = Gen::new(0xC1);
    for n in 0..1000 {
        let m = g.discrete_base(1, 5);
        let k = g.below(3);
        let trunc = g.range(0, 4);
        let eta = g.discrete_density(&m, k, trunc).map_err(e)?;
        let u = g.discrete_function(&m, k, trunc).map_err(e)?;
        let got = eta.pair(&u).map_err(e)?;
        let want = Scalar::Exact(brute_pair(&eta, &u));
        check(got == want, || format!("instance {n}: pair = {got}, brute force = {want}"))?;
    }
    let t = start.elapsed();
    within(t, Duration::from_secs(5))?;
    Ok(format!("1000 discrete instances exact in {t:.2?}"))
}

fn c2_rho() -> Outcome {
    let start = Instant::now();
    let mut g = Gen::new(0xC2);
    for n in 0..500 {
        let m = g.discrete_base(1, 5);
        let k = g.below(3);
        let y = g.range(0, 3);
        let d = g.discrete_diffop(&m, k, y).map_err(e)?;
        let extra = g.range(0, 1);
        let u = g.discrete_function(&m, k, y + extra).map_err(e)?;
        let lhs = d.rho().pair(&u).map_err(e)?;
        let rhs = d.apply(&u).map_err(e)?.integrate(&m).map_err(e)?;
        check(lhs == rhs, || format!("discrete instance {n}: {lhs} vs {rhs}"))?;
    }
    let dom = OpenSet::bounded(q(-1), q(4));
    let mut worst: f64 = 0.0;
    for n in 0..50 {
        let k = g.below(2);
        let y = g.range(0, 2);
        let d = g.line_diffop(&dom, k, 2, y, &q(0), &q(3)).map_err(e)?;
        let u = g.line_function(&dom, k, y).map_err(e)?;
        let lhs = d.rho().pair(&u).map_err(e)?;
        let rhs = d.apply(&u).map_err(e)?.integrate(&dom).map_err(e)?;
        let gap = lhs.distance(&rhs);
        worst = worst.max(gap);
        check(gap <= 1e-8, || format!("line instance {n}: {lhs} vs {rhs}"))?;
    }
    let t = start.elapsed();
    within(t, Duration::from_secs(60))?;
    Ok(format!("500 discrete exact, 50 line max gap {worst:.1e}, {t:.2?}"))
}

fn c3_rho_ext() -> Outcome {
    let mut g = Gen::new(0xC3);
    for n in 0..200 {
        let u = g.discrete_base(1, 6);
        let v = g.subset(&u);
        let k = g.below(3);
        let y = g.range(0, 3);
        let d = g.discrete_diffop(&v, k, y).map_err(e)?;
        let a = d.ext(&u).map_err(e)?.rho();
        let b = d.rho().ext(&u).map_err(e)?;
        check(a.sub(&b).map_err(e)?.is_exactly_zero(), || format!("instance {n}: ρ∘ext ≠ ext∘ρ"))?;
    }
    Ok("200 discrete instances exact".into())
}

fn subsets(labels: &[&str]) -> Vec<OpenSet> {
    (0..1u32 << labels.len())
        .map(|mask| {
            let pts: Vec<&str> = labels.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| *p).collect();
            OpenSet::discrete(&pts)
        })
        .collect()
}

fn c4_flabby() -> Outcome {
    let all = subsets(&["a", "b", "c", "d"]);
    let mut pairs = 0;
    for u in &all {
        for v in all.iter().filter(|v| v.is_subset(u)) {
            for tag in [SpaceTag::Densities, SpaceTag::CompactFunctions, SpaceTag::CompactDistributions] {
                let o = flabby_ranks(tag, v, u, 1, 2).map_err(e)?;
                check(o.injective() && o.rank_on_v == o.family_size, || {
                    format!("{tag} V={v} U={u}: ranks {} -> {} of {}", o.rank_on_v, o.rank_on_u, o.family_size)
                })?;
            }
            pairs += 1;
        }
    }
    Ok(format!("{pairs} pairs V ⊂ U, three section spaces, trivial kernels"))
}

fn c5_mayer_vietoris() -> Outcome {
    let mut g = Gen::new(0xC5);
    let all = subsets(&["a", "b", "c", "d"]);
    let mut configs = 0;
    for u1 in &all {
        for u2 in &all {
            let v = u1.intersect(u2).map_err(e)?;
            let zeta = g.discrete_density(&v, 1, 2).map_err(e)?;
            let (a, b) = mv_psi(&zeta, u1, u2).map_err(e)?;
            check(mv_phi(&a, &b).map_err(e)?.is_exactly_zero(), || format!("φ∘ψ ≠ 0 for U1={u1}, U2={u2}"))?;
            configs += 1;
        }
    }
    for n in 0..100 {
        let m = g.discrete_base(2, 6);
        let u1 = g.nonempty_subset(&m);
        let u2 = g.nonempty_subset(&m);
        let v = u1.intersect(&u2).map_err(e)?;
        let k = g.below(3);
        let star = g.range(0, 3);
        let zeta = g.discrete_density(&v, k, star).map_err(e)?;
        let (eta1, eta2) = mv_psi(&zeta, &u1, &u2).map_err(e)?;
        let split = mv_split(&eta1, &eta2, 0.0).map_err(e)?;
        let ok1 = split.ext(&u1).map_err(e)?.sub(&eta1).map_err(e)?.is_exactly_zero();
        let ok2 = split.ext(&u2).map_err(e)?.add(&eta2).map_err(e)?.is_exactly_zero();
        check(ok1 && ok2, || format!("kernel element {n}: extension identities fail"))?;
    }
    Ok(format!("φ∘ψ = 0 on {configs} configurations; 100 kernel elements split exactly"))
}

fn c6_glue() -> Outcome {
    let mut g = Gen::new(0xC6);
    let m = OpenSet::discrete(&Gen::labels(6));
    for n in 0..100 {
        let cover = g.discrete_cover(&m, 3).map_err(e)?;
        let k = g.below(3);
        let t = g.range(0, 3);
        let glob = g.discrete_generalized(&m, k, 1, t).map_err(e)?;
        let locals: Vec<_> = cover.parts().iter().map(|u| glob.restrict(u)).collect::<Result<_, _>>().map_err(e)?;
        let glued = sheaf_glue_auto(&locals, &cover, k, 0.0).map_err(e)?;
        let r = section_residual(&glued, &glob).map_err(e)?;
        check(r == 0.0, || format!("generalized instance {n}: residual {r:e}"))?;

        let star = g.range(0, 3);
        let dist = g.discrete_distribution(&m, k, 1, star).map_err(e)?;
        let locals: Vec<_> = cover.parts().iter().map(|u| dist.restrict(u)).collect::<Result<_, _>>().map_err(e)?;
        let glued = sheaf_glue_auto(&locals, &cover, k, 0.0).map_err(e)?;
        let r = section_residual(&glued, &dist).map_err(e)?;
        check(r == 0.0, || format!("distribution instance {n}: residual {r:e}"))?;
    }
    let line = OpenSet::bounded(q(0), q(3));
    let cover = Cover::new(
        line.clone(),
        vec![OpenSet::bounded(q(0), qr(3, 2)), OpenSet::bounded(q(1), qr(5, 2)), OpenSet::bounded(q(2), q(3))],
    )
    .map_err(e)?;
    let mut worst: f64 = 0.0;
    for n in 0..4 {
        let glob = g.line_generalized(&line, 1, 1, &q(0), &q(3)).map_err(e)?;
        let locals: Vec<_> = cover.parts().iter().map(|u| glob.restrict(u)).collect::<Result<_, _>>().map_err(e)?;
        let glued = sheaf_glue_auto(&locals, &cover, 1, 1e-8).map_err(e)?;
        let r = section_residual(&glued, &glob).map_err(e)?;
        worst = worst.max(r);
        check(r <= 1e-8, || format!("line generalized instance {n}: residual {r:e}"))?;

        let dist = g.line_distribution(&line, 1, 1, &q(0), &q(3)).map_err(e)?;
        let locals: Vec<_> = cover.parts().iter().map(|u| dist.restrict(u)).collect::<Result<_, _>>().map_err(e)?;
        let glued = sheaf_glue_auto(&locals, &cover, 1, 1e-8).map_err(e)?;
        let r = section_residual(&glued, &dist).map_err(e)?;
        worst = worst.max(r);
        check(r <= 1e-8, || format!("line distribution instance {n}: residual {r:e}"))?;
    }
    Ok(format!("100 discrete 3-part covers exact; line analogue max residual {worst:.1e}"))
}

fn roundtrip<S: CompactSection>(s: &S, cover: &Cover, k: usize, trunc: u32) -> Result<f64, String> {
    let pou = build_pou(cover, k, trunc).map_err(e)?;
    let locals = cosheaf_decompose(s, &pou).map_err(e)?;
    let back = cosheaf_reassemble(&locals, cover.whole()).map_err(e)?;
    back.residual(s).map_err(e)
}

fn c7_cosheaf() -> Outcome {
    let mut g = Gen::new(0xC7);
    for n in 0..100 {
        let m = g.discrete_base(1, 6);
        let parts = 1 + g.below(3);
        let cover = g.discrete_cover(&m, parts).map_err(e)?;
        let k = g.below(3);
        let t = g.range(0, 3);
        let eta = g.discrete_density(&m, k, t).map_err(e)?;
        let u = g.discrete_supported(&m, k, t).map_err(e)?;
        let d = g.discrete_compact_distribution(&m, k, t).map_err(e)?;
        let r = [
            roundtrip(&u, &cover, k, t)?,
            roundtrip(&eta, &cover, k, t)?,
            roundtrip(&d, &cover, k, t)?,
        ];
        check(r.iter().all(|&x| x == 0.0), || format!("instance {n}: residuals {r:?}"))?;
    }
    Ok("100 instances each of compact functions, densities and compact distributions exact".into())
}

/// A cutoff equal to 1 on `s` (no `y`-terms there) and random elsewhere.
fn cutoff(g: &mut Gen, m: &OpenSet, s: &OpenSet, k: usize, trunc: u32) -> Result<SupportedFormalFunction, String> {
    let off: Vec<String> = m.labels().unwrap().difference(s.labels().unwrap()).cloned().collect();
    let mut coeffs = BTreeMap::new();
    for j in enumerate_upto(k, trunc) {
        let mut vals: BTreeMap<String, CQ> = off.iter().map(|p| (p.clone(), g.scalar())).collect();
        if j.is_zero() {
            for p in s.labels().unwrap() {
                vals.insert(p.clone(), CQ::one());
            }
        }
        coeffs.insert(j, BaseFunction::Discrete(vals.into_iter().filter(|(_, v)| !v.is_zero()).collect()));
    }
    let f = FormalFunction::new(m.clone(), k, trunc, coeffs).map_err(e)?;
    SupportedFormalFunction::new(f, Support::Points(m.labels().unwrap().clone())).map_err(e)
}

fn c8_cutoff_independence() -> Outcome {
    let mut g = Gen::new(0xC8);
    let mut n = 0;
    while n < 100 {
        let m = g.discrete_base(3, 6);
        let s = g.nonempty_subset(&m);
        if s == m {
            continue;
        }
        let k = g.below(3);
        let t = g.range(0, 3);
        let local = g.discrete_distribution(&s, k, 1, t).map_err(e)?;
        let eta = CompactFormalDistribution::from_inner(local)
            .and_then(|d| d.ext(&m))
            .map_err(e)?;
        let f1 = cutoff(&mut g, &m, &s, k, t)?;
        let f2 = cutoff(&mut g, &m, &s, k, t)?;
        if f1 == f2 {
            continue;
        }
        let u = g.discrete_function(&m, k, t).map_err(e)?;
        let a = eta.cutoff_extend(&f1).and_then(|x| x.eval(&u)).map_err(e)?;
        let b = eta.cutoff_extend(&f2).and_then(|x| x.eval(&u)).map_err(e)?;
        let direct = eta
            .apply(&SupportedFormalFunction::new(u.clone(), Support::Points(m.labels().unwrap().clone())).map_err(e)?)
            .map_err(e)?;
        check(a == b && a == direct, || format!("section {n}: {a:?} / {b:?} / {direct:?}"))?;
        n += 1;
    }
    Ok("100 global sections, two distinct cutoffs each, exact agreement".into())
}

/// `x^{i} y^{J} / (i! J!)` on the line.
fn normalized_monomial(k: usize, r: u32, i: u32, j: &MultiIndex) -> Result<FormalFunction, String> {
    let mut denom = BigInt::one();
    for n in 2..=i {
        denom *= n;
    }
    denom *= j.factorial();
    let c = CQ::new(Q::new(BigInt::one(), denom), Q::zero());
    let coeff = SmoothExpr::constant(c).mul(&SmoothExpr::x().pow(i));
    FormalFunction::monomial(OpenSet::whole_line(), k, r, j.clone(), BaseFunction::Smooth(coeff)).map_err(e)
}

fn c9_point_basis() -> Outcome {
    let r = 4;
    let a = Point::Coord(q(0));
    let mut total = 0;
    for k in 0..=2 {
        let stacks: Vec<(u32, MultiIndex)> = enumerate_upto(1 + k, r)
            .into_iter()
            .map(|ij| (ij.entries()[0], MultiIndex::new(ij.entries()[1..].to_vec())))
            .collect();
        for (i, j) in &stacks {
            let d = PointDistribution::basis(a.clone(), k, MultiIndex::new(vec![*i]), j.clone()).map_err(e)?;
            for (i2, j2) in &stacks {
                let u = normalized_monomial(k, r, *i2, j2)?;
                let v = d.point_apply(&u).map_err(e)?;
                let want = if (i, j) == (i2, j2) { Scalar::one() } else { Scalar::zero() };
                check(v[0].is_exact() && v[0] == want, || format!("k={k}: entry ({i},{j}) x ({i2},{j2}) = {}", v[0]))?;
            }
        }
        total += stacks.len();
        for rr in 0..=r {
            let mut brute = 0u64;
            let len = 1 + k;
            let mut idx = vec![0u32; len];
            loop {
                if idx.iter().sum::<u32>() <= rr {
                    brute += 1;
                }
                let mut p = 0;
                loop {
                    if p == len {
                        break;
                    }
                    idx[p] += 1;
                    if idx[p] <= rr {
                        break;
                    }
                    idx[p] = 0;
                    p += 1;
                }
                if p == len {
                    break;
                }
            }
            let dim = dist_space_dimension(1, k, rr);
            check(dim == BigInt::from(brute), || format!("k={k}, r={rr}: formula {dim} vs count {brute}"))?;
        }
    }
    Ok(format!("evaluation matrices are identities ({total} basis elements over k ≤ 2); dimension formula matches"))
}

fn c10_componentwise() -> Outcome {
    let mut g = Gen::new(0xCA);
    for n in 0..200 {
        let m = g.discrete_base(1, 5);
        let k = g.below(3);
        let t = g.range(0, 3);
        let u = g.discrete_supported(&m, k, t).map_err(e)?;
        let eta = g.discrete_distribution(&m, k, 3, t).map_err(e)?;
        let full = eta.apply_dist(&u).map_err(e)?;
        let gen = g.discrete_generalized(&m, k, 3, t).map_err(e)?;
        let dens = g.discrete_density(&m, k, t).map_err(e)?;
        let gfull = gen.apply_gen(&dens).map_err(e)?;
        let p = m.labels().unwrap().iter().next().unwrap().clone();
        let mut pcoeffs = BTreeMap::new();
        for j in enumerate_upto(k, t) {
            pcoeffs.insert((MultiIndex::zero(0), j), (0..3).map(|_| g.scalar()).collect::<Vec<_>>());
        }
        let pd = PointDistribution::new(Point::Label(p.clone()), k, 3, pcoeffs.clone()).map_err(e)?;
        let pfull = pd.point_apply(u.inner()).map_err(e)?;
        for c in 0..3 {
            let slice: BTreeMap<_, _> = eta.coeffs().iter().map(|(l, v)| (l.clone(), vec![v[c].clone()])).collect();
            let s = FormalDistribution::new(m.clone(), k, 1, slice).map_err(e)?;
            let part = s.apply_dist(&u).map_err(e)?;
            check(part[0] == full[c], || format!("instance {n}, slot {c}: distribution slice differs"))?;

            let gslice: BTreeMap<_, _> = gen.coeffs().iter().map(|(j, v)| (j.clone(), vec![v[c].clone()])).collect();
            let gs = GeneralizedFunction::new(m.clone(), k, 1, t, gslice).map_err(e)?;
            check(gs.apply_gen(&dens).map_err(e)?[0] == gfull[c], || format!("instance {n}, slot {c}: generalized slice differs"))?;

            let pslice: BTreeMap<_, _> = pcoeffs.iter().map(|(ij, v)| (ij.clone(), vec![v[c].clone()])).collect();
            let ps = PointDistribution::new(Point::Label(p.clone()), k, 1, pslice).map_err(e)?;
            check(ps.point_apply(u.inner()).map_err(e)?[0] == pfull[c], || format!("instance {n}, slot {c}: point slice differs"))?;
        }
    }
    Ok("200 instances with E of dimension 3, all slices exact".into())
}

fn c11_line_sanity() -> Outcome {
    let mut g = Gen::new(0xCB);
    let line = OpenSet::whole_line();
    let mut worst: f64 = 0.0;
    for n in 0..20 {
        let tau = g.line_base_density(&q(-2), &q(2)).map_err(e)?;
        let v = tau.derivative().and_then(|d| d.integrate(&line)).map_err(e)?;
        worst = worst.max(v.abs());
        check(v.abs() <= 1e-8, || format!("density {n}: ∫ dτ = {v}"))?;
    }
    for n in 0..20 {
        let mut pts: Vec<Q> = (0..4).map(|_| g.grid_point(-3, 3)).collect();
        pts.sort();
        pts.dedup();
        if pts.len() < 4 {
            continue;
        }
        let b = SmoothExpr::bump(&pts[0], &pts[1], &pts[2], &pts[3]).map_err(e)?;
        let mid = (&pts[1] + &pts[2]) / q(2);
        for x in [&pts[1], &pts[2], &mid] {
            check(b.eval(x) == Scalar::one() && b.eval(x).is_exact(), || format!("bump {n} at {x}: {}", b.eval(x)))?;
        }
        for x in [pts[0].clone(), pts[3].clone(), &pts[0] - q(1), &pts[3] + q(1)] {
            check(b.eval(&x).is_exact_zero(), || format!("bump {n} at {x}: {}", b.eval(&x)))?;
        }
    }
    let covers = vec![
        Cover::new(OpenSet::bounded(q(0), q(3)), vec![OpenSet::bounded(q(0), q(2)), OpenSet::bounded(q(1), q(3))]),
        Cover::new(
            OpenSet::bounded(q(0), q(3)),
            vec![OpenSet::bounded(q(0), qr(3, 2)), OpenSet::bounded(q(1), qr(5, 2)), OpenSet::bounded(q(2), q(3))],
        ),
        Cover::new(
            OpenSet::whole_line(),
            vec![OpenSet::interval(Ext::NegInf, Ext::Fin(q(1))), OpenSet::interval(Ext::Fin(q(0)), Ext::PosInf)],
        ),
    ];
    let mut pou_worst: f64 = 0.0;
    for c in covers {
        let pou = build_pou(&c.map_err(e)?, 1, 1).map_err(e)?;
        let r = pou.grid_residual(POU_GRID);
        pou_worst = pou_worst.max(r);
        check(r <= 1e-12, || format!("partition-of-unity grid residual {r:e}"))?;
    }
    Ok(format!("∫ of total derivatives ≤ {worst:.1e}; bump values exact; POU grid residual ≤ {pou_worst:.1e}"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("pairing normal form", c1_pairing),
        ("rho defining identity", c2_rho),
        ("rho commutes with extension", c3_rho_ext),
        ("flabbiness", c4_flabby),
        ("Mayer-Vietoris", c5_mayer_vietoris),
        ("sheaf gluing", c6_glue),
        ("cosheaf right inverse", c7_cosheaf),
        ("cutoff independence", c8_cutoff_independence),
        ("point-distribution basis", c9_point_basis),
        ("E-valued componentwise law", c10_componentwise),
        ("smooth-backend sanity", c11_line_sanity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        let result = run();
        let result = if n == 11 {
            result.and_then(|msg| {
                within(start.elapsed(), Duration::from_secs(180))?;
                Ok(format!("{msg}; whole suite {:.2?}", start.elapsed()))
            })
        } else {
            result
        };
        match result {
            Ok(msg) => println!("PASS criterion {n:>2} [{name}]: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n:>2} [{name}]: {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
