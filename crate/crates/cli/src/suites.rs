use formalcalc::gen::Gen;
use formalcalc::scalar::q;
use formalcalc::sheaf::family::density_residual;
use formalcalc::sheaf::{
    build_pou, check_compatible, cosheaf_decompose, cosheaf_reassemble, flabby_ranks, mv_phi, mv_psi, mv_split,
    section_residual, sheaf_glue_auto, CompactSection, Cover, GlobalSection, SpaceTag,
};
use formalcalc::{
    dist_space_dimension, jet_table, Backend, Ext, FormalDensity, FormalFunction, GeneralizedFunction, OpenSet, Point,
    PointDistribution, Scalar,
};
use serde::Serialize;

use crate::scenario::{LocalKind, Scenario, Suite};

/// Random instances added per suite on a discrete base.
const RANDOM_INSTANCES: usize = 10;

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub witness: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: usize,
    pub max_residual: f64,
    pub failures: Vec<Failure>,
}

pub struct Runner<'a> {
    sc: &'a Scenario,
    seed: u64,
    tol: f64,
    trunc: u32,
}

struct Tally {
    suite: Suite,
    exact: bool,
    tol: f64,
    checks: usize,
    max_residual: f64,
    failures: Vec<Failure>,
}

impl Tally {
    fn residual(&mut self, witness: impl Into<String>, r: formalcalc::Result<f64>) {
        self.checks += 1;
        match r {
            Ok(r) => {
                self.max_residual = self.max_residual.max(r);
                let ok = if self.exact { r == 0.0 } else { r <= self.tol };
                if !ok {
                    self.failures.push(Failure {
                        witness: witness.into(),
                        residual: Some(r),
                        detail: "residual above tolerance".into(),
                    });
                }
            }
            Err(e) => self.error(witness, e),
        }
    }

    fn flag(&mut self, witness: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks += 1;
        if !ok {
            self.failures.push(Failure { witness: witness.into(), residual: None, detail: detail.into() });
        }
    }

    fn error(&mut self, witness: impl Into<String>, e: formalcalc::Error) {
        self.failures.push(Failure { witness: witness.into(), residual: None, detail: e.to_string() });
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            suite: self.suite.to_string(),
            pass: self.failures.is_empty(),
            checks: self.checks,
            max_residual: self.max_residual,
            failures: self.failures,
        }
    }
}

fn parts_label(c: &str, i: usize, j: usize) -> String {
    format!("cover {c}: parts {i},{j}")
}

fn first_bounded_window(v: &OpenSet) -> Option<(formalcalc::Q, formalcalc::Q)> {
    v.components().iter().find_map(|c| match (&c.lo, &c.hi) {
        (Ext::Fin(a), Ext::Fin(b)) => {
            let w = (b - a) / q(4);
            Some((a + &w, b - &w))
        }
        _ => None,
    })
}

fn roundtrip<S: CompactSection>(s: &S, cover: &Cover, k: usize, trunc: u32) -> formalcalc::Result<f64> {
    let pou = build_pou(cover, k, trunc)?;
    let locals = cosheaf_decompose(s, &pou)?;
    cosheaf_reassemble(&locals, cover.whole())?.residual(s)
}

fn restrict_glue<S: GlobalSection>(g: &S, cover: &Cover, k: usize, tol: f64) -> formalcalc::Result<f64> {
    let locals = cover.parts().iter().map(|u| g.restrict_to(u)).collect::<formalcalc::Result<Vec<_>>>()?;
    section_residual(&sheaf_glue_auto(&locals, cover, k, tol)?, g)
}

fn glue_family<S: GlobalSection>(t: &mut Tally, name: &str, locals: &[S], cover: &Cover, k: usize, tol: f64) {
    t.checks += 1;
    match check_compatible(locals, cover.parts(), tol) {
        Err(formalcalc::Error::Incompatible { first, second, detail }) => {
            t.failures.push(Failure {
                witness: format!("locals {name}: parts {first},{second}"),
                residual: None,
                detail: format!("incompatible on the overlap: {detail}"),
            });
            return;
        }
        Err(e) => return t.error(format!("locals {name}"), e),
        Ok(()) => {}
    }
    match sheaf_glue_auto(locals, cover, k, tol) {
        Ok(glued) => {
            for (a, (u, l)) in cover.parts().iter().zip(locals).enumerate() {
                let r = glued.restrict_to(u).and_then(|x| section_residual(&x, l));
                t.residual(format!("locals {name}: part {a}"), r);
            }
        }
        Err(e) => t.error(format!("locals {name}"), e),
    }
}

impl<'a> Runner<'a> {
    pub fn new(sc: &'a Scenario, seed: u64, tol: f64, trunc: Option<u32>) -> Runner<'a> {
        Runner { sc, seed, tol, trunc: trunc.unwrap_or(sc.trunc) }
    }

    fn tally(&self, suite: Suite) -> Tally {
        Tally {
            suite,
            exact: self.sc.backend == Backend::Discrete,
            tol: self.tol,
            checks: 0,
            max_residual: 0.0,
            failures: Vec::new(),
        }
    }

    fn gen(&self, suite: Suite) -> Gen {
        Gen::new(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ suite as u64)
    }

    pub fn run(&self, suite: Suite) -> SuiteReport {
        match suite {
            Suite::Mv => self.mv(),
            Suite::Glue => self.glue(),
            Suite::Cosheaf => self.cosheaf(),
            Suite::Flabby => self.flabby(),
            Suite::Duality => self.duality(),
            Suite::Jets => self.jets(),
        }
    }

    fn random_density(&self, g: &mut Gen, v: &OpenSet) -> formalcalc::Result<FormalDensity> {
        let k = self.sc.k;
        match self.sc.backend {
            Backend::Discrete => g.discrete_density(v, k, self.trunc),
            Backend::Line => match first_bounded_window(v) {
                Some((a, b)) => g.line_density(v, k, self.trunc.min(1), &a, &b),
                None => Ok(FormalDensity::zero(v.clone(), k)),
            },
        }
    }

    fn mv(&self) -> SuiteReport {
        let mut t = self.tally(Suite::Mv);
        let mut g = self.gen(Suite::Mv);
        for (name, cover) in &self.sc.covers {
            let parts = cover.parts();
            for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    let (u1, u2) = (&parts[i], &parts[j]);
                    let w = parts_label(name, i, j);
                    let mut run = || -> formalcalc::Result<[f64; 3]> {
                        let v = u1.intersect(u2)?;
                        let zeta = self.random_density(&mut g, &v)?;
                        let (a, b) = mv_psi(&zeta, u1, u2)?;
                        let phi = mv_phi(&a, &b)?;
                        let r0 = density_residual(&phi, &FormalDensity::zero(phi.domain().clone(), self.sc.k))?;
                        let split = mv_split(&a, &b, self.tol)?;
                        let r1 = density_residual(&split.ext(u1)?, &a)?;
                        let r2 = density_residual(&split.ext(u2)?, &b.neg())?;
                        Ok([r0, r1, r2])
                    };
                    match run() {
                        Ok(rs) => {
                            t.residual(format!("{w}: phi(psi(zeta))"), Ok(rs[0]));
                            t.residual(format!("{w}: ext to first part"), Ok(rs[1]));
                            t.residual(format!("{w}: ext to second part"), Ok(rs[2]));
                        }
                        Err(e) => {
                            t.checks += 1;
                            t.error(w, e);
                        }
                    }
                }
            }
        }
        t.finish()
    }

    fn glue(&self) -> SuiteReport {
        let mut t = self.tally(Suite::Glue);
        let k = self.sc.k;
        for (cname, cover) in &self.sc.covers {
            for (name, s) in &self.sc.generalized {
                if s.domain() == cover.whole() {
                    t.residual(format!("cover {cname}: generalized {name}"), restrict_glue(s, cover, k, self.tol));
                }
            }
            for (name, s) in &self.sc.distributions {
                if s.domain() == cover.whole() {
                    t.residual(format!("cover {cname}: distribution {name}"), restrict_glue(s, cover, k, self.tol));
                }
            }
            if self.sc.backend == Backend::Discrete {
                let mut g = self.gen(Suite::Glue);
                for n in 0..RANDOM_INSTANCES {
                    let r = g
                        .discrete_generalized(cover.whole(), k, 1, self.trunc)
                        .and_then(|s| restrict_glue(&s, cover, k, self.tol));
                    t.residual(format!("cover {cname}: random generalized #{n}"), r);
                    let r = g
                        .discrete_distribution(cover.whole(), k, 1, self.trunc)
                        .and_then(|s| restrict_glue(&s, cover, k, self.tol));
                    t.residual(format!("cover {cname}: random distribution #{n}"), r);
                }
            }
        }
        for (name, fam) in &self.sc.locals {
            let cover = &self.sc.covers[&fam.cover];
            match fam.kind {
                LocalKind::Generalized => {
                    let locals: Vec<GeneralizedFunction> =
                        fam.sections.iter().map(|s| self.sc.generalized[s].clone()).collect();
                    glue_family(&mut t, name, &locals, cover, k, self.tol);
                }
                LocalKind::Distribution => {
                    let locals: Vec<_> = fam.sections.iter().map(|s| self.sc.distributions[s].clone()).collect();
                    glue_family(&mut t, name, &locals, cover, k, self.tol);
                }
            }
        }
        t.finish()
    }

    fn cosheaf(&self) -> SuiteReport {
        let mut t = self.tally(Suite::Cosheaf);
        let k = self.sc.k;
        for (cname, cover) in &self.sc.covers {
            let m = cover.whole();
            for (name, s) in &self.sc.densities {
                if s.domain() == m {
                    let tr = self.trunc.max(s.star_degree());
                    t.residual(format!("cover {cname}: density {name}"), roundtrip(s, cover, k, tr));
                }
            }
            for (name, s) in &self.sc.supported {
                if s.domain() == m {
                    t.residual(format!("cover {cname}: function {name}"), roundtrip(s, cover, k, s.trunc()));
                }
            }
            for (name, s) in &self.sc.compact {
                if s.domain() == m {
                    let tr = self.trunc.max(s.inner().max_degree());
                    t.residual(format!("cover {cname}: distribution {name}"), roundtrip(s, cover, k, tr));
                }
            }
            if self.sc.backend == Backend::Discrete {
                let mut g = self.gen(Suite::Cosheaf);
                let tr = self.trunc;
                for n in 0..RANDOM_INSTANCES {
                    let r = g.discrete_density(m, k, tr).and_then(|s| roundtrip(&s, cover, k, tr));
                    t.residual(format!("cover {cname}: random density #{n}"), r);
                    let r = g.discrete_supported(m, k, tr).and_then(|s| roundtrip(&s, cover, k, tr));
                    t.residual(format!("cover {cname}: random function #{n}"), r);
                    let r = g.discrete_compact_distribution(m, k, tr).and_then(|s| roundtrip(&s, cover, k, tr));
                    t.residual(format!("cover {cname}: random distribution #{n}"), r);
                }
            }
        }
        t.finish()
    }

    fn flabby(&self) -> SuiteReport {
        let mut t = self.tally(Suite::Flabby);
        let mut pairs: Vec<(String, OpenSet, OpenSet)> = Vec::new();
        if let Some(labels) = self.sc.base.labels() {
            let labels: Vec<&String> = labels.iter().collect();
            if labels.len() <= 5 {
                for mask in 0..1u32 << labels.len() {
                    let v: Vec<&str> = (0..labels.len())
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| labels[i].as_str())
                        .collect();
                    let v = OpenSet::discrete(&v);
                    pairs.push((format!("V={v} in base"), v, self.sc.base.clone()));
                }
            }
        }
        for (cname, cover) in &self.sc.covers {
            for (a, u) in cover.parts().iter().enumerate() {
                pairs.push((format!("cover {cname}: part {a} in whole"), u.clone(), cover.whole().clone()));
            }
        }
        for (w, v, u) in pairs {
            for tag in [SpaceTag::Densities, SpaceTag::CompactFunctions, SpaceTag::CompactDistributions] {
                match flabby_ranks(tag, &v, &u, self.sc.k, self.trunc) {
                    Ok(o) => t.flag(
                        format!("{w}: {tag}"),
                        o.injective(),
                        format!("rank drops from {} to {} under extension", o.rank_on_v, o.rank_on_u),
                    ),
                    Err(e) => {
                        t.checks += 1;
                        t.error(format!("{w}: {tag}"), e);
                    }
                }
            }
        }
        t.finish()
    }

    fn duality(&self) -> SuiteReport {
        let mut t = self.tally(Suite::Duality);
        for (dn, d) in &self.sc.operators {
            for (un, u) in &self.sc.functions {
                if u.domain() != d.domain() || u.trunc() < d.y_order() {
                    continue;
                }
                let r = (|| {
                    let lhs = d.rho().pair(u)?;
                    let rhs = d.apply(u)?.integrate(d.domain())?;
                    Ok(lhs.distance(&rhs))
                })();
                t.residual(format!("operator {dn}, function {un}: rho identity"), r);
            }
        }
        for (en, eta) in &self.sc.densities {
            for (un, u) in &self.sc.functions {
                if u.domain() != eta.domain() || u.trunc() < eta.star_degree() {
                    continue;
                }
                t.residual(format!("density {en}, function {un}: embedding"), embed_gap(eta, u));
            }
        }
        if self.sc.backend == Backend::Discrete {
            let mut g = self.gen(Suite::Duality);
            let (m, k, tr) = (&self.sc.base, self.sc.k, self.trunc);
            for n in 0..RANDOM_INSTANCES {
                let r = (|| {
                    let d = g.discrete_diffop(m, k, tr)?;
                    let u = g.discrete_function(m, k, tr)?;
                    Ok(d.rho().pair(&u)?.distance(&d.apply(&u)?.integrate(m)?))
                })();
                t.residual(format!("random operator #{n}: rho identity"), r);
                let r = (|| {
                    let eta = g.discrete_density(m, k, tr)?;
                    let u = g.discrete_function(m, k, tr)?;
                    embed_gap(&eta, &u)
                })();
                t.residual(format!("random density #{n}: embedding"), r);
            }
        }
        t.finish()
    }

    fn jet_points(&self, u: &FormalFunction) -> Vec<Point> {
        match u.domain().labels() {
            Some(ls) => ls.iter().map(|p| Point::Label(p.clone())).collect(),
            None => {
                let pts = if self.sc.points.is_empty() { vec![Point::Coord(q(0))] } else { self.sc.points.clone() };
                pts.into_iter().filter(|p| u.domain().contains(p)).collect()
            }
        }
    }

    fn jets(&self) -> SuiteReport {
        let mut t = self.tally(Suite::Jets);
        let mut funcs: Vec<(String, FormalFunction)> =
            self.sc.functions.iter().map(|(n, u)| (format!("function {n}"), u.clone())).collect();
        if self.sc.backend == Backend::Discrete {
            let mut g = self.gen(Suite::Jets);
            for n in 0..RANDOM_INSTANCES {
                match g.discrete_function(&self.sc.base, self.sc.k, self.trunc) {
                    Ok(u) => funcs.push((format!("random function #{n}"), u)),
                    Err(e) => t.error(format!("random function #{n}"), e),
                }
            }
        }
        for (name, u) in funcs {
            let r = self.trunc.min(u.trunc()).min(4);
            for a in self.jet_points(&u) {
                let w = format!("{name} at {a}");
                let table = match jet_table(&u, &a, r) {
                    Ok(tb) => tb,
                    Err(e) => {
                        t.checks += 1;
                        t.error(w, e);
                        continue;
                    }
                };
                let dim = dist_space_dimension(u.backend().x_dim(), u.k(), r);
                t.flag(
                    format!("{w}: table size"),
                    dim == table.len().into(),
                    format!("{} entries, expected {dim}", table.len()),
                );
                let mut worst = Ok(0.0f64);
                for (i, j, v) in &table {
                    let got = PointDistribution::basis(a.clone(), u.k(), i.clone(), j.clone())
                        .and_then(|d| d.point_apply(&u))
                        .map(|ev| ev[0].distance(v));
                    worst = match (worst, got) {
                        (Ok(x), Ok(y)) => Ok(x.max(y)),
                        (Err(e), _) | (_, Err(e)) => Err(e),
                    };
                }
                t.residual(format!("{w}: point basis agrees with jets"), worst);
            }
        }
        t.finish()
    }
}

fn embed_gap(eta: &FormalDensity, u: &FormalFunction) -> formalcalc::Result<f64> {
    let via = GeneralizedFunction::embed(u).apply_gen(eta)?;
    let direct: Scalar = eta.pair(u)?;
    Ok(via[0].distance(&direct))
}
