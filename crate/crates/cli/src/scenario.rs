//! Scenario files: a versioned JSON document naming the objects a command works on.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "backend": "discrete",
//!   "base": ["p", "q", "r"],
//!   "k": 1, "trunc": 2,
//!   "functions":     {"u":   {"trunc": 2, "coeffs": {"0": {"p": 1}}}},
//!   "densities":     {"eta": {"coeffs": {"1": [{"I": [], "tau": {"p": 1}}]}}},
//!   "operators":     {"D":   {"terms": [{"I": [], "L": [1], "coeff": {"p": 2}}]}},
//!   "distributions": {"T":   {"E_dim": 1, "coeffs": {"0": [[{"kind": "discrete", "values": {"p": 1}}]]}}},
//!   "generalized":   {"g":   {"E_dim": 1, "trunc": 2, "coeffs": {}}},
//!   "covers":        {"c":   {"whole": ["p", "q", "r"], "parts": [["p", "q"], ["q", "r"]]}},
//!   "locals":        {"fam": {"cover": "c", "kind": "generalized", "sections": ["g1", "g2"]}},
//!   "points": ["p"],
//!   "checks": ["glue", "mv"]
//! }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use formalcalc::distributions::parse_point;
use formalcalc::sheaf::Cover;
use formalcalc::{
    Backend, CompactFormalDistribution, DensityDiffOp, FormalDensity, FormalDistribution, FormalFunction,
    GeneralizedFunction, OpenSet, Point, SupportedFormalFunction,
};
use serde_json::Value;
use thiserror::Error;

pub const SCHEMA: u64 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema {0:?} (expected {SCHEMA})")]
    Schema(Value),
    #[error("{0}")]
    Invalid(String),
    #[error("{what} {name:?}: {source}")]
    Object {
        what: &'static str,
        name: String,
        source: formalcalc::Error,
    },
    #[error("no {what} named {name:?}")]
    Missing { what: &'static str, name: String },
}

/// The check suites understood by `check`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Mv,
    Glue,
    Cosheaf,
    Flabby,
    Duality,
    Jets,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Mv, Suite::Glue, Suite::Cosheaf, Suite::Flabby, Suite::Duality, Suite::Jets];
}

impl FromStr for Suite {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Suite, ScenarioError> {
        Ok(match s {
            "mv" => Suite::Mv,
            "glue" => Suite::Glue,
            "cosheaf" => Suite::Cosheaf,
            "flabby" => Suite::Flabby,
            "duality" => Suite::Duality,
            "jets" => Suite::Jets,
            _ => return Err(ScenarioError::Invalid(format!("unknown suite {s:?}"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Mv => "mv",
            Suite::Glue => "glue",
            Suite::Cosheaf => "cosheaf",
            Suite::Flabby => "flabby",
            Suite::Duality => "duality",
            Suite::Jets => "jets",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalKind {
    Generalized,
    Distribution,
}

#[derive(Clone, Debug)]
pub struct LocalFamily {
    pub cover: String,
    pub kind: LocalKind,
    pub sections: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub backend: Backend,
    pub base: OpenSet,
    pub k: usize,
    pub trunc: u32,
    pub functions: BTreeMap<String, FormalFunction>,
    /// Functions that also carry (or admit) a compact support.
    pub supported: BTreeMap<String, SupportedFormalFunction>,
    pub densities: BTreeMap<String, FormalDensity>,
    pub operators: BTreeMap<String, DensityDiffOp>,
    pub distributions: BTreeMap<String, FormalDistribution>,
    pub compact: BTreeMap<String, CompactFormalDistribution>,
    pub generalized: BTreeMap<String, GeneralizedFunction>,
    pub covers: BTreeMap<String, Cover>,
    pub locals: BTreeMap<String, LocalFamily>,
    pub points: Vec<Point>,
    pub checks: Vec<Suite>,
}

fn object_map<'a>(v: &'a Value, key: &str) -> Result<Vec<(&'a String, &'a Value)>, ScenarioError> {
    match v.get(key) {
        None => Ok(Vec::new()),
        Some(Value::Object(m)) => Ok(m.iter().collect()),
        Some(_) => Err(ScenarioError::Invalid(format!("\"{key}\" must be an object of named entries"))),
    }
}

fn parse_named<T>(
    v: &Value,
    key: &str,
    what: &'static str,
    f: impl Fn(&Value) -> formalcalc::Result<T>,
) -> Result<BTreeMap<String, T>, ScenarioError> {
    object_map(v, key)?
        .into_iter()
        .map(|(name, body)| {
            f(body)
                .map(|x| (name.clone(), x))
                .map_err(|source| ScenarioError::Object { what, name: name.clone(), source })
        })
        .collect()
}

impl Scenario {
    pub fn load(path: &str) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        Scenario::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let v: Value = serde_json::from_str(text)?;
        match v.get("schema") {
            Some(s) if s.as_u64() == Some(SCHEMA) => {}
            other => return Err(ScenarioError::Schema(other.cloned().unwrap_or(Value::Null))),
        }
        let backend = match v.get("backend").and_then(Value::as_str) {
            Some("discrete") => Backend::Discrete,
            Some("line") => Backend::Line,
            other => return Err(ScenarioError::Invalid(format!("backend must be \"discrete\" or \"line\", got {other:?}"))),
        };
        let base = match (backend, v.get("base")) {
            (Backend::Line, None) => OpenSet::whole_line(),
            (_, Some(b)) => OpenSet::from_json(b, backend)
                .map_err(|e| ScenarioError::Invalid(format!("base: {e}")))?,
            (Backend::Discrete, None) => return Err(ScenarioError::Invalid("discrete scenarios need a \"base\" point list".into())),
        };
        let k = v.get("k").map_or(Some(0), Value::as_u64).ok_or_else(|| ScenarioError::Invalid("\"k\" must be an integer".into()))? as usize;
        let trunc = v
            .get("trunc")
            .map_or(Some(2), Value::as_u64)
            .ok_or_else(|| ScenarioError::Invalid("\"trunc\" must be an integer".into()))? as u32;

        let functions = parse_named(&v, "functions", "function", |b| FormalFunction::from_json(b, &base, k))?;
        let mut supported = BTreeMap::new();
        for (name, body) in object_map(&v, "functions")? {
            let parsed = SupportedFormalFunction::from_json(body, &base, k);
            match (body.get("support"), parsed) {
                (_, Ok(s)) => {
                    supported.insert(name.clone(), s);
                }
                (Some(_), Err(source)) => return Err(ScenarioError::Object { what: "function", name: name.clone(), source }),
                (None, Err(_)) => {}
            }
        }
        let densities = parse_named(&v, "densities", "density", |b| FormalDensity::from_json(b, &base, k))?;
        let operators = parse_named(&v, "operators", "operator", |b| {
            let dom = match b.get("domain") {
                Some(d) => OpenSet::from_json(d, backend)?,
                None => base.clone(),
            };
            DensityDiffOp::from_json(b, &dom, k)
        })?;
        let distributions = parse_named(&v, "distributions", "distribution", |b| FormalDistribution::from_json(b, &base, k))?;
        let mut compact = BTreeMap::new();
        for (name, body) in object_map(&v, "distributions")? {
            let inner = distributions[name].clone();
            let made = match body.get("support") {
                Some(s) => formalcalc::Support::from_json(s, backend).and_then(|s| CompactFormalDistribution::new(inner, s)),
                None => CompactFormalDistribution::from_inner(inner),
            };
            match (body.get("support"), made) {
                (_, Ok(c)) => {
                    compact.insert(name.clone(), c);
                }
                (Some(_), Err(source)) => return Err(ScenarioError::Object { what: "distribution", name: name.clone(), source }),
                (None, Err(_)) => {}
            }
        }
        let generalized = parse_named(&v, "generalized", "generalized function", |b| GeneralizedFunction::from_json(b, &base, k))?;
        let covers = parse_named(&v, "covers", "cover", |b| Cover::from_json(b, backend))?;

        let mut locals = BTreeMap::new();
        for (name, body) in object_map(&v, "locals")? {
            let bad = |m: &str| ScenarioError::Invalid(format!("locals {name:?}: {m}"));
            let cover = body.get("cover").and_then(Value::as_str).ok_or_else(|| bad("needs \"cover\""))?.to_string();
            let kind = match body.get("kind").and_then(Value::as_str) {
                Some("generalized") => LocalKind::Generalized,
                Some("distribution") => LocalKind::Distribution,
                _ => return Err(bad("\"kind\" must be \"generalized\" or \"distribution\"")),
            };
            let sections: Vec<String> = body
                .get("sections")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("needs a \"sections\" list"))?
                .iter()
                .map(|s| s.as_str().map(str::to_string).ok_or_else(|| bad("section names must be strings")))
                .collect::<Result<_, _>>()?;
            locals.insert(name.clone(), LocalFamily { cover, kind, sections });
        }

        let points = match v.get("points") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|p| parse_point(p, backend).map_err(|e| ScenarioError::Invalid(format!("points: {e}"))))
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(ScenarioError::Invalid("\"points\" must be a list".into())),
        };
        let mut checks: Vec<Suite> = Vec::new();
        match v.get("checks") {
            None => {}
            Some(Value::Array(items)) => {
                for s in items {
                    match s.as_str() {
                        Some("all") => checks.extend(Suite::ALL),
                        Some(name) => checks.push(name.parse()?),
                        None => return Err(ScenarioError::Invalid("check names must be strings".into())),
                    }
                }
            }
            Some(_) => return Err(ScenarioError::Invalid("\"checks\" must be a list".into())),
        }

        let sc = Scenario {
            backend,
            base,
            k,
            trunc,
            functions,
            supported,
            densities,
            operators,
            distributions,
            compact,
            generalized,
            covers,
            locals,
            points,
            checks,
        };
        sc.validate()?;
        Ok(sc)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        for (name, fam) in &self.locals {
            let cover = self.cover(&fam.cover)?;
            if fam.sections.len() != cover.len() {
                return Err(ScenarioError::Invalid(format!(
                    "locals {name:?}: {} sections for a {}-part cover",
                    fam.sections.len(),
                    cover.len()
                )));
            }
            for s in &fam.sections {
                match fam.kind {
                    LocalKind::Generalized => {
                        self.generalized_fn(s)?;
                    }
                    LocalKind::Distribution => {
                        self.distribution(s)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn function(&self, name: &str) -> Result<&FormalFunction, ScenarioError> {
        self.functions.get(name).ok_or_else(|| missing("function", name))
    }

    pub fn density(&self, name: &str) -> Result<&FormalDensity, ScenarioError> {
        self.densities.get(name).ok_or_else(|| missing("density", name))
    }

    pub fn operator(&self, name: &str) -> Result<&DensityDiffOp, ScenarioError> {
        self.operators.get(name).ok_or_else(|| missing("operator", name))
    }

    pub fn distribution(&self, name: &str) -> Result<&FormalDistribution, ScenarioError> {
        self.distributions.get(name).ok_or_else(|| missing("distribution", name))
    }

    pub fn generalized_fn(&self, name: &str) -> Result<&GeneralizedFunction, ScenarioError> {
        self.generalized.get(name).ok_or_else(|| missing("generalized function", name))
    }

    pub fn cover(&self, name: &str) -> Result<&Cover, ScenarioError> {
        self.covers.get(name).ok_or_else(|| missing("cover", name))
    }
}

fn missing(what: &'static str, name: &str) -> ScenarioError {
    ScenarioError::Missing { what, name: name.to_string() }
}
