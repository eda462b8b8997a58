//! Single traces with caller-chosen sample values.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use serde::Serialize;

use super::compile::{CStmt, Program, Slot};
use super::exec::{eval_formula, Exec, Flow, Mode};
use super::{AnalysisMode, EngineError, Outcome, Site};
use crate::model::{validate_model, Pmf, ServiceRef, Severity, SystemModel, UsageProfile};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Sample {
        var: String,
        #[serde(serialize_with = "super::ser_bigint")]
        value: BigInt,
        #[serde(serialize_with = "super::ser_rational")]
        mass: BigRational,
    },
    /// A write to a state or profile variable.
    Assign {
        var: String,
        #[serde(serialize_with = "super::ser_bigint")]
        value: BigInt,
    },
    Enter {
        #[serde(serialize_with = "super::ser_display")]
        service: ServiceRef,
        #[serde(serialize_with = "super::ser_bigints")]
        args: Vec<BigInt>,
    },
    Return {
        #[serde(serialize_with = "super::ser_display")]
        service: ServiceRef,
        #[serde(serialize_with = "super::ser_bigint")]
        result: BigInt,
    },
    Premature {
        #[serde(serialize_with = "super::ser_display")]
        site: Site,
    },
    ContractError(#[serde(serialize_with = "super::ser_display")] Outcome),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
    pub outcome: Outcome,
    /// Product of the masses of all sampled values.
    pub probability: BigRational,
}

/// Supplies the value of each probabilistic assignment as an index into
/// the distribution's support.
pub trait Resolver {
    /// `var` is the canonical name: qualified for state variables.
    fn choose(&mut self, var: &str, pmf: &Pmf) -> Result<usize, EngineError>;
}

/// Resolves samples from a fixed assignment. Names may be canonical or,
/// for state variables, short.
#[derive(Debug, Clone, Default)]
pub struct MapResolver(pub BTreeMap<String, BigInt>);

impl MapResolver {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, i64)>) -> Self {
        MapResolver(pairs.into_iter().map(|(k, v)| (k.to_string(), BigInt::from(v))).collect())
    }
}

impl Resolver for MapResolver {
    fn choose(&mut self, var: &str, pmf: &Pmf) -> Result<usize, EngineError> {
        let short = var.rsplit('.').next().unwrap_or(var);
        let value = self.0.get(var).or_else(|| self.0.get(short)).ok_or_else(|| {
            EngineError::InvalidArgument(format!("no value supplied for `{var}`"))
        })?;
        pmf.entries().iter().position(|(v, _)| v == value).ok_or_else(|| {
            EngineError::InvalidArgument(format!("{value} is outside the support of `{var}`"))
        })
    }
}

/// Draws every sample from a random generator.
pub struct RngResolver<R>(pub R);

impl<R: Rng> Resolver for RngResolver<R> {
    fn choose(&mut self, _var: &str, pmf: &Pmf) -> Result<usize, EngineError> {
        Ok(pmf.sample_index(&mut self.0))
    }
}

pub(crate) fn check_inputs(model: &SystemModel, profile: &UsageProfile) -> Result<(), EngineError> {
    let errors: Vec<String> = validate_model(model, profile)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.to_string())
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(EngineError::InvalidModel(errors.join("; ")))
    }
}

pub(crate) fn run_trace(
    prog: &Program,
    mode: Mode,
    resolver: &mut dyn Resolver,
    record: bool,
) -> Result<Trace, EngineError> {
    let mut exec = Exec::new(prog, mode);
    if record {
        exec.events = Some(Vec::new());
    }
    let mut g = prog.initial.clone();
    let mut probability = BigRational::one();
    for s in &prog.main {
        if let CStmt::Sample { guard, target: Slot::Global(t), pmf } = s {
            let pass = eval_formula(guard, &g, &[]).map_err(|e| {
                EngineError::Fault(Box::new(super::Fault {
                    kind: super::FaultKind::Evaluation(e),
                    site: Site::Profile,
                    trace: exec.events.clone().unwrap_or_default(),
                }))
            })?;
            if pass {
                let i = resolver.choose(&prog.globals[*t], pmf)?;
                let (value, mass) = &pmf.entries()[i];
                g[*t] = value.clone();
                probability *= mass;
                if let Some(ev) = &mut exec.events {
                    ev.push(Event::Sample {
                        var: prog.globals[*t].clone(),
                        value: value.clone(),
                        mass: mass.clone(),
                    });
                }
            }
            continue;
        }
        match exec.profile_stmt(s, &mut g).map_err(|f| EngineError::Fault(Box::new(f)))? {
            Flow::Continue(()) => {}
            Flow::Stop(outcome) => {
                return Ok(Trace { events: exec.events.unwrap_or_default(), outcome, probability })
            }
            Flow::Halt => unreachable!("no region mode in profiles"),
        }
    }
    Ok(Trace { events: exec.events.unwrap_or_default(), outcome: Outcome::Normal, probability })
}

/// Executes one trace of the profile, taking sample values from `resolver`.
///
/// ```
/// use covprob::dsl::{parse_model, parse_profile};
/// use covprob::engine::{execute_trace, AnalysisMode, MapResolver, Outcome};
///
/// let m = parse_model("component T { state int level = 0;
///     service drain(int n) covered n <= level { level = level - n; } }").unwrap();
/// let p = parse_profile("profile p { d ~ uniform(0, 3); T.drain(d); }").unwrap();
/// let t = execute_trace(&m, &p, AnalysisMode::Coverage, &mut MapResolver::from_pairs([("d", 2)]))
///     .unwrap();
/// assert!(matches!(t.outcome, Outcome::Premature(_)));
/// ```
pub fn execute_trace(
    model: &SystemModel,
    profile: &UsageProfile,
    mode: AnalysisMode,
    resolver: &mut dyn Resolver,
) -> Result<Trace, EngineError> {
    check_inputs(model, profile)?;
    let prog = Program::compile(model, profile)?;
    run_trace(&prog, mode.into(), resolver, true)
}
