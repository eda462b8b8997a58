//! Executable semantics and the analyses built on it.
//!
//! A usage profile is run against the model statement by statement.
//! Probabilistic assignments branch; everything else is deterministic. In
//! coverage mode a service whose region does not hold on entry, or an
//! executed `abort`, terminates the whole run prematurely. In correctness
//! mode regions are ignored and contract violations end the run instead.

mod approx;
mod compile;
mod exact;
mod exec;
mod region;
mod trace;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Serialize, Serializer};

use crate::formula::{EvalError, FormulaError};
use crate::model::ServiceRef;

pub use approx::{
    approx_coverage, approx_coverage_with, clopper_pearson, ApproxOptions, IntervalResult,
};
pub use exact::{
    call_probability, call_probability_with, exact_correctness, exact_coverage, exact_with,
    expected_error_cost, expected_error_cost_with, ExactOptions, ExactResult, Strategy,
    DEFAULT_BRANCH_BUDGET,
};
pub use region::{
    check_region, correctness_region, region_variables, CorrectnessRegion, RegionCheck,
    DEFAULT_PARAM_DOMAIN,
};
pub use trace::{execute_trace, Event, MapResolver, Resolver, RngResolver, Trace};

/// Which notion of failure an analysis measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisMode {
    Coverage,
    Correctness,
}

impl From<AnalysisMode> for exec::Mode {
    fn from(m: AnalysisMode) -> Self {
        match m {
            AnalysisMode::Coverage => exec::Mode::Coverage,
            AnalysisMode::Correctness => exec::Mode::Correctness,
        }
    }
}

/// Where a premature termination happened.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Profile,
    Service(ServiceRef),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Profile => f.write_str("<profile>"),
            Site::Service(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Normal,
    /// Region failure on entry or an executed `abort`.
    Premature(Site),
    PreViolation { caller: ServiceRef, callee: ServiceRef },
    PostViolation(ServiceRef),
}

impl Outcome {
    /// The site an outcome is charged to, if it is not normal.
    pub fn site(&self) -> Option<Site> {
        match self {
            Outcome::Normal => None,
            Outcome::Premature(s) => Some(s.clone()),
            Outcome::PreViolation { caller, .. } => Some(Site::Service(caller.clone())),
            Outcome::PostViolation(r) => Some(Site::Service(r.clone())),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Normal => f.write_str("normal"),
            Outcome::Premature(s) => write!(f, "premature at {s}"),
            Outcome::PreViolation { caller, callee } => {
                write!(f, "precondition of {callee} violated by {caller}")
            }
            Outcome::PostViolation(r) => write!(f, "postcondition of {r} violated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    Evaluation(EvalError),
    /// A profile-level call whose callee precondition does not hold.
    ProfileContractViolation { service: ServiceRef },
}

/// A problem with the input rather than a measured failure. Carries the
/// events of the offending trace up to the fault, when available.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub kind: FaultKind,
    pub site: Site,
    pub trace: Vec<Event>,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FaultKind::Evaluation(e) => write!(f, "evaluation error in {}: {e}", self.site),
            FaultKind::ProfileContractViolation { service } => {
                write!(f, "profile calls {service} while its precondition does not hold")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("enumeration exceeded the budget of {budget} branches; try approximate analysis")]
    BranchBudgetExceeded { budget: u64 },
    #[error("{0}")]
    Fault(Box<Fault>),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

pub(crate) fn ser_display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

pub(crate) fn ser_bigint<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    // Exact integers through the arbitrary-precision number type.
    let n: serde_json::Number = v.to_string().parse().map_err(serde::ser::Error::custom)?;
    n.serialize(s)
}

pub(crate) fn ser_bigints<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        let n: serde_json::Number = x.to_string().parse().map_err(serde::ser::Error::custom)?;
        seq.serialize_element(&n)?;
    }
    seq.end()
}

pub(crate) fn ser_rational<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(&crate::model::fmt_rational(v))
}

/// Number of traces, possibly beyond 64 bits.
pub type TraceCount = BigUint;

/// Mass charged to each site, summed over outcome kinds.
pub fn mass_by_site(outcomes: &BTreeMap<Outcome, BigRational>) -> BTreeMap<Site, BigRational> {
    let mut out: BTreeMap<Site, BigRational> = BTreeMap::new();
    for (o, m) in outcomes {
        if let Some(s) = o.site() {
            *out.entry(s).or_default() += m;
        }
    }
    out
}
