//! Architecture models: components with state, services with contracts,
//! coverage regions and behavior models, and usage profiles.

mod distribution;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::formula::{Formula, Term, VarType};

pub use distribution::{
    fmt_rational, materialize_normal, Distribution, DistributionError, DistributionKind, Pmf,
    DEFAULT_NORMAL_PRECISION, MIN_NORMAL_PRECISION,
};
pub use validate::{
    static_pre_check, validate_model, Category, Diagnostic, Severity,
};

/// Name of the per-activation variable holding a service's return value.
pub const RESULT_VAR: &str = "result";

/// `Component.service`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServiceRef {
    pub component: String,
    pub service: String,
}

impl ServiceRef {
    pub fn new(component: impl Into<String>, service: impl Into<String>) -> Self {
        Self { component: component.into(), service: service.into() }
    }

    /// Parses `Component.service`.
    pub fn parse(qid: &str) -> Option<ServiceRef> {
        let (c, s) = qid.split_once('.')?;
        (!c.is_empty() && !s.is_empty() && !s.contains('.')).then(|| ServiceRef::new(c, s))
    }
}

impl fmt::Display for ServiceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.service)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Initializer {
    Const(BigInt),
    Dist(Distribution),
}

impl Initializer {
    pub fn pmf(&self) -> Pmf {
        match self {
            Initializer::Const(v) => Pmf::point(v.clone()),
            Initializer::Dist(d) => d.pmf().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateVar {
    pub name: String,
    pub ty: VarType,
    pub init: Initializer,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub ty: VarType,
}

/// A behavior or profile statement. Every executable statement carries a
/// guard; unguarded source statements have guard `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign { guard: Formula, target: String, value: Term },
    Call { guard: Formula, target: Option<String>, service: ServiceRef, args: Vec<Term> },
    Abort { guard: Formula },
    /// Probabilistic assignment; only legal in usage profiles.
    Sample { guard: Formula, target: String, dist: Distribution },
    /// Bounded repetition, removed by [`unroll`] before analysis.
    Repeat { count: u32, body: Vec<Stmt> },
}

impl Stmt {
    pub fn guard(&self) -> Option<&Formula> {
        match self {
            Stmt::Assign { guard, .. }
            | Stmt::Call { guard, .. }
            | Stmt::Abort { guard }
            | Stmt::Sample { guard, .. } => Some(guard),
            Stmt::Repeat { .. } => None,
        }
    }
}

/// Expands every `Repeat` into `count` consecutive copies of its body.
pub fn unroll(stmts: &[Stmt]) -> Vec<Stmt> {
    let mut out = Vec::new();
    unroll_into(stmts, &mut out);
    out
}

fn unroll_into(stmts: &[Stmt], out: &mut Vec<Stmt>) {
    for s in stmts {
        match s {
            Stmt::Repeat { count, body } => {
                for _ in 0..*count {
                    unroll_into(body, out);
                }
            }
            other => out.push(other.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Service {
    pub name: String,
    pub params: Vec<Param>,
    pub pre: Formula,
    pub post: Formula,
    pub cov: Formula,
    pub cost: BigRational,
    pub body: Vec<Stmt>,
}

impl Service {
    /// A service with trivial contract, region `true`, and unit error cost.
    pub fn new(name: impl Into<String>, params: Vec<Param>, body: Vec<Stmt>) -> Self {
        Self {
            name: name.into(),
            params,
            pre: Formula::Bool(true),
            post: Formula::Bool(true),
            cov: Formula::Bool(true),
            cost: BigRational::one(),
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Component {
    pub name: String,
    pub state: Vec<StateVar>,
    pub services: Vec<Service>,
}

impl Component {
    pub fn service(&self, name: &str) -> Option<&Service> {
        self.services.iter().find(|s| s.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVar> {
        self.state.iter().find(|v| v.name == name)
    }

    /// Components whose services are called from this component.
    pub fn required(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for s in &self.services {
            collect_callees(&s.body, &mut |r| {
                if r.component != self.name {
                    out.insert(r.component.clone());
                }
            });
        }
        out
    }
}

pub(crate) fn collect_callees(stmts: &[Stmt], f: &mut impl FnMut(&ServiceRef)) {
    for s in stmts {
        match s {
            Stmt::Call { service, .. } => f(service),
            Stmt::Repeat { body, .. } => collect_callees(body, f),
            _ => {}
        }
    }
}

/// A flat assembly: exactly one instance per component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SystemModel {
    pub components: Vec<Component>,
}

/// What a variable name denotes in some scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    Param(usize),
    Result,
    /// Qualified `Component.var`.
    State(String),
    /// Usage-profile variable.
    Local(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("unknown variable `{0}`")]
    Unknown(String),
    #[error("`{0}` is ambiguous; qualify it with a component name")]
    Ambiguous(String),
}

impl SystemModel {
    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn service(&self, r: &ServiceRef) -> Option<&Service> {
        self.component(&r.component)?.service(&r.service)
    }

    pub fn service_mut(&mut self, r: &ServiceRef) -> Option<&mut Service> {
        self.components
            .iter_mut()
            .find(|c| c.name == r.component)?
            .services
            .iter_mut()
            .find(|s| s.name == r.service)
    }

    pub fn services(&self) -> impl Iterator<Item = (ServiceRef, &Service)> {
        self.components.iter().flat_map(|c| {
            c.services.iter().map(move |s| (ServiceRef::new(&c.name, &s.name), s))
        })
    }

    /// All state variables under their qualified names, sorted by name.
    pub fn state_vars(&self) -> Vec<(String, &StateVar)> {
        let mut out: Vec<_> = self
            .components
            .iter()
            .flat_map(|c| c.state.iter().map(move |v| (format!("{}.{}", c.name, v.name), v)))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    pub fn state_var(&self, qualified: &str) -> Option<&StateVar> {
        let (c, v) = qualified.split_once('.')?;
        self.component(c)?.state_var(v)
    }

    fn resolve_state(&self, name: &str, own: Option<&str>) -> Result<Option<String>, ResolveError> {
        if let Some((c, v)) = name.split_once('.') {
            return match self.component(c).and_then(|comp| comp.state_var(v)) {
                Some(_) => Ok(Some(name.to_string())),
                None => Err(ResolveError::Unknown(name.to_string())),
            };
        }
        if let Some(own) = own.and_then(|o| self.component(o)) {
            if own.state_var(name).is_some() {
                return Ok(Some(format!("{}.{}", own.name, name)));
            }
        }
        let hits: Vec<_> =
            self.components.iter().filter(|c| c.state_var(name).is_some()).collect();
        match hits.len() {
            0 => Ok(None),
            1 => Ok(Some(format!("{}.{}", hits[0].name, name))),
            _ => Err(ResolveError::Ambiguous(name.to_string())),
        }
    }

    /// Resolves a name inside the body or contract of `service`: parameters,
    /// then `result`, then the component's own state, then any state
    /// variable whose short name is unique in the model.
    pub fn resolve_in_service(
        &self,
        service: &ServiceRef,
        name: &str,
    ) -> Result<Resolved, ResolveError> {
        if let Some(s) = self.service(service) {
            if let Some(i) = s.params.iter().position(|p| p.name == name) {
                return Ok(Resolved::Param(i));
            }
        }
        if name == RESULT_VAR {
            return Ok(Resolved::Result);
        }
        match self.resolve_state(name, Some(&service.component))? {
            Some(q) => Ok(Resolved::State(q)),
            None => Err(ResolveError::Unknown(name.to_string())),
        }
    }

    /// Resolves a name inside a usage profile: state variables (qualified,
    /// or unique short names) first, everything else is a profile variable.
    pub fn resolve_in_profile(&self, name: &str) -> Result<Resolved, ResolveError> {
        match self.resolve_state(name, None)? {
            Some(q) => Ok(Resolved::State(q)),
            None => Ok(Resolved::Local(name.to_string())),
        }
    }

    /// Names usable in the coverage region of `service`: its parameters and
    /// every state variable, both qualified and by the short names that
    /// resolve to them.
    pub fn region_vocabulary(&self, service: &ServiceRef) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        if let Some(s) = self.service(service) {
            out.extend(s.params.iter().map(|p| p.name.clone()));
        }
        for (q, v) in self.state_vars() {
            out.insert(q);
            if let Ok(Resolved::State(_)) = self.resolve_in_service(service, &v.name) {
                out.insert(v.name.clone());
            }
        }
        out
    }

    /// Copy of the model with all `repeat` blocks expanded.
    pub fn unrolled(&self) -> SystemModel {
        let mut m = self.clone();
        for c in &mut m.components {
            for s in &mut c.services {
                s.body = unroll(&s.body);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UsageProfile {
    pub name: String,
    pub body: Vec<Stmt>,
}

impl UsageProfile {
    /// Copy of the profile with all `repeat` blocks expanded.
    pub fn unroll(&self) -> UsageProfile {
        UsageProfile { name: self.name.clone(), body: unroll(&self.body) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abort() -> Stmt {
        Stmt::Abort { guard: Formula::Bool(false) }
    }

    #[test]
    fn unroll_counts() {
        let body = vec![abort()];
        assert_eq!(unroll(&[Stmt::Repeat { count: 1, body: body.clone() }]), body);
        let nested = Stmt::Repeat {
            count: 2,
            body: vec![Stmt::Repeat { count: 3, body: body.clone() }],
        };
        let out = unroll(&[nested]);
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|s| s == &abort()));
    }

    #[test]
    fn service_ref_parse() {
        assert_eq!(ServiceRef::parse("Network.useLoad"), Some(ServiceRef::new("Network", "useLoad")));
        assert_eq!(ServiceRef::parse("useLoad"), None);
        assert_eq!(ServiceRef::parse("a.b.c"), None);
    }
}
