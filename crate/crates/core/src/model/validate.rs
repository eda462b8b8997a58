//! Static well-formedness checks for models and usage profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{
    collect_callees, unroll, Initializer, Resolved, ResolveError, ServiceRef, Stmt, SystemModel,
    UsageProfile, RESULT_VAR,
};
use crate::formula::{
    find_counterexample, eval_term, Domain, Formula, FormulaError, Signature, State, Term,
    VarType, DEFAULT_STATE_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    DuplicateName,
    UnknownReference,
    UnknownVariable,
    AmbiguousName,
    ArityMismatch,
    TypeMismatch,
    Recursion,
    MisplacedSample,
    InvalidRepeat,
    ScopeViolation,
    PreconditionNotImplied,
    CheckSkipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub category: Category,
    /// Logical location, e.g. `Network.useLoad: statement 2`.
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    fn error(category: Category, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, category, location: location.into(), message: message.into() }
    }

    fn warning(category: Category, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            category,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}[{:?}] {}: {}", self.category, self.location, self.message)
    }
}

struct Checker<'m> {
    model: &'m SystemModel,
    out: Vec<Diagnostic>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Scope<'a> {
    Service { r: &'a ServiceRef, result_ok: bool },
    Profile,
}

impl<'m> Checker<'m> {
    fn resolve_error(&mut self, err: ResolveError, loc: &str) {
        let cat = match err {
            ResolveError::Unknown(_) => Category::UnknownVariable,
            ResolveError::Ambiguous(_) => Category::AmbiguousName,
        };
        self.out.push(Diagnostic::error(cat, loc, err.to_string()));
    }

    fn check_name(&mut self, name: &str, scope: Scope<'_>, loc: &str) -> Option<Resolved> {
        let res = match scope {
            Scope::Service { r, .. } => self.model.resolve_in_service(r, name),
            Scope::Profile => self.model.resolve_in_profile(name),
        };
        match res {
            Ok(Resolved::Result) if matches!(scope, Scope::Service { result_ok: false, .. }) => {
                self.out.push(Diagnostic::error(
                    Category::ScopeViolation,
                    loc,
                    format!("`{RESULT_VAR}` may only appear in postconditions and behavior"),
                ));
                None
            }
            Ok(r) => Some(r),
            Err(e) => {
                self.resolve_error(e, loc);
                None
            }
        }
    }

    fn check_formula(&mut self, f: &Formula, scope: Scope<'_>, loc: &str) {
        for v in f.free_vars() {
            self.check_name(&v, scope, loc);
        }
    }

    fn check_term(&mut self, t: &Term, scope: Scope<'_>, loc: &str) {
        let mut vars = BTreeSet::new();
        t.collect_vars(&mut vars);
        for v in vars {
            self.check_name(v, scope, loc);
        }
    }

    fn check_body(&mut self, stmts: &[Stmt], scope: Scope<'_>, owner: &str, counter: &mut usize) {
        for s in stmts {
            *counter += 1;
            let loc = format!("{owner}: statement {counter}");
            if let Some(g) = s.guard() {
                self.check_formula(g, scope, &loc);
            }
            match s {
                Stmt::Assign { target, value, .. } => {
                    self.check_name(target, scope, &loc);
                    self.check_term(value, scope, &loc);
                }
                Stmt::Call { target, service, args, .. } => {
                    if let Some(t) = target {
                        self.check_name(t, scope, &loc);
                    }
                    for a in args {
                        self.check_term(a, scope, &loc);
                    }
                    match self.model.service(service) {
                        None => self.out.push(Diagnostic::error(
                            Category::UnknownReference,
                            &loc,
                            format!("unknown service `{service}`"),
                        )),
                        Some(callee) if callee.params.len() != args.len() => {
                            self.out.push(Diagnostic::error(
                                Category::ArityMismatch,
                                &loc,
                                format!(
                                    "`{service}` takes {} argument(s), {} given",
                                    callee.params.len(),
                                    args.len()
                                ),
                            ))
                        }
                        Some(_) => {}
                    }
                }
                Stmt::Abort { .. } => {}
                Stmt::Sample { target, dist, .. } => {
                    if let Scope::Service { .. } = scope {
                        self.out.push(Diagnostic::error(
                            Category::MisplacedSample,
                            &loc,
                            "probabilistic assignments are only allowed in usage profiles",
                        ));
                    }
                    if let Some(Resolved::State(q)) = self.check_name(target, scope, &loc) {
                        self.check_bool_support(&q, dist.pmf(), &loc);
                    }
                }
                Stmt::Repeat { count, body } => {
                    if *count == 0 {
                        self.out.push(Diagnostic::error(
                            Category::InvalidRepeat,
                            &loc,
                            "repeat count must be at least 1",
                        ));
                    }
                    self.check_body(body, scope, owner, counter);
                }
            }
        }
    }

    fn check_bool_support(&mut self, qualified: &str, pmf: &super::Pmf, loc: &str) {
        let Some(var) = self.model.state_var(qualified) else { return };
        if var.ty == VarType::Bool
            && pmf.entries().iter().any(|(v, _)| *v != 0.into() && *v != 1.into())
        {
            self.out.push(Diagnostic::error(
                Category::TypeMismatch,
                loc,
                format!("bool variable `{qualified}` can only hold 0 or 1"),
            ));
        }
    }

    fn check_duplicates(&mut self) {
        let mut seen = BTreeSet::new();
        for c in &self.model.components {
            if !seen.insert(&c.name) {
                self.out.push(Diagnostic::error(
                    Category::DuplicateName,
                    &c.name,
                    format!("component `{}` declared twice", c.name),
                ));
            }
            let mut vars = BTreeSet::new();
            for v in &c.state {
                if !vars.insert(&v.name) {
                    self.out.push(Diagnostic::error(
                        Category::DuplicateName,
                        &c.name,
                        format!("state variable `{}` declared twice", v.name),
                    ));
                }
                if v.name == RESULT_VAR {
                    self.out.push(Diagnostic::error(
                        Category::DuplicateName,
                        &c.name,
                        format!("`{RESULT_VAR}` is reserved"),
                    ));
                }
                self.check_bool_support(&format!("{}.{}", c.name, v.name), &v.init.pmf(), &c.name);
            }
            let mut services = BTreeSet::new();
            for s in &c.services {
                let loc = format!("{}.{}", c.name, s.name);
                if !services.insert(&s.name) {
                    self.out.push(Diagnostic::error(
                        Category::DuplicateName,
                        &loc,
                        format!("service `{}` declared twice", s.name),
                    ));
                }
                let mut params = BTreeSet::new();
                for p in &s.params {
                    if !params.insert(&p.name) || p.name == RESULT_VAR {
                        self.out.push(Diagnostic::error(
                            Category::DuplicateName,
                            &loc,
                            format!("parameter `{}` is duplicated or reserved", p.name),
                        ));
                    }
                }
            }
        }
    }

    fn check_recursion(&mut self) {
        let mut graph: BTreeMap<ServiceRef, BTreeSet<ServiceRef>> = BTreeMap::new();
        for (r, s) in self.model.services() {
            let mut callees = BTreeSet::new();
            collect_callees(&s.body, &mut |c| {
                callees.insert(c.clone());
            });
            graph.insert(r, callees);
        }
        // Iterative DFS with colors; each back edge reports one cycle.
        let mut color: BTreeMap<&ServiceRef, u8> = BTreeMap::new();
        let mut reported = BTreeSet::new();
        for root in graph.keys() {
            if color.get(root).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut path: Vec<&ServiceRef> = vec![root];
            let mut iters = vec![graph[root].iter()];
            color.insert(root, 1);
            while let Some(it) = iters.last_mut() {
                match it.next() {
                    Some(next) if graph.contains_key(next) => match color.get(next).copied() {
                        Some(1) => {
                            let start = path.iter().position(|p| *p == next).unwrap();
                            let mut cycle: Vec<String> =
                                path[start..].iter().map(|r| r.to_string()).collect();
                            let mut key = cycle.clone();
                            key.sort();
                            if reported.insert(key) {
                                cycle.push(next.to_string());
                                self.out.push(Diagnostic::error(
                                    Category::Recursion,
                                    next.to_string(),
                                    format!("recursive call cycle: {}", cycle.join(" -> ")),
                                ));
                            }
                        }
                        Some(_) => {}
                        None => {
                            color.insert(next, 1);
                            path.push(next);
                            iters.push(graph[next].iter());
                        }
                    },
                    Some(_) => {}
                    None => {
                        let done = path.pop().unwrap();
                        color.insert(done, 2);
                        iters.pop();
                    }
                }
            }
        }
    }

    fn check_profile_locals(&mut self, profile: &UsageProfile) {
        let mut written = BTreeSet::new();
        let mut read = BTreeMap::new();
        let flat = unroll(&profile.body);
        for (i, s) in flat.iter().enumerate() {
            let mut reads = BTreeSet::new();
            if let Some(g) = s.guard() {
                reads.extend(g.free_vars());
            }
            match s {
                Stmt::Assign { target, value, .. } => {
                    let mut v = BTreeSet::new();
                    value.collect_vars(&mut v);
                    reads.extend(v.into_iter().map(str::to_owned));
                    written.insert(target.clone());
                }
                Stmt::Call { target, args, .. } => {
                    for a in args {
                        let mut v = BTreeSet::new();
                        a.collect_vars(&mut v);
                        reads.extend(v.into_iter().map(str::to_owned));
                    }
                    if let Some(t) = target {
                        written.insert(t.clone());
                    }
                }
                Stmt::Sample { target, .. } => {
                    written.insert(target.clone());
                }
                _ => {}
            }
            for r in reads {
                read.entry(r).or_insert(i + 1);
            }
        }
        for (name, at) in read {
            if let Ok(Resolved::Local(_)) = self.model.resolve_in_profile(&name) {
                if !written.contains(&name) {
                    self.out.push(Diagnostic::error(
                        Category::UnknownVariable,
                        format!("profile {}: statement {at}", profile.name),
                        format!("profile variable `{name}` is read but never assigned"),
                    ));
                }
            }
        }
    }
}

/// Checks scoping, arity, reserved names, statement placement, and the
/// absence of recursion. Returns an empty list for a well-formed pair.
pub fn validate_model(model: &SystemModel, profile: &UsageProfile) -> Vec<Diagnostic> {
    let mut ck = Checker { model, out: Vec::new() };
    ck.check_duplicates();
    for (r, s) in model.services() {
        let owner = r.to_string();
        let plain = Scope::Service { r: &r, result_ok: false };
        ck.check_formula(&s.pre, plain, &format!("{owner}: requires"));
        ck.check_formula(&s.cov, plain, &format!("{owner}: covered"));
        let with_result = Scope::Service { r: &r, result_ok: true };
        ck.check_formula(&s.post, with_result, &format!("{owner}: ensures"));
        ck.check_body(&s.body, with_result, &owner, &mut 0);
    }
    ck.check_recursion();
    ck.check_body(&profile.body, Scope::Profile, &format!("profile {}", profile.name), &mut 0);
    ck.check_profile_locals(profile);
    ck.out
}

/// Rewrites a formula from a service's scope into profile scope: parameters
/// become the call's argument terms and state variables become qualified.
fn callee_pre_in_profile_scope(
    model: &SystemModel,
    callee: &ServiceRef,
    pre: &Formula,
    args: &[Term],
) -> Option<Formula> {
    let mut ok = true;
    let out = pre.substitute(&|name| match model.resolve_in_service(callee, name) {
        Ok(Resolved::Param(i)) => args.get(i).cloned(),
        Ok(Resolved::State(q)) => Some(Term::Var(q)),
        _ => None,
    });
    for v in out.free_vars() {
        if !v.contains('.') && !args.iter().any(|a| term_mentions(a, &v)) {
            ok = false;
        }
    }
    ok.then_some(out)
}

fn term_mentions(t: &Term, name: &str) -> bool {
    let mut vars = BTreeSet::new();
    t.collect_vars(&mut vars);
    vars.contains(name)
}

fn canonical_profile(model: &SystemModel, f: &Formula) -> Formula {
    f.substitute(&|name| match model.resolve_in_profile(name) {
        Ok(Resolved::State(q)) => Some(Term::Var(q)),
        _ => None,
    })
}

fn canonical_profile_term(model: &SystemModel, t: &Term) -> Term {
    t.substitute(&|name| match model.resolve_in_profile(name) {
        Ok(Resolved::State(q)) => Some(Term::Var(q)),
        _ => None,
    })
}

/// Flow-insensitive over-approximation of the values each profile-visible
/// variable can hold: the hull of its initializer, constant assignments and
/// sampled supports. Variables written by services or by non-constant
/// assignments get no domain.
fn derived_domains(model: &SystemModel, flat: &[Stmt]) -> BTreeMap<String, Option<Domain>> {
    let mut out: BTreeMap<String, Option<Domain>> = BTreeMap::new();
    fn join(out: &mut BTreeMap<String, Option<Domain>>, name: String, d: Option<Domain>) {
        let slot = out.entry(name).or_insert(d);
        *slot = match (*slot, d) {
            (Some(a), Some(b)) => Some(a.hull(b)),
            _ => None,
        };
    }
    for (q, v) in model.state_vars() {
        let d = match &v.init {
            Initializer::Const(c) => c.try_into().ok().map(Domain::singleton),
            Initializer::Dist(dist) => dist.pmf().hull(),
        };
        join(&mut out, q, d);
    }
    for (r, s) in model.services() {
        let mut targets = Vec::new();
        walk_targets(&s.body, &mut targets);
        for t in targets {
            if let Ok(Resolved::State(q)) = model.resolve_in_service(&r, &t) {
                join(&mut out, q, None);
            }
        }
    }
    let name_of = |t: &str| match model.resolve_in_profile(t) {
        Ok(Resolved::State(q)) => q,
        _ => t.to_string(),
    };
    for s in flat {
        match s {
            Stmt::Assign { target, value, .. } => {
                let value = canonical_profile_term(model, value);
                let d = eval_term(&value, &State::default())
                    .ok()
                    .and_then(|v| i64::try_from(&v).ok())
                    .map(Domain::singleton);
                join(&mut out, name_of(target), d);
            }
            Stmt::Sample { target, dist, .. } => join(&mut out, name_of(target), dist.pmf().hull()),
            Stmt::Call { target: Some(t), .. } => join(&mut out, name_of(t), None),
            _ => {}
        }
    }
    out
}

fn walk_targets(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        match s {
            Stmt::Assign { target, .. } | Stmt::Sample { target, .. } => out.push(target.clone()),
            Stmt::Call { target: Some(t), .. } => out.push(t.clone()),
            Stmt::Repeat { body, .. } => walk_targets(body, out),
            _ => {}
        }
    }
}

/// Checks that the guard of every profile-level call implies the callee's
/// precondition on an over-approximation of the reachable values.
///
/// `domains` supplies or overrides enumeration domains by canonical name
/// (profile variables by name, state variables qualified). Checks that
/// cannot be decided on finite domains are skipped with a warning; the
/// engine still checks preconditions dynamically at every profile call.
pub fn static_pre_check(
    model: &SystemModel,
    profile: &UsageProfile,
    domains: &Signature,
) -> Vec<Diagnostic> {
    let flat = unroll(&profile.body);
    let derived = derived_domains(model, &flat);
    let mut out = Vec::new();
    for (i, s) in flat.iter().enumerate() {
        let Stmt::Call { guard, service, args, .. } = s else { continue };
        let loc = format!("profile {}: call {} (statement {})", profile.name, service, i + 1);
        let Some(callee) = model.service(service) else { continue };
        let args: Vec<Term> = args.iter().map(|a| canonical_profile_term(model, a)).collect();
        let Some(pre) = callee_pre_in_profile_scope(model, service, &callee.pre, &args) else {
            out.push(Diagnostic::warning(
                Category::CheckSkipped,
                &loc,
                "precondition mentions names outside the callee's scope",
            ));
            continue;
        };
        let guard = canonical_profile(model, guard);
        let mut sig = Signature::new();
        let mut missing = Vec::new();
        let mut vars = guard.free_vars();
        vars.extend(pre.free_vars());
        for v in vars {
            if let Some((ty, d)) = domains.get(&v) {
                sig.declare(&v, ty, d);
            } else if let Some(Some(d)) = derived.get(&v) {
                sig.declare(&v, VarType::Int, *d);
            } else {
                missing.push(v);
            }
        }
        if !missing.is_empty() {
            out.push(Diagnostic::warning(
                Category::CheckSkipped,
                &loc,
                format!("no finite domain for {}", missing.join(", ")),
            ));
            continue;
        }
        match find_counterexample(&guard, &pre, &sig, DEFAULT_STATE_CAP) {
            Ok(None) => {}
            Ok(Some(cex)) => out.push(Diagnostic::error(
                Category::PreconditionNotImplied,
                &loc,
                format!("guard `{guard}` does not imply precondition `{pre}`; counterexample {cex}"),
            )),
            Err(e @ FormulaError::StateSpaceTooLarge { .. }) => {
                out.push(Diagnostic::warning(Category::CheckSkipped, &loc, e.to_string()))
            }
            Err(e) => out.push(Diagnostic::warning(Category::CheckSkipped, &loc, e.to_string())),
        }
    }
    out
}
