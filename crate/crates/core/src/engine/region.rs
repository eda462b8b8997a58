//! Per-service correctness regions by exhaustive execution.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use serde::Serialize;

use super::compile::{formula_reads, CFormula, Program};
use super::exec::{eval_formula, Exec, Flow, Mode};
use super::EngineError;
use crate::formula::{
    CmpOp, Domain, Formula, FormulaError, Signature, State, StateSpace, Term, VarType,
    DEFAULT_STATE_CAP,
};
use crate::model::{Initializer, Resolved, ServiceRef, SystemModel, UsageProfile};

/// Enumeration domain for integer parameters without a declared domain.
pub const DEFAULT_PARAM_DOMAIN: (i64, i64) = (-8, 8);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessRegion {
    pub service: ServiceRef,
    /// Enumerated variables, in enumeration order.
    pub vars: Vec<(String, Domain)>,
    /// States from which the service causes no error, in enumeration order.
    pub states: Vec<State>,
    /// Disjunction of one conjunction of equalities per correct state.
    pub formula: Formula,
    pub total: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegionCheck {
    pub correct: bool,
    /// First state in enumeration order where the region and the
    /// precondition hold but the service causes an error.
    #[serde(serialize_with = "ser_state")]
    pub counterexample: Option<State>,
    pub checked: u128,
}

fn ser_state<S: serde::Serializer>(s: &Option<State>, ser: S) -> Result<S::Ok, S::Error> {
    match s {
        None => ser.serialize_none(),
        Some(st) => ser.collect_str(st),
    }
}

enum Target {
    Param(usize),
    Global(usize),
}

struct Setup {
    prog: Program,
    sid: usize,
    vars: Vec<(String, Domain, Target)>,
}

fn display_name(model: &SystemModel, service: &ServiceRef, qualified: &str) -> String {
    let short = qualified.rsplit('.').next().unwrap_or(qualified);
    match model.resolve_in_service(service, short) {
        Ok(Resolved::State(q)) if q == qualified => short.to_string(),
        _ => qualified.to_string(),
    }
}

fn lookup(domains: &Signature, names: &[&str]) -> Option<Domain> {
    names.iter().find_map(|n| domains.get(n)).map(|(_, d)| d)
}

fn setup(
    model: &SystemModel,
    service: &ServiceRef,
    extra: &[&Formula],
    domains: &Signature,
) -> Result<(Setup, Vec<CFormula>), EngineError> {
    let svc = model
        .service(service)
        .ok_or_else(|| EngineError::InvalidArgument(format!("unknown service `{service}`")))?;
    let empty = UsageProfile { name: String::new(), body: Vec::new() };
    let prog = Program::compile(model, &empty)?;
    let sid = prog.service_index(service).expect("compiled");
    let compiled: Vec<CFormula> = extra
        .iter()
        .map(|f| prog.compile_in_service(model, service, f))
        .collect::<Result<_, _>>()?;

    let mut relevant: BTreeSet<usize> = prog.reads[sid].clone();
    for f in &compiled {
        formula_reads(f, &mut relevant);
    }
    let mut vars = Vec::new();
    for (i, p) in svc.params.iter().enumerate() {
        let d = lookup(domains, &[&p.name]).unwrap_or_else(|| match p.ty {
            VarType::Bool => Domain::new(0, 1).unwrap(),
            VarType::Int => Domain::new(DEFAULT_PARAM_DOMAIN.0, DEFAULT_PARAM_DOMAIN.1).unwrap(),
        });
        vars.push((p.name.clone(), d, Target::Param(i)));
    }
    for g in relevant {
        let q = &prog.globals[g];
        let name = display_name(model, service, q);
        let d = match lookup(domains, &[&name, q]) {
            Some(d) => d,
            None => {
                let v = model.state_var(q).expect("state variable");
                match &v.init {
                    Initializer::Const(k) => i64::try_from(k).ok().map(Domain::singleton),
                    Initializer::Dist(dist) => dist.pmf().hull(),
                }
                .ok_or_else(|| {
                    EngineError::InvalidArgument(format!("no finite domain for `{name}`"))
                })?
            }
        };
        vars.push((name, d, Target::Global(g)));
    }
    Ok((Setup { prog, sid, vars }, compiled))
}

impl Setup {
    fn space(&self, cap: u128) -> Result<StateSpace, EngineError> {
        let space =
            StateSpace::new(self.vars.iter().map(|(n, d, _)| (n.clone(), *d)).collect());
        if space.size() > cap {
            return Err(FormulaError::StateSpaceTooLarge { states: space.size(), cap }.into());
        }
        Ok(space)
    }

    fn load(&self, values: &[i64]) -> (Vec<BigInt>, Vec<BigInt>) {
        let mut g = self.prog.initial.clone();
        let mut frame = vec![BigInt::default(); self.prog.services[self.sid].arity + 1];
        for ((_, _, t), v) in self.vars.iter().zip(values) {
            match t {
                Target::Param(i) => frame[*i] = BigInt::from(*v),
                Target::Global(i) => g[*i] = BigInt::from(*v),
            }
        }
        (g, frame)
    }

    /// Runs one activation. Evaluation faults count as errors.
    fn correct_at(&self, values: &[i64]) -> bool {
        let (mut g, frame) = self.load(values);
        let mut exec = Exec::new(&self.prog, Mode::Region);
        match exec.activate(self.sid, frame, &mut g, 0) {
            Ok(Flow::Continue(_)) | Ok(Flow::Halt) => true,
            Ok(Flow::Stop(_)) | Err(_) => false,
        }
    }

    fn to_state(&self, values: &[i64]) -> State {
        State(self.vars.iter().zip(values).map(|((n, _, _), v)| (n.clone(), BigInt::from(*v))).collect())
    }
}

/// The variables enumerated for `service`, with their domains: parameters
/// in declaration order, then every state variable the service can read
/// (directly or through callees) in qualified-name order. Domains come from
/// `domains` by short or qualified name, else from the initializer support,
/// else [`DEFAULT_PARAM_DOMAIN`] for parameters.
pub fn region_variables(
    model: &SystemModel,
    service: &ServiceRef,
    domains: &Signature,
) -> Result<Vec<(String, Domain)>, EngineError> {
    let (s, _) = setup(model, service, &[], domains)?;
    Ok(s.vars.into_iter().map(|(n, d, _)| (n, d)).collect())
}

/// All initial states from which executing `service` once causes no error:
/// no direct callee is called outside its precondition, the service's own
/// postcondition holds on exit, and it does not abort. Callee bodies run
/// for their effects only.
pub fn correctness_region(
    model: &SystemModel,
    service: &ServiceRef,
    domains: &Signature,
) -> Result<CorrectnessRegion, EngineError> {
    let (s, _) = setup(model, service, &[], domains)?;
    let mut space = s.space(DEFAULT_STATE_CAP)?;
    let total = space.size();
    let mut states = Vec::new();
    let mut points = Vec::new();
    while let Some(values) = space.next_values() {
        if s.correct_at(&values) {
            points.push(Formula::and(
                s.vars
                    .iter()
                    .zip(&values)
                    .map(|((n, _, _), v)| Formula::cmp(CmpOp::Eq, Term::var(n), Term::int(*v)))
                    .collect(),
            ));
            states.push(s.to_state(&values));
        }
    }
    Ok(CorrectnessRegion {
        service: service.clone(),
        vars: s.vars.into_iter().map(|(n, d, _)| (n, d)).collect(),
        states,
        formula: Formula::or(points),
        total,
    })
}

/// Decides whether `cov` implies the correctness region of `service` on
/// the given domains, for states that satisfy the service's precondition.
/// A state outside the precondition is the caller's error, not the
/// service's, so it cannot refute a region.
pub fn check_region(
    model: &SystemModel,
    service: &ServiceRef,
    cov: &Formula,
    domains: &Signature,
) -> Result<RegionCheck, EngineError> {
    let pre = model.service(service).map(|s| s.pre.clone()).unwrap_or(Formula::Bool(true));
    let (s, compiled) = setup(model, service, &[cov, &pre], domains)?;
    let mut space = s.space(DEFAULT_STATE_CAP)?;
    let checked = space.size();
    while let Some(values) = space.next_values() {
        let (g, frame) = s.load(&values);
        // Evaluation errors count as holding, which keeps the check strict.
        let holds = eval_formula(&compiled[0], &g, &frame).unwrap_or(true)
            && eval_formula(&compiled[1], &g, &frame).unwrap_or(true);
        if holds && !s.correct_at(&values) {
            return Ok(RegionCheck {
                correct: false,
                counterexample: Some(s.to_state(&values)),
                checked,
            });
        }
    }
    Ok(RegionCheck { correct: true, counterexample: None, checked })
}

impl Program {
    pub(crate) fn compile_in_service(
        &self,
        model: &SystemModel,
        service: &ServiceRef,
        f: &Formula,
    ) -> Result<CFormula, EngineError> {
        super::compile::compile_formula(model, service, &self.globals, f)
    }
}
