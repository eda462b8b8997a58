//! The deterministic part of the semantics: everything except sampling.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::compile::{CFormula, CStmt, CTerm, Program, Slot};
use super::trace::Event;
use super::{Fault, FaultKind, Outcome, Site};
use crate::formula::{apply_arith, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Regions checked on entry; aborts terminate prematurely.
    Coverage,
    /// Regions ignored; callee preconditions checked at every call and
    /// postconditions at every exit.
    Correctness,
    /// Errors of one top-level activation only: its direct callees'
    /// preconditions, its own postcondition and aborts. Callee bodies run
    /// for their effects without any checks.
    Region,
}

/// How a statement sequence ended.
pub(crate) enum Flow<T> {
    Continue(T),
    Stop(Outcome),
    /// Region mode: a callee aborted, which is not an error of the service
    /// under analysis.
    Halt,
}

pub(crate) struct Exec<'p> {
    pub prog: &'p Program,
    pub mode: Mode,
    pub tracked: Option<usize>,
    pub entered: bool,
    pub events: Option<Vec<Event>>,
}

fn eval_term(t: &CTerm, g: &[BigInt], f: &[BigInt]) -> Result<BigInt, EvalError> {
    match t {
        CTerm::Int(v) => Ok(v.clone()),
        CTerm::Var(Slot::Global(i)) => Ok(g[*i].clone()),
        CTerm::Var(Slot::Frame(i)) => Ok(f[*i].clone()),
        CTerm::Neg(i) => Ok(-eval_term(i, g, f)?),
        CTerm::Bin(op, l, r) => apply_arith(*op, eval_term(l, g, f)?, eval_term(r, g, f)?),
    }
}

pub(crate) fn eval_formula(c: &CFormula, g: &[BigInt], f: &[BigInt]) -> Result<bool, EvalError> {
    Ok(match c {
        CFormula::Bool(b) => *b,
        CFormula::Cmp(op, l, r) => op.holds(&eval_term(l, g, f)?, &eval_term(r, g, f)?),
        CFormula::Not(i) => !eval_formula(i, g, f)?,
        CFormula::And(ps) => {
            for p in ps {
                if !eval_formula(p, g, f)? {
                    return Ok(false);
                }
            }
            true
        }
        CFormula::Or(ps) => {
            for p in ps {
                if eval_formula(p, g, f)? {
                    return Ok(true);
                }
            }
            false
        }
        CFormula::Implies(l, r) => !eval_formula(l, g, f)? || eval_formula(r, g, f)?,
    })
}

impl<'p> Exec<'p> {
    pub(crate) fn new(prog: &'p Program, mode: Mode) -> Self {
        Exec { prog, mode, tracked: None, entered: false, events: None }
    }

    fn fault(&self, kind: FaultKind, site: Site) -> Fault {
        Fault { kind, site, trace: self.events.clone().unwrap_or_default() }
    }

    fn eval_err(&self, e: EvalError, site: &Site) -> Fault {
        self.fault(FaultKind::Evaluation(e), site.clone())
    }

    fn store(&mut self, slot: Slot, value: BigInt, g: &mut [BigInt], f: &mut [BigInt]) {
        match slot {
            Slot::Global(i) => {
                if let Some(ev) = &mut self.events {
                    ev.push(Event::Assign { var: self.prog.globals[i].clone(), value: value.clone() });
                }
                g[i] = value;
            }
            Slot::Frame(i) => f[i] = value,
        }
    }

    /// Runs one non-sampling statement of the profile.
    pub(crate) fn profile_stmt(&mut self, s: &CStmt, g: &mut [BigInt]) -> Result<Flow<()>, Fault> {
        let site = Site::Profile;
        if !eval_formula(s.guard(), g, &[]).map_err(|e| self.eval_err(e, &site))? {
            return Ok(Flow::Continue(()));
        }
        match s {
            CStmt::Assign { target, value, .. } => {
                let v = eval_term(value, g, &[]).map_err(|e| self.eval_err(e, &site))?;
                self.store(*target, v, g, &mut []);
                Ok(Flow::Continue(()))
            }
            CStmt::Abort { .. } => {
                self.push(Event::Premature { site: Site::Profile });
                Ok(Flow::Stop(Outcome::Premature(Site::Profile)))
            }
            CStmt::Call { target, service, args, .. } => {
                let mut frame = Vec::with_capacity(args.len() + 1);
                for a in args {
                    frame.push(eval_term(a, g, &[]).map_err(|e| self.eval_err(e, &site))?);
                }
                frame.push(BigInt::default());
                let callee = &self.prog.services[*service];
                let pre = eval_formula(&callee.pre, g, &frame)
                    .map_err(|e| self.eval_err(e, &Site::Service(callee.r.clone())))?;
                if !pre {
                    return Err(self.fault(
                        FaultKind::ProfileContractViolation { service: callee.r.clone() },
                        site,
                    ));
                }
                match self.activate(*service, frame, g, 0)? {
                    Flow::Continue(v) => {
                        if let Some(t) = target {
                            self.store(*t, v, g, &mut []);
                        }
                        Ok(Flow::Continue(()))
                    }
                    Flow::Stop(o) => Ok(Flow::Stop(o)),
                    Flow::Halt => Ok(Flow::Halt),
                }
            }
            CStmt::Sample { .. } => unreachable!("samples are resolved by the caller"),
        }
    }

    fn push(&mut self, e: Event) {
        if let Some(ev) = &mut self.events {
            ev.push(e);
        }
    }

    fn checks_here(&self, depth: usize) -> bool {
        match self.mode {
            Mode::Coverage => false,
            Mode::Correctness => true,
            Mode::Region => depth == 0,
        }
    }

    /// Runs an activation of service `sid` with the given frame (arguments
    /// followed by the `result` slot). `depth` is 0 for the outermost call.
    pub(crate) fn activate(
        &mut self,
        sid: usize,
        mut frame: Vec<BigInt>,
        g: &mut [BigInt],
        depth: usize,
    ) -> Result<Flow<BigInt>, Fault> {
        let prog = self.prog;
        let svc = &prog.services[sid];
        let site = Site::Service(svc.r.clone());
        if self.tracked == Some(sid) {
            self.entered = true;
        }
        self.push(Event::Enter { service: svc.r.clone(), args: frame[..svc.arity].to_vec() });
        if self.mode == Mode::Coverage
            && !eval_formula(&svc.cov, g, &frame).map_err(|e| self.eval_err(e, &site))?
        {
            self.push(Event::Premature { site: site.clone() });
            return Ok(Flow::Stop(Outcome::Premature(site)));
        }
        for s in &svc.body {
            if !eval_formula(s.guard(), g, &frame).map_err(|e| self.eval_err(e, &site))? {
                continue;
            }
            match s {
                CStmt::Assign { target, value, .. } => {
                    let v = eval_term(value, g, &frame).map_err(|e| self.eval_err(e, &site))?;
                    self.store(*target, v, g, &mut frame);
                }
                CStmt::Abort { .. } => {
                    if self.mode == Mode::Region && depth > 0 {
                        return Ok(Flow::Halt);
                    }
                    self.push(Event::Premature { site: site.clone() });
                    return Ok(Flow::Stop(Outcome::Premature(site)));
                }
                CStmt::Call { target, service, args, .. } => {
                    let mut callee_frame = Vec::with_capacity(args.len() + 1);
                    for a in args {
                        callee_frame
                            .push(eval_term(a, g, &frame).map_err(|e| self.eval_err(e, &site))?);
                    }
                    callee_frame.push(BigInt::default());
                    if self.checks_here(depth) {
                        let callee = &prog.services[*service];
                        let ok = eval_formula(&callee.pre, g, &callee_frame)
                            .map_err(|e| self.eval_err(e, &site))?;
                        if !ok {
                            let o = Outcome::PreViolation {
                                caller: svc.r.clone(),
                                callee: callee.r.clone(),
                            };
                            self.push(Event::ContractError(o.clone()));
                            return Ok(Flow::Stop(o));
                        }
                    }
                    match self.activate(*service, callee_frame, g, depth + 1)? {
                        Flow::Continue(v) => {
                            if let Some(t) = target {
                                self.store(*t, v, g, &mut frame);
                            }
                        }
                        other => return Ok(other),
                    }
                }
                CStmt::Sample { .. } => unreachable!("rejected at compile time"),
            }
        }
        if self.checks_here(depth)
            && !eval_formula(&svc.post, g, &frame).map_err(|e| self.eval_err(e, &site))?
        {
            let o = Outcome::PostViolation(svc.r.clone());
            self.push(Event::ContractError(o.clone()));
            return Ok(Flow::Stop(o));
        }
        let result = frame.pop().expect("result slot");
        self.push(Event::Return { service: svc.r.clone(), result: result.clone() });
        Ok(Flow::Continue(result))
    }
}

/// Error cost charged for a non-normal outcome.
pub(crate) fn outcome_cost(prog: &Program, o: &Outcome) -> BigRational {
    let site = match o {
        Outcome::Normal => return BigRational::default(),
        Outcome::Premature(Site::Profile) => return BigRational::from_integer(1.into()),
        Outcome::Premature(Site::Service(r)) | Outcome::PostViolation(r) => r,
        Outcome::PreViolation { caller, .. } => caller,
    };
    prog.services
        .iter()
        .find(|s| &s.r == site)
        .map(|s| s.cost.clone())
        .unwrap_or_default()
}
