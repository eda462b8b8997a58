//! Exact enumeration with rational arithmetic.
//!
//! The default strategy walks the profile one statement at a time and keeps
//! a table from program state to accumulated probability. Variables that
//! can no longer be read are reset before states are merged, so sampled
//! inputs stop multiplying the table once they are consumed. Because
//! services are deterministic this gives the same sums as a plain
//! depth-first walk of the trace tree, which is kept as a reference.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::compile::{CStmt, Program, Slot};
use super::exec::{eval_formula, outcome_cost, Exec, Flow, Mode};
use super::trace::{check_inputs, Event};
use super::{AnalysisMode, EngineError, Fault, FaultKind, Outcome, Site};
use crate::model::{ServiceRef, SystemModel, UsageProfile};

pub const DEFAULT_BRANCH_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Statement-by-statement with state merging.
    #[default]
    Merged,
    /// Plain depth-first enumeration of every trace.
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactOptions {
    /// Maximum number of executed (state, statement) steps and sample
    /// branches.
    pub budget: u64,
    pub strategy: Strategy,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self { budget: DEFAULT_BRANCH_BUDGET, strategy: Strategy::Merged }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactResult {
    pub mode: AnalysisMode,
    /// Mass of traces that end normally: the coverage probability in
    /// coverage mode, the correctness probability in correctness mode.
    pub probability: BigRational,
    /// Mass of every non-normal outcome. Together with `probability` the
    /// masses sum to exactly one.
    pub outcomes: BTreeMap<Outcome, BigRational>,
    pub traces: BigUint,
    pub branches: u64,
}

#[derive(Default)]
struct Tally {
    normal: BigRational,
    outcomes: BTreeMap<Outcome, BigRational>,
    entered: BigRational,
    traces: BigUint,
    branches: u64,
}

impl Tally {
    fn stop(&mut self, o: Outcome, w: &BigRational, n: &BigUint, entered: bool) {
        *self.outcomes.entry(o).or_insert_with(BigRational::zero) += w;
        self.traces += n;
        if entered {
            self.entered += w;
        }
    }

    fn finish(&mut self, w: &BigRational, n: &BigUint, entered: bool) {
        self.normal += w;
        self.traces += n;
        if entered {
            self.entered += w;
        }
    }

    fn step(&mut self, k: u64, budget: u64) -> Result<(), EngineError> {
        self.branches += k;
        if self.branches > budget {
            return Err(EngineError::BranchBudgetExceeded { budget });
        }
        Ok(())
    }
}

fn fault_at_guard(e: crate::formula::EvalError) -> EngineError {
    EngineError::Fault(Box::new(Fault {
        kind: FaultKind::Evaluation(e),
        site: Site::Profile,
        trace: Vec::new(),
    }))
}

type Key = (Vec<BigInt>, bool);

fn merged(prog: &Program, mode: Mode, tracked: Option<usize>, budget: u64) -> Result<Tally, EngineError> {
    let mut tally = Tally::default();
    let mut cur: HashMap<Key, (BigRational, BigUint)> = HashMap::new();
    cur.insert((prog.initial.clone(), false), (BigRational::one(), BigUint::one()));
    for (i, s) in prog.main.iter().enumerate() {
        let live = &prog.live_after[i];
        let mut next: HashMap<Key, (BigRational, BigUint)> = HashMap::with_capacity(cur.len());
        let mut push = |mut g: Vec<BigInt>, entered: bool, w: BigRational, n: &BigUint| {
            for (v, l) in g.iter_mut().zip(live) {
                if !l && !v.is_zero() {
                    *v = BigInt::zero();
                }
            }
            let slot = next.entry((g, entered)).or_insert_with(|| (BigRational::zero(), BigUint::zero()));
            slot.0 += w;
            slot.1 += n;
        };
        for ((g, entered), (w, n)) in cur.drain() {
            match s {
                CStmt::Sample { guard, target: Slot::Global(t), pmf } => {
                    if !eval_formula(guard, &g, &[]).map_err(fault_at_guard)? {
                        tally.step(1, budget)?;
                        push(g, entered, w, &n);
                        continue;
                    }
                    tally.step(pmf.len() as u64, budget)?;
                    for (v, m) in pmf.entries() {
                        let mut g2 = g.clone();
                        g2[*t] = v.clone();
                        push(g2, entered, &w * m, &n);
                    }
                }
                _ => {
                    tally.step(1, budget)?;
                    let mut exec = Exec::new(prog, mode);
                    exec.tracked = tracked;
                    exec.entered = entered;
                    let mut g = g;
                    match exec.profile_stmt(s, &mut g).map_err(|f| EngineError::Fault(Box::new(f)))? {
                        Flow::Continue(()) => push(g, exec.entered, w, &n),
                        Flow::Stop(o) => tally.stop(o, &w, &n, exec.entered),
                        Flow::Halt => unreachable!("no region mode in profiles"),
                    }
                }
            }
        }
        cur = next;
    }
    for ((_, entered), (w, n)) in cur {
        tally.finish(&w, &n, entered);
    }
    Ok(tally)
}

struct Dfs<'p> {
    prog: &'p Program,
    mode: Mode,
    tracked: Option<usize>,
    budget: u64,
    record: bool,
    tally: Tally,
}

impl Dfs<'_> {
    fn run(
        &mut self,
        i: usize,
        g: Vec<BigInt>,
        w: BigRational,
        entered: bool,
        events: Vec<Event>,
    ) -> Result<(), EngineError> {
        let one = BigUint::one();
        let Some(s) = self.prog.main.get(i) else {
            self.tally.finish(&w, &one, entered);
            return Ok(());
        };
        if let CStmt::Sample { guard, target: Slot::Global(t), pmf } = s {
            let pass = eval_formula(guard, &g, &[]).map_err(|e| {
                EngineError::Fault(Box::new(Fault {
                    kind: FaultKind::Evaluation(e),
                    site: Site::Profile,
                    trace: events.clone(),
                }))
            })?;
            if !pass {
                self.tally.step(1, self.budget)?;
                return self.run(i + 1, g, w, entered, events);
            }
            self.tally.step(pmf.len() as u64, self.budget)?;
            for (v, m) in pmf.entries() {
                let mut g2 = g.clone();
                g2[*t] = v.clone();
                let mut ev = events.clone();
                if self.record {
                    ev.push(Event::Sample {
                        var: self.prog.globals[*t].clone(),
                        value: v.clone(),
                        mass: m.clone(),
                    });
                }
                self.run(i + 1, g2, &w * m, entered, ev)?;
            }
            return Ok(());
        }
        self.tally.step(1, self.budget)?;
        let mut exec = Exec::new(self.prog, self.mode);
        exec.tracked = self.tracked;
        exec.entered = entered;
        if self.record {
            exec.events = Some(events);
        }
        let mut g = g;
        let flow = exec.profile_stmt(s, &mut g).map_err(|f| EngineError::Fault(Box::new(f)))?;
        match flow {
            Flow::Continue(()) => {
                let ev = exec.events.take().unwrap_or_default();
                self.run(i + 1, g, w, exec.entered, ev)
            }
            Flow::Stop(o) => {
                self.tally.stop(o, &w, &one, exec.entered);
                Ok(())
            }
            Flow::Halt => unreachable!("no region mode in profiles"),
        }
    }
}

fn depth_first(
    prog: &Program,
    mode: Mode,
    tracked: Option<usize>,
    budget: u64,
    record: bool,
) -> Result<Tally, EngineError> {
    let mut dfs = Dfs { prog, mode, tracked, budget, record, tally: Tally::default() };
    dfs.run(0, prog.initial.clone(), BigRational::one(), false, Vec::new())?;
    Ok(dfs.tally)
}

fn enumerate(
    prog: &Program,
    mode: Mode,
    tracked: Option<usize>,
    opts: &ExactOptions,
) -> Result<Tally, EngineError> {
    let result = match opts.strategy {
        Strategy::Merged => merged(prog, mode, tracked, opts.budget),
        Strategy::DepthFirst => depth_first(prog, mode, tracked, opts.budget, false),
    };
    match result {
        // Replay depth-first with event recording so that the fault comes
        // with the first offending trace in enumeration order.
        Err(EngineError::Fault(f)) => match depth_first(prog, mode, tracked, opts.budget, true) {
            Err(EngineError::Fault(traced)) => Err(EngineError::Fault(traced)),
            _ => Err(EngineError::Fault(f)),
        },
        other => other,
    }
}

fn prepare(model: &SystemModel, profile: &UsageProfile) -> Result<Program, EngineError> {
    check_inputs(model, profile)?;
    Program::compile(model, profile)
}

/// Exact analysis in the given mode.
pub fn exact_with(
    model: &SystemModel,
    profile: &UsageProfile,
    mode: AnalysisMode,
    opts: &ExactOptions,
) -> Result<ExactResult, EngineError> {
    let prog = prepare(model, profile)?;
    let t = enumerate(&prog, mode.into(), None, opts)?;
    Ok(ExactResult {
        mode,
        probability: t.normal,
        outcomes: t.outcomes,
        traces: t.traces,
        branches: t.branches,
    })
}

/// Probability that no service is entered outside its coverage region and
/// no `abort` executes.
pub fn exact_coverage(model: &SystemModel, profile: &UsageProfile) -> Result<ExactResult, EngineError> {
    exact_with(model, profile, AnalysisMode::Coverage, &ExactOptions::default())
}

/// Probability that no precondition is violated at a call, no
/// postcondition is violated at an exit, and no `abort` executes.
pub fn exact_correctness(
    model: &SystemModel,
    profile: &UsageProfile,
) -> Result<ExactResult, EngineError> {
    exact_with(model, profile, AnalysisMode::Correctness, &ExactOptions::default())
}

/// Probability that `service` is entered at least once, under coverage
/// semantics.
pub fn call_probability(
    model: &SystemModel,
    profile: &UsageProfile,
    service: &ServiceRef,
) -> Result<BigRational, EngineError> {
    call_probability_with(model, profile, service, &ExactOptions::default())
}

pub fn call_probability_with(
    model: &SystemModel,
    profile: &UsageProfile,
    service: &ServiceRef,
    opts: &ExactOptions,
) -> Result<BigRational, EngineError> {
    let prog = prepare(model, profile)?;
    let sid = prog
        .service_index(service)
        .ok_or_else(|| EngineError::InvalidArgument(format!("unknown service `{service}`")))?;
    Ok(enumerate(&prog, Mode::Coverage, Some(sid), opts)?.entered)
}

/// Sum over prematurely terminating traces of their probability times the
/// error cost of the service where they stopped. Aborts in the profile
/// itself cost 1.
pub fn expected_error_cost(
    model: &SystemModel,
    profile: &UsageProfile,
) -> Result<BigRational, EngineError> {
    expected_error_cost_with(model, profile, &ExactOptions::default())
}

pub fn expected_error_cost_with(
    model: &SystemModel,
    profile: &UsageProfile,
    opts: &ExactOptions,
) -> Result<BigRational, EngineError> {
    let prog = prepare(model, profile)?;
    let t = enumerate(&prog, Mode::Coverage, None, opts)?;
    Ok(t.outcomes.iter().map(|(o, m)| outcome_cost(&prog, o) * m).sum())
}
