//! Name resolution into slot-indexed form, plus the read sets and liveness
//! information the enumerator uses to merge states.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;

use super::EngineError;
use crate::formula::{ArithOp, CmpOp, Formula, Term};
use crate::model::{
    unroll, Initializer, Pmf, Resolved, ServiceRef, Stmt, SystemModel, UsageProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Slot {
    Global(usize),
    /// Parameter index, or `params.len()` for `result`.
    Frame(usize),
}

#[derive(Debug, Clone)]
pub(crate) enum CTerm {
    Int(BigInt),
    Var(Slot),
    Neg(Box<CTerm>),
    Bin(ArithOp, Box<CTerm>, Box<CTerm>),
}

#[derive(Debug, Clone)]
pub(crate) enum CFormula {
    Bool(bool),
    Cmp(CmpOp, CTerm, CTerm),
    Not(Box<CFormula>),
    And(Vec<CFormula>),
    Or(Vec<CFormula>),
    Implies(Box<CFormula>, Box<CFormula>),
}

#[derive(Debug, Clone)]
pub(crate) enum CStmt {
    Assign { guard: CFormula, target: Slot, value: CTerm },
    Call { guard: CFormula, target: Option<Slot>, service: usize, args: Vec<CTerm> },
    Abort { guard: CFormula },
    Sample { guard: CFormula, target: Slot, pmf: Pmf },
}

impl CStmt {
    pub(crate) fn guard(&self) -> &CFormula {
        match self {
            CStmt::Assign { guard, .. }
            | CStmt::Call { guard, .. }
            | CStmt::Abort { guard }
            | CStmt::Sample { guard, .. } => guard,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CService {
    pub r: ServiceRef,
    pub arity: usize,
    pub pre: CFormula,
    pub post: CFormula,
    pub cov: CFormula,
    pub cost: BigRational,
    pub body: Vec<CStmt>,
}

/// A model and profile compiled together. Globals are the state variables
/// (sorted by qualified name) followed by the profile variables.
#[derive(Debug, Clone)]
pub(crate) struct Program {
    pub globals: Vec<String>,
    pub initial: Vec<BigInt>,
    pub services: Vec<CService>,
    /// Initializer samples for distributed state variables, then the
    /// unrolled profile.
    pub main: Vec<CStmt>,
    /// Transitive global read set of each service.
    pub reads: Vec<BTreeSet<usize>>,
    /// `live_after[i][g]`: global `g` may be read after `main[i]` runs.
    pub live_after: Vec<Vec<bool>>,
}

struct Scope<'a> {
    model: &'a SystemModel,
    service: Option<&'a ServiceRef>,
    index: &'a BTreeMap<String, usize>,
}

impl Scope<'_> {
    fn slot(&self, name: &str) -> Result<Slot, EngineError> {
        let res = match self.service {
            Some(s) => self.model.resolve_in_service(s, name),
            None => self.model.resolve_in_profile(name),
        };
        let unknown = || EngineError::InvalidModel(format!("cannot resolve `{name}`"));
        match res.map_err(|e| EngineError::InvalidModel(e.to_string()))? {
            Resolved::Param(i) => Ok(Slot::Frame(i)),
            Resolved::Result => {
                let s = self.model.service(self.service.ok_or_else(unknown)?).ok_or_else(unknown)?;
                Ok(Slot::Frame(s.params.len()))
            }
            Resolved::State(q) | Resolved::Local(q) => {
                self.index.get(&q).map(|&i| Slot::Global(i)).ok_or_else(unknown)
            }
        }
    }

    fn term(&self, t: &Term) -> Result<CTerm, EngineError> {
        Ok(match t {
            Term::Int(v) => CTerm::Int(v.clone()),
            Term::Var(n) => CTerm::Var(self.slot(n)?),
            Term::Neg(inner) => CTerm::Neg(Box::new(self.term(inner)?)),
            Term::Bin(op, l, r) => CTerm::Bin(*op, Box::new(self.term(l)?), Box::new(self.term(r)?)),
        })
    }

    fn formula(&self, f: &Formula) -> Result<CFormula, EngineError> {
        Ok(match f {
            Formula::Bool(b) => CFormula::Bool(*b),
            Formula::Cmp(op, l, r) => CFormula::Cmp(*op, self.term(l)?, self.term(r)?),
            Formula::Not(inner) => CFormula::Not(Box::new(self.formula(inner)?)),
            Formula::And(ps) => CFormula::And(ps.iter().map(|p| self.formula(p)).collect::<Result<_, _>>()?),
            Formula::Or(ps) => CFormula::Or(ps.iter().map(|p| self.formula(p)).collect::<Result<_, _>>()?),
            Formula::Implies(l, r) => {
                CFormula::Implies(Box::new(self.formula(l)?), Box::new(self.formula(r)?))
            }
        })
    }

    fn stmts(&self, body: &[Stmt], sids: &BTreeMap<ServiceRef, usize>) -> Result<Vec<CStmt>, EngineError> {
        let mut out = Vec::new();
        for s in unroll(body) {
            out.push(match &s {
                Stmt::Assign { guard, target, value } => CStmt::Assign {
                    guard: self.formula(guard)?,
                    target: self.slot(target)?,
                    value: self.term(value)?,
                },
                Stmt::Call { guard, target, service, args } => CStmt::Call {
                    guard: self.formula(guard)?,
                    target: target.as_deref().map(|t| self.slot(t)).transpose()?,
                    service: *sids.get(service).ok_or_else(|| {
                        EngineError::InvalidModel(format!("unknown service `{service}`"))
                    })?,
                    args: args.iter().map(|a| self.term(a)).collect::<Result<_, _>>()?,
                },
                Stmt::Abort { guard } => CStmt::Abort { guard: self.formula(guard)? },
                Stmt::Sample { guard, target, dist } => {
                    if self.service.is_some() {
                        return Err(EngineError::InvalidModel(
                            "probabilistic assignment inside a service".into(),
                        ));
                    }
                    CStmt::Sample {
                        guard: self.formula(guard)?,
                        target: self.slot(target)?,
                        pmf: dist.pmf().clone(),
                    }
                }
                Stmt::Repeat { .. } => unreachable!("unrolled"),
            });
        }
        Ok(out)
    }
}

/// Compiles a formula in the scope of `service` against an existing
/// global layout.
pub(crate) fn compile_formula(
    model: &SystemModel,
    service: &ServiceRef,
    globals: &[String],
    f: &Formula,
) -> Result<CFormula, EngineError> {
    let index: BTreeMap<String, usize> =
        globals.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    Scope { model, service: Some(service), index: &index }.formula(f)
}

fn profile_locals(model: &SystemModel, profile: &UsageProfile, out: &mut BTreeSet<String>) {
    let mut names = BTreeSet::new();
    for s in unroll(&profile.body) {
        if let Some(g) = s.guard() {
            names.extend(g.free_vars());
        }
        match &s {
            Stmt::Assign { target, value, .. } => {
                names.insert(target.clone());
                let mut v = BTreeSet::new();
                value.collect_vars(&mut v);
                names.extend(v.into_iter().map(str::to_owned));
            }
            Stmt::Call { target, args, .. } => {
                names.extend(target.iter().cloned());
                for a in args {
                    let mut v = BTreeSet::new();
                    a.collect_vars(&mut v);
                    names.extend(v.into_iter().map(str::to_owned));
                }
            }
            Stmt::Sample { target, .. } => {
                names.insert(target.clone());
            }
            _ => {}
        }
    }
    for n in names {
        if let Ok(Resolved::Local(l)) = model.resolve_in_profile(&n) {
            out.insert(l);
        }
    }
}

fn term_reads(t: &CTerm, out: &mut BTreeSet<usize>) {
    match t {
        CTerm::Int(_) => {}
        CTerm::Var(Slot::Global(g)) => {
            out.insert(*g);
        }
        CTerm::Var(Slot::Frame(_)) => {}
        CTerm::Neg(i) => term_reads(i, out),
        CTerm::Bin(_, l, r) => {
            term_reads(l, out);
            term_reads(r, out);
        }
    }
}

pub(crate) fn formula_reads(f: &CFormula, out: &mut BTreeSet<usize>) {
    match f {
        CFormula::Bool(_) => {}
        CFormula::Cmp(_, l, r) => {
            term_reads(l, out);
            term_reads(r, out);
        }
        CFormula::Not(i) => formula_reads(i, out),
        CFormula::And(ps) | CFormula::Or(ps) => ps.iter().for_each(|p| formula_reads(p, out)),
        CFormula::Implies(l, r) => {
            formula_reads(l, out);
            formula_reads(r, out);
        }
    }
}

/// Globals read directly by a statement (guard, value, arguments), not
/// counting what a callee reads.
fn stmt_reads(s: &CStmt, out: &mut BTreeSet<usize>) {
    formula_reads(s.guard(), out);
    match s {
        CStmt::Assign { value, .. } => term_reads(value, out),
        CStmt::Call { args, .. } => args.iter().for_each(|a| term_reads(a, out)),
        _ => {}
    }
}

fn transitive_reads(services: &[CService]) -> Vec<BTreeSet<usize>> {
    fn visit(i: usize, services: &[CService], memo: &mut Vec<Option<BTreeSet<usize>>>) {
        if memo[i].is_some() {
            return;
        }
        // Mark in progress so that a (rejected) cycle cannot loop forever.
        memo[i] = Some(BTreeSet::new());
        let s = &services[i];
        let mut out = BTreeSet::new();
        formula_reads(&s.pre, &mut out);
        formula_reads(&s.post, &mut out);
        formula_reads(&s.cov, &mut out);
        for st in &s.body {
            stmt_reads(st, &mut out);
            if let CStmt::Call { service, .. } = st {
                visit(*service, services, memo);
                out.extend(memo[*service].as_ref().unwrap().iter().copied());
            }
        }
        memo[i] = Some(out);
    }
    let mut memo = vec![None; services.len()];
    for i in 0..services.len() {
        visit(i, services, &mut memo);
    }
    memo.into_iter().map(Option::unwrap).collect()
}

fn liveness(main: &[CStmt], reads: &[BTreeSet<usize>], globals: usize) -> Vec<Vec<bool>> {
    let mut live = vec![false; globals];
    let mut out = vec![Vec::new(); main.len()];
    for (i, s) in main.iter().enumerate().rev() {
        out[i] = live.clone();
        let unconditional = matches!(s.guard(), CFormula::Bool(true));
        let killed = match s {
            CStmt::Assign { target: Slot::Global(g), .. }
            | CStmt::Sample { target: Slot::Global(g), .. }
            | CStmt::Call { target: Some(Slot::Global(g)), .. }
                if unconditional =>
            {
                Some(*g)
            }
            _ => None,
        };
        if let Some(g) = killed {
            live[g] = false;
        }
        let mut gen = BTreeSet::new();
        stmt_reads(s, &mut gen);
        if let CStmt::Call { service, .. } = s {
            gen.extend(reads[*service].iter().copied());
        }
        for g in gen {
            live[g] = true;
        }
    }
    out
}

impl Program {
    pub(crate) fn compile(model: &SystemModel, profile: &UsageProfile) -> Result<Program, EngineError> {
        let mut globals: Vec<String> = model.state_vars().into_iter().map(|(q, _)| q).collect();
        let mut locals = BTreeSet::new();
        profile_locals(model, profile, &mut locals);
        globals.extend(locals);
        let index: BTreeMap<String, usize> =
            globals.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

        let refs: Vec<ServiceRef> = model.services().map(|(r, _)| r).collect();
        let sids: BTreeMap<ServiceRef, usize> =
            refs.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        let mut services = Vec::with_capacity(refs.len());
        for r in &refs {
            let s = model.service(r).expect("listed");
            let scope = Scope { model, service: Some(r), index: &index };
            services.push(CService {
                r: r.clone(),
                arity: s.params.len(),
                pre: scope.formula(&s.pre)?,
                post: scope.formula(&s.post)?,
                cov: scope.formula(&s.cov)?,
                cost: s.cost.clone(),
                body: scope.stmts(&s.body, &sids)?,
            });
        }

        let mut initial = vec![BigInt::default(); globals.len()];
        let mut main = Vec::new();
        for (q, v) in model.state_vars() {
            let g = index[&q];
            match &v.init {
                Initializer::Const(k) => initial[g] = k.clone(),
                Initializer::Dist(d) => main.push(CStmt::Sample {
                    guard: CFormula::Bool(true),
                    target: Slot::Global(g),
                    pmf: d.pmf().clone(),
                }),
            }
        }
        let scope = Scope { model, service: None, index: &index };
        main.extend(scope.stmts(&profile.body, &sids)?);
        for s in &main {
            if let CStmt::Call { service, args, .. } = s {
                if services[*service].arity != args.len() {
                    return Err(EngineError::InvalidModel(format!(
                        "wrong number of arguments for `{}`",
                        services[*service].r
                    )));
                }
            }
        }
        for svc in &services {
            for s in &svc.body {
                if let CStmt::Call { service, args, .. } = s {
                    if services[*service].arity != args.len() {
                        return Err(EngineError::InvalidModel(format!(
                            "wrong number of arguments for `{}`",
                            services[*service].r
                        )));
                    }
                }
            }
        }
        let reads = transitive_reads(&services);
        let live_after = liveness(&main, &reads, globals.len());
        Ok(Program { globals, initial, services, main, reads, live_after })
    }

    pub(crate) fn service_index(&self, r: &ServiceRef) -> Option<usize> {
        self.services.iter().position(|s| &s.r == r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_model, parse_profile};

    #[test]
    fn sampled_inputs_die_after_their_last_read() {
        let m = parse_model(
            "component N { state int load = 0;
               service add(int n) { load = load + n; }
               service use(int n) covered n <= load { load = load - n; } }",
        )
        .unwrap();
        let p = parse_profile(
            "profile p { repeat 2 { w ~ uniform(0, 3); d ~ uniform(0, 3); N.add(w); N.use(d); } }",
        )
        .unwrap();
        let prog = Program::compile(&m, &p).unwrap();
        assert_eq!(prog.globals, vec!["N.load", "d", "w"]);
        let (load, d, w) = (0, 1, 2);
        // After `N.add(w)` in the first round, `w` is dead but `d` is live.
        assert!(!prog.live_after[2][w]);
        assert!(prog.live_after[2][d]);
        assert!(prog.live_after[2][load]);
        // Nothing is live at the very end.
        assert!(prog.live_after.last().unwrap().iter().all(|l| !l));
    }

    #[test]
    fn distributed_initializers_become_leading_samples() {
        let m = parse_model("component A { state int x = uniform(1, 2); service f() { } }").unwrap();
        let p = parse_profile("profile p { A.f(); }").unwrap();
        let prog = Program::compile(&m, &p).unwrap();
        assert!(matches!(prog.main[0], CStmt::Sample { target: Slot::Global(0), .. }));
        assert_eq!(prog.main.len(), 2);
    }
}
