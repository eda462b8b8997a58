//! Conjunctive normal form and projection.
//!
//! Conversion is plain negation-normal-form followed by distribution of
//! disjunction over conjunction. Atoms are kept syntactically intact so that
//! projection can drop them by the variables they mention.

use std::collections::BTreeSet;
use std::fmt;

use super::{CmpOp, Formula, FormulaError, Term};

/// Default clause budget for [`to_cnf`].
pub const DEFAULT_CLAUSE_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Bool(bool),
    Cmp(CmpOp, Term, Term),
}

impl Atom {
    fn mentions_only(&self, vars: &BTreeSet<String>) -> bool {
        match self {
            Atom::Bool(_) => true,
            Atom::Cmp(_, lhs, rhs) => {
                let mut used = BTreeSet::new();
                lhs.collect_vars(&mut used);
                rhs.collect_vars(&mut used);
                used.iter().all(|v| vars.contains(*v))
            }
        }
    }

    fn to_formula(&self) -> Formula {
        match self {
            Atom::Bool(b) => Formula::Bool(*b),
            Atom::Cmp(op, lhs, rhs) => Formula::Cmp(*op, lhs.clone(), rhs.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub negated: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn to_formula(&self) -> Formula {
        let f = self.atom.to_formula();
        if self.negated {
            Formula::not(f)
        } else {
            f
        }
    }

    fn complement(&self) -> Literal {
        Literal { negated: !self.negated, atom: self.atom.clone() }
    }
}

/// A disjunction of literals; the empty clause is `false`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause(pub Vec<Literal>);

/// A conjunction of clauses; no clauses means `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CnfFormula {
    pub clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn to_formula(&self) -> Formula {
        Formula::and(
            self.clauses
                .iter()
                .map(|c| Formula::or(c.0.iter().map(Literal::to_formula).collect()))
                .collect(),
        )
    }

    pub fn is_true(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn is_false(&self) -> bool {
        self.clauses.iter().any(|c| c.0.is_empty())
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

enum Nnf {
    Lit(Literal),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

fn nnf(f: &Formula, negate: bool) -> Nnf {
    match f {
        Formula::Bool(b) => Nnf::Lit(Literal { negated: false, atom: Atom::Bool(*b != negate) }),
        Formula::Cmp(op, lhs, rhs) => Nnf::Lit(Literal {
            negated: negate,
            atom: Atom::Cmp(*op, lhs.clone(), rhs.clone()),
        }),
        Formula::Not(inner) => nnf(inner, !negate),
        Formula::And(parts) if !negate => Nnf::And(parts.iter().map(|p| nnf(p, false)).collect()),
        Formula::And(parts) => Nnf::Or(parts.iter().map(|p| nnf(p, true)).collect()),
        Formula::Or(parts) if !negate => Nnf::Or(parts.iter().map(|p| nnf(p, false)).collect()),
        Formula::Or(parts) => Nnf::And(parts.iter().map(|p| nnf(p, true)).collect()),
        Formula::Implies(lhs, rhs) if !negate => Nnf::Or(vec![nnf(lhs, true), nnf(rhs, false)]),
        Formula::Implies(lhs, rhs) => Nnf::And(vec![nnf(lhs, false), nnf(rhs, true)]),
    }
}

/// Normalizes a clause: drops `false` literals and duplicates. Returns `None`
/// for tautologies (`true` literal or a complementary pair).
fn normalize_clause(lits: Vec<Literal>) -> Option<Clause> {
    let mut out: Vec<Literal> = Vec::with_capacity(lits.len());
    for lit in lits {
        match lit.atom {
            Atom::Bool(true) => return None,
            Atom::Bool(false) => continue,
            _ => {}
        }
        if out.contains(&lit.complement()) {
            return None;
        }
        if !out.contains(&lit) {
            out.push(lit);
        }
    }
    Some(Clause(out))
}

fn push_clause(acc: &mut Vec<Clause>, clause: Clause) {
    if !acc.contains(&clause) {
        acc.push(clause);
    }
}

fn cnf_of(n: Nnf, cap: usize) -> Result<Vec<Clause>, FormulaError> {
    match n {
        Nnf::Lit(lit) => Ok(normalize_clause(vec![lit]).into_iter().collect()),
        Nnf::And(parts) => {
            let mut acc = Vec::new();
            for p in parts {
                for c in cnf_of(p, cap)? {
                    push_clause(&mut acc, c);
                }
                if acc.len() > cap {
                    return Err(FormulaError::SizeBudgetExceeded { cap });
                }
            }
            Ok(acc)
        }
        Nnf::Or(parts) => {
            // Start from the CNF of `false`: a single empty clause.
            let mut acc = vec![Clause::default()];
            for p in parts {
                let rhs = cnf_of(p, cap)?;
                if acc.len().saturating_mul(rhs.len()) > cap {
                    return Err(FormulaError::SizeBudgetExceeded { cap });
                }
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for a in &acc {
                    for b in &rhs {
                        let lits = a.0.iter().chain(b.0.iter()).cloned().collect();
                        if let Some(c) = normalize_clause(lits) {
                            push_clause(&mut next, c);
                        }
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
    }
}

/// Converts `f` to an equivalent CNF. Fails with `SizeBudgetExceeded` when an
/// intermediate clause set grows beyond `cap`.
pub fn to_cnf(f: &Formula, cap: usize) -> Result<CnfFormula, FormulaError> {
    Ok(CnfFormula { clauses: cnf_of(nnf(f, false), cap)? })
}

/// Removes every literal whose atom mentions a variable outside `vars`.
/// A clause that loses all its literals becomes `false`, so the result
/// always implies the input.
pub fn project(cnf: &CnfFormula, vars: &BTreeSet<String>) -> CnfFormula {
    CnfFormula {
        clauses: cnf
            .clauses
            .iter()
            .map(|c| Clause(c.0.iter().filter(|l| l.atom.mentions_only(vars)).cloned().collect()))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_formula;

    fn vars(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn distribution_law() {
        let f = parse_formula("a=1 | (b=2 & c=3)").unwrap();
        let cnf = to_cnf(&f, DEFAULT_CLAUSE_CAP).unwrap();
        assert_eq!(cnf.to_formula(), parse_formula("(a=1 | b=2) & (a=1 | c=3)").unwrap());
    }

    #[test]
    fn atom_is_single_clause() {
        let f = parse_formula("n <= load").unwrap();
        let cnf = to_cnf(&f, DEFAULT_CLAUSE_CAP).unwrap();
        assert_eq!(cnf.clauses.len(), 1);
        assert_eq!(cnf.to_formula(), f);
    }

    #[test]
    fn constants() {
        assert!(to_cnf(&Formula::Bool(true), 10).unwrap().is_true());
        assert!(to_cnf(&Formula::Bool(false), 10).unwrap().is_false());
        let f = parse_formula("x > 0 | !(x > 0)").unwrap();
        assert!(to_cnf(&f, 10).unwrap().is_true());
    }

    #[test]
    fn negated_atoms_stay_syntactic() {
        let f = parse_formula("!(load >= 0) | n <= load").unwrap();
        let cnf = to_cnf(&f, DEFAULT_CLAUSE_CAP).unwrap();
        assert_eq!(cnf.to_formula(), f);
    }

    #[test]
    fn clause_budget() {
        // (a1 & b1) | (a2 & b2) | ... has 2^n clauses.
        let parts: Vec<String> = (0..20).map(|i| format!("(a{i} > 0 & b{i} > 0)")).collect();
        let f = parse_formula(&parts.join(" | ")).unwrap();
        assert_eq!(to_cnf(&f, 1000), Err(FormulaError::SizeBudgetExceeded { cap: 1000 }));
    }

    #[test]
    fn projection_examples() {
        let f = parse_formula("n <= load | dbg > 0").unwrap();
        let p = project(&to_cnf(&f, 100).unwrap(), &vars(&["n", "load"]));
        assert_eq!(p.to_formula(), parse_formula("n <= load").unwrap());

        let f = parse_formula("x >= 0").unwrap();
        let p = project(&to_cnf(&f, 100).unwrap(), &vars(&["n"]));
        assert!(p.is_false());
        assert_eq!(p.to_formula(), Formula::Bool(false));
    }

    #[test]
    fn projection_is_idempotent() {
        let f = parse_formula("(a > 0 | b > 0 | c == a) & (b < 2 | a + c > 1) & c > 0").unwrap();
        let v = vars(&["a", "c"]);
        let once = project(&to_cnf(&f, 100).unwrap(), &v);
        assert_eq!(project(&once, &v), once);
    }
}
