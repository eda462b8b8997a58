//! Quantifier-free first-order formulas over bounded integer variables.
//!
//! Terms are integer-valued; formulas combine comparisons of terms with the
//! usual connectives. Variables are plain names, optionally qualified with a
//! component (`Network.load`). Evaluation uses arbitrary-precision integers;
//! declared domains only bound enumeration.

mod cnf;
mod domain;
mod eval;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;

pub use cnf::{project, to_cnf, Atom, Clause, CnfFormula, Literal, DEFAULT_CLAUSE_CAP};
pub use domain::{
    find_counterexample, implies_on_domains, Domain, Signature, State, StateSpace, VarType,
    DEFAULT_STATE_CAP,
};
pub use eval::{eval_formula, eval_term, EvalError, Valuation};
pub(crate) use eval::apply_arith;

/// Errors raised by the decision procedures of this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormulaError {
    #[error("CNF conversion exceeded the clause budget ({cap} clauses)")]
    SizeBudgetExceeded { cap: usize },
    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },
    #[error("variable `{0}` has no declared domain")]
    UndeclaredVariable(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Integer division truncating toward zero.
    Div,
    /// Remainder with the sign of the dividend.
    Rem,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Rem => "%",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div | ArithOp::Rem => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: &BigInt, rhs: &BigInt) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// An integer term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Int(BigInt),
    Var(String),
    Neg(Box<Term>),
    Bin(ArithOp, Box<Term>, Box<Term>),
}

impl Term {
    pub fn int(value: impl Into<BigInt>) -> Term {
        Term::Int(value.into())
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn bin(op: ArithOp, lhs: Term, rhs: Term) -> Term {
        Term::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Int(_) => {}
            Term::Var(name) => {
                out.insert(name);
            }
            Term::Neg(inner) => inner.collect_vars(out),
            Term::Bin(_, lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
        }
    }

    /// Rewrites every variable through `f`; variables mapped to `None` are kept.
    pub fn substitute(&self, f: &impl Fn(&str) -> Option<Term>) -> Term {
        match self {
            Term::Int(_) => self.clone(),
            Term::Var(name) => f(name).unwrap_or_else(|| self.clone()),
            Term::Neg(inner) => Term::Neg(Box::new(inner.substitute(f))),
            Term::Bin(op, lhs, rhs) => {
                Term::Bin(*op, Box::new(lhs.substitute(f)), Box::new(rhs.substitute(f)))
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Term::Bin(op, _, _) => op.precedence(),
            Term::Neg(_) => 3,
            Term::Int(v) if v.sign() == num_bigint::Sign::Minus => 3,
            _ => 4,
        }
    }
}

/// A quantifier-free formula. `And`/`Or` are n-ary and never empty when
/// produced by the parser or the smart constructors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Bool(bool),
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn cmp(op: CmpOp, lhs: Term, rhs: Term) -> Formula {
        Formula::Cmp(op, lhs, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Formula {
        Formula::Implies(Box::new(lhs), Box::new(rhs))
    }

    /// Conjunction that collapses the empty and singleton cases.
    pub fn and(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::Bool(true),
            1 => parts.pop().unwrap(),
            _ => Formula::And(parts),
        }
    }

    /// Disjunction that collapses the empty and singleton cases.
    pub fn or(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::Bool(false),
            1 => parts.pop().unwrap(),
            _ => Formula::Or(parts),
        }
    }

    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Formula::Bool(_) => {}
            Formula::Cmp(_, lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Formula::Not(inner) => inner.collect_vars(out),
            Formula::And(parts) | Formula::Or(parts) => {
                parts.iter().for_each(|p| p.collect_vars(out))
            }
            Formula::Implies(lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
        }
    }

    /// The set of variables occurring in the formula.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out.into_iter().map(str::to_owned).collect()
    }

    pub fn substitute(&self, f: &impl Fn(&str) -> Option<Term>) -> Formula {
        match self {
            Formula::Bool(_) => self.clone(),
            Formula::Cmp(op, lhs, rhs) => Formula::Cmp(*op, lhs.substitute(f), rhs.substitute(f)),
            Formula::Not(inner) => Formula::not(inner.substitute(f)),
            Formula::And(parts) => Formula::And(parts.iter().map(|p| p.substitute(f)).collect()),
            Formula::Or(parts) => Formula::Or(parts.iter().map(|p| p.substitute(f)).collect()),
            Formula::Implies(lhs, rhs) => Formula::implies(lhs.substitute(f), rhs.substitute(f)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => 1,
            Formula::Or(_) => 2,
            Formula::And(_) => 3,
            Formula::Not(_) => 4,
            Formula::Bool(_) | Formula::Cmp(..) => 5,
        }
    }
}

/// Free variables of a formula.
pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    f.free_vars()
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(v) => write!(f, "{v}"),
            Term::Var(name) => f.write_str(name),
            Term::Neg(inner) => {
                if inner.precedence() >= 4 && !matches!(**inner, Term::Int(_)) {
                    write!(f, "-{inner}")
                } else {
                    write!(f, "-({inner})")
                }
            }
            Term::Bin(op, lhs, rhs) => {
                let prec = op.precedence();
                if lhs.precedence() < prec {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if rhs.precedence() <= prec {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Bool(b) => write!(f, "{b}"),
            Formula::Cmp(op, lhs, rhs) => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Formula::Not(inner) => match **inner {
                Formula::Bool(_) | Formula::Not(_) => write!(f, "!{inner}"),
                _ => write!(f, "!({inner})"),
            },
            Formula::And(parts) | Formula::Or(parts) => {
                let prec = self.precedence();
                let sep = if prec == 3 { " && " } else { " || " };
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    if part.precedence() <= prec {
                        write!(f, "({part})")?;
                    } else {
                        write!(f, "{part}")?;
                    }
                }
                Ok(())
            }
            Formula::Implies(lhs, rhs) => {
                if lhs.precedence() <= 1 {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " -> ")?;
                if rhs.precedence() < 1 {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_formula;

    #[test]
    fn free_vars_examples() {
        let f = parse_formula("n <= load").unwrap();
        assert_eq!(free_vars(&f), ["load", "n"].iter().map(|s| s.to_string()).collect());
        assert!(free_vars(&Formula::Bool(true)).is_empty());
        let f = parse_formula("a=1 & (b=2 | a=3)").unwrap();
        assert_eq!(free_vars(&f), ["a", "b"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn display_keeps_nesting() {
        for src in [
            "!(load >= 0) || n <= load",
            "(a == 1 || b == 2) && c == 3",
            "(a == 1 && b == 2) && c == 3",
            "(a < b -> c < d) -> e < f",
            "a - (b - c) < a * (b + c) / 2",
            "x % 3 == -1",
            "!!true",
        ] {
            let f = parse_formula(src).unwrap();
            assert_eq!(f.to_string(), src);
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
        }
    }

    #[test]
    fn substitute_replaces_parameters() {
        let pre = parse_formula("windSpeed >= 0").unwrap();
        let arg = crate::dsl::parse_term("w * 3").unwrap();
        let out = pre.substitute(&|v| (v == "windSpeed").then(|| arg.clone()));
        assert_eq!(out.to_string(), "w * 3 >= 0");
    }
}
