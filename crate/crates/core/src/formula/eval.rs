use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;

use super::{ArithOp, Formula, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
}

/// Anything that can supply variable values by name.
pub trait Valuation {
    fn lookup(&self, name: &str) -> Option<&BigInt>;
}

impl Valuation for BTreeMap<String, BigInt> {
    fn lookup(&self, name: &str) -> Option<&BigInt> {
        self.get(name)
    }
}

impl<V: Valuation + ?Sized> Valuation for &V {
    fn lookup(&self, name: &str) -> Option<&BigInt> {
        (**self).lookup(name)
    }
}

pub(crate) fn apply_arith(op: ArithOp, lhs: BigInt, rhs: BigInt) -> Result<BigInt, EvalError> {
    // num-bigint follows Rust's primitive semantics: `/` truncates toward
    // zero and `%` takes the sign of the dividend.
    Ok(match op {
        ArithOp::Add => lhs + rhs,
        ArithOp::Sub => lhs - rhs,
        ArithOp::Mul => lhs * rhs,
        ArithOp::Div => {
            if rhs.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            lhs / rhs
        }
        ArithOp::Rem => {
            if rhs.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            lhs % rhs
        }
    })
}

pub fn eval_term(term: &Term, state: &impl Valuation) -> Result<BigInt, EvalError> {
    match term {
        Term::Int(v) => Ok(v.clone()),
        Term::Var(name) => state
            .lookup(name)
            .cloned()
            .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
        Term::Neg(inner) => Ok(-eval_term(inner, state)?),
        Term::Bin(op, lhs, rhs) => {
            let l = eval_term(lhs, state)?;
            let r = eval_term(rhs, state)?;
            apply_arith(*op, l, r)
        }
    }
}

/// Evaluates `formula` under `state`. Connectives short-circuit left to
/// right, so an error in an operand that does not influence the result is
/// not reported.
pub fn eval_formula(formula: &Formula, state: &impl Valuation) -> Result<bool, EvalError> {
    match formula {
        Formula::Bool(b) => Ok(*b),
        Formula::Cmp(op, lhs, rhs) => {
            let l = eval_term(lhs, state)?;
            let r = eval_term(rhs, state)?;
            Ok(op.holds(&l, &r))
        }
        Formula::Not(inner) => Ok(!eval_formula(inner, state)?),
        Formula::And(parts) => {
            for p in parts {
                if !eval_formula(p, state)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Or(parts) => {
            for p in parts {
                if eval_formula(p, state)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Implies(lhs, rhs) => {
            if !eval_formula(lhs, state)? {
                return Ok(true);
            }
            eval_formula(rhs, state)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_formula, parse_term};
    use proptest::prelude::*;

    fn env(pairs: &[(&str, i64)]) -> BTreeMap<String, BigInt> {
        pairs.iter().map(|(k, v)| (k.to_string(), BigInt::from(*v))).collect()
    }

    #[test]
    fn term_examples() {
        let t = parse_term("windSpeed*3/4").unwrap();
        assert_eq!(eval_term(&t, &env(&[("windSpeed", 5)])).unwrap(), BigInt::from(3));
        let t = parse_term("x - x").unwrap();
        assert_eq!(eval_term(&t, &env(&[("x", 123)])).unwrap(), BigInt::from(0));
        let t = parse_term("-7/2").unwrap();
        assert_eq!(eval_term(&t, &env(&[])).unwrap(), BigInt::from(-3));
    }

    #[test]
    fn term_errors() {
        let t = parse_term("x / (y - y)").unwrap();
        assert_eq!(
            eval_term(&t, &env(&[("x", 1), ("y", 2)])),
            Err(EvalError::DivisionByZero)
        );
        let t = parse_term("x % 0").unwrap();
        assert_eq!(eval_term(&t, &env(&[("x", 1)])), Err(EvalError::DivisionByZero));
        let t = parse_term("z + 1").unwrap();
        assert_eq!(
            eval_term(&t, &env(&[])),
            Err(EvalError::UnboundVariable("z".into()))
        );
    }

    #[test]
    fn formula_examples() {
        let f = parse_formula("n <= load").unwrap();
        assert!(!eval_formula(&f, &env(&[("n", 4), ("load", 3)])).unwrap());
        assert!(eval_formula(&Formula::Bool(true), &env(&[])).unwrap());
        let f = parse_formula("!(load >= 0) | n <= load").unwrap();
        assert!(eval_formula(&f, &env(&[("load", -1), ("n", 9)])).unwrap());
    }

    #[test]
    fn arbitrary_precision() {
        let t = parse_term("x * x * x * x").unwrap();
        let v = eval_term(&t, &env(&[("x", i64::MAX)])).unwrap();
        assert_eq!(v, BigInt::from(i64::MAX).pow(4));
    }

    proptest! {
        // Reference: i64 division and remainder in Rust truncate toward zero.
        #[test]
        fn division_matches_truncating_reference(a in -1000i64..1000, b in -50i64..50) {
            prop_assume!(b != 0);
            let e = env(&[("a", a), ("b", b)]);
            let q = eval_term(&parse_term("a / b").unwrap(), &e).unwrap();
            let r = eval_term(&parse_term("a % b").unwrap(), &e).unwrap();
            prop_assert_eq!(q, BigInt::from(a / b));
            prop_assert_eq!(r, BigInt::from(a % b));
        }
    }
}
