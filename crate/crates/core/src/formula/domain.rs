//! Finite domains, states, and brute-force decision procedures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;

use super::{eval_formula, Formula, FormulaError, Valuation};

/// Default cap on the number of states enumerated by a brute-force check.
pub const DEFAULT_STATE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarType {
    Int,
    /// Booleans are stored as the integers 0 and 1.
    Bool,
}

impl fmt::Display for VarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarType::Int => "int",
            VarType::Bool => "bool",
        })
    }
}

/// Inclusive integer range `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Domain {
    lo: i64,
    hi: i64,
}

impl Domain {
    pub fn new(lo: i64, hi: i64) -> Option<Domain> {
        (lo <= hi).then_some(Domain { lo, hi })
    }

    pub fn singleton(v: i64) -> Domain {
        Domain { lo: v, hi: v }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn size(&self) -> u128 {
        (self.hi as i128 - self.lo as i128 + 1) as u128
    }

    pub fn hull(self, other: Domain) -> Domain {
        Domain { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }
}

/// Variable declarations with finite enumeration domains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    vars: BTreeMap<String, (VarType, Domain)>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares (or redeclares) a variable.
    pub fn declare(&mut self, name: impl Into<String>, ty: VarType, domain: Domain) {
        self.vars.insert(name.into(), (ty, domain));
    }

    pub fn with(mut self, name: &str, lo: i64, hi: i64) -> Self {
        self.declare(name, VarType::Int, Domain::new(lo, hi).expect("lo <= hi"));
        self
    }

    pub fn get(&self, name: &str) -> Option<(VarType, Domain)> {
        self.vars.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, VarType, Domain)> {
        self.vars.iter().map(|(k, (t, d))| (k.as_str(), *t, *d))
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.vars.keys().cloned().collect()
    }
}

/// A total assignment of values to a set of variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(pub BTreeMap<String, BigInt>);

impl State {
    pub fn get(&self, name: &str) -> Option<&BigInt> {
        self.0.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl Into<BigInt>) {
        self.0.insert(name.into(), value.into());
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, i64)>) -> State {
        State(pairs.into_iter().map(|(k, v)| (k.to_string(), BigInt::from(v))).collect())
    }
}

impl Valuation for State {
    fn lookup(&self, name: &str) -> Option<&BigInt> {
        self.0.get(name)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        f.write_str("}")
    }
}

/// Odometer enumeration of all states over an ordered list of domains. The
/// first variable is the most significant, so states come out in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct StateSpace {
    names: Vec<String>,
    domains: Vec<Domain>,
    current: Option<Vec<i64>>,
}

impl StateSpace {
    pub fn new(vars: Vec<(String, Domain)>) -> Self {
        let (names, domains): (Vec<_>, Vec<_>) = vars.into_iter().unzip();
        let current = Some(domains.iter().map(|d| d.lo).collect());
        Self { names, domains, current }
    }

    /// Builds the space for `vars`, looking each up in `sig` and enforcing `cap`.
    pub fn over(
        sig: &Signature,
        vars: impl IntoIterator<Item = String>,
        cap: u128,
    ) -> Result<Self, FormulaError> {
        let mut list = Vec::new();
        for v in vars {
            let (_, d) = sig.get(&v).ok_or_else(|| FormulaError::UndeclaredVariable(v.clone()))?;
            list.push((v, d));
        }
        let space = StateSpace::new(list);
        let size = space.size();
        if size > cap {
            return Err(FormulaError::StateSpaceTooLarge { states: size, cap });
        }
        Ok(space)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn size(&self) -> u128 {
        self.domains.iter().fold(1u128, |acc, d| acc.saturating_mul(d.size()))
    }

    /// Yields raw value vectors instead of named states.
    pub fn next_values(&mut self) -> Option<Vec<i64>> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        let mut carry = true;
        for i in (0..next.len()).rev() {
            if next[i] < self.domains[i].hi {
                next[i] += 1;
                carry = false;
                break;
            }
            next[i] = self.domains[i].lo;
        }
        self.current = if carry { None } else { Some(next) };
        Some(out)
    }
}

impl Iterator for StateSpace {
    type Item = State;

    fn next(&mut self) -> Option<State> {
        let values = self.next_values()?;
        Some(State(
            self.names.iter().cloned().zip(values.into_iter().map(BigInt::from)).collect(),
        ))
    }
}

fn joint_vars(f: &Formula, g: &Formula) -> BTreeSet<String> {
    let mut vars = f.free_vars();
    vars.extend(g.free_vars());
    vars
}

/// Searches the declared domains for a state where `f` holds and `g` does
/// not. Returns the lexicographically least one (variables in name order).
pub fn find_counterexample(
    f: &Formula,
    g: &Formula,
    sig: &Signature,
    cap: u128,
) -> Result<Option<State>, FormulaError> {
    for state in StateSpace::over(sig, joint_vars(f, g), cap)? {
        if eval_formula(f, &state)? && !eval_formula(g, &state)? {
            return Ok(Some(state));
        }
    }
    Ok(None)
}

/// Decides whether `f -> g` holds in every state over the declared domains.
pub fn implies_on_domains(
    f: &Formula,
    g: &Formula,
    sig: &Signature,
    cap: u128,
) -> Result<bool, FormulaError> {
    Ok(find_counterexample(f, g, sig, cap)?.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_formula;

    fn sig() -> Signature {
        Signature::new().with("n", 0, 5).with("load", 0, 5)
    }

    #[test]
    fn weakening_holds() {
        let f = parse_formula("n <= load").unwrap();
        let g = parse_formula("n <= load | n > 100").unwrap();
        assert!(implies_on_domains(&f, &g, &sig(), DEFAULT_STATE_CAP).unwrap());
    }

    #[test]
    fn true_does_not_imply_region() {
        let g = parse_formula("n <= load").unwrap();
        let cex = find_counterexample(&Formula::Bool(true), &g, &sig(), DEFAULT_STATE_CAP)
            .unwrap()
            .unwrap();
        // Lexicographic order over (load, n): load = 0 with n = 1 comes first.
        assert_eq!(cex, State::from_pairs([("load", 0), ("n", 1)]));
        let sig2 = Signature::new().with("n", 0, 5).with("load", 0, 0);
        assert!(!implies_on_domains(&Formula::Bool(true), &g, &sig2, 100).unwrap());
    }

    #[test]
    fn caps_and_undeclared() {
        let f = parse_formula("a < b").unwrap();
        let s = Signature::new().with("a", 0, 999).with("b", 0, 999);
        assert_eq!(
            implies_on_domains(&f, &f, &s, 1000),
            Err(FormulaError::StateSpaceTooLarge { states: 1_000_000, cap: 1000 })
        );
        let s = Signature::new().with("a", 0, 1);
        assert_eq!(
            implies_on_domains(&f, &f, &s, 1000),
            Err(FormulaError::UndeclaredVariable("b".into()))
        );
    }

    #[test]
    fn state_space_order() {
        let space = StateSpace::new(vec![
            ("a".into(), Domain::new(0, 1).unwrap()),
            ("b".into(), Domain::new(-1, 0).unwrap()),
        ]);
        let all: Vec<_> = space.map(|s| s.to_string()).collect();
        assert_eq!(
            all,
            vec!["{a: 0, b: -1}", "{a: 0, b: 0}", "{a: 1, b: -1}", "{a: 1, b: 0}"]
        );
    }

    #[test]
    fn empty_space_has_one_state() {
        let mut space = StateSpace::new(vec![]);
        assert_eq!(space.next(), Some(State::default()));
        assert_eq!(space.next(), None);
    }
}
