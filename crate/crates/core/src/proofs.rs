//! Coverage regions from the open goals of a partial proof.
//!
//! Every state that satisfies all open goals of a locally sound partial
//! proof is one in which the proved contract holds. The conjunction of the
//! goals, each read as a clause, is therefore a correct coverage region.
//! Goals usually mention implementation details the architecture does not
//! know about; those literals are projected away, which can only shrink
//! the region.

use crate::dsl::ProofGoals;
use crate::engine::{check_region, EngineError, RegionCheck};
use crate::formula::{project, to_cnf, Formula, FormulaError, Signature, DEFAULT_CLAUSE_CAP};
use crate::model::{ServiceRef, SystemModel};

/// `⋀ (⋁ ¬antecedent ∨ ⋁ succedent)` over all goals. No goals gives `true`;
/// a goal with both sides empty gives `false`.
///
/// ```
/// use covprob::dsl::parse_goals;
/// use covprob::proofs::goals_to_region;
///
/// let g = parse_goals(r#"{"goals":[{"antecedent":["load >= 0"],"succedent":["n <= load"]}]}"#).unwrap();
/// assert_eq!(goals_to_region(&g).to_string(), "!(load >= 0) || n <= load");
/// ```
pub fn goals_to_region(goals: &ProofGoals) -> Formula {
    Formula::and(
        goals
            .goals
            .iter()
            .map(|s| {
                Formula::or(
                    s.antecedent
                        .iter()
                        .map(|a| Formula::not(a.clone()))
                        .chain(s.succedent.iter().cloned())
                        .collect(),
                )
            })
            .collect(),
    )
}

/// The region of [`goals_to_region`] in CNF, restricted to the parameters
/// of `service` and the state variables of `model`.
pub fn region_for_model(
    goals: &ProofGoals,
    model: &SystemModel,
    service: &ServiceRef,
) -> Result<Formula, FormulaError> {
    region_for_model_with_cap(goals, model, service, DEFAULT_CLAUSE_CAP)
}

pub fn region_for_model_with_cap(
    goals: &ProofGoals,
    model: &SystemModel,
    service: &ServiceRef,
    clause_cap: usize,
) -> Result<Formula, FormulaError> {
    let cnf = to_cnf(&goals_to_region(goals), clause_cap)?;
    Ok(project(&cnf, &model.region_vocabulary(service)).to_formula())
}

/// Decides whether `cov` lies inside the correctness region of `service`
/// on the given domains, with the first witness state if it does not.
/// Only states satisfying the service's precondition are considered, as
/// in the proof obligation `pre -> [s] post`. Unlisted parameters range
/// over the engine default and unlisted state variables over their initial
/// values.
pub fn check_region_correct(
    model: &SystemModel,
    service: &ServiceRef,
    cov: &Formula,
    domains: &Signature,
) -> Result<RegionCheck, EngineError> {
    check_region(model, service, cov, domains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_formula, parse_goals, parse_model};
    use crate::formula::{eval_formula, Domain, State, StateSpace};

    const MODEL: &str = r#"
component Network {
    state int load = 0;
    service addLoad(int n) requires load >= 0 ensures load >= 0 { load = load + n; }
    service useLoad(int n) requires load >= 0 ensures load >= 0 covered n <= load { load = load - n; }
}
"#;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn use_load() -> ServiceRef {
        ServiceRef::new("Network", "useLoad")
    }

    #[test]
    fn no_goals_is_true() {
        assert_eq!(goals_to_region(&parse_goals(r#"{"goals":[]}"#).unwrap()), Formula::Bool(true));
    }

    #[test]
    fn one_goal_per_clause() {
        let g = parse_goals(
            r#"{"goals":[{"succedent":["n <= load"]},{"antecedent":["x > 0"]}]}"#,
        )
        .unwrap();
        let r = goals_to_region(&g);
        assert_eq!(r, Formula::and(vec![f("n <= load"), Formula::not(f("x > 0"))]));
        // Every state satisfying the region satisfies both sequents.
        let mut space = StateSpace::new(
            ["load", "n", "x"].iter().map(|v| (v.to_string(), Domain::new(-2, 2).unwrap())).collect(),
        );
        while let Some(vals) = space.next_values() {
            let st = State(space.names().iter().cloned().zip(vals.into_iter().map(Into::into)).collect());
            if eval_formula(&r, &st).unwrap() {
                assert!(eval_formula(&f("n <= load"), &st).unwrap());
                assert!(!eval_formula(&f("x > 0"), &st).unwrap());
            }
        }
    }

    #[test]
    fn empty_sequent_is_false() {
        let g = parse_goals(r#"{"goals":[{}]}"#).unwrap();
        assert_eq!(goals_to_region(&g), Formula::Bool(false));
    }

    #[test]
    fn auxiliary_literals_are_projected() {
        let m = parse_model(MODEL).unwrap();
        let g = parse_goals(
            r#"{"auxiliary":["dbg_ok"],"goals":[{"succedent":["n <= load || dbg_ok == 1"]}]}"#,
        )
        .unwrap();
        assert_eq!(region_for_model(&g, &m, &use_load()).unwrap(), f("n <= load"));
    }

    #[test]
    fn fully_projected_clause_is_false() {
        let m = parse_model(MODEL).unwrap();
        let g = parse_goals(r#"{"auxiliary":["aux"],"goals":[{"succedent":["aux > 0"]}]}"#).unwrap();
        assert_eq!(region_for_model(&g, &m, &use_load()).unwrap(), Formula::Bool(false));
    }

    #[test]
    fn empty_goals_give_true_region() {
        let m = parse_model(MODEL).unwrap();
        let g = parse_goals(r#"{"goals":[]}"#).unwrap();
        let r = region_for_model(&g, &m, &ServiceRef::new("Network", "addLoad")).unwrap();
        assert_eq!(r, Formula::Bool(true));
    }

    #[test]
    fn use_load_region_checks() {
        let m = parse_model(MODEL).unwrap();
        let doms = Signature::new().with("load", -8, 8).with("n", 0, 8);
        let ok = check_region_correct(&m, &use_load(), &f("n <= load"), &doms).unwrap();
        assert!(ok.correct);
        assert_eq!(ok.checked, 17 * 9);
        let bad = check_region_correct(&m, &use_load(), &f("true"), &doms).unwrap();
        assert!(!bad.correct);
        let none = check_region_correct(&m, &use_load(), &f("false"), &doms).unwrap();
        assert!(none.correct);
    }

    #[test]
    fn use_load_witness() {
        let m = parse_model(MODEL).unwrap();
        let doms = Signature::new().with("load", -8, 8).with("n", 0, 8);
        let bad = check_region_correct(&m, &use_load(), &f("true"), &doms).unwrap();
        // Negative loads violate the precondition and are skipped.
        assert_eq!(bad.counterexample, Some(State::from_pairs([("load", 0), ("n", 1)])));
    }

    #[test]
    fn add_load_needs_nonnegative_amounts() {
        let m = parse_model(MODEL).unwrap();
        let add = ServiceRef::new("Network", "addLoad");
        let doms = Signature::new().with("load", -8, 8).with("n", -8, 8);
        let bad = check_region_correct(&m, &add, &f("true"), &doms).unwrap();
        assert_eq!(bad.counterexample, Some(State::from_pairs([("load", 0), ("n", -8)])));
        let ok = check_region_correct(&m, &add, &f("n >= 0"), &doms).unwrap();
        assert!(ok.correct);
    }
}
