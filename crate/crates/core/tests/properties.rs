mod common;

use std::collections::BTreeSet;

use common::*;
use covprob::dsl::{ProofGoals, Sequent};
use covprob::engine::{
    approx_coverage_with, check_region, exact_correctness, exact_coverage, ApproxOptions,
};
use covprob::formula::{eval_formula, project, to_cnf, Formula, DEFAULT_CLAUSE_CAP};
use covprob::model::ServiceRef;
use covprob::proofs::goals_to_region;
use proptest::prelude::*;

fn sequent(vars: Vec<String>) -> impl Strategy<Value = Sequent> {
    (
        prop::collection::vec(formula(vars.clone(), 1), 0..3),
        prop::collection::vec(formula(vars, 1), 0..3),
    )
        .prop_map(|(antecedent, succedent)| Sequent { antecedent, succedent })
}

fn goal_set(vars: Vec<String>) -> impl Strategy<Value = ProofGoals> {
    prop::collection::vec(sequent(vars), 0..4)
        .prop_map(|goals| ProofGoals { goals, ..Default::default() })
}

fn satisfies(s: &Sequent, st: &covprob::formula::State) -> bool {
    !s.antecedent.iter().all(|a| eval_formula(a, st).unwrap())
        || s.succedent.iter().any(|b| eval_formula(b, st).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cnf_is_equivalent(f in formula(names(&["a", "b", "c"]), 3)) {
        let cnf = to_cnf(&f, DEFAULT_CLAUSE_CAP).unwrap().to_formula();
        for st in all_states(&names(&["a", "b", "c"]), -2, 2) {
            prop_assert_eq!(eval_formula(&f, &st).unwrap(), eval_formula(&cnf, &st).unwrap());
        }
    }

    #[test]
    fn projection_strengthens_and_is_idempotent(
        f in formula(names(&["a", "b", "c"]), 3),
        keep in prop::collection::btree_set(prop::sample::select(names(&["a", "b", "c"])), 0..=3),
    ) {
        let cnf = to_cnf(&f, DEFAULT_CLAUSE_CAP).unwrap();
        let keep: BTreeSet<String> = keep;
        let p = project(&cnf, &keep);
        prop_assert_eq!(project(&p, &keep), p.clone());
        let (pf, cf) = (p.to_formula(), cnf.to_formula());
        for st in all_states(&names(&["a", "b", "c"]), -3, 3) {
            if eval_formula(&pf, &st).unwrap() {
                prop_assert!(eval_formula(&cf, &st).unwrap());
            }
        }
    }

    #[test]
    fn goal_regions_satisfy_every_goal(g in goal_set(names(&["a", "b", "c", "d"]))) {
        let r = goals_to_region(&g);
        for st in all_states(&names(&["a", "b", "c", "d"]), -1, 1) {
            if eval_formula(&r, &st).unwrap() {
                for s in &g.goals {
                    prop_assert!(satisfies(s, &st));
                }
            }
        }
    }

    #[test]
    fn more_goals_never_weaken_the_region(
        g in goal_set(names(&["a", "b", "c"])),
        extra in sequent(names(&["a", "b", "c"])),
    ) {
        let mut g2 = g.clone();
        g2.goals.push(extra);
        let (r, r2) = (goals_to_region(&g), goals_to_region(&g2));
        for st in all_states(&names(&["a", "b", "c"]), -2, 2) {
            if eval_formula(&r2, &st).unwrap() {
                prop_assert!(eval_formula(&r, &st).unwrap());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn stronger_regions_never_raise_coverage(
        sys in small_system(),
        extra in prop::collection::vec(formula(names(&["a", "x", "y"]), 1), 3),
    ) {
        let (m, u) = sys;
        let weak = exact_coverage(&m, &u).unwrap();
        let strong = exact_coverage(&strengthen(&m, &extra), &u).unwrap();
        prop_assert!(strong.probability <= weak.probability);
        let total: num_rational::BigRational =
            weak.outcomes.values().cloned().sum::<num_rational::BigRational>() + &weak.probability;
        prop_assert_eq!(total, q(1, 1));
    }

    #[test]
    fn correct_regions_under_approximate_correctness(
        sys in small_system(),
        pick in prop::collection::vec(any::<bool>(), 3),
        extra in prop::collection::vec(formula(names(&["a", "x", "y"]), 1), 3),
    ) {
        let (m, u) = sys;
        let m = strengthen(&with_exact_regions(&m, &pick), &extra);
        let refs: Vec<ServiceRef> = m.services().map(|(r, _)| r).collect();
        let all_correct = refs.iter().all(|r| {
            let cov = m.service(r).unwrap().cov.clone();
            check_region(&m, r, &cov, &bounded_domains()).unwrap().correct
        });
        if all_correct {
            let cov = exact_coverage(&m, &u).unwrap().probability;
            let cor = exact_correctness(&m, &u).unwrap().probability;
            prop_assert!(cov <= cor, "coverage {} above correctness {}", cov, cor);
        }
    }

    #[test]
    fn approx_is_independent_of_workers(sys in small_system(), seed in any::<u64>()) {
        let (m, u) = sys;
        let base = ApproxOptions { samples: 300, confidence: 0.9, seed, ..Default::default() };
        let one = approx_coverage_with(&m, &u, &ApproxOptions { workers: Some(1), ..base.clone() }).unwrap();
        let four = approx_coverage_with(&m, &u, &ApproxOptions { workers: Some(4), ..base }).unwrap();
        prop_assert_eq!(one, four);
    }
}

#[test]
fn exact_regions_are_correct() {
    for (m, _) in draw(small_system(), 40, 3) {
        let m = with_exact_regions(&m, &[true]);
        for (r, s) in m.services() {
            assert!(check_region(&m, &r, &s.cov, &bounded_domains()).unwrap().correct, "{r}");
        }
    }
}

#[test]
fn false_region_is_always_correct() {
    for (m, _) in draw(small_system(), 40, 4) {
        for (r, _) in m.services() {
            assert!(check_region(&m, &r, &Formula::Bool(false), &bounded_domains()).unwrap().correct);
        }
    }
}
