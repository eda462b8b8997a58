//! Random models, profiles and formulas shared by the property suites.
#![allow(dead_code)]

use std::path::PathBuf;

use covprob::dsl::{parse_model, parse_profile};
use covprob::engine::correctness_region;
use covprob::formula::{ArithOp, CmpOp, Domain, Formula, Signature, State, StateSpace, Term, VarType};
use covprob::model::{
    Component, Distribution, Initializer, Param, Service, ServiceRef, StateVar, Stmt, SystemModel,
    UsageProfile,
};
use num_rational::BigRational;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRng, TestRunner, RngAlgorithm};

pub fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn running_example() -> (SystemModel, UsageProfile) {
    (
        parse_model(&fixture("energy_small.quac")).unwrap(),
        parse_profile(&fixture("usage_small.quac")).unwrap(),
    )
}

pub fn grid(cycles: u32) -> (SystemModel, UsageProfile) {
    (
        parse_model(&fixture("energy_grid.quac")).unwrap(),
        parse_profile(&fixture(&format!("energy_grid_{cycles}.quac"))).unwrap(),
    )
}

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Draws `n` values from `strategy` with a fixed seed.
pub fn draw<S: Strategy>(strategy: S, n: usize, seed: u8) -> Vec<S::Value> {
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    );
    (0..n).map(|_| strategy.new_tree(&mut runner).unwrap().current()).collect()
}

pub fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Eq),
        Just(CmpOp::Ne),
        Just(CmpOp::Lt),
        Just(CmpOp::Le),
        Just(CmpOp::Gt),
        Just(CmpOp::Ge)
    ]
}

/// Linear terms over `vars` with small non-negative literals.
pub fn term(vars: Vec<String>) -> impl Strategy<Value = Term> + Clone {
    let leaf = prop_oneof![
        (0i64..4).prop_map(Term::int),
        proptest::sample::select(vars).prop_map(Term::var),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        (prop_oneof![Just(ArithOp::Add), Just(ArithOp::Sub)], inner.clone(), inner)
            .prop_map(|(op, l, r)| Term::bin(op, l, r))
    })
}

pub fn atom(vars: Vec<String>) -> impl Strategy<Value = Formula> {
    let t = term(vars);
    (cmp_op(), t.clone(), t).prop_map(|(op, l, r)| Formula::cmp(op, l, r))
}

pub fn formula(vars: Vec<String>, depth: u32) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![1 => any::<bool>().prop_map(Formula::Bool), 6 => atom(vars)];
    leaf.prop_recursive(depth, 16, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::Or),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
        ]
    })
}

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Every state over `vars`, each ranging over `lo..=hi`.
pub fn all_states(vars: &[String], lo: i64, hi: i64) -> Vec<State> {
    let mut space =
        StateSpace::new(vars.iter().map(|v| (v.clone(), Domain::new(lo, hi).unwrap())).collect());
    let mut out = Vec::new();
    while let Some(vals) = space.next_values() {
        out.push(State(vars.iter().cloned().zip(vals.into_iter().map(Into::into)).collect()));
    }
    out
}

// ---------------------------------------------------------------------------
// Small systems whose reachable values stay within BOUND.

/// Every parameter, state variable and sample lies in `-BOUND..=BOUND`.
pub const BOUND: i64 = 4;

fn wrap(t: Term) -> Term {
    Term::bin(ArithOp::Rem, t, Term::int(BOUND + 1))
}

fn service_ref(i: usize) -> ServiceRef {
    ServiceRef::new("C", format!("s{i}"))
}

#[derive(Debug, Clone)]
enum Action {
    Assign(bool, Term),
    Call(usize, Term),
    Abort,
}

fn body_stmt(i: usize, n: usize) -> impl Strategy<Value = (Formula, Action)> {
    let vars = names(&["a", "x", "y"]);
    let t = term(vars.clone());
    let guard = prop_oneof![3 => Just(Formula::Bool(true)), 2 => atom(vars.clone())];
    let mut actions: Vec<(u32, BoxedStrategy<(Formula, Action)>)> = vec![
        (4, (guard.clone(), any::<bool>(), t.clone()).prop_map(|(g, x, t)| (g, Action::Assign(x, t))).boxed()),
        // Aborts fire for a single argument value.
        (1, (-BOUND..=BOUND)
            .prop_map(|c| (Formula::cmp(CmpOp::Eq, Term::var("a"), Term::int(c)), Action::Abort))
            .boxed()),
    ];
    if i + 1 < n {
        actions.push((4, (guard, (i + 1)..n, t).prop_map(|(g, j, t)| (g, Action::Call(j, t))).boxed()));
    }
    proptest::strategy::Union::new_weighted(actions)
}

fn to_stmt((guard, action): (Formula, Action)) -> Stmt {
    match action {
        Action::Assign(x, t) => {
            Stmt::Assign { guard, target: if x { "x" } else { "y" }.into(), value: wrap(t) }
        }
        Action::Call(j, t) => Stmt::Call { guard, target: None, service: service_ref(j), args: vec![wrap(t)] },
        Action::Abort => Stmt::Abort { guard },
    }
}

fn service(i: usize, n: usize) -> impl Strategy<Value = Service> {
    let vars = names(&["a", "x", "y"]);
    (
        prop::collection::vec(body_stmt(i, n), 1..4),
        prop_oneof![2 => Just(Formula::Bool(true)), 2 => atom(vars.clone()), 1 => formula(vars, 1)],
        prop_oneof![Just(Formula::Bool(true)), formula(names(&["x", "y"]), 1)],
    )
        .prop_map(move |(body, cov, post)| {
            let mut s = Service::new(
                format!("s{i}"),
                vec![Param { name: "a".into(), ty: VarType::Int }],
                body.into_iter().map(to_stmt).collect(),
            );
            s.cov = cov;
            s.post = post;
            s
        })
}

fn profile(n_services: usize) -> impl Strategy<Value = UsageProfile> {
    let samples = prop::collection::vec((-BOUND..=0, 2i64..5), 1..=3);
    let calls = prop::collection::vec((0..n_services, any::<prop::sample::Index>()), 1..=3);
    (samples, calls)
        .prop_flat_map(|(samples, calls)| {
            let locals: Vec<String> = (0..samples.len()).map(|k| format!("v{k}")).collect();
            let guards = prop::collection::vec(
                prop_oneof![2 => Just(Formula::Bool(true)), 1 => atom(locals)],
                calls.len(),
            );
            (Just(samples), Just(calls), guards)
        })
        .prop_map(|(samples, calls, guards)| {
            // Each call follows the sample it passes on, so calls can run
            // before later samples.
            let mut body = Vec::new();
            let calls: Vec<(usize, usize, Formula)> = calls
                .into_iter()
                .zip(guards)
                .map(|((s, arg), g)| (s, arg.index(samples.len()), g))
                .collect();
            for (k, (lo, w)) in samples.iter().enumerate() {
                body.push(Stmt::Sample {
                    guard: Formula::Bool(true),
                    target: format!("v{k}"),
                    dist: Distribution::uniform(*lo, (*lo + *w).min(BOUND)).unwrap(),
                });
                for (s, arg, guard) in calls.iter().filter(|c| c.1 == k) {
                    // Guards only read samples that are already drawn.
                    let guard = if guard.free_vars().iter().all(|v| v[1..].parse::<usize>().unwrap() <= k) {
                        guard.clone()
                    } else {
                        Formula::Bool(true)
                    };
                    body.push(Stmt::Call {
                        guard,
                        target: None,
                        service: service_ref(*s),
                        args: vec![Term::var(format!("v{arg}"))],
                    });
                }
            }
            UsageProfile { name: "p".into(), body }
        })
}

/// A one-component system with up to three services and three samples,
/// supports of at most five values, and bounded arithmetic.
pub fn small_system() -> impl Strategy<Value = (SystemModel, UsageProfile)> {
    (1usize..=3, -2i64..=2, -2i64..=2)
        .prop_flat_map(|(n, x0, y0)| {
            let services: Vec<BoxedStrategy<Service>> = (0..n).map(|i| service(i, n).boxed()).collect();
            (Just((x0, y0)), services, profile(n))
        })
        .prop_map(|((x0, y0), services, profile)| {
            let state = vec![
                StateVar { name: "x".into(), ty: VarType::Int, init: Initializer::Const(x0.into()) },
                StateVar { name: "y".into(), ty: VarType::Int, init: Initializer::Const(y0.into()) },
            ];
            (SystemModel { components: vec![Component { name: "C".into(), state, services }] }, profile)
        })
}

/// Domains covering every reachable value of a [`small_system`].
pub fn bounded_domains() -> Signature {
    let mut sig = Signature::new();
    for v in ["a", "x", "y"] {
        sig.declare(v, VarType::Int, Domain::new(-BOUND, BOUND).unwrap());
    }
    sig
}

/// Replaces each selected service's region by its exact correctness region,
/// which is correct by construction.
pub fn with_exact_regions(model: &SystemModel, pick: &[bool]) -> SystemModel {
    let mut m = model.clone();
    let refs: Vec<ServiceRef> = model.services().map(|(r, _)| r).collect();
    for (r, take) in refs.iter().zip(pick.iter().cycle()) {
        if *take {
            let region = correctness_region(model, r, &bounded_domains()).unwrap();
            m.service_mut(r).unwrap().cov = region.formula;
        }
    }
    m
}

/// Conjoins `extra[i]` onto the region of the i-th service.
pub fn strengthen(model: &SystemModel, extra: &[Formula]) -> SystemModel {
    let mut m = model.clone();
    let refs: Vec<ServiceRef> = model.services().map(|(r, _)| r).collect();
    for (r, e) in refs.iter().zip(extra) {
        let s = m.service_mut(r).unwrap();
        s.cov = Formula::and(vec![s.cov.clone(), e.clone()]);
    }
    m
}
