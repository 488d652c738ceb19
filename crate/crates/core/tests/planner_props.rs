mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use redline_core::constraint::{ConstraintPolicy, SymbolicOracle};
use redline_core::fixtures::{self, care_task, river_task};
use redline_core::pddl::{parse_domain, parse_problem, GroundedTask};
use redline_core::planner::{enumerate_plans, solve, Algorithm, Plan, SearchConfig, SearchOutcome};
use redline_core::validator::validate;

fn fixture_cases() -> Vec<(GroundedTask, ConstraintPolicy, &'static common::Rules)> {
    let care = care_task();
    let river = river_task();
    let cp = fixtures::care_policy(&care);
    let rp = fixtures::river_policy(&river);
    vec![(care, cp, &common::CARE_RULES), (river, rp, &common::RIVER_RULES)]
}

fn bfs(task: &GroundedTask, policy: &ConstraintPolicy) -> SearchOutcome {
    let oracle = SymbolicOracle::new(policy.clone());
    solve(task, &SearchConfig::new(&oracle)).unwrap().0
}

#[test]
fn returned_plans_validate() {
    for (task, policy, rules) in fixture_cases() {
        for algorithm in [Algorithm::Bfs, Algorithm::AstarGoalCount] {
            let oracle = SymbolicOracle::new(policy.clone());
            let mut config = SearchConfig::new(&oracle);
            config.algorithm = algorithm;
            let (outcome, _) = solve(&task, &config).unwrap();
            let plan = outcome.plan().expect("fixture is solvable");
            assert!(validate(&task, &policy, &plan.to_text()).is_valid());
            assert_eq!(common::reference_kind(&task, rules, &common::as_steps(&plan.steps)), None);
        }
    }
}

#[test]
fn bfs_is_optimal() {
    for (task, policy, _) in fixture_cases() {
        let plan = bfs(&task, &policy).plan().unwrap().clone();
        let oracle = SymbolicOracle::new(policy.clone());
        let all = enumerate_plans(&task, &SearchConfig::new(&oracle), plan.len()).unwrap();
        assert!(!all.is_empty());
        assert_eq!(all[0].len(), plan.len());
        assert!(all.contains(&plan));
        // nothing shorter exists under the constraints
        if !plan.is_empty() {
            let shorter = enumerate_plans(&task, &SearchConfig::new(&oracle), plan.len() - 1).unwrap();
            assert!(shorter.is_empty());
        }
    }
}

#[test]
fn search_is_deterministic() {
    for (task, policy, _) in fixture_cases() {
        let oracle = SymbolicOracle::new(policy.clone());
        let a = solve(&task, &SearchConfig::new(&oracle)).unwrap();
        let b = solve(&task, &SearchConfig::new(&oracle)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}

#[test]
fn extra_rules_never_add_plans() {
    let task = river_task();
    let base = fixtures::river_policy(&task);
    let body = fixtures::RIVER_POLICY.trim_end().strip_suffix(')').unwrap();
    let stricter_text = format!("{body}\n  (forbid (at pig ?from) :action row_alone :id no-lone-trip-from-pig))");
    let stricter = ConstraintPolicy::parse(&stricter_text, &task).unwrap();
    let enumerate = |p: &ConstraintPolicy| -> BTreeSet<Plan> {
        let oracle = SymbolicOracle::new(p.clone());
        enumerate_plans(&task, &SearchConfig::new(&oracle), 9).unwrap().into_iter().collect()
    };
    let loose = enumerate(&base);
    let strict = enumerate(&stricter);
    assert!(strict.is_subset(&loose));
    assert!(strict.len() < loose.len());
}

#[test]
fn rejected_plans_are_not_enumerated() {
    let task = river_task();
    let policy = fixtures::river_policy(&task);
    let oracle = SymbolicOracle::new(policy.clone());
    let plans: BTreeSet<String> = enumerate_plans(&task, &SearchConfig::new(&oracle), 7)
        .unwrap()
        .iter()
        .map(Plan::to_text)
        .collect();
    let unsafe_plan = fixtures::RIVER_UNSAFE_PLAN;
    assert!(!validate(&task, &policy, unsafe_plan).is_valid());
    let normalized: String = redline_core::planner::parse_plan_text(unsafe_plan)
        .unwrap()
        .iter()
        .map(|s| format!("({} {})\n", s.name, s.args.join(" ")))
        .collect();
    assert!(!plans.contains(&normalized));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    /// Reordering init atoms in the source text does not change the plan.
    #[test]
    fn init_order_is_irrelevant(order in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
        let d = parse_domain(fixtures::CARE_DOMAIN).unwrap();
        let base = parse_problem(fixtures::CARE_PROBLEM, &d).unwrap();
        let atoms: Vec<String> = base.init.iter().map(|a| a.to_string()).collect();
        prop_assert_eq!(atoms.len(), order.len());
        let shuffled: Vec<&str> = order.iter().map(|&i| atoms[i].as_str()).collect();
        let start = fixtures::CARE_PROBLEM.find("(:init").unwrap();
        let end = fixtures::CARE_PROBLEM.find("(:goal").unwrap();
        let text = format!(
            "{}(:init {})\n  {}",
            &fixtures::CARE_PROBLEM[..start],
            shuffled.join(" "),
            &fixtures::CARE_PROBLEM[end..]
        );
        let p = parse_problem(&text, &d).unwrap();
        let task = redline_core::pddl::ground(&d, &p).unwrap();
        let reference = care_task();
        let policy = fixtures::care_policy(&task);
        prop_assert_eq!(bfs(&task, &policy), bfs(&reference, &fixtures::care_policy(&reference)));
    }

    /// Plans for perturbed care-home problems satisfy the reference rules.
    #[test]
    fn perturbed_problems_plan_soundly(places in prop::collection::vec(0usize..3, 4)) {
        let task = care_task();
        let locations = ["start", "table", "remove"];
        let mut problem = task.problem.clone();
        let movers = ["robot", "newspaper", "diary", "dishes"];
        problem.init.retain(|a| a.predicate != "at");
        for (m, &l) in movers.iter().zip(&places) {
            problem.init.insert(redline_core::pddl::GroundAtom::of("at", &[m, locations[l]]));
        }
        let t = task.with_problem(problem).unwrap();
        let policy = fixtures::care_policy(&t);
        match bfs(&t, &policy) {
            SearchOutcome::Solved(plan) => {
                prop_assert!(validate(&t, &policy, &plan.to_text()).is_valid());
                prop_assert_eq!(common::reference_kind(&t, &common::CARE_RULES, &common::as_steps(&plan.steps)), None);
                prop_assert!(!plan.steps.iter().any(|s| s.name == "clean_from_table" && s.args[2] == "diary"));
            }
            SearchOutcome::Unsolvable => {
                // confirm with exhaustive enumeration up to the state-space diameter
                let oracle = SymbolicOracle::new(policy.clone());
                prop_assert!(enumerate_plans(&t, &SearchConfig::new(&oracle), 5).unwrap().is_empty());
            }
            SearchOutcome::ResourceLimit => prop_assert!(false, "tiny task hit the limit"),
        }
    }
}
