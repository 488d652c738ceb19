mod common;

use proptest::prelude::*;
use redline_core::constraint::{ConstraintPolicy, SymbolicOracle};
use redline_core::fixtures::{self, care_task, river_task};
use redline_core::pddl::{GroundAction, GroundedTask};
use redline_core::planner::{solve, SearchConfig};
use redline_core::validator::{validate, ValidationReport};

use common::Steps;

fn optimal(task: &GroundedTask, policy: &ConstraintPolicy) -> Vec<GroundAction> {
    let oracle = SymbolicOracle::new(policy.clone());
    solve(task, &SearchConfig::new(&oracle)).unwrap().0.plan().unwrap().steps.clone()
}

fn observed(report: &ValidationReport) -> Option<(usize, &'static str)> {
    report.failed_step.as_ref().map(|f| (f.index, f.kind.as_str()))
}

#[test]
fn every_mutant_gets_the_reference_verdict() {
    let cases: Vec<(GroundedTask, &common::Rules, &str)> = vec![
        (care_task(), &common::CARE_RULES, fixtures::CARE_POLICY),
        (river_task(), &common::RIVER_RULES, fixtures::RIVER_POLICY),
    ];
    for (task, rules, policy_text) in cases {
        let policy = ConstraintPolicy::parse(policy_text, &task).unwrap();
        let base = optimal(&task, &policy);
        let all = common::mutants(&task, &policy, &base);
        assert!(all.len() > 20, "{} mutants", all.len());
        let mut invalid = 0;
        for (how, m) in &all {
            let expected = common::reference_kind(&task, rules, m);
            let report = validate(&task, &policy, &common::plan_text(m));
            assert_eq!(observed(&report), expected, "{how} mutant {m:?}");
            if matches!(*how, "drop" | "insert-denied") {
                assert!(expected.is_some(), "{how} mutant {m:?} is still valid");
            }
            invalid += usize::from(expected.is_some());
        }
        assert!(invalid > 0);
    }
}

#[test]
fn care_examples() {
    let task = care_task();
    let policy = fixtures::care_policy(&task);
    let r = validate(
        &task,
        &policy,
        "(clean_from_table robot table dishes remove)\n(clean_from_table robot table newspaper remove)\n",
    );
    assert_eq!(observed(&r), Some((1, "precondition")));
    let r = validate(
        &task,
        &policy,
        "(move robot start table)\n(clean_from_table robot table diary remove)\n",
    );
    assert_eq!(observed(&r), Some((2, "constraint-denied")));
    assert_eq!(r.failed_step.unwrap().rule.as_deref(), Some("personal-object"));
}

fn arb_plan(task: &GroundedTask, max: usize) -> impl Strategy<Value = Steps> {
    let all: Vec<(String, Vec<String>)> = common::as_steps(&task.all_instances().into_iter().cloned().collect::<Vec<_>>());
    prop::collection::vec(prop::sample::select(all), 0..=max)
}

fn arb_biased_plan(task: &GroundedTask, policy: &ConstraintPolicy) -> impl Strategy<Value = Steps> {
    // mostly prefixes of the optimal plan followed by random steps, so deep failures are exercised
    let base = common::as_steps(&optimal(task, policy));
    let n = base.len();
    (0..=n, arb_plan(task, 4)).prop_map(move |(k, tail)| {
        let mut p = base[..k].to_vec();
        p.extend(tail);
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn random_care_plans_match_reference(plan in arb_biased_plan(&care_task(), &fixtures::care_policy(&care_task()))) {
        let task = care_task();
        let policy = fixtures::care_policy(&task);
        let report = validate(&task, &policy, &common::plan_text(&plan));
        prop_assert_eq!(observed(&report), common::reference_kind(&task, &common::CARE_RULES, &plan));
    }

    #[test]
    fn random_river_plans_match_reference(plan in arb_biased_plan(&river_task(), &fixtures::river_policy(&river_task()))) {
        let task = river_task();
        let policy = fixtures::river_policy(&task);
        let report = validate(&task, &policy, &common::plan_text(&plan));
        prop_assert_eq!(observed(&report), common::reference_kind(&task, &common::RIVER_RULES, &plan));
    }

    #[test]
    fn failures_persist_under_extension(plan in arb_plan(&river_task(), 6), tail in arb_plan(&river_task(), 4)) {
        let task = river_task();
        let policy = fixtures::river_policy(&task);
        let report = validate(&task, &policy, &common::plan_text(&plan));
        if let Some(f) = &report.failed_step {
            // the goal check is the only failure that a suffix can repair
            if f.kind.as_str() != "goal-unsatisfied" {
                let k = f.index;
                let mut extended = plan[..k].to_vec();
                extended.extend(tail);
                let again = validate(&task, &policy, &common::plan_text(&extended));
                let g = again.failed_step.expect("extension stays invalid");
                prop_assert!(g.index <= k, "failed at {} after extension, {} before", g.index, k);
            }
        }
    }
}
