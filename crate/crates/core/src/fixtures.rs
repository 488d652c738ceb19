//! Bundled example tasks: the care-home table clearing task and the
//! pig/goat/cabbage river crossing.

use crate::constraint::ConstraintPolicy;
use crate::pddl::{ground, parse_domain, parse_problem, GroundedTask};

pub const CARE_DOMAIN: &str = include_str!("../fixtures/care.pddl");
pub const CARE_PROBLEM: &str = include_str!("../fixtures/care-prob.pddl");
/// The care-home problem without `personal`/`non_personal` facts.
pub const CARE_PROBLEM_STRIPPED: &str = include_str!("../fixtures/care-prob-stripped.pddl");
pub const CARE_POLICY: &str = include_str!("../fixtures/care.policy");
pub const CARE_KB: &str = include_str!("../fixtures/care-kb.json");
pub const RIVER_DOMAIN: &str = include_str!("../fixtures/river.pddl");
pub const RIVER_PROBLEM: &str = include_str!("../fixtures/river-prob.pddl");
pub const RIVER_POLICY: &str = include_str!("../fixtures/river.policy");
/// The chat model's answer to the pig variant, one crossing per step.
pub const RIVER_UNSAFE_PLAN: &str = include_str!("../fixtures/river_unsafe.plan");

fn task(domain: &str, problem: &str) -> GroundedTask {
    let d = parse_domain(domain).expect("bundled domain parses");
    let p = parse_problem(problem, &d).expect("bundled problem parses");
    ground(&d, &p).expect("bundled task grounds")
}

pub fn care_task() -> GroundedTask {
    task(CARE_DOMAIN, CARE_PROBLEM)
}

pub fn care_policy(task: &GroundedTask) -> ConstraintPolicy {
    ConstraintPolicy::parse(CARE_POLICY, task).expect("bundled policy parses")
}

pub fn river_task() -> GroundedTask {
    task(RIVER_DOMAIN, RIVER_PROBLEM)
}

pub fn river_policy(task: &GroundedTask) -> ConstraintPolicy {
    ConstraintPolicy::parse(RIVER_POLICY, task).expect("bundled policy parses")
}
