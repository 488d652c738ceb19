//! Post-hoc plan checking.
//!
//! A plan is simulated from the initial state. Each step is checked for, in
//! order: a matching ground action, the oracle's activity verdict, the
//! action's precondition, and the legality of the successor state. The goal
//! is checked after the last step. The first failure ends the check.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constraint::{ConstraintOracle, ConstraintPolicy, DenialSource, SymbolicOracle};
use crate::pddl::{GroundAction, GroundedTask, State};
use crate::planner::{parse_plan_text, PlanStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Parse,
    UnknownAction,
    Precondition,
    ConstraintDenied,
    InvariantViolated,
    GoalUnsatisfied,
}

impl FailureKind {
    pub const ALL: [FailureKind; 6] = [
        FailureKind::Parse,
        FailureKind::UnknownAction,
        FailureKind::Precondition,
        FailureKind::ConstraintDenied,
        FailureKind::InvariantViolated,
        FailureKind::GoalUnsatisfied,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::Parse => "parse",
            FailureKind::UnknownAction => "unknown-action",
            FailureKind::Precondition => "precondition",
            FailureKind::ConstraintDenied => "constraint-denied",
            FailureKind::InvariantViolated => "invariant-violated",
            FailureKind::GoalUnsatisfied => "goal-unsatisfied",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedStep {
    /// 1-based step number; 0 for failures before the first step.
    pub index: usize,
    pub action: String,
    pub kind: FailureKind,
    pub detail: String,
    /// Id of the violated policy rule, for constraint and invariant failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: Validity,
    pub failed_step: Option<FailedStep>,
    pub goal_satisfied: bool,
    /// Digest of the initial state followed by one digest per simulated step.
    pub trace: Vec<String>,
    /// Further constraint failures, recorded only when simulation continues
    /// past them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub later_failures: Vec<FailedStep>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.verdict == Validity::Valid
    }

    pub fn kind(&self) -> Option<FailureKind> {
        self.failed_step.as_ref().map(|f| f.kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Keep simulating after constraint and invariant failures. The verdict
    /// still reflects the first failure.
    pub continue_past_constraints: bool,
}

/// Validate `plan_text` against the task and the policy's symbolic verdicts.
pub fn validate(task: &GroundedTask, policy: &ConstraintPolicy, plan_text: &str) -> ValidationReport {
    let oracle = SymbolicOracle::new(policy.clone());
    validate_with(task, &oracle, plan_text, ValidateOptions::default())
}

pub fn validate_with(
    task: &GroundedTask,
    oracle: &dyn ConstraintOracle,
    plan_text: &str,
    options: ValidateOptions,
) -> ValidationReport {
    match parse_plan_text(plan_text) {
        Ok(steps) => validate_steps(task, oracle, &steps, options),
        Err(e) => ValidationReport {
            verdict: Validity::Invalid,
            failed_step: Some(FailedStep {
                index: 0,
                action: String::new(),
                kind: FailureKind::Parse,
                detail: e.to_string(),
                rule: None,
            }),
            goal_satisfied: false,
            trace: vec![task.init.digest()],
            later_failures: Vec::new(),
        },
    }
}

/// Validate a plan already held as ground actions.
pub fn validate_actions(
    task: &GroundedTask,
    oracle: &dyn ConstraintOracle,
    actions: &[GroundAction],
    options: ValidateOptions,
) -> ValidationReport {
    let steps: Vec<PlanStep> = actions
        .iter()
        .map(|a| PlanStep {
            name: a.name.clone(),
            args: a.args.clone(),
            pos: Default::default(),
        })
        .collect();
    validate_steps(task, oracle, &steps, options)
}

fn validate_steps(
    task: &GroundedTask,
    oracle: &dyn ConstraintOracle,
    steps: &[PlanStep],
    options: ValidateOptions,
) -> ValidationReport {
    let mut state: State = task.init.clone();
    let mut trace = vec![state.digest()];
    let mut failures: Vec<FailedStep> = Vec::new();

    let init_check = oracle.check_state(&state);
    if !init_check.is_allowed() {
        failures.push(FailedStep {
            index: 0,
            action: String::new(),
            kind: FailureKind::InvariantViolated,
            detail: format!("initial state: {}", init_check.detail),
            rule: Some(init_check.reason),
        });
        if !options.continue_past_constraints {
            return finish(task, &state, trace, failures);
        }
    }

    for (i, step) in steps.iter().enumerate() {
        let index = i + 1;
        let label = step.to_string();
        let Some(action) = task.find_any(&step.name, &step.args) else {
            failures.push(FailedStep {
                index,
                action: label,
                kind: FailureKind::UnknownAction,
                detail: unknown_detail(task, step),
                rule: None,
            });
            return finish(task, &state, trace, failures);
        };

        let decision = oracle.decide(i as u64, &state, action);
        let mut deferred = None;
        if !decision.is_allowed() {
            if decision.source == Some(DenialSource::Invariant) {
                deferred = Some(decision);
            } else {
                failures.push(FailedStep {
                    index,
                    action: label.clone(),
                    kind: FailureKind::ConstraintDenied,
                    detail: decision.detail,
                    rule: Some(decision.reason),
                });
                if !options.continue_past_constraints {
                    return finish(task, &state, trace, failures);
                }
            }
        }

        if let Some(literal) = action.first_unmet(&state) {
            failures.push(FailedStep {
                index,
                action: label,
                kind: FailureKind::Precondition,
                detail: format!("precondition {literal} does not hold"),
                rule: None,
            });
            return finish(task, &state, trace, failures);
        }

        state = action.successor(&state);
        trace.push(state.digest());

        let check = oracle.check_state(&state);
        let invariant_failure = if !check.is_allowed() { Some(check) } else { deferred };
        if let Some(d) = invariant_failure {
            failures.push(FailedStep {
                index,
                action: label,
                kind: FailureKind::InvariantViolated,
                detail: d.detail,
                rule: Some(d.reason),
            });
            if !options.continue_past_constraints {
                return finish(task, &state, trace, failures);
            }
        }
    }

    if !task.goal_holds(&state) {
        failures.push(FailedStep {
            index: steps.len(),
            action: steps.last().map(|s| s.to_string()).unwrap_or_default(),
            kind: FailureKind::GoalUnsatisfied,
            detail: format!("goal does not hold after {} step(s)", steps.len()),
            rule: None,
        });
    }
    finish(task, &state, trace, failures)
}

fn unknown_detail(task: &GroundedTask, step: &PlanStep) -> String {
    match task.domain.action(&step.name) {
        None => format!("no action named '{}' in domain {}", step.name, task.domain.name),
        Some(schema) if schema.params.len() != step.args.len() => format!(
            "'{}' takes {} argument(s), {} given",
            step.name,
            schema.params.len(),
            step.args.len()
        ),
        Some(schema) => {
            let bad = schema
                .params
                .iter()
                .zip(&step.args)
                .find(|(p, a)| !task.objects.is_instance(a, &p.ty));
            match bad {
                Some((p, a)) if task.objects.contains(a) => {
                    format!("'{a}' is not of type {} required for {}", p.ty, p.name)
                }
                Some((_, a)) => format!("unknown object '{a}'"),
                None => format!("no ground instance {step}"),
            }
        }
    }
}

fn finish(task: &GroundedTask, state: &State, trace: Vec<String>, mut failures: Vec<FailedStep>) -> ValidationReport {
    let goal_satisfied = task.goal_holds(state);
    let first = if failures.is_empty() {
        None
    } else {
        Some(failures.remove(0))
    };
    ValidationReport {
        verdict: if first.is_some() {
            Validity::Invalid
        } else {
            Validity::Valid
        },
        failed_step: first,
        goal_satisfied,
        trace,
        later_failures: failures,
    }
}

/// Deterministic one-paragraph rendering of a report.
pub fn explain(report: &ValidationReport) -> String {
    match &report.failed_step {
        None => format!("plan valid; goal satisfied in {} steps", report.trace.len() - 1),
        Some(f) => {
            let mut out = if f.index == 0 {
                format!("plan invalid before the first step: {}", f.kind)
            } else {
                format!("plan invalid at step {} {}: {}", f.index, f.action, f.kind)
            };
            if let Some(rule) = &f.rule {
                out.push_str(&format!(" (rule {rule})"));
            }
            out.push_str(&format!("; {}", f.detail));
            if !report.later_failures.is_empty() {
                let later: Vec<String> = report
                    .later_failures
                    .iter()
                    .map(|l| format!("step {} {} {}", l.index, l.action, l.kind))
                    .collect();
                out.push_str(&format!("; further failures: {}", later.join(", ")));
            }
            out
        }
    }
}
