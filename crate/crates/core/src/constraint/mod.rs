//! Access-control layer: policies, oracles and decision logs.

pub mod log;
pub mod oracle;
pub mod policy;

pub use log::{log_decision, read_log, DecisionLog, DecisionMetrics, DecisionRecord};
pub use oracle::{
    noisy_decide, symbolic_decide, AccessDecision, AllOf, ConstraintOracle, DenialSource, NoisyOracle,
    OracleError, SymbolicOracle, Verdict,
};
pub use policy::{ActivityKind, ActivityRule, AttributeDenial, ConstraintPolicy, Rule, RuleKind, StateInvariant};

use crate::pddl::GroundAction;

/// Subject and object of an access query for logging. The subject is the
/// first argument; the object is the argument an attribute denial inspects,
/// falling back to the last argument.
pub fn query_roles(policy: &ConstraintPolicy, action: &GroundAction) -> (String, String) {
    let subject = action.args.first().cloned().unwrap_or_else(|| "-".to_string());
    let object = policy
        .object_argument(action)
        .map(str::to_string)
        .or_else(|| action.args.last().cloned())
        .unwrap_or_else(|| "-".to_string());
    (subject, object)
}
