use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::policy::{ConstraintPolicy, RuleKind};
use crate::pddl::{GroundAction, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Allow,
    Deny,
}

impl Verdict {
    pub fn flipped(self) -> Verdict {
        match self {
            Verdict::Allow => Verdict::Deny,
            Verdict::Deny => Verdict::Allow,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Allow => "allow",
            Verdict::Deny => "deny",
        })
    }
}

/// Where a denial came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenialSource {
    /// An activity rule or attribute denial.
    Activity,
    /// A state invariant failing on the successor state.
    Invariant,
    /// A simulated learned model disagreeing with the rules.
    Learned,
}

impl From<RuleKind> for DenialSource {
    fn from(k: RuleKind) -> Self {
        match k {
            RuleKind::Activity => DenialSource::Activity,
            RuleKind::Invariant => DenialSource::Invariant,
        }
    }
}

pub const REASON_OK: &str = "ok";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessDecision {
    pub verdict: Verdict,
    /// Violated rule id, or `ok`.
    pub reason: String,
    pub oracle_id: String,
    pub source: Option<DenialSource>,
    /// Longer explanation for reports.
    pub detail: String,
}

impl AccessDecision {
    pub fn allow(oracle_id: &str) -> Self {
        AccessDecision {
            verdict: Verdict::Allow,
            reason: REASON_OK.to_string(),
            oracle_id: oracle_id.to_string(),
            source: None,
            detail: String::new(),
        }
    }

    pub fn deny(oracle_id: &str, reason: impl Into<String>, source: DenialSource, detail: impl Into<String>) -> Self {
        AccessDecision {
            verdict: Verdict::Deny,
            reason: reason.into(),
            oracle_id: oracle_id.to_string(),
            source: Some(source),
            detail: detail.into(),
        }
    }

    pub fn is_allowed(&self) -> bool {
        self.verdict == Verdict::Allow
    }
}

/// Decides whether an activity may be performed and whether a state is legal.
///
/// `query_id` identifies the query for seeded oracles; deterministic oracles
/// ignore it.
pub trait ConstraintOracle: Send + Sync {
    fn id(&self) -> &str;
    fn decide(&self, query_id: u64, state: &State, action: &GroundAction) -> AccessDecision;
    fn check_state(&self, state: &State) -> AccessDecision;
    fn is_deterministic(&self) -> bool;
    fn seed(&self) -> Option<u64> {
        None
    }
}

/// Decide by the policy rules alone.
pub fn symbolic_decide(policy: &ConstraintPolicy, state: &State, action: &GroundAction) -> AccessDecision {
    match policy.first_violation(state, action) {
        Some(v) => AccessDecision::deny(SymbolicOracle::ID, v.rule_id, v.kind.into(), v.detail),
        None => AccessDecision::allow(SymbolicOracle::ID),
    }
}

#[derive(Debug, Clone)]
pub struct SymbolicOracle {
    policy: ConstraintPolicy,
}

impl SymbolicOracle {
    pub const ID: &'static str = "symbolic";

    pub fn new(policy: ConstraintPolicy) -> Self {
        SymbolicOracle { policy }
    }

    pub fn policy(&self) -> &ConstraintPolicy {
        &self.policy
    }
}

impl ConstraintOracle for SymbolicOracle {
    fn id(&self) -> &str {
        Self::ID
    }

    fn decide(&self, _query_id: u64, state: &State, action: &GroundAction) -> AccessDecision {
        symbolic_decide(&self.policy, state, action)
    }

    fn check_state(&self, state: &State) -> AccessDecision {
        match self.policy.state_violation(state) {
            Some(v) => AccessDecision::deny(Self::ID, v.rule_id, DenialSource::Invariant, v.detail),
            None => AccessDecision::allow(Self::ID),
        }
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("epsilon must lie in [0, 0.5], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("unknown oracle '{0}' (expected symbolic, noisy:<epsilon> or kb)")]
    UnknownSpec(String),
}

/// A stand-in for a learned access-control model: the symbolic verdict,
/// flipped with probability `epsilon`. Each flip is drawn from a ChaCha
/// stream selected by the query id, so verdicts depend only on
/// `(seed, query_id)` and not on call order.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    inner: SymbolicOracle,
    epsilon: f64,
    seed: u64,
    id: String,
}

pub const NOISE_TAG: &str = "simulated-dlbac";

impl NoisyOracle {
    pub fn new(inner: SymbolicOracle, epsilon: f64, seed: u64) -> Result<Self, OracleError> {
        if !(0.0..=0.5).contains(&epsilon) {
            return Err(OracleError::EpsilonOutOfRange(epsilon));
        }
        Ok(NoisyOracle {
            inner,
            epsilon,
            seed,
            id: format!("noisy:{epsilon}"),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Whether the verdict for `query_id` is flipped.
    pub fn flips(&self, query_id: u64) -> bool {
        if self.epsilon == 0.0 {
            return false;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(query_id);
        rng.random_bool(self.epsilon)
    }
}

/// Apply simulated noise to `inner`'s verdict for `query_id`.
pub fn noisy_decide(oracle: &NoisyOracle, query_id: u64, state: &State, action: &GroundAction) -> AccessDecision {
    let truth = oracle.inner.decide(query_id, state, action);
    if !oracle.flips(query_id) {
        return match truth.verdict {
            Verdict::Allow => AccessDecision::allow(&oracle.id),
            Verdict::Deny => AccessDecision {
                reason: format!("{NOISE_TAG}:{}", truth.reason),
                oracle_id: oracle.id.clone(),
                ..truth
            },
        };
    }
    match truth.verdict {
        Verdict::Allow => AccessDecision::deny(
            &oracle.id,
            format!("{NOISE_TAG}:flip"),
            DenialSource::Learned,
            format!("simulated learned model denied {action} (rules allow it)"),
        ),
        Verdict::Deny => AccessDecision::allow(&oracle.id),
    }
}

impl ConstraintOracle for NoisyOracle {
    fn id(&self) -> &str {
        &self.id
    }

    fn decide(&self, query_id: u64, state: &State, action: &GroundAction) -> AccessDecision {
        noisy_decide(self, query_id, state, action)
    }

    /// State legality stays exact: noise only affects activity decisions.
    fn check_state(&self, state: &State) -> AccessDecision {
        let d = self.inner.check_state(state);
        AccessDecision {
            oracle_id: self.id.clone(),
            ..d
        }
    }

    fn is_deterministic(&self) -> bool {
        self.epsilon == 0.0
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }
}

/// Several oracles consulted together; the first denial wins.
pub struct AllOf {
    oracles: Vec<Box<dyn ConstraintOracle>>,
    id: String,
}

impl AllOf {
    pub fn new(oracles: Vec<Box<dyn ConstraintOracle>>) -> Self {
        let ids: Vec<&str> = oracles.iter().map(|o| o.id()).collect();
        let id = format!("all({})", ids.join(","));
        AllOf { oracles, id }
    }
}

impl ConstraintOracle for AllOf {
    fn id(&self) -> &str {
        &self.id
    }

    fn decide(&self, query_id: u64, state: &State, action: &GroundAction) -> AccessDecision {
        self.oracles
            .iter()
            .map(|o| o.decide(query_id, state, action))
            .find(|d| !d.is_allowed())
            .unwrap_or_else(|| AccessDecision::allow(&self.id))
    }

    fn check_state(&self, state: &State) -> AccessDecision {
        self.oracles
            .iter()
            .map(|o| o.check_state(state))
            .find(|d| !d.is_allowed())
            .unwrap_or_else(|| AccessDecision::allow(&self.id))
    }

    fn is_deterministic(&self) -> bool {
        self.oracles.iter().all(|o| o.is_deterministic())
    }

    fn seed(&self) -> Option<u64> {
        self.oracles.iter().find_map(|o| o.seed())
    }
}
