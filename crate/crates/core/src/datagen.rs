//! Synthetic training data: labelled access-decision logs and
//! (problem, plan, label) corpora.
//!
//! Every item is produced from its own RNG stream `(seed, attempt)`, so a
//! corpus is a pure function of the seed and the spec no matter how many
//! worker threads produce it.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::constraint::{
    log_decision, query_roles, symbolic_decide, ConstraintOracle, ConstraintPolicy, DecisionLog, DecisionRecord,
    SymbolicOracle, Verdict,
};
use crate::pddl::{
    domain_to_string, parse_problem, problem_to_string, AtomTemplate, Formula, GroundAction, GroundAtom,
    GroundedTask, Literal, ProblemAst, State, Term,
};
use crate::planner::{solve, Plan, SearchConfig, SearchOutcome};
use crate::validator::{validate, FailureKind, ValidationReport};

/// Attempts allowed per requested item before a run gives up.
const ATTEMPTS_PER_ITEM: usize = 50;
/// Resamples allowed for one reverse walk.
const WALK_RETRIES: usize = 20;
/// Draws allowed when looking for a query with a particular ground truth.
const BALANCE_TRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenMode {
    Logs,
    PlansForward,
    PlansReverse,
    PlansInvalid,
}

impl GenMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GenMode::Logs => "logs",
            GenMode::PlansForward => "plans-forward",
            GenMode::PlansReverse => "plans-reverse",
            GenMode::PlansInvalid => "plans-invalid",
        }
    }
}

impl fmt::Display for GenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GenMode {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [GenMode::Logs, GenMode::PlansForward, GenMode::PlansReverse, GenMode::PlansInvalid]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| DatagenError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    DropStep,
    SwapDependent,
    SubstituteObject,
    InsertDenied,
}

impl MutationKind {
    pub const ALL: [MutationKind; 4] = [
        MutationKind::DropStep,
        MutationKind::SwapDependent,
        MutationKind::SubstituteObject,
        MutationKind::InsertDenied,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MutationKind::DropStep => "drop-step",
            MutationKind::SwapDependent => "swap-dependent",
            MutationKind::SubstituteObject => "substitute-object",
            MutationKind::InsertDenied => "insert-denied",
        }
    }
}

impl FromStr for MutationKind {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MutationKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| DatagenError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct GenSpec {
    pub mode: GenMode,
    pub count: usize,
    pub seed: u64,
    /// Reverse walk length; also the random-walk horizon for logs.
    pub depth: usize,
    pub mutation_kinds: BTreeSet<MutationKind>,
    /// Logs only: alternate allow and deny ground truths.
    pub balanced: bool,
    pub max_expansions: usize,
    pub workers: usize,
}

impl GenSpec {
    pub fn new(mode: GenMode, count: usize, seed: u64) -> Self {
        GenSpec {
            mode,
            count,
            seed,
            depth: 5,
            mutation_kinds: MutationKind::ALL.into_iter().collect(),
            balanced: false,
            max_expansions: 1_000_000,
            workers: 1,
        }
    }

    pub fn check(&self) -> Result<(), DatagenError> {
        if self.count == 0 {
            return Err(DatagenError::InvalidSpec("count must be positive".into()));
        }
        if self.depth == 0 && matches!(self.mode, GenMode::PlansReverse | GenMode::Logs) {
            return Err(DatagenError::InvalidSpec("depth must be positive".into()));
        }
        Ok(())
    }

    fn expect_mode(&self, mode: GenMode) -> Result<(), DatagenError> {
        self.check()?;
        if self.mode != mode {
            return Err(DatagenError::InvalidSpec(format!(
                "spec mode is {} but {mode} was requested",
                self.mode
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("unknown name '{0}'")]
    UnknownName(String),
    #[error("no valid base plan: {0}")]
    NoBasePlan(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Valid,
    Invalid(FailureKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemProvenance {
    Forward,
    Reverse,
    Mutated,
}

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub id: String,
    pub problem: ProblemAst,
    pub plan: Plan,
    pub label: Label,
    pub provenance: ItemProvenance,
    pub mutation: Option<MutationKind>,
    pub seed: u64,
}

#[derive(Serialize)]
struct ItemLine<'a> {
    id: &'a str,
    domain_text: &'a str,
    problem_text: String,
    plan_text: String,
    label: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<FailureKind>,
    provenance: ItemProvenance,
    seed: u64,
}

impl CorpusItem {
    pub fn problem_text(&self) -> String {
        problem_to_string(&self.problem)
    }

    pub fn plan_text(&self) -> String {
        self.plan.to_text()
    }

    pub fn to_json_line(&self, domain_text: &str) -> String {
        let (label, kind) = match self.label {
            Label::Valid => ("valid", None),
            Label::Invalid(k) => ("invalid", Some(k)),
        };
        serde_json::to_string(&ItemLine {
            id: &self.id,
            domain_text,
            problem_text: self.problem_text(),
            plan_text: self.plan_text(),
            label,
            kind,
            provenance: self.provenance,
            seed: self.seed,
        })
        .expect("corpus items serialize")
    }
}

/// Counters for one generation run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct GenSummary {
    pub mode: String,
    pub requested: usize,
    pub emitted: usize,
    pub attempts: usize,
    /// Forward: unsolvable or illegal variants. Reverse: walks that never
    /// produced a goal.
    pub skipped: usize,
    /// Mutants that turned out valid, or mutations with nothing to act on.
    pub discarded: usize,
    /// Reverse walks restarted after a dead end or an empty change set.
    pub resampled: usize,
    #[serde(serialize_with = "secs")]
    pub wall_time: Duration,
}

fn secs<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl GenSummary {
    fn new(spec: &GenSpec) -> Self {
        GenSummary {
            mode: spec.mode.to_string(),
            requested: spec.count,
            ..Default::default()
        }
    }

    pub fn per_item(&self) -> Option<Duration> {
        (self.emitted > 0).then(|| self.wall_time / self.emitted as u32)
    }
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[GenSummary]) -> Result<(), DatagenError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Write items as JSONL with the domain text embedded in every line.
pub fn write_corpus<W: Write>(mut out: W, task: &GroundedTask, items: &[CorpusItem]) -> io::Result<()> {
    let domain_text = domain_to_string(&task.domain);
    for item in items {
        writeln!(out, "{}", item.to_json_line(&domain_text))?;
    }
    out.flush()
}

fn item_rng(seed: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    rng
}

/// Re-parse the emitted texts, re-ground and validate with the symbolic
/// policy, independent of how the item was built.
pub fn certify(
    task: &GroundedTask,
    policy: &ConstraintPolicy,
    problem_text: &str,
    plan_text: &str,
) -> Result<ValidationReport, String> {
    let problem = parse_problem(problem_text, &task.domain).map_err(|e| e.to_string())?;
    let t = task.with_problem(problem).map_err(|e| e.to_string())?;
    Ok(validate(&t, policy, plan_text))
}

fn certified_label(task: &GroundedTask, policy: &ConstraintPolicy, problem: &ProblemAst, plan: &Plan) -> Option<Label> {
    let report = certify(task, policy, &problem_to_string(problem), &plan.to_text()).ok()?;
    Some(match report.kind() {
        None => Label::Valid,
        Some(k) => Label::Invalid(k),
    })
}

enum Attempt<T> {
    Item(T),
    Skipped,
    Discarded,
}

/// Run numbered attempts until `count` items exist, in attempt order.
/// Attempts run in parallel batches; results do not depend on `workers`.
fn run_attempts<T, F>(spec: &GenSpec, summary: &mut GenSummary, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> Attempt<T> + Sync,
{
    let workers = spec.workers.max(1);
    let max_attempts = spec.count.saturating_mul(ATTEMPTS_PER_ITEM) as u64;
    let mut items = Vec::new();
    let mut next = 0u64;
    while items.len() < spec.count && next < max_attempts {
        let batch = ((spec.count - items.len()) as u64).max(workers as u64).min(max_attempts - next);
        let ids: Vec<u64> = (next..next + batch).collect();
        next += batch;
        let results: Vec<Attempt<T>> = if workers == 1 {
            ids.iter().map(|&a| f(a)).collect()
        } else {
            let chunk = ids.len().div_ceil(workers);
            std::thread::scope(|s| {
                let handles: Vec<_> = ids
                    .chunks(chunk)
                    .map(|c| s.spawn(|| c.iter().map(|&a| f(a)).collect::<Vec<_>>()))
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("generation worker panicked"))
                    .collect()
            })
        };
        for r in results {
            if items.len() == spec.count {
                break;
            }
            summary.attempts += 1;
            match r {
                Attempt::Item(t) => items.push(t),
                Attempt::Skipped => summary.skipped += 1,
                Attempt::Discarded => summary.discarded += 1,
            }
        }
    }
    items
}

/// One random step of a constraint-respecting walk.
fn allowed_step<'a>(
    task: &'a GroundedTask,
    oracle: &dyn ConstraintOracle,
    state: &State,
    rng: &mut ChaCha8Rng,
) -> Option<&'a GroundAction> {
    let mut moves: Vec<&GroundAction> = task
        .actions
        .iter()
        .filter(|a| a.is_applicable(state) && oracle.decide(0, state, a).is_allowed())
        .collect();
    // first legal move of a shuffle is uniform over legal moves; invariants
    // are only evaluated until one passes
    moves.shuffle(rng);
    moves.into_iter().find(|a| oracle.check_state(&a.successor(state)).is_allowed())
}

/// Sample (state, action) access queries and log them.
///
/// States come from a seeded random walk that restarts at the initial state
/// after `depth` steps or at a dead end. Actions are drawn uniformly from all
/// type-correct instances, pruned ones included.
pub fn gen_logs<W: Write>(
    task: &GroundedTask,
    policy: &ConstraintPolicy,
    oracle: &dyn ConstraintOracle,
    spec: &GenSpec,
    sink: &mut DecisionLog<W>,
) -> Result<GenSummary, DatagenError> {
    spec.expect_mode(GenMode::Logs)?;
    let start = Instant::now();
    let mut summary = GenSummary::new(spec);
    let symbolic = SymbolicOracle::new(policy.clone());
    let universe = task.all_instances();
    let mut rng = item_rng(spec.seed, 0);
    let mut state = task.init.clone();
    let mut walked = 0;
    for i in 0..spec.count {
        let want = spec.balanced.then_some(if i % 2 == 0 { Verdict::Allow } else { Verdict::Deny });
        let mut tries = 0;
        let (query_state, action, truth) = loop {
            let action = *universe.choose(&mut rng).expect("task has actions");
            let truth = symbolic_decide(policy, &state, action).verdict;
            let s = state.clone();
            let done = want.is_none_or(|w| w == truth) || tries == BALANCE_TRIES;
            tries += 1;
            summary.attempts += 1;
            // advance the walk between draws
            match allowed_step(task, &symbolic, &state, &mut rng) {
                Some(a) if walked < spec.depth => {
                    state = a.successor(&state);
                    walked += 1;
                }
                _ => {
                    state = task.init.clone();
                    walked = 0;
                }
            }
            if done {
                break (s, action, truth);
            }
        };
        let query_id = i as u64;
        let decision = oracle.decide(query_id, &query_state, action);
        let (subject, object) = query_roles(policy, action);
        let record = DecisionRecord {
            query_id,
            subject,
            action: action.to_string(),
            object,
            state_digest: query_state.digest(),
            ground_truth: truth,
            verdict: decision.verdict,
            oracle_id: oracle.id().to_string(),
            seed: oracle.seed(),
        };
        log_decision(sink, &record)?;
        summary.emitted += 1;
    }
    summary.wall_time = start.elapsed();
    Ok(summary)
}

/// Init atoms whose predicate some action changes, each with its last
/// argument resampled among objects of the declared type.
fn perturbed_init(task: &GroundedTask, rng: &mut ChaCha8Rng) -> std::collections::BTreeSet<GroundAtom> {
    let mut init = std::collections::BTreeSet::new();
    for atom in &task.problem.init {
        let decl = task.domain.predicate(&atom.predicate);
        let movable = !task.static_predicates.contains(&atom.predicate) && !atom.args.is_empty();
        match decl.and_then(|d| d.params.last()) {
            Some(last) if movable => {
                let candidates = task.objects.of_type(&last.ty);
                let mut moved = atom.clone();
                if let Some(o) = candidates.choose(rng) {
                    *moved.args.last_mut().unwrap() = o.clone();
                }
                init.insert(moved);
            }
            _ => {
                init.insert(atom.clone());
            }
        }
    }
    init
}

fn variant(task: &GroundedTask, suffix: String, init: std::collections::BTreeSet<GroundAtom>, goal: Formula) -> ProblemAst {
    ProblemAst {
        name: format!("{}-{suffix}", task.problem.name),
        domain_name: task.problem.domain_name.clone(),
        objects: task.problem.objects.clone(),
        init,
        goal,
    }
}

/// Perturb the init, solve, and emit each solvable variant with its plan.
pub fn gen_plans_forward(
    task: &GroundedTask,
    policy: &ConstraintPolicy,
    spec: &GenSpec,
) -> Result<(Vec<CorpusItem>, GenSummary), DatagenError> {
    spec.expect_mode(GenMode::PlansForward)?;
    let start = Instant::now();
    let mut summary = GenSummary::new(spec);
    let oracle = SymbolicOracle::new(policy.clone());
    let items = run_attempts(spec, &mut summary, |attempt| {
        let mut rng = item_rng(spec.seed, attempt);
        let problem = variant(task, format!("fwd{attempt}"), perturbed_init(task, &mut rng), task.problem.goal.clone());
        let Ok(t) = task.with_problem(problem.clone()) else {
            return Attempt::Skipped;
        };
        let mut config = SearchConfig::new(&oracle);
        config.max_expansions = spec.max_expansions;
        let plan = match solve(&t, &config) {
            Ok((SearchOutcome::Solved(plan), _)) => plan,
            _ => return Attempt::Skipped,
        };
        match certified_label(task, policy, &problem, &plan) {
            Some(Label::Valid) => Attempt::Item(CorpusItem {
                id: format!("forward-{attempt:06}"),
                problem,
                plan,
                label: Label::Valid,
                provenance: ItemProvenance::Forward,
                mutation: None,
                seed: spec.seed,
            }),
            _ => Attempt::Discarded,
        }
    });
    summary.emitted = items.len();
    summary.wall_time = start.elapsed();
    Ok((items, summary))
}

fn ground_literal(positive: bool, atom: &GroundAtom) -> Literal {
    Literal {
        positive,
        atom: AtomTemplate {
            predicate: atom.predicate.clone(),
            args: atom.args.iter().cloned().map(Term::Const).collect(),
        },
    }
}

/// Walk `depth` allowed steps from a sampled legal init and turn the walk
/// into a problem whose goal is the set of atoms it changed.
pub fn gen_plans_reverse(
    task: &GroundedTask,
    policy: &ConstraintPolicy,
    spec: &GenSpec,
) -> Result<(Vec<CorpusItem>, GenSummary), DatagenError> {
    spec.expect_mode(GenMode::PlansReverse)?;
    let start = Instant::now();
    let mut summary = GenSummary::new(spec);
    let oracle = SymbolicOracle::new(policy.clone());
    let resampled = std::sync::atomic::AtomicUsize::new(0);
    let items = run_attempts(spec, &mut summary, |attempt| {
        let mut rng = item_rng(spec.seed, attempt);
        for _ in 0..WALK_RETRIES {
            let init = State::from(perturbed_init(task, &mut rng));
            if policy.state_violation(&init).is_some() {
                resampled.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                continue;
            }
            let mut state = init.clone();
            let mut steps = Vec::with_capacity(spec.depth);
            while steps.len() < spec.depth {
                match allowed_step(task, &oracle, &state, &mut rng) {
                    Some(a) => {
                        state = a.successor(&state);
                        steps.push(a.clone());
                    }
                    None => break,
                }
            }
            let changed: Vec<Literal> = state
                .iter()
                .filter(|a| !init.contains(a))
                .map(|a| ground_literal(true, a))
                .chain(init.iter().filter(|a| !state.contains(a)).map(|a| ground_literal(false, a)))
                .collect();
            if steps.len() < spec.depth || changed.is_empty() {
                resampled.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                continue;
            }
            let problem = variant(
                task,
                format!("rev{attempt}"),
                init.atoms().clone(),
                Formula::conjunction(changed),
            );
            let plan = Plan::new(steps);
            return match certified_label(task, policy, &problem, &plan) {
                Some(Label::Valid) => Attempt::Item(CorpusItem {
                    id: format!("reverse-{attempt:06}"),
                    problem,
                    plan,
                    label: Label::Valid,
                    provenance: ItemProvenance::Reverse,
                    mutation: None,
                    seed: spec.seed,
                }),
                _ => Attempt::Discarded,
            };
        }
        Attempt::Skipped
    });
    summary.resampled = resampled.into_inner();
    summary.emitted = items.len();
    summary.wall_time = start.elapsed();
    Ok((items, summary))
}

/// States before each step and after the last one.
fn states_along(init: &State, steps: &[GroundAction]) -> Vec<State> {
    let mut out = vec![init.clone()];
    for a in steps {
        let next = a.successor(out.last().unwrap());
        out.push(next);
    }
    out
}

fn mutate(
    task: &GroundedTask,
    oracle: &dyn ConstraintOracle,
    base: &[GroundAction],
    kind: MutationKind,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<GroundAction>> {
    let mut steps = base.to_vec();
    match kind {
        MutationKind::DropStep => {
            if steps.is_empty() {
                return None;
            }
            steps.remove(rng.random_range(0..steps.len()));
        }
        MutationKind::SwapDependent => {
            // (i, j) where step j needs something step i adds
            let pairs: Vec<(usize, usize)> = (0..steps.len())
                .flat_map(|i| (i + 1..steps.len()).map(move |j| (i, j)))
                .filter(|&(i, j)| steps[j].pre_pos.iter().any(|p| steps[i].add.contains(p)))
                .collect();
            let &(i, j) = pairs.choose(rng)?;
            steps.swap(i, j);
        }
        MutationKind::SubstituteObject => {
            let slots: Vec<(usize, usize)> = steps
                .iter()
                .enumerate()
                .flat_map(|(i, s)| (0..s.args.len()).map(move |k| (i, k)))
                .collect();
            let &(i, k) = slots.choose(rng)?;
            let schema = task.domain.action(&steps[i].name)?;
            let current = &steps[i].args[k];
            let others: Vec<&String> = task
                .objects
                .of_type(&schema.params[k].ty)
                .iter()
                .filter(|o| *o != current)
                .collect();
            let mut args = steps[i].args.clone();
            args[k] = (*others.choose(rng)?).clone();
            steps[i] = task.find_any(&steps[i].name, &args)?.clone();
        }
        MutationKind::InsertDenied => {
            let states = states_along(&task.init, &steps);
            let at = rng.random_range(0..states.len());
            let s = &states[at];
            let denied: Vec<&GroundAction> = task
                .all_instances()
                .into_iter()
                .filter(|a| !oracle.decide(0, s, a).is_allowed() || !oracle.check_state(&a.successor(s)).is_allowed())
                .collect();
            let pick = (*denied.choose(rng)?).clone();
            steps.insert(at, pick);
        }
    }
    Some(steps)
}

/// Mutate a solved base plan and keep the mutants the validator rejects.
pub fn gen_plans_invalid(
    task: &GroundedTask,
    policy: &ConstraintPolicy,
    spec: &GenSpec,
) -> Result<(Vec<CorpusItem>, GenSummary), DatagenError> {
    spec.expect_mode(GenMode::PlansInvalid)?;
    let start = Instant::now();
    let mut summary = GenSummary::new(spec);
    let kinds: Vec<MutationKind> = spec.mutation_kinds.iter().copied().collect();
    if kinds.is_empty() {
        summary.wall_time = start.elapsed();
        return Ok((Vec::new(), summary));
    }
    let oracle = SymbolicOracle::new(policy.clone());
    let mut config = SearchConfig::new(&oracle);
    config.max_expansions = spec.max_expansions;
    let base = match solve(task, &config) {
        Ok((SearchOutcome::Solved(plan), _)) => plan,
        Ok((outcome, _)) => return Err(DatagenError::NoBasePlan(format!("{outcome:?}"))),
        Err(e) => return Err(DatagenError::NoBasePlan(e.to_string())),
    };
    let items = run_attempts(spec, &mut summary, |attempt| {
        let mut rng = item_rng(spec.seed, attempt);
        let kind = *kinds.choose(&mut rng).unwrap();
        let Some(steps) = mutate(task, &oracle, &base.steps, kind, &mut rng) else {
            return Attempt::Discarded;
        };
        let plan = Plan::new(steps);
        match certified_label(task, policy, &task.problem, &plan) {
            Some(label @ Label::Invalid(_)) => Attempt::Item(CorpusItem {
                id: format!("mutated-{attempt:06}"),
                problem: task.problem.clone(),
                plan,
                label,
                provenance: ItemProvenance::Mutated,
                mutation: Some(kind),
                seed: spec.seed,
            }),
            _ => Attempt::Discarded,
        }
    });
    summary.emitted = items.len();
    summary.wall_time = start.elapsed();
    Ok((items, summary))
}
