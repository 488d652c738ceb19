//! Forward state-space search with constraint pruning.
//!
//! A successor is generated only when the oracle permits the action and the
//! successor state passes the oracle's state check; everything else is a
//! dead end. Ground actions are tried in (name, args) order, which makes
//! results deterministic.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::constraint::ConstraintOracle;
use crate::pddl::state::goal_count;
use crate::pddl::{GroundAction, GroundedTask, State};
use crate::sexpr::{self, expected, ParseResult, Pos, SExpr};

/// A sequence of ground actions with unit costs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Plan {
    pub steps: Vec<GroundAction>,
}

impl Plan {
    pub fn new(steps: Vec<GroundAction>) -> Self {
        Plan { steps }
    }

    pub fn cost(&self) -> usize {
        self.steps.len()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One `(name args...)` per line.
    pub fn to_text(&self) -> String {
        self.steps.iter().map(|s| format!("{s}\n")).collect()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let steps: Vec<String> = self.steps.iter().map(|s| s.to_string()).collect();
        write!(f, "[{}]", steps.join("; "))
    }
}

/// A step as written in a plan file, before it is resolved against a task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub name: String,
    pub args: Vec<String>,
    pub pos: Pos,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

fn is_step_number(s: &str) -> bool {
    s.strip_suffix(':')
        .is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()))
}

/// Parse the plan file format: one `(name arg...)` per step, optionally
/// prefixed by `N:`, with `;` comments.
pub fn parse_plan_text(text: &str) -> ParseResult<Vec<PlanStep>> {
    let mut steps = Vec::new();
    for expr in sexpr::read_all(text)? {
        match &expr {
            SExpr::Symbol(s, _) if is_step_number(s) => continue,
            SExpr::List(items, pos) => {
                let name = items
                    .first()
                    .ok_or_else(|| expected(*pos, "an action name", "empty list"))?
                    .expect_symbol("an action name")?;
                let args = items[1..]
                    .iter()
                    .map(|a| a.expect_symbol("an object name"))
                    .collect::<ParseResult<Vec<_>>>()?;
                steps.push(PlanStep { name, args, pos: *pos });
            }
            other => return Err(expected(other.pos(), "'(action args...)'", &other.describe())),
        }
    }
    Ok(steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Bfs,
    /// Best-first on g + number of unsatisfied goal components. Fast, not
    /// guaranteed optimal.
    AstarGoalCount,
}

pub struct SearchConfig<'a> {
    pub algorithm: Algorithm,
    pub max_expansions: usize,
    pub oracle: &'a dyn ConstraintOracle,
}

impl<'a> SearchConfig<'a> {
    pub fn new(oracle: &'a dyn ConstraintOracle) -> Self {
        SearchConfig {
            algorithm: Algorithm::Bfs,
            max_expansions: 1_000_000,
            oracle,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SearchStats {
    pub expansions: usize,
    pub generated: usize,
    pub pruned_by_constraints: usize,
    pub duplicates: usize,
    #[serde(serialize_with = "as_secs")]
    pub wall_time: Duration,
}

fn as_secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl PartialEq for SearchStats {
    /// Wall time is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.expansions == other.expansions
            && self.generated == other.generated
            && self.pruned_by_constraints == other.pruned_by_constraints
            && self.duplicates == other.duplicates
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Solved(Plan),
    /// The reachable constraint-respecting space holds no goal state.
    Unsolvable,
    /// `max_expansions` was reached first.
    ResourceLimit,
}

impl SearchOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            SearchOutcome::Solved(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("max_expansions must be positive")]
    ZeroExpansions,
    #[error("search limit of {0} expansions reached")]
    ResourceLimit(usize),
}

/// Shared successor generation: counts and prunes by the oracle.
struct Expander<'a> {
    task: &'a GroundedTask,
    oracle: &'a dyn ConstraintOracle,
    next_query: u64,
    stats: SearchStats,
}

impl<'a> Expander<'a> {
    fn new(task: &'a GroundedTask, oracle: &'a dyn ConstraintOracle) -> Self {
        Expander {
            task,
            oracle,
            next_query: 0,
            stats: SearchStats::default(),
        }
    }

    fn init_allowed(&self) -> bool {
        self.oracle.check_state(&self.task.init).is_allowed()
    }

    /// Permitted successors of `state` as (action index, successor).
    fn successors(&mut self, state: &State) -> Vec<(usize, State)> {
        let mut out = Vec::new();
        for (idx, action) in self.task.actions.iter().enumerate() {
            if !action.is_applicable(state) {
                continue;
            }
            self.stats.generated += 1;
            let qid = self.next_query;
            self.next_query += 1;
            if !self.oracle.decide(qid, state, action).is_allowed() {
                self.stats.pruned_by_constraints += 1;
                continue;
            }
            let next = action.successor(state);
            if !self.oracle.check_state(&next).is_allowed() {
                self.stats.pruned_by_constraints += 1;
                continue;
            }
            out.push((idx, next));
        }
        out
    }
}

struct Node {
    state: State,
    parent: Option<usize>,
    action: Option<usize>,
    g: usize,
}

fn extract(task: &GroundedTask, nodes: &[Node], mut idx: usize) -> Plan {
    let mut steps = Vec::new();
    while let (Some(parent), Some(action)) = (nodes[idx].parent, nodes[idx].action) {
        steps.push(task.actions[action].clone());
        idx = parent;
    }
    steps.reverse();
    Plan::new(steps)
}

/// Search for a plan. BFS returns a shortest constraint-respecting plan.
pub fn solve(task: &GroundedTask, config: &SearchConfig) -> Result<(SearchOutcome, SearchStats), SearchError> {
    if config.max_expansions == 0 {
        return Err(SearchError::ZeroExpansions);
    }
    let start = Instant::now();
    let mut ex = Expander::new(task, config.oracle);
    let outcome = if !ex.init_allowed() {
        SearchOutcome::Unsolvable
    } else {
        match config.algorithm {
            Algorithm::Bfs => bfs(task, config.max_expansions, &mut ex),
            Algorithm::AstarGoalCount => astar(task, config.max_expansions, &mut ex),
        }
    };
    let mut stats = ex.stats;
    stats.wall_time = start.elapsed();
    Ok((outcome, stats))
}

fn bfs(task: &GroundedTask, limit: usize, ex: &mut Expander) -> SearchOutcome {
    let mut nodes = vec![Node {
        state: task.init.clone(),
        parent: None,
        action: None,
        g: 0,
    }];
    let mut seen: HashSet<State> = HashSet::from([task.init.clone()]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        if task.goal_holds(&nodes[idx].state) {
            return SearchOutcome::Solved(extract(task, &nodes, idx));
        }
        if ex.stats.expansions >= limit {
            return SearchOutcome::ResourceLimit;
        }
        ex.stats.expansions += 1;
        let g = nodes[idx].g;
        for (action, next) in ex.successors(&nodes[idx].state.clone()) {
            if !seen.insert(next.clone()) {
                ex.stats.duplicates += 1;
                continue;
            }
            nodes.push(Node {
                state: next,
                parent: Some(idx),
                action: Some(action),
                g: g + 1,
            });
            queue.push_back(nodes.len() - 1);
        }
    }
    SearchOutcome::Unsolvable
}

fn astar(task: &GroundedTask, limit: usize, ex: &mut Expander) -> SearchOutcome {
    let h = |s: &State| goal_count(&task.goal, s, &task.objects);
    let mut nodes = vec![Node {
        state: task.init.clone(),
        parent: None,
        action: None,
        g: 0,
    }];
    let mut best: HashMap<State, usize> = HashMap::from([(task.init.clone(), 0)]);
    // (f, insertion order) keeps ties FIFO
    let mut open = BinaryHeap::from([Reverse((h(&task.init), 0usize, 0usize))]);
    let mut counter = 1usize;
    while let Some(Reverse((_, _, idx))) = open.pop() {
        let g = nodes[idx].g;
        if best.get(&nodes[idx].state).is_some_and(|&b| b < g) {
            continue;
        }
        if task.goal_holds(&nodes[idx].state) {
            return SearchOutcome::Solved(extract(task, &nodes, idx));
        }
        if ex.stats.expansions >= limit {
            return SearchOutcome::ResourceLimit;
        }
        ex.stats.expansions += 1;
        for (action, next) in ex.successors(&nodes[idx].state.clone()) {
            if best.get(&next).is_some_and(|&b| b <= g + 1) {
                ex.stats.duplicates += 1;
                continue;
            }
            best.insert(next.clone(), g + 1);
            let f = g + 1 + h(&next);
            nodes.push(Node {
                state: next,
                parent: Some(idx),
                action: Some(action),
                g: g + 1,
            });
            open.push(Reverse((f, counter, nodes.len() - 1)));
            counter += 1;
        }
    }
    SearchOutcome::Unsolvable
}

/// Every constraint-respecting plan of length at most `max_len` that ends in
/// a goal state, ordered by length and then lexicographically. Paths are
/// enumerated without duplicate detection; `max_expansions` bounds the
/// number of expanded path prefixes.
pub fn enumerate_plans(task: &GroundedTask, config: &SearchConfig, max_len: usize) -> Result<Vec<Plan>, SearchError> {
    if config.max_expansions == 0 {
        return Err(SearchError::ZeroExpansions);
    }
    let mut ex = Expander::new(task, config.oracle);
    let mut out = Vec::new();
    if !ex.init_allowed() {
        return Ok(out);
    }
    let mut path = Vec::new();
    dfs(task, &task.init, max_len, config.max_expansions, &mut ex, &mut path, &mut out)?;
    out.sort_by(|a: &Plan, b: &Plan| (a.len(), &a.steps).cmp(&(b.len(), &b.steps)));
    Ok(out)
}

fn dfs(
    task: &GroundedTask,
    state: &State,
    remaining: usize,
    limit: usize,
    ex: &mut Expander,
    path: &mut Vec<usize>,
    out: &mut Vec<Plan>,
) -> Result<(), SearchError> {
    if task.goal_holds(state) {
        out.push(Plan::new(path.iter().map(|&i| task.actions[i].clone()).collect()));
    }
    if remaining == 0 {
        return Ok(());
    }
    if ex.stats.expansions >= limit {
        return Err(SearchError::ResourceLimit(limit));
    }
    ex.stats.expansions += 1;
    for (action, next) in ex.successors(state) {
        path.push(action);
        dfs(task, &next, remaining - 1, limit, ex, path, out)?;
        path.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{ConstraintPolicy, SymbolicOracle};
    use crate::fixtures;

    fn names(plan: &Plan) -> Vec<String> {
        plan.steps.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn care_home_plan() {
        let task = fixtures::care_task();
        let oracle = SymbolicOracle::new(fixtures::care_policy(&task));
        let (outcome, stats) = solve(&task, &SearchConfig::new(&oracle)).unwrap();
        let plan = outcome.plan().unwrap();
        assert_eq!(
            names(plan),
            [
                "(move robot start table)",
                "(clean_from_table robot table dishes remove)",
                "(clean_from_table robot table newspaper remove)"
            ]
        );
        assert_eq!(plan.cost(), 3);
        assert!(stats.pruned_by_constraints <= stats.generated);
        assert!(stats.pruned_by_constraints > 0);
    }

    #[test]
    fn river_plan_has_seven_crossings() {
        let task = fixtures::river_task();
        let oracle = SymbolicOracle::new(fixtures::river_policy(&task));
        for algorithm in [Algorithm::Bfs, Algorithm::AstarGoalCount] {
            let config = SearchConfig {
                algorithm,
                ..SearchConfig::new(&oracle)
            };
            let (outcome, _) = solve(&task, &config).unwrap();
            let plan = outcome.plan().unwrap();
            assert_eq!(plan.len(), 7, "{algorithm:?}");
            assert_eq!(plan.steps[0].to_string(), "(row_with cabbage left right)");
        }
    }

    #[test]
    fn goal_in_init_gives_empty_plan() {
        let d = crate::pddl::parse_domain(fixtures::CARE_DOMAIN).unwrap();
        let p = crate::pddl::parse_problem(
            "(define (problem p) (:domain care-home) (:objects r - robot a - location) (:init (at r a)) (:goal (at r a)))",
            &d,
        )
        .unwrap();
        let task = crate::pddl::ground(&d, &p).unwrap();
        let oracle = SymbolicOracle::new(ConstraintPolicy::empty(&task));
        let (outcome, stats) = solve(&task, &SearchConfig::new(&oracle)).unwrap();
        assert_eq!(outcome, SearchOutcome::Solved(Plan::default()));
        assert_eq!(stats.expansions, 0);
    }

    #[test]
    fn unsolvable_and_limit_are_distinguished() {
        let task = fixtures::river_task();
        // nothing may be picked up on the left bank
        let policy =
            ConstraintPolicy::parse("(policy (forbid (at ?i left) :action row_with :id no-left-pickup))", &task)
                .unwrap();
        let oracle = SymbolicOracle::new(policy);
        let (outcome, _) = solve(&task, &SearchConfig::new(&oracle)).unwrap();
        assert_eq!(outcome, SearchOutcome::Unsolvable);

        let oracle = SymbolicOracle::new(fixtures::river_policy(&task));
        let config = SearchConfig {
            max_expansions: 3,
            ..SearchConfig::new(&oracle)
        };
        assert_eq!(solve(&task, &config).unwrap().0, SearchOutcome::ResourceLimit);
        let config = SearchConfig {
            max_expansions: 0,
            ..SearchConfig::new(&oracle)
        };
        assert_eq!(solve(&task, &config).unwrap_err(), SearchError::ZeroExpansions);
    }

    #[test]
    fn illegal_init_is_unsolvable() {
        let task = fixtures::river_task();
        let policy = ConstraintPolicy::parse("(policy (invariant (not (at farmer left))))", &task).unwrap();
        let oracle = SymbolicOracle::new(policy);
        assert_eq!(solve(&task, &SearchConfig::new(&oracle)).unwrap().0, SearchOutcome::Unsolvable);
        assert!(enumerate_plans(&task, &SearchConfig::new(&oracle), 4).unwrap().is_empty());
    }

    #[test]
    fn enumerate_care_home() {
        let task = fixtures::care_task();
        let oracle = SymbolicOracle::new(fixtures::care_policy(&task));
        let plans = enumerate_plans(&task, &SearchConfig::new(&oracle), 3).unwrap();
        let texts: Vec<Vec<String>> = plans.iter().map(names).collect();
        assert_eq!(texts.len(), 2);
        assert!(texts.contains(&vec![
            "(move robot start table)".to_string(),
            "(clean_from_table robot table dishes remove)".to_string(),
            "(clean_from_table robot table newspaper remove)".to_string(),
        ]));
        assert!(texts.contains(&vec![
            "(move robot start table)".to_string(),
            "(clean_from_table robot table newspaper remove)".to_string(),
            "(clean_from_table robot table dishes remove)".to_string(),
        ]));
        assert!(enumerate_plans(&task, &SearchConfig::new(&oracle), 0).unwrap().is_empty());
    }

    #[test]
    fn enumerate_respects_limit() {
        let task = fixtures::river_task();
        let oracle = SymbolicOracle::new(ConstraintPolicy::empty(&task));
        let config = SearchConfig {
            max_expansions: 10,
            ..SearchConfig::new(&oracle)
        };
        assert_eq!(enumerate_plans(&task, &config, 8).unwrap_err(), SearchError::ResourceLimit(10));
    }

    #[test]
    fn plan_text_format() {
        let steps = parse_plan_text("; header\n1: (Move robot start table) ; go\n(clean_from_table robot table dishes remove)\n").unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].name, "move");
        assert_eq!(steps[0].pos, Pos::new(2, 4));
        assert_eq!(steps[1].to_string(), "(clean_from_table robot table dishes remove)");
        assert!(parse_plan_text("move robot").is_err());
        assert!(parse_plan_text("(move (robot))").is_err());
        assert!(parse_plan_text("").unwrap().is_empty());
    }

    #[test]
    fn deterministic_results() {
        let task = fixtures::river_task();
        let oracle = SymbolicOracle::new(fixtures::river_policy(&task));
        let a = solve(&task, &SearchConfig::new(&oracle)).unwrap();
        let b = solve(&task, &SearchConfig::new(&oracle)).unwrap();
        assert_eq!(a, b);
    }
}
