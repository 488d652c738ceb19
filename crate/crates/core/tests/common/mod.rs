//! Test support: a random domain generator and a reference plan simulator
//! that shares no code with the library's grounding, policy or validator.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use proptest::prelude::*;
use redline_core::constraint::{ConstraintOracle, ConstraintPolicy, SymbolicOracle};
use redline_core::pddl::{
    ActionSchema, AtomTemplate, DomainAst, Formula, GroundAction, GroundedTask, Literal, PredicateDecl, State, Term, Typed,
};

// ---------------------------------------------------------------------------
// Random domains

fn type_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

/// Domains over 1-3 flat types, 1-4 predicates of arity 0-3, 1-4 actions.
/// Every literal only uses the action's own parameters with matching types,
/// so each generated domain is well-formed.
pub fn arb_domain() -> impl Strategy<Value = DomainAst> {
    let types = 1usize..=3;
    types.prop_flat_map(|nt| {
        let preds = prop::collection::vec(prop::collection::vec(0..nt + 1, 0..=3), 1..=4);
        (Just(nt), preds).prop_flat_map(|(nt, preds)| {
            let np = preds.len();
            let action = (
                prop::collection::vec(0..nt + 1, 0..=4),
                prop::collection::vec((any::<bool>(), 0..np, prop::collection::vec(any::<prop::sample::Index>(), 3)), 0..=4),
                prop::collection::vec((any::<bool>(), 0..np, prop::collection::vec(any::<prop::sample::Index>(), 3)), 0..=3),
                any::<bool>(),
            );
            let reqs = prop::collection::btree_set(prop::sample::select(vec![
                "strips",
                "typing",
                "negative-preconditions",
                "universal-preconditions",
                "disjunctive-preconditions",
            ]), 0..=5);
            (
                Just(nt),
                Just(preds),
                prop::collection::vec(action, 1..=4),
                reqs,
                "[a-z][a-z0-9_-]{0,8}",
            )
                .prop_map(|(nt, preds, actions, reqs, name)| build_domain(nt, preds, actions, reqs, name))
        })
    })
}

type RawLit = (bool, usize, Vec<prop::sample::Index>);
type RawAction = (Vec<usize>, Vec<RawLit>, Vec<RawLit>, bool);

fn build_domain(
    nt: usize,
    preds: Vec<Vec<usize>>,
    actions: Vec<RawAction>,
    reqs: BTreeSet<&str>,
    name: String,
) -> DomainAst {
    let types = type_names(nt);
    // index nt stands for the root type
    let ty = |i: usize| if i == nt { "object".to_string() } else { types[i].clone() };
    let predicates: Vec<PredicateDecl> = preds
        .iter()
        .enumerate()
        .map(|(i, args)| PredicateDecl {
            name: format!("p{i}"),
            params: args.iter().enumerate().map(|(k, &t)| Typed::new(format!("?x{k}"), ty(t))).collect(),
        })
        .collect();
    let mut out_actions = Vec::new();
    for (ai, (params, pre, eff, _)) in actions.into_iter().enumerate() {
        let params: Vec<Typed> = params.iter().enumerate().map(|(k, &t)| Typed::new(format!("?v{k}"), ty(t))).collect();
        // a predicate argument of type T accepts params of type T, or any param if T is object
        let bind = |pred: usize, picks: &[prop::sample::Index]| -> Option<AtomTemplate> {
            let decl = &predicates[pred];
            let mut args = Vec::new();
            for (k, slot) in decl.params.iter().enumerate() {
                let fitting: Vec<&Typed> = params.iter().filter(|p| slot.ty == "object" || p.ty == slot.ty).collect();
                if fitting.is_empty() {
                    return None;
                }
                args.push(Term::Var(picks[k].get(&fitting).name.clone()));
            }
            Some(AtomTemplate {
                predicate: decl.name.clone(),
                args,
            })
        };
        let mut precondition: Vec<Literal> = Vec::new();
        for (positive, p, picks) in &pre {
            if let Some(atom) = bind(*p, picks) {
                let l = Literal { positive: *positive, atom };
                if !precondition.contains(&l) {
                    precondition.push(l);
                }
            }
        }
        let mut add: Vec<AtomTemplate> = Vec::new();
        let mut delete: Vec<AtomTemplate> = Vec::new();
        for (positive, p, picks) in &eff {
            if let Some(atom) = bind(*p, picks) {
                if add.contains(&atom) || delete.contains(&atom) {
                    continue;
                }
                if *positive {
                    add.push(atom);
                } else {
                    delete.push(atom);
                }
            }
        }
        out_actions.push(ActionSchema {
            name: format!("a{ai}"),
            params,
            precondition,
            add,
            delete,
        });
    }
    DomainAst {
        name,
        requirements: reqs.into_iter().map(str::to_string).collect(),
        types,
        constants: Vec::new(),
        predicates,
        actions: out_actions,
    }
}

// ---------------------------------------------------------------------------
// Exhaustive reachability (no constraints)

pub fn reachable(task: &GroundedTask, limit: usize) -> Vec<State> {
    let mut seen: HashSet<State> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(task.init.clone());
    queue.push_back(task.init.clone());
    let mut out = Vec::new();
    while let Some(s) = queue.pop_front() {
        for a in task.actions.iter().chain(&task.pruned) {
            if a.is_applicable(&s) {
                let n = a.successor(&s);
                if seen.len() < limit && seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        out.push(s);
    }
    out
}

// ---------------------------------------------------------------------------
// Reference simulator for the bundled fixtures

pub type Facts = BTreeSet<(String, Vec<String>)>;

pub fn facts_of(state: &State) -> Facts {
    state.iter().map(|a| (a.predicate.clone(), a.args.clone())).collect()
}

fn has(f: &Facts, p: &str, args: &[&str]) -> bool {
    f.contains(&(p.to_string(), args.iter().map(|s| s.to_string()).collect()))
}

/// Hand-written restatement of a fixture's constraints.
pub struct Rules {
    /// Activity denial checked in the state before the step.
    pub denies: fn(&Facts, &str, &[String]) -> bool,
    pub illegal: fn(&Facts) -> bool,
}

/// Formula truth by direct substitution over `objects`.
pub fn holds(f: &Formula, facts: &Facts, objects: &BTreeMap<String, String>, env: &mut Vec<(String, String)>) -> bool {
    match f {
        Formula::Atom(a) => {
            let args = a
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => c.clone(),
                    Term::Var(v) => env.iter().rev().find(|(n, _)| n == v).unwrap().1.clone(),
                })
                .collect();
            facts.contains(&(a.predicate.clone(), args))
        }
        Formula::Not(g) => !holds(g, facts, objects, env),
        Formula::And(gs) => gs.iter().all(|g| holds(g, facts, objects, env)),
        Formula::Or(gs) => gs.iter().any(|g| holds(g, facts, objects, env)),
        Formula::Forall { var, body } => {
            let domain: Vec<String> = objects
                .iter()
                .filter(|(_, t)| var.ty == "object" || **t == var.ty)
                .map(|(o, _)| o.clone())
                .collect();
            domain.into_iter().all(|o| {
                env.push((var.name.clone(), o));
                let r = holds(body, facts, objects, env);
                env.pop();
                r
            })
        }
    }
}

fn care_denies(f: &Facts, name: &str, args: &[String]) -> bool {
    name == "clean_from_table" && has(f, "personal", &[&args[2]])
}

fn care_illegal(f: &Facts) -> bool {
    has(f, "at", &["robot", "remove"])
}

fn river_denies(_: &Facts, _: &str, _: &[String]) -> bool {
    false
}

fn river_illegal(f: &Facts) -> bool {
    ["left", "right"].iter().any(|s| {
        let alone = !has(f, "at", &["farmer", s]);
        let cabbage = has(f, "at", &["cabbage", s]);
        alone && cabbage && (has(f, "at", &["goat", s]) || has(f, "at", &["pig", s]))
    })
}

pub const CARE_RULES: Rules = Rules {
    denies: care_denies,
    illegal: care_illegal,
};

pub const RIVER_RULES: Rules = Rules {
    denies: river_denies,
    illegal: river_illegal,
};

/// Outcome of the reference simulation: `None` for a valid plan, else the
/// 1-based failing step (0 for the goal check after an empty plan) and kind.
pub fn reference_kind(task: &GroundedTask, rules: &Rules, steps: &[(String, Vec<String>)]) -> Option<(usize, &'static str)> {
    let objects: BTreeMap<String, String> = task
        .domain
        .constants
        .iter()
        .chain(&task.problem.objects)
        .map(|t| (t.name.clone(), t.ty.clone()))
        .collect();
    let mut facts: Facts = task.problem.init.iter().map(|a| (a.predicate.clone(), a.args.clone())).collect();
    if (rules.illegal)(&facts) {
        return Some((0, "invariant-violated"));
    }
    for (i, (name, args)) in steps.iter().enumerate() {
        let step = i + 1;
        let Some(schema) = task.domain.actions.iter().find(|a| &a.name == name) else {
            return Some((step, "unknown-action"));
        };
        let type_ok = schema.params.len() == args.len()
            && schema
                .params
                .iter()
                .zip(args)
                .all(|(p, a)| objects.get(a).is_some_and(|t| p.ty == "object" || *t == p.ty));
        if !type_ok {
            return Some((step, "unknown-action"));
        }
        if (rules.denies)(&facts, name, args) {
            return Some((step, "constraint-denied"));
        }
        let sub = |t: &AtomTemplate| -> (String, Vec<String>) {
            let args = t
                .args
                .iter()
                .map(|term| match term {
                    Term::Const(c) => c.clone(),
                    Term::Var(v) => {
                        let k = schema.params.iter().position(|p| &p.name == v).unwrap();
                        args[k].clone()
                    }
                })
                .collect();
            (t.predicate.clone(), args)
        };
        for l in &schema.precondition {
            if facts.contains(&sub(&l.atom)) != l.positive {
                return Some((step, "precondition"));
            }
        }
        for d in &schema.delete {
            facts.remove(&sub(d));
        }
        for a in &schema.add {
            facts.insert(sub(a));
        }
        if (rules.illegal)(&facts) {
            return Some((step, "invariant-violated"));
        }
    }
    if holds(&task.problem.goal, &facts, &objects, &mut Vec::new()) {
        None
    } else {
        Some((steps.len(), "goal-unsatisfied"))
    }
}

pub fn as_steps(actions: &[GroundAction]) -> Vec<(String, Vec<String>)> {
    actions.iter().map(|a| (a.name.clone(), a.args.clone())).collect()
}

pub fn plan_text(steps: &[(String, Vec<String>)]) -> String {
    steps.iter().map(|(n, a)| format!("({n} {})\n", a.join(" "))).collect()
}

/// Every single-step mutant of `base`: drops, swaps of adjacent dependent
/// steps, same-type object substitutions, and insertions of denied actions.
pub type Steps = Vec<(String, Vec<String>)>;

pub fn mutants(task: &GroundedTask, policy: &ConstraintPolicy, base: &[GroundAction]) -> Vec<(&'static str, Steps)> {
    let steps = as_steps(base);
    let mut out = Vec::new();
    for i in 0..steps.len() {
        let mut m = steps.clone();
        m.remove(i);
        out.push(("drop", m));
    }
    for i in 0..base.len().saturating_sub(1) {
        if base[i + 1].pre_pos.iter().any(|p| base[i].add.contains(p)) {
            let mut m = steps.clone();
            m.swap(i, i + 1);
            out.push(("swap", m));
        }
    }
    for (i, (name, args)) in steps.iter().enumerate() {
        let schema = task.domain.action(name).unwrap();
        for (k, param) in schema.params.iter().enumerate() {
            for o in task.objects.of_type(&param.ty) {
                if *o != args[k] {
                    let mut m = steps.clone();
                    m[i].1[k] = o.clone();
                    out.push(("substitute", m));
                }
            }
        }
    }
    let oracle = SymbolicOracle::new(policy.clone());
    let mut state = task.init.clone();
    for at in 0..=base.len() {
        for a in task.all_instances() {
            let denied = !oracle.decide(0, &state, a).is_allowed() || !oracle.check_state(&a.successor(&state)).is_allowed();
            if denied {
                let mut m = steps.clone();
                m.insert(at, (a.name.clone(), a.args.clone()));
                out.push(("insert-denied", m));
            }
        }
        if at < base.len() {
            state = base[at].successor(&state);
        }
    }
    out
}
