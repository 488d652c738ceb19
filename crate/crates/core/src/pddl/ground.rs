use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::pddl::ast::*;
use crate::pddl::state::{GroundAtom, Objects, State};

/// An action schema instantiated with concrete objects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<GroundAtom>,
    pub pre_neg: Vec<GroundAtom>,
    pub add: Vec<GroundAtom>,
    pub delete: Vec<GroundAtom>,
}

impl GroundAction {
    /// The first precondition literal that is false in `state`, rendered as PDDL.
    pub fn first_unmet(&self, state: &State) -> Option<String> {
        if let Some(a) = self.pre_pos.iter().find(|a| !state.contains(a)) {
            return Some(a.to_string());
        }
        self.pre_neg
            .iter()
            .find(|a| state.contains(a))
            .map(|a| format!("(not {a})"))
    }

    pub fn is_applicable(&self, state: &State) -> bool {
        self.pre_pos.iter().all(|a| state.contains(a)) && !self.pre_neg.iter().any(|a| state.contains(a))
    }

    /// Successor without checking preconditions: deletes first, then adds.
    pub fn successor(&self, state: &State) -> State {
        let mut next = state.clone();
        for a in &self.delete {
            next.remove(a);
        }
        for a in &self.add {
            next.insert(a.clone());
        }
        next
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("action {action} is not applicable: precondition {literal} does not hold")]
pub struct PreconditionViolated {
    pub action: String,
    pub literal: String,
}

/// Apply `action` to `state`, checking its precondition first.
pub fn apply(state: &State, action: &GroundAction) -> Result<State, PreconditionViolated> {
    match action.first_unmet(state) {
        Some(literal) => Err(PreconditionViolated {
            action: action.to_string(),
            literal,
        }),
        None => Ok(action.successor(state)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("problem '{problem}' is for domain '{found}', not '{expected}'")]
    DomainMismatch {
        problem: String,
        expected: String,
        found: String,
    },
    #[error("type '{0}' is quantified over in the goal but has no objects")]
    EmptyQuantifiedType(String),
}

/// A fully instantiated planning task.
#[derive(Debug, Clone)]
pub struct GroundedTask {
    pub domain: DomainAst,
    pub problem: ProblemAst,
    pub objects: Objects,
    /// Ground actions that survive static pruning, sorted by (name, args).
    pub actions: Vec<GroundAction>,
    /// Type-correct instances dropped because a static precondition is false in init.
    pub pruned: Vec<GroundAction>,
    pub init: State,
    pub goal: Formula,
    pub static_predicates: BTreeSet<String>,
}

impl GroundedTask {
    pub fn find_action(&self, name: &str, args: &[String]) -> Option<&GroundAction> {
        find_sorted(&self.actions, name, args)
    }

    /// Look up an instance whether or not it was statically pruned.
    pub fn find_any(&self, name: &str, args: &[String]) -> Option<&GroundAction> {
        self.find_action(name, args)
            .or_else(|| find_sorted(&self.pruned, name, args))
    }

    /// Every type-correct instance, kept or pruned, sorted by (name, args).
    pub fn all_instances(&self) -> Vec<&GroundAction> {
        let mut all: Vec<&GroundAction> = self.actions.iter().chain(&self.pruned).collect();
        all.sort();
        all
    }

    pub fn goal_holds(&self, state: &State) -> bool {
        crate::pddl::evaluate(&self.goal, state, &self.objects)
    }

    /// Ground actions applicable in `state`, in tie-break order.
    pub fn applicable<'a>(&'a self, state: &'a State) -> impl Iterator<Item = &'a GroundAction> + 'a {
        self.actions.iter().filter(move |a| a.is_applicable(state))
    }

    /// Re-ground with a different init and goal (same objects).
    pub fn with_problem(&self, problem: ProblemAst) -> Result<GroundedTask, GroundError> {
        ground(&self.domain, &problem)
    }
}

fn find_sorted<'a>(list: &'a [GroundAction], name: &str, args: &[String]) -> Option<&'a GroundAction> {
    list.binary_search_by(|a| (a.name.as_str(), a.args.as_slice()).cmp(&(name, args)))
        .ok()
        .map(|i| &list[i])
}

fn instantiate(schema: &ActionSchema, args: &[String]) -> GroundAction {
    let lookup = |v: &str| schema.param_index(v).map(|i| args[i].as_str());
    let bind = |t: &AtomTemplate| t.bind(lookup).expect("schema variables are declared");
    let mut pre_pos = Vec::new();
    let mut pre_neg = Vec::new();
    for l in &schema.precondition {
        if l.positive {
            pre_pos.push(bind(&l.atom));
        } else {
            pre_neg.push(bind(&l.atom));
        }
    }
    GroundAction {
        name: schema.name.clone(),
        args: args.to_vec(),
        pre_pos,
        pre_neg,
        add: schema.add.iter().map(bind).collect(),
        delete: schema.delete.iter().map(bind).collect(),
    }
}

/// Instantiate every schema over all type-correct argument tuples, then
/// drop instances whose static preconditions are false in init.
pub fn ground(domain: &DomainAst, problem: &ProblemAst) -> Result<GroundedTask, GroundError> {
    if problem.domain_name != domain.name {
        return Err(GroundError::DomainMismatch {
            problem: problem.name.clone(),
            expected: domain.name.clone(),
            found: problem.domain_name.clone(),
        });
    }
    let objects = Objects::new(domain.constants.iter().chain(&problem.objects));
    let mut quantified = BTreeSet::new();
    problem.goal.quantified_types(&mut quantified);
    if let Some(ty) = quantified.into_iter().find(|t| objects.of_type(t).is_empty()) {
        return Err(GroundError::EmptyQuantifiedType(ty));
    }

    let statics = domain.static_predicates();
    let init = State::from(problem.init.clone());
    let mut actions = Vec::new();
    let mut pruned = Vec::new();
    for schema in &domain.actions {
        let domains: Vec<&[String]> = schema.params.iter().map(|p| objects.of_type(&p.ty)).collect();
        for args in cartesian(&domains) {
            let ga = instantiate(schema, &args);
            let static_ok = ga
                .pre_pos
                .iter()
                .filter(|a| statics.contains(&a.predicate))
                .all(|a| init.contains(a))
                && !ga
                    .pre_neg
                    .iter()
                    .filter(|a| statics.contains(&a.predicate))
                    .any(|a| init.contains(a));
            if static_ok {
                actions.push(ga);
            } else {
                pruned.push(ga);
            }
        }
    }
    actions.sort();
    actions.dedup_by(|a, b| a.name == b.name && a.args == b.args);
    pruned.sort();
    pruned.dedup_by(|a, b| a.name == b.name && a.args == b.args);

    Ok(GroundedTask {
        domain: domain.clone(),
        problem: problem.clone(),
        objects,
        actions,
        pruned,
        init,
        goal: problem.goal.clone(),
        static_predicates: statics,
    })
}

fn cartesian(domains: &[&[String]]) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for d in domains {
        let mut next = Vec::with_capacity(out.len() * d.len());
        for prefix in &out {
            for v in d.iter() {
                let mut row = prefix.clone();
                row.push(v.clone());
                next.push(row);
            }
        }
        out = next;
    }
    out
}
