use std::collections::btree_set;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pddl::ast::{Formula, Typed, OBJECT_TYPE};

/// A predicate applied to objects. Ordered by predicate name, then
/// arguments lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<String>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args,
        }
    }

    /// Convenience constructor for tests and fixtures: `atom("at", &["robot", "start"])`.
    pub fn of(predicate: &str, args: &[&str]) -> Self {
        GroundAtom::new(predicate, args.iter().map(|s| s.to_string()).collect())
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// A world snapshot under the closed-world assumption.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    atoms: BTreeSet<GroundAtom>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn insert(&mut self, atom: GroundAtom) -> bool {
        self.atoms.insert(atom)
    }

    pub fn remove(&mut self, atom: &GroundAtom) -> bool {
        self.atoms.remove(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> btree_set::Iter<'_, GroundAtom> {
        self.atoms.iter()
    }

    pub fn atoms(&self) -> &BTreeSet<GroundAtom> {
        &self.atoms
    }

    /// Hex SHA-256 prefix over the canonical atom listing. Stable across
    /// runs and platforms.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for atom in &self.atoms {
            hasher.update(atom.to_string().as_bytes());
            hasher.update(b"\n");
        }
        let bytes = hasher.finalize();
        bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl FromIterator<GroundAtom> for State {
    fn from_iter<I: IntoIterator<Item = GroundAtom>>(iter: I) -> Self {
        State {
            atoms: iter.into_iter().collect(),
        }
    }
}

impl From<BTreeSet<GroundAtom>> for State {
    fn from(atoms: BTreeSet<GroundAtom>) -> Self {
        State { atoms }
    }
}

impl<'a> IntoIterator for &'a State {
    type Item = &'a GroundAtom;
    type IntoIter = btree_set::Iter<'a, GroundAtom>;
    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// The typed object universe of a task.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Objects {
    by_type: BTreeMap<String, Vec<String>>,
    all: Vec<String>,
    type_of: BTreeMap<String, String>,
}

impl Objects {
    pub fn new<'a>(declared: impl IntoIterator<Item = &'a Typed>) -> Self {
        let mut objects = Objects::default();
        for o in declared {
            objects
                .by_type
                .entry(o.ty.clone())
                .or_default()
                .push(o.name.clone());
            objects.all.push(o.name.clone());
            objects.type_of.insert(o.name.clone(), o.ty.clone());
        }
        for names in objects.by_type.values_mut() {
            names.sort();
        }
        objects.all.sort();
        objects
    }

    /// Objects of `ty`, sorted by name. `object` is every object.
    pub fn of_type(&self, ty: &str) -> &[String] {
        if ty == OBJECT_TYPE {
            return &self.all;
        }
        self.by_type.get(ty).map_or(&[], Vec::as_slice)
    }

    pub fn type_of(&self, name: &str) -> Option<&str> {
        self.type_of.get(name).map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.type_of.contains_key(name)
    }

    pub fn all(&self) -> &[String] {
        &self.all
    }

    pub fn is_instance(&self, name: &str, ty: &str) -> bool {
        match self.type_of(name) {
            Some(t) => ty == OBJECT_TYPE || t == ty,
            None => false,
        }
    }
}

type Env<'a> = Vec<(&'a str, &'a str)>;

fn lookup<'a>(env: &Env<'a>, var: &str) -> Option<&'a str> {
    env.iter().rev().find(|(v, _)| *v == var).map(|(_, o)| *o)
}

/// Evaluate a closed formula in `state`. Atoms absent from the state are
/// false; `forall` ranges over every object of its type.
pub fn evaluate(formula: &Formula, state: &State, objects: &Objects) -> bool {
    eval_in(formula, state, objects, &mut Vec::new())
}

fn eval_in<'a>(f: &'a Formula, state: &State, objects: &'a Objects, env: &mut Env<'a>) -> bool {
    match f {
        Formula::Atom(a) => match a.bind(|v| lookup(env, v)) {
            Some(g) => state.contains(&g),
            // unbound variable: the formula was not closed
            None => false,
        },
        Formula::Not(inner) => !eval_in(inner, state, objects, env),
        Formula::And(fs) => fs.iter().all(|g| eval_in(g, state, objects, env)),
        Formula::Or(fs) => fs.iter().any(|g| eval_in(g, state, objects, env)),
        Formula::Forall { var, body } => objects.of_type(&var.ty).iter().all(|o| {
            env.push((var.name.as_str(), o.as_str()));
            let holds = eval_in(body, state, objects, env);
            env.pop();
            holds
        }),
    }
}

/// For a false formula, the quantifier bindings under which it fails, outermost
/// first. `None` if the formula holds.
pub fn counterexample(formula: &Formula, state: &State, objects: &Objects) -> Option<Vec<(String, String)>> {
    fn go<'a>(
        f: &'a Formula,
        state: &State,
        objects: &'a Objects,
        env: &mut Env<'a>,
    ) -> Option<Vec<(String, String)>> {
        match f {
            Formula::Forall { var, body } => {
                for o in objects.of_type(&var.ty) {
                    env.push((var.name.as_str(), o.as_str()));
                    let found = go(body, state, objects, env);
                    env.pop();
                    if found.is_some() {
                        return found;
                    }
                }
                None
            }
            Formula::And(fs) => fs.iter().find_map(|g| go(g, state, objects, env)),
            other => {
                if eval_in(other, state, objects, env) {
                    None
                } else {
                    Some(env.iter().map(|(v, o)| (v.to_string(), o.to_string())).collect())
                }
            }
        }
    }
    go(formula, state, objects, &mut Vec::new())
}

/// Number of unsatisfied goal components: conjunctions and universal
/// quantifiers are split into their parts, anything else counts as one.
pub fn goal_count(formula: &Formula, state: &State, objects: &Objects) -> usize {
    fn go<'a>(f: &'a Formula, state: &State, objects: &'a Objects, env: &mut Env<'a>) -> usize {
        match f {
            Formula::And(fs) => fs.iter().map(|g| go(g, state, objects, env)).sum(),
            Formula::Forall { var, body } => objects
                .of_type(&var.ty)
                .iter()
                .map(|o| {
                    env.push((var.name.as_str(), o.as_str()));
                    let n = go(body, state, objects, env);
                    env.pop();
                    n
                })
                .sum(),
            other => usize::from(!eval_in(other, state, objects, env)),
        }
    }
    go(formula, state, objects, &mut Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::ast::{AtomTemplate, Term};

    fn atom(p: &str, args: &[&str]) -> GroundAtom {
        GroundAtom::of(p, args)
    }

    fn tmpl(p: &str, args: &[&str]) -> Formula {
        Formula::Atom(AtomTemplate {
            predicate: p.into(),
            args: args
                .iter()
                .map(|a| {
                    if a.starts_with('?') {
                        Term::Var(a.to_string())
                    } else {
                        Term::Const(a.to_string())
                    }
                })
                .collect(),
        })
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let a = State::from_iter([atom("p", &["x"]), atom("q", &[]), atom("p", &["a"])]);
        let b = State::from_iter([atom("p", &["a"]), atom("p", &["x"]), atom("q", &[])]);
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.to_string(), "{(p a) (p x) (q)}");
    }

    #[test]
    fn duplicates_collapse() {
        let s = State::from_iter([atom("p", &["x"]), atom("p", &["x"])]);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn empty_conjunction_and_disjunction() {
        let objs = Objects::default();
        let s = State::new();
        assert!(evaluate(&Formula::truth(), &s, &objs));
        assert!(!evaluate(&Formula::Or(vec![]), &s, &objs));
    }

    #[test]
    fn forall_over_type() {
        let objs = Objects::new(&[Typed::new("a", "t"), Typed::new("b", "t"), Typed::new("c", "u")]);
        let f = Formula::Forall {
            var: Typed::new("?x", "t"),
            body: Box::new(tmpl("p", &["?x"])),
        };
        let s = State::from_iter([atom("p", &["a"])]);
        assert!(!evaluate(&f, &s, &objs));
        assert_eq!(
            counterexample(&f, &s, &objs),
            Some(vec![("?x".to_string(), "b".to_string())])
        );
        assert_eq!(goal_count(&f, &s, &objs), 1);
        let s = State::from_iter([atom("p", &["a"]), atom("p", &["b"])]);
        assert!(evaluate(&f, &s, &objs));
        assert_eq!(counterexample(&f, &s, &objs), None);
    }

    #[test]
    fn object_type_covers_everything() {
        let objs = Objects::new(&[Typed::new("a", "t"), Typed::new("c", "u")]);
        assert_eq!(objs.of_type("object"), ["a".to_string(), "c".to_string()]);
        assert!(objs.is_instance("c", "object"));
        assert!(!objs.is_instance("c", "t"));
        assert!(objs.of_type("missing").is_empty());
    }
}
