use std::collections::BTreeSet;
use std::fmt;

use crate::pddl::state::GroundAtom;

/// The implicit root type every object belongs to.
pub const OBJECT_TYPE: &str = "object";

/// Requirement tags the parser accepts (without the leading colon).
pub const SUPPORTED_REQUIREMENTS: &[&str] = &[
    "strips",
    "typing",
    "negative-preconditions",
    "universal-preconditions",
    "disjunctive-preconditions",
];

/// A name with a type: an action parameter, a predicate parameter, a
/// quantified variable or a declared object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Typed {
    pub name: String,
    pub ty: String,
}

impl Typed {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        Typed {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// A variable, stored with its leading `?`.
    Var(String),
    /// An object or constant name.
    Const(String),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A predicate applied to terms, possibly containing variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomTemplate {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl AtomTemplate {
    /// Substitute variables using `lookup`; `None` if a variable is unbound.
    pub fn bind<'a>(&self, lookup: impl Fn(&str) -> Option<&'a str>) -> Option<GroundAtom> {
        let mut args = Vec::with_capacity(self.args.len());
        for t in &self.args {
            match t {
                Term::Const(c) => args.push(c.clone()),
                Term::Var(v) => args.push(lookup(v)?.to_string()),
            }
        }
        Some(GroundAtom::new(self.predicate.clone(), args))
    }
}

impl fmt::Display for AtomTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: AtomTemplate,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<Typed>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Typed>,
    /// Conjunction of literals.
    pub precondition: Vec<Literal>,
    pub add: Vec<AtomTemplate>,
    pub delete: Vec<AtomTemplate>,
}

impl ActionSchema {
    pub fn param_index(&self, var: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainAst {
    pub name: String,
    pub requirements: BTreeSet<String>,
    pub types: Vec<String>,
    pub constants: Vec<Typed>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

impl DomainAst {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == OBJECT_TYPE || self.types.iter().any(|t| t == ty)
    }

    /// Predicates that occur in no action effect.
    pub fn static_predicates(&self) -> BTreeSet<String> {
        let fluent: BTreeSet<&str> = self
            .actions
            .iter()
            .flat_map(|a| a.add.iter().chain(&a.delete))
            .map(|atom| atom.predicate.as_str())
            .collect();
        self.predicates
            .iter()
            .filter(|p| !fluent.contains(p.name.as_str()))
            .map(|p| p.name.clone())
            .collect()
    }
}

/// Goal and invariant language.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(AtomTemplate),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Forall { var: Typed, body: Box<Formula> },
}

impl Formula {
    pub fn truth() -> Self {
        Formula::And(Vec::new())
    }

    /// Conjunction of literals, as used for generated goals.
    pub fn conjunction(literals: impl IntoIterator<Item = Literal>) -> Self {
        Formula::And(
            literals
                .into_iter()
                .map(|l| {
                    let atom = Formula::Atom(l.atom);
                    if l.positive {
                        atom
                    } else {
                        Formula::Not(Box::new(atom))
                    }
                })
                .collect(),
        )
    }

    /// Every predicate name mentioned anywhere in the formula.
    pub fn predicates(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(a) => {
                out.insert(a.predicate.clone());
            }
            Formula::Not(f) => f.predicates(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.predicates(out)),
            Formula::Forall { body, .. } => body.predicates(out),
        }
    }

    /// Types quantified over anywhere in the formula.
    pub fn quantified_types(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(_) => {}
            Formula::Not(f) => f.quantified_types(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.quantified_types(out)),
            Formula::Forall { var, body } => {
                out.insert(var.ty.clone());
                body.quantified_types(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemAst {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<Typed>,
    pub init: BTreeSet<GroundAtom>,
    pub goal: Formula,
}
