//! The PDDL subset: parsing, printing, grounding and state evaluation.

pub mod ast;
pub mod ground;
pub mod parse;
pub mod print;
pub mod state;

pub use ast::{ActionSchema, AtomTemplate, DomainAst, Formula, Literal, PredicateDecl, ProblemAst, Term, Typed};
pub use ground::{apply, ground, GroundAction, GroundError, GroundedTask, PreconditionViolated};
pub use parse::{parse_domain, parse_problem};
pub use print::{domain_to_string, formula_to_string, problem_to_string};
pub use state::{evaluate, GroundAtom, Objects, State};
