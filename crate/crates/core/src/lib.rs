//! Constrained task planning over a PDDL subset.
//!
//! The crate parses and grounds STRIPS-style domains, searches for plans
//! whose every step is permitted by an access-control policy, validates
//! externally produced plans against the same policy, attributes objects
//! through a knowledge base, and generates labeled synthetic corpora.

pub mod constraint;
pub mod datagen;
pub mod fixtures;
pub mod kb;
pub mod pddl;
pub mod planner;
pub mod sexpr;
pub mod validator;
