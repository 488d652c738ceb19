//! Constraint policies: activity rules bound to action schemas, attribute
//! denials, and state invariants.
//!
//! Text form:
//!
//! ```text
//! (policy
//!   (deny-when (personal ?obj) :action clean_from_table :id personal-object)
//!   (require (non_personal ?obj) :action clean_from_table)
//!   (forbid (at ?obj remove) :action clean_from_table)
//!   (invariant :id no-remove :message "robot in ?l" <formula>))
//! ```
//!
//! Rules without `:id` get `<kind>-<n>` where `n` is the 1-based rule index.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::pddl::parse::Scope;
use crate::pddl::print::formula_to_string;
use crate::pddl::state::{counterexample, evaluate};
use crate::pddl::{AtomTemplate, Formula, GroundAction, GroundedTask, Literal, Objects, State};
use crate::sexpr::{self, expected, ParseError, ParseErrorKind, ParseResult, SExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityKind {
    /// Deny unless the literal holds.
    Require,
    /// Deny if the literal holds.
    Forbid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityRule {
    pub id: String,
    pub action: String,
    pub kind: ActivityKind,
    pub literal: Literal,
}

/// Deny `action` whenever `atom` holds of its arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDenial {
    pub id: String,
    pub action: String,
    pub atom: AtomTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateInvariant {
    pub id: String,
    /// Violation message; `?var` is replaced by the failing binding.
    pub message: Option<String>,
    pub formula: Formula,
}

impl StateInvariant {
    /// Human-readable description of why `state` violates this invariant.
    pub fn describe_violation(&self, state: &State, objects: &Objects) -> String {
        let binding = counterexample(&self.formula, state, objects).unwrap_or_default();
        match &self.message {
            Some(msg) => {
                let mut out = msg.clone();
                // longest names first so ?ab is not clobbered by ?a
                let mut binding = binding;
                binding.sort_by_key(|(v, _)| std::cmp::Reverse(v.len()));
                for (var, val) in binding {
                    out = out.replace(&var, &val);
                }
                out
            }
            None if binding.is_empty() => format!("invariant {} violated", self.id),
            None => {
                let b: Vec<String> = binding.iter().map(|(v, o)| format!("{v}={o}")).collect();
                format!("invariant {} violated for {}", self.id, b.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Activity(ActivityRule),
    Denial(AttributeDenial),
    Invariant(StateInvariant),
}

impl Rule {
    pub fn id(&self) -> &str {
        match self {
            Rule::Activity(r) => &r.id,
            Rule::Denial(r) => &r.id,
            Rule::Invariant(r) => &r.id,
        }
    }
}

/// Which kind of rule produced a denial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Activity,
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule_id: String,
    pub kind: RuleKind,
    pub detail: String,
}

/// An ordered list of rules resolved against a task's domain and objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintPolicy {
    rules: Vec<Rule>,
    /// Parameter names per action schema, used to bind rule templates.
    params: BTreeMap<String, Vec<String>>,
    objects: Objects,
}

impl ConstraintPolicy {
    /// A policy with no rules for `task`.
    pub fn empty(task: &GroundedTask) -> Self {
        ConstraintPolicy {
            rules: Vec::new(),
            params: schema_params(task),
            objects: task.objects.clone(),
        }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn objects(&self) -> &Objects {
        &self.objects
    }

    pub fn activity_rules(&self) -> impl Iterator<Item = &ActivityRule> {
        self.rules.iter().filter_map(|r| match r {
            Rule::Activity(a) => Some(a),
            _ => None,
        })
    }

    pub fn attribute_denials(&self) -> impl Iterator<Item = &AttributeDenial> {
        self.rules.iter().filter_map(|r| match r {
            Rule::Denial(d) => Some(d),
            _ => None,
        })
    }

    pub fn invariants(&self) -> impl Iterator<Item = &StateInvariant> {
        self.rules.iter().filter_map(|r| match r {
            Rule::Invariant(i) => Some(i),
            _ => None,
        })
    }

    /// Append a rule; its templates must already be valid for the task.
    pub fn push(&mut self, rule: Rule) {
        self.rules.push(rule);
    }

    /// Parse the text form against `task`.
    pub fn parse(text: &str, task: &GroundedTask) -> ParseResult<Self> {
        let root = sexpr::read_single(text)?;
        if root.head().as_deref() != Some("policy") {
            return Err(expected(root.pos(), "'(policy ...)'", &root.describe()));
        }
        let objects: BTreeMap<String, String> = task
            .objects
            .all()
            .iter()
            .map(|o| (o.clone(), task.objects.type_of(o).unwrap().to_string()))
            .collect();
        let mut policy = ConstraintPolicy::empty(task);
        for (idx, item) in root.as_list().unwrap()[1..].iter().enumerate() {
            let rule = parse_rule(item, idx + 1, task, &objects)?;
            if policy.rules.iter().any(|r| r.id() == rule.id()) {
                return Err(expected(item.pos(), "a unique rule id", &format!("duplicate '{}'", rule.id())));
            }
            policy.rules.push(rule);
        }
        Ok(policy)
    }

    /// Canonical text form; `parse(to_text())` reproduces the policy.
    pub fn to_text(&self) -> String {
        let mut out = String::from("(policy");
        for rule in &self.rules {
            out.push_str("\n  ");
            match rule {
                Rule::Activity(r) => {
                    let kw = match r.kind {
                        ActivityKind::Require => "require",
                        ActivityKind::Forbid => "forbid",
                    };
                    let _ = write!(out, "({kw} {} :action {} :id {})", r.literal, r.action, r.id);
                }
                Rule::Denial(r) => {
                    let _ = write!(out, "(deny-when {} :action {} :id {})", r.atom, r.action, r.id);
                }
                Rule::Invariant(r) => {
                    let _ = write!(out, "(invariant :id {}", r.id);
                    if let Some(m) = &r.message {
                        let escaped = m.replace('\\', "\\\\").replace('"', "\\\"");
                        let _ = write!(out, " :message \"{escaped}\"");
                    }
                    let f = formula_to_string(&r.formula).replace('\n', "\n    ");
                    let _ = write!(out, "\n    {f})");
                }
            }
        }
        out.push_str(")\n");
        out
    }

    fn bind<'a>(&'a self, action: &'a GroundAction) -> impl Fn(&str) -> Option<&'a str> + 'a {
        let params = self.params.get(&action.name);
        move |v: &str| {
            params
                .and_then(|ps| ps.iter().position(|p| p == v))
                .map(|i| action.args[i].as_str())
        }
    }

    /// Violation of a single activity rule or attribute denial, if it applies to `action`.
    fn rule_violation(&self, rule: &Rule, state: &State, action: &GroundAction) -> Option<Violation> {
        match rule {
            Rule::Activity(r) if r.action == action.name => {
                let atom = r.literal.atom.bind(self.bind(action))?;
                let holds = state.contains(&atom) == r.literal.positive;
                let (denied, verb) = match r.kind {
                    ActivityKind::Require => (!holds, "requires"),
                    ActivityKind::Forbid => (holds, "forbids"),
                };
                let lit = if r.literal.positive {
                    atom.to_string()
                } else {
                    format!("(not {atom})")
                };
                denied.then(|| Violation {
                    rule_id: r.id.clone(),
                    kind: RuleKind::Activity,
                    detail: format!("rule {} {verb} {lit} for {action}", r.id),
                })
            }
            Rule::Denial(r) if r.action == action.name => {
                let atom = r.atom.bind(self.bind(action))?;
                state.contains(&atom).then(|| Violation {
                    rule_id: r.id.clone(),
                    kind: RuleKind::Activity,
                    detail: format!("rule {} denies {action} because {atom} holds", r.id),
                })
            }
            _ => None,
        }
    }

    /// First activity rule or attribute denial matching `action` in `state`,
    /// in declaration order.
    pub fn activity_violation(&self, state: &State, action: &GroundAction) -> Option<Violation> {
        self.rules
            .iter()
            .find_map(|rule| self.rule_violation(rule, state, action))
    }

    /// First invariant violated by `state`.
    pub fn state_violation(&self, state: &State) -> Option<Violation> {
        self.invariants()
            .find(|inv| !evaluate(&inv.formula, state, &self.objects))
            .map(|inv| Violation {
                rule_id: inv.id.clone(),
                kind: RuleKind::Invariant,
                detail: inv.describe_violation(state, &self.objects),
            })
    }

    /// Every rule in declaration order; invariants are checked on the
    /// successor of `action`.
    pub fn first_violation(&self, state: &State, action: &GroundAction) -> Option<Violation> {
        let mut successor: Option<State> = None;
        for rule in &self.rules {
            match rule {
                Rule::Invariant(inv) => {
                    let next = successor.get_or_insert_with(|| action.successor(state));
                    if !evaluate(&inv.formula, next, &self.objects) {
                        return Some(Violation {
                            rule_id: inv.id.clone(),
                            kind: RuleKind::Invariant,
                            detail: inv.describe_violation(next, &self.objects),
                        });
                    }
                }
                rule => {
                    if let Some(v) = self.rule_violation(rule, state, action) {
                        return Some(v);
                    }
                }
            }
        }
        None
    }

    /// The argument an attribute denial for this action inspects, if any.
    pub fn object_argument<'a>(&self, action: &'a GroundAction) -> Option<&'a str> {
        let params = self.params.get(&action.name)?;
        self.attribute_denials()
            .filter(|d| d.action == action.name)
            .flat_map(|d| d.atom.args.iter())
            .find_map(|t| match t {
                crate::pddl::Term::Var(v) => params.iter().position(|p| p == v),
                _ => None,
            })
            .map(|i| action.args[i].as_str())
    }
}

fn schema_params(task: &GroundedTask) -> BTreeMap<String, Vec<String>> {
    task.domain
        .actions
        .iter()
        .map(|a| (a.name.clone(), a.params.iter().map(|p| p.name.clone()).collect()))
        .collect()
}

struct Keywords<'e> {
    positional: Vec<&'e SExpr>,
    keys: BTreeMap<String, &'e SExpr>,
}

/// Split rule arguments into positional items and `:key value` pairs.
fn keywords<'e>(items: &'e [SExpr], allowed: &[&str]) -> ParseResult<Keywords<'e>> {
    let mut kw = Keywords {
        positional: Vec::new(),
        keys: BTreeMap::new(),
    };
    let mut i = 0;
    while i < items.len() {
        match items[i].as_symbol() {
            Some(s) if s.starts_with(':') => {
                let key = s.to_lowercase();
                if !allowed.contains(&key.as_str()) {
                    return Err(expected(items[i].pos(), &allowed.join(" or "), &items[i].describe()));
                }
                let value = items
                    .get(i + 1)
                    .ok_or_else(|| expected(items[i].pos(), &format!("a value for {key}"), "end of list"))?;
                kw.keys.insert(key, value);
                i += 2;
            }
            _ => {
                kw.positional.push(&items[i]);
                i += 1;
            }
        }
    }
    Ok(kw)
}

fn parse_rule(
    item: &SExpr,
    index: usize,
    task: &GroundedTask,
    objects: &BTreeMap<String, String>,
) -> ParseResult<Rule> {
    let items = item.expect_list("a policy rule")?;
    let head = item
        .head()
        .ok_or_else(|| expected(item.pos(), "a policy rule", &item.describe()))?;
    let rest = &items[1..];
    match head.as_str() {
        "deny-when" | "require" | "forbid" => {
            let kw = keywords(rest, &[":action", ":id"])?;
            let action_expr = kw
                .keys
                .get(":action")
                .ok_or_else(|| expected(item.pos(), "an :action", "none"))?;
            let action = action_expr.expect_symbol("an action name")?;
            let schema = task.domain.action(&action).ok_or_else(|| {
                ParseError::new(action_expr.pos(), ParseErrorKind::UnknownAction(action.clone()))
            })?;
            let [template] = kw.positional.as_slice() else {
                return Err(expected(item.pos(), "exactly one condition", &format!("{}", kw.positional.len())));
            };
            let id = match kw.keys.get(":id") {
                Some(e) => e.expect_symbol("a rule id")?,
                None => format!("{head}-{index}"),
            };
            let mut scope = Scope::new(&task.domain, objects);
            scope.vars = schema.params.clone();
            if head == "deny-when" {
                Ok(Rule::Denial(AttributeDenial {
                    id,
                    action,
                    atom: scope.atom(template)?,
                }))
            } else {
                Ok(Rule::Activity(ActivityRule {
                    id,
                    action,
                    kind: if head == "require" {
                        ActivityKind::Require
                    } else {
                        ActivityKind::Forbid
                    },
                    literal: scope.literal(template)?,
                }))
            }
        }
        "invariant" => {
            let kw = keywords(rest, &[":id", ":message"])?;
            let [formula] = kw.positional.as_slice() else {
                return Err(expected(item.pos(), "exactly one formula", &format!("{}", kw.positional.len())));
            };
            let id = match kw.keys.get(":id") {
                Some(e) => e.expect_symbol("a rule id")?,
                None => format!("invariant-{index}"),
            };
            let message = match kw.keys.get(":message") {
                Some(SExpr::Str(s, _)) => Some(s.clone()),
                Some(other) => return Err(expected(other.pos(), "a string", &other.describe())),
                None => None,
            };
            let formula = Scope::new(&task.domain, objects).formula(formula)?;
            Ok(Rule::Invariant(StateInvariant { id, message, formula }))
        }
        "contextual" => Err(ParseError::new(
            item.pos(),
            ParseErrorKind::Unsupported(
                "contextual conditions need external data at execution time and cannot be checked by the planner".into(),
            ),
        )),
        "current" => Err(ParseError::new(
            item.pos(),
            ParseErrorKind::Unsupported(
                "current conditions need durative, interruptible actions and cannot be checked by the planner".into(),
            ),
        )),
        _ => Err(expected(
            item.pos(),
            "deny-when, require, forbid or invariant",
            &item.describe(),
        )),
    }
}
