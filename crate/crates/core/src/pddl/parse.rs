//! Recursive-descent parsing of domain and problem files from the
//! s-expression tree.

use std::collections::{BTreeMap, BTreeSet};

use crate::pddl::ast::*;
use crate::pddl::state::GroundAtom;
use crate::sexpr::{self, expected, ParseError, ParseErrorKind, ParseResult, Pos, SExpr};

fn err(pos: Pos, kind: ParseErrorKind) -> ParseError {
    ParseError::new(pos, kind)
}

fn type_ok(actual: &str, required: &str) -> bool {
    required == OBJECT_TYPE || actual == required
}

/// Parse a typed list such as `?a ?b - t ?c` (trailing names get `object`).
fn typed_list(items: &[SExpr], what: &str) -> ParseResult<Vec<(Typed, Pos)>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let sym = items[i].expect_symbol(what)?;
        if sym == "-" {
            let ty_expr = items
                .get(i + 1)
                .ok_or_else(|| expected(items[i].pos(), "a type name after '-'", "end of list"))?;
            if ty_expr.head().as_deref() == Some("either") {
                return Err(err(
                    ty_expr.pos(),
                    ParseErrorKind::Unsupported("'either' types are not supported".into()),
                ));
            }
            let ty = ty_expr.expect_symbol("a type name")?;
            if pending.is_empty() {
                return Err(expected(items[i].pos(), what, "'-'"));
            }
            out.extend(pending.drain(..).map(|(n, p)| (Typed::new(n, ty.clone()), p)));
            i += 2;
        } else {
            pending.push((sym, items[i].pos()));
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|(n, p)| (Typed::new(n, OBJECT_TYPE), p)));
    Ok(out)
}

fn is_var(s: &str) -> bool {
    s.starts_with('?') && s.len() > 1
}

/// Name resolution context for atoms: the domain's predicates, the known
/// objects and constants, and variables in scope.
pub struct Scope<'a> {
    pub domain: &'a DomainAst,
    pub objects: &'a BTreeMap<String, String>,
    pub vars: Vec<Typed>,
}

impl<'a> Scope<'a> {
    pub fn new(domain: &'a DomainAst, objects: &'a BTreeMap<String, String>) -> Self {
        Scope {
            domain,
            objects,
            vars: Vec::new(),
        }
    }

    fn var_type(&self, name: &str) -> Option<&str> {
        self.vars
            .iter()
            .rev()
            .find(|v| v.name == name)
            .map(|v| v.ty.as_str())
    }

    /// Parse `(pred term*)` with arity and type checks.
    pub fn atom(&self, expr: &SExpr) -> ParseResult<AtomTemplate> {
        let items = expr.expect_list("an atom")?;
        let head = items
            .first()
            .ok_or_else(|| expected(expr.pos(), "an atom", "empty list"))?;
        let predicate = head.expect_symbol("a predicate name")?;
        let decl = self
            .domain
            .predicate(&predicate)
            .ok_or_else(|| err(head.pos(), ParseErrorKind::UnknownPredicate(predicate.clone())))?;
        let args = &items[1..];
        if args.len() != decl.params.len() {
            return Err(err(
                expr.pos(),
                ParseErrorKind::ArityMismatch {
                    predicate,
                    expected: decl.params.len(),
                    found: args.len(),
                },
            ));
        }
        let mut terms = Vec::with_capacity(args.len());
        for (arg, param) in args.iter().zip(&decl.params) {
            let name = arg.expect_symbol("a variable or object")?;
            let (term, ty) = if is_var(&name) {
                let ty = self
                    .var_type(&name)
                    .ok_or_else(|| err(arg.pos(), ParseErrorKind::UndeclaredVariable(name.clone())))?;
                (Term::Var(name.clone()), ty.to_string())
            } else {
                let ty = self
                    .objects
                    .get(&name)
                    .ok_or_else(|| err(arg.pos(), ParseErrorKind::UndeclaredObject(name.clone())))?;
                (Term::Const(name.clone()), ty.clone())
            };
            if !type_ok(&ty, &param.ty) {
                return Err(err(
                    arg.pos(),
                    ParseErrorKind::TypeMismatch {
                        name,
                        expected: param.ty.clone(),
                        found: ty,
                    },
                ));
            }
            terms.push(term);
        }
        Ok(AtomTemplate {
            predicate,
            args: terms,
        })
    }

    /// `atom` or `(not atom)`.
    pub fn literal(&self, expr: &SExpr) -> ParseResult<Literal> {
        if expr.head().as_deref() == Some("not") {
            let items = expr.as_list().unwrap();
            if items.len() != 2 {
                return Err(expected(expr.pos(), "(not <atom>)", &expr.describe()));
            }
            if items[1].head().as_deref() == Some("not") {
                return Err(expected(items[1].pos(), "an atom", "nested 'not'"));
            }
            Ok(Literal {
                positive: false,
                atom: self.atom(&items[1])?,
            })
        } else {
            Ok(Literal {
                positive: true,
                atom: self.atom(expr)?,
            })
        }
    }

    /// Full formula language: atom, not, and, or, forall.
    pub fn formula(&mut self, expr: &SExpr) -> ParseResult<Formula> {
        let items = expr.expect_list("a formula")?;
        match expr.head().as_deref() {
            None if items.is_empty() => Ok(Formula::truth()),
            Some("and") | Some("or") => {
                let parts = items[1..]
                    .iter()
                    .map(|e| self.formula(e))
                    .collect::<ParseResult<Vec<_>>>()?;
                Ok(if expr.head().as_deref() == Some("and") {
                    Formula::And(parts)
                } else {
                    Formula::Or(parts)
                })
            }
            Some("not") => {
                if items.len() != 2 {
                    return Err(expected(expr.pos(), "(not <formula>)", &expr.describe()));
                }
                Ok(Formula::Not(Box::new(self.formula(&items[1])?)))
            }
            Some("forall") => {
                if items.len() != 3 {
                    return Err(expected(expr.pos(), "(forall (<vars>) <formula>)", &expr.describe()));
                }
                let vars = typed_list(items[1].expect_list("a variable list")?, "a variable")?;
                if vars.is_empty() {
                    return Err(expected(items[1].pos(), "at least one variable", "empty list"));
                }
                let mark = self.vars.len();
                for (v, pos) in &vars {
                    if !is_var(&v.name) {
                        return Err(expected(*pos, "a variable", &format!("'{}'", v.name)));
                    }
                    if self.var_type(&v.name).is_some() {
                        return Err(err(*pos, ParseErrorKind::ShadowedVariable(v.name.clone())));
                    }
                    if !self.domain.has_type(&v.ty) {
                        return Err(err(*pos, ParseErrorKind::UnknownType(v.ty.clone())));
                    }
                    self.vars.push(v.clone());
                }
                let body = self.formula(&items[2]);
                self.vars.truncate(mark);
                let mut body = body?;
                for (v, _) in vars.into_iter().rev() {
                    body = Formula::Forall {
                        var: v,
                        body: Box::new(body),
                    };
                }
                Ok(body)
            }
            Some(q @ ("exists" | "imply" | "when")) => Err(err(
                expr.pos(),
                ParseErrorKind::Unsupported(format!("'{q}' is not supported")),
            )),
            _ => Ok(Formula::Atom(self.atom(expr)?)),
        }
    }
}

fn check_head(expr: &SExpr, head: &str) -> ParseResult<()> {
    if expr.head().as_deref() == Some(head) {
        Ok(())
    } else {
        Err(expected(expr.pos(), &format!("'({head} ...)'"), &expr.describe()))
    }
}

/// `(define (<kind> <name>) sections...)`: returns the name and sections.
fn define_header<'e>(expr: &'e SExpr, kind: &str) -> ParseResult<(String, &'e [SExpr])> {
    check_head(expr, "define")?;
    let items = expr.as_list().unwrap();
    let header = items
        .get(1)
        .ok_or_else(|| expected(expr.pos(), &format!("({kind} <name>)"), "end of list"))?;
    check_head(header, kind)?;
    let h = header.as_list().unwrap();
    if h.len() != 2 {
        return Err(expected(header.pos(), &format!("({kind} <name>)"), &header.describe()));
    }
    Ok((h[1].expect_symbol("a name")?, &items[2..]))
}

/// Parse a domain file.
pub fn parse_domain(text: &str) -> ParseResult<DomainAst> {
    let root = sexpr::read_single(text)?;
    let (name, sections) = define_header(&root, "domain")?;
    let mut domain = DomainAst {
        name,
        requirements: BTreeSet::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    // actions are parsed after every declaration is known
    let mut action_exprs = Vec::new();
    for section in sections {
        let items = section.expect_list("a domain section")?;
        match section.head().as_deref() {
            Some(":requirements") => {
                for r in &items[1..] {
                    let tag = r.expect_symbol("a requirement")?;
                    let bare = tag.strip_prefix(':').unwrap_or(&tag);
                    if !SUPPORTED_REQUIREMENTS.contains(&bare) {
                        return Err(err(r.pos(), ParseErrorKind::UnsupportedRequirement(tag.clone())));
                    }
                    domain.requirements.insert(bare.to_string());
                }
            }
            Some(":types") => {
                for (t, pos) in typed_list(&items[1..], "a type name")? {
                    if t.ty != OBJECT_TYPE {
                        return Err(err(
                            pos,
                            ParseErrorKind::Unsupported("type hierarchies are not supported".into()),
                        ));
                    }
                    if t.name == OBJECT_TYPE {
                        continue;
                    }
                    if !domain.types.contains(&t.name) {
                        domain.types.push(t.name);
                    }
                }
            }
            Some(":constants") => {
                for (c, pos) in typed_list(&items[1..], "a constant")? {
                    if !domain.has_type(&c.ty) {
                        return Err(err(pos, ParseErrorKind::UnknownType(c.ty)));
                    }
                    if domain.constants.iter().any(|k| k.name == c.name) {
                        return Err(err(pos, ParseErrorKind::DuplicateObject(c.name)));
                    }
                    domain.constants.push(c);
                }
            }
            Some(":predicates") => {
                for p in &items[1..] {
                    let decl = p.expect_list("a predicate declaration")?;
                    let head = decl
                        .first()
                        .ok_or_else(|| expected(p.pos(), "a predicate declaration", "empty list"))?;
                    let name = head.expect_symbol("a predicate name")?;
                    if domain.predicate(&name).is_some() {
                        return Err(err(head.pos(), ParseErrorKind::DuplicatePredicate(name)));
                    }
                    let mut params = Vec::new();
                    for (v, pos) in typed_list(&decl[1..], "a variable")? {
                        if !is_var(&v.name) {
                            return Err(expected(pos, "a variable", &format!("'{}'", v.name)));
                        }
                        if !domain.has_type(&v.ty) {
                            return Err(err(pos, ParseErrorKind::UnknownType(v.ty)));
                        }
                        params.push(v);
                    }
                    domain.predicates.push(PredicateDecl { name, params });
                }
            }
            Some(":action") => action_exprs.push(section),
            _ => {
                return Err(expected(
                    section.pos(),
                    "a domain section (:requirements, :types, :constants, :predicates, :action)",
                    &section.describe(),
                ))
            }
        }
    }
    let constants: BTreeMap<String, String> = domain
        .constants
        .iter()
        .map(|c| (c.name.clone(), c.ty.clone()))
        .collect();
    for expr in action_exprs {
        let action = parse_action(expr, &domain, &constants)?;
        if domain.action(&action.name).is_some() {
            return Err(err(expr.pos(), ParseErrorKind::DuplicateAction(action.name)));
        }
        domain.actions.push(action);
    }
    Ok(domain)
}

fn parse_action(
    expr: &SExpr,
    domain: &DomainAst,
    constants: &BTreeMap<String, String>,
) -> ParseResult<ActionSchema> {
    let items = expr.as_list().unwrap();
    let name = items
        .get(1)
        .ok_or_else(|| expected(expr.pos(), "an action name", "end of list"))?
        .expect_symbol("an action name")?;
    let mut params = Vec::new();
    let mut pre_expr = None;
    let mut eff_expr = None;
    let mut i = 2;
    while i < items.len() {
        let key = items[i].expect_symbol("':parameters', ':precondition' or ':effect'")?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| expected(items[i].pos(), &format!("a value for {key}"), "end of list"))?;
        match key.as_str() {
            ":parameters" => {
                for (v, pos) in typed_list(value.expect_list("a parameter list")?, "a variable")? {
                    if !is_var(&v.name) {
                        return Err(expected(pos, "a variable", &format!("'{}'", v.name)));
                    }
                    if !domain.has_type(&v.ty) {
                        return Err(err(pos, ParseErrorKind::UnknownType(v.ty)));
                    }
                    if params.iter().any(|p: &Typed| p.name == v.name) {
                        return Err(err(pos, ParseErrorKind::DuplicateVariable(v.name)));
                    }
                    params.push(v);
                }
            }
            ":precondition" => pre_expr = Some(value),
            ":effect" => eff_expr = Some(value),
            _ => {
                return Err(expected(
                    items[i].pos(),
                    "':parameters', ':precondition' or ':effect'",
                    &items[i].describe(),
                ))
            }
        }
        i += 2;
    }
    let scope = Scope {
        domain,
        objects: constants,
        vars: params.clone(),
    };
    let mut precondition = Vec::new();
    if let Some(e) = pre_expr {
        precondition_literals(&scope, e, &mut precondition)?;
    }
    let mut add = Vec::new();
    let mut delete = Vec::new();
    if let Some(e) = eff_expr {
        effect_literals(&scope, e, &mut add, &mut delete)?;
        for a in &add {
            if delete.contains(a) {
                return Err(err(e.pos(), ParseErrorKind::ConflictingEffect(a.to_string())));
            }
        }
    }
    Ok(ActionSchema {
        name,
        params,
        precondition,
        add,
        delete,
    })
}

fn precondition_literals(scope: &Scope, expr: &SExpr, out: &mut Vec<Literal>) -> ParseResult<()> {
    let items = expr.expect_list("a precondition")?;
    match expr.head().as_deref() {
        None if items.is_empty() => Ok(()),
        Some("and") => items[1..]
            .iter()
            .try_for_each(|e| precondition_literals(scope, e, out)),
        Some(q @ ("or" | "forall" | "exists" | "imply" | "when")) => Err(err(
            expr.pos(),
            ParseErrorKind::DisallowedInPrecondition(q.to_string()),
        )),
        _ => {
            out.push(scope.literal(expr)?);
            Ok(())
        }
    }
}

fn effect_literals(
    scope: &Scope,
    expr: &SExpr,
    add: &mut Vec<AtomTemplate>,
    delete: &mut Vec<AtomTemplate>,
) -> ParseResult<()> {
    let items = expr.expect_list("an effect")?;
    match expr.head().as_deref() {
        None if items.is_empty() => Ok(()),
        Some("and") => items[1..]
            .iter()
            .try_for_each(|e| effect_literals(scope, e, add, delete)),
        Some(q @ ("forall" | "when" | "increase" | "decrease" | "assign")) => Err(err(
            expr.pos(),
            ParseErrorKind::Unsupported(format!("'{q}' effects are not supported")),
        )),
        _ => {
            let lit = scope.literal(expr)?;
            let target = if lit.positive { &mut *add } else { &mut *delete };
            if !target.contains(&lit.atom) {
                target.push(lit.atom);
            }
            Ok(())
        }
    }
}

/// Object table of a problem: domain constants plus declared objects.
pub fn object_types(domain: &DomainAst, problem: &ProblemAst) -> BTreeMap<String, String> {
    domain
        .constants
        .iter()
        .chain(&problem.objects)
        .map(|o| (o.name.clone(), o.ty.clone()))
        .collect()
}

/// Parse a problem file against an already parsed domain.
pub fn parse_problem(text: &str, domain: &DomainAst) -> ParseResult<ProblemAst> {
    let root = sexpr::read_single(text)?;
    let (name, sections) = define_header(&root, "problem")?;
    let mut domain_name = None;
    let mut objects: Vec<Typed> = Vec::new();
    let mut table: BTreeMap<String, String> = domain
        .constants
        .iter()
        .map(|c| (c.name.clone(), c.ty.clone()))
        .collect();
    let mut init_expr = None;
    let mut goal_expr = None;
    for section in sections {
        let items = section.expect_list("a problem section")?;
        match section.head().as_deref() {
            Some(":domain") => {
                let d = items
                    .get(1)
                    .ok_or_else(|| expected(section.pos(), "a domain name", "end of list"))?;
                let d_name = d.expect_symbol("a domain name")?;
                if d_name != domain.name {
                    return Err(err(
                        d.pos(),
                        ParseErrorKind::DomainMismatch {
                            expected: domain.name.clone(),
                            found: d_name,
                        },
                    ));
                }
                domain_name = Some(d_name);
            }
            Some(":objects") => {
                for (o, pos) in typed_list(&items[1..], "an object")? {
                    if !domain.has_type(&o.ty) {
                        return Err(err(pos, ParseErrorKind::UnknownType(o.ty)));
                    }
                    if table.contains_key(&o.name) {
                        return Err(err(pos, ParseErrorKind::DuplicateObject(o.name)));
                    }
                    table.insert(o.name.clone(), o.ty.clone());
                    objects.push(o);
                }
            }
            Some(":init") => init_expr = Some(section),
            Some(":goal") => goal_expr = Some(section),
            _ => {
                return Err(expected(
                    section.pos(),
                    "a problem section (:domain, :objects, :init, :goal)",
                    &section.describe(),
                ))
            }
        }
    }
    let domain_name =
        domain_name.ok_or_else(|| expected(root.pos(), "a (:domain <name>) section", "none"))?;
    let mut scope = Scope::new(domain, &table);
    let mut init = BTreeSet::new();
    if let Some(section) = init_expr {
        for e in &section.as_list().unwrap()[1..] {
            let atom = scope.atom(e)?;
            let ground = atom.bind(|_| None).expect("init atoms contain only objects");
            init.insert(ground);
        }
    }
    let goal_section =
        goal_expr.ok_or_else(|| expected(root.pos(), "a (:goal <formula>) section", "none"))?;
    let g = goal_section.as_list().unwrap();
    if g.len() != 2 {
        return Err(expected(goal_section.pos(), "(:goal <formula>)", &goal_section.describe()));
    }
    let goal = scope.formula(&g[1])?;
    Ok(ProblemAst {
        name,
        domain_name,
        objects,
        init,
        goal,
    })
}

/// Parse a standalone formula against a domain and object table.
pub fn parse_formula(text: &str, domain: &DomainAst, objects: &BTreeMap<String, String>) -> ParseResult<Formula> {
    let e = sexpr::read_single(text)?;
    Scope::new(domain, objects).formula(&e)
}

/// Parse a ground atom such as `(at robot start)` against a domain and object table.
pub fn parse_ground_atom(
    text: &str,
    domain: &DomainAst,
    objects: &BTreeMap<String, String>,
) -> ParseResult<GroundAtom> {
    let e = sexpr::read_single(text)?;
    let atom = Scope::new(domain, objects).atom(&e)?;
    Ok(atom.bind(|_| None).expect("no variables in scope"))
}
