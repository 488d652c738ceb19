//! Normalized PDDL output: lower case, two-space indentation, every typed
//! name printed with an explicit type.

use std::fmt::Write;

use crate::pddl::ast::*;

const INDENT: &str = "  ";

fn typed_group(items: &[Typed]) -> String {
    items
        .iter()
        .map(|t| format!("{} - {}", t.name, t.ty))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Consecutive names sharing a type are written on one line.
fn object_lines(items: &[Typed]) -> Vec<String> {
    let mut lines: Vec<(Vec<&str>, &str)> = Vec::new();
    for t in items {
        match lines.last_mut() {
            Some((names, ty)) if *ty == t.ty => names.push(&t.name),
            _ => lines.push((vec![&t.name], &t.ty)),
        }
    }
    lines
        .into_iter()
        .map(|(names, ty)| format!("{} - {}", names.join(" "), ty))
        .collect()
}

pub fn formula_to_string(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f, 0);
    out
}

fn write_formula(out: &mut String, f: &Formula, depth: usize) {
    match f {
        Formula::Atom(a) => {
            let _ = write!(out, "{a}");
        }
        Formula::Not(inner) => {
            out.push_str("(not ");
            write_formula(out, inner, depth);
            out.push(')');
        }
        Formula::And(fs) | Formula::Or(fs) => {
            let op = if matches!(f, Formula::And(_)) { "and" } else { "or" };
            out.push('(');
            out.push_str(op);
            for g in fs {
                out.push('\n');
                out.push_str(&INDENT.repeat(depth + 1));
                write_formula(out, g, depth + 1);
            }
            out.push(')');
        }
        Formula::Forall { var, body } => {
            let _ = writeln!(out, "(forall ({} - {})", var.name, var.ty);
            out.push_str(&INDENT.repeat(depth + 1));
            write_formula(out, body, depth + 1);
            out.push(')');
        }
    }
}

pub fn domain_to_string(d: &DomainAst) -> String {
    let mut out = format!("(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let reqs: Vec<String> = d.requirements.iter().map(|r| format!(":{r}")).collect();
        let _ = write!(out, "\n{INDENT}(:requirements {})", reqs.join(" "));
    }
    if !d.types.is_empty() {
        let _ = write!(out, "\n{INDENT}(:types {})", d.types.join(" "));
    }
    if !d.constants.is_empty() {
        let _ = write!(out, "\n{INDENT}(:constants {})", object_lines(&d.constants).join(" "));
    }
    if !d.predicates.is_empty() {
        let _ = write!(out, "\n{INDENT}(:predicates");
        for p in &d.predicates {
            let _ = write!(out, "\n{INDENT}{INDENT}({}", p.name);
            if !p.params.is_empty() {
                let _ = write!(out, " {}", typed_group(&p.params));
            }
            out.push(')');
        }
        out.push(')');
    }
    for a in &d.actions {
        let i2 = INDENT.repeat(2);
        let i3 = INDENT.repeat(3);
        let _ = write!(out, "\n{INDENT}(:action {}", a.name);
        let _ = write!(out, "\n{i2}:parameters ({})", typed_group(&a.params));
        let _ = write!(out, "\n{i2}:precondition (and");
        for l in &a.precondition {
            let _ = write!(out, "\n{i3}{l}");
        }
        out.push(')');
        let _ = write!(out, "\n{i2}:effect (and");
        for atom in &a.delete {
            let _ = write!(out, "\n{i3}(not {atom})");
        }
        for atom in &a.add {
            let _ = write!(out, "\n{i3}{atom}");
        }
        out.push_str("))");
    }
    out.push_str(")\n");
    out
}

pub fn problem_to_string(p: &ProblemAst) -> String {
    let mut out = format!("(define (problem {})\n{INDENT}(:domain {})", p.name, p.domain_name);
    if !p.objects.is_empty() {
        let _ = write!(out, "\n{INDENT}(:objects");
        for line in object_lines(&p.objects) {
            let _ = write!(out, "\n{INDENT}{INDENT}{line}");
        }
        out.push(')');
    }
    let _ = write!(out, "\n{INDENT}(:init");
    for atom in &p.init {
        let _ = write!(out, "\n{INDENT}{INDENT}{atom}");
    }
    out.push(')');
    let mut goal = String::new();
    write_formula(&mut goal, &p.goal, 2);
    let _ = write!(out, "\n{INDENT}(:goal\n{INDENT}{INDENT}{goal}))\n");
    out
}
