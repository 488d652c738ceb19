mod common;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use proptest::prelude::*;
use redline_core::fixtures::{self, care_task, river_task};
use redline_core::pddl::{
    apply, domain_to_string, evaluate, parse_domain, parse_problem, problem_to_string, AtomTemplate, Formula,
    GroundAtom, GroundedTask, State, Term,
};

fn hash_of(s: &State) -> u64 {
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    h.finish()
}

fn atom_formula(a: &GroundAtom) -> Formula {
    Formula::Atom(AtomTemplate {
        predicate: a.predicate.clone(),
        args: a.args.iter().cloned().map(Term::Const).collect(),
    })
}

/// Every ground atom the task's actions can mention.
fn atom_universe(task: &GroundedTask) -> Vec<GroundAtom> {
    let mut all: Vec<GroundAtom> = task
        .actions
        .iter()
        .chain(&task.pruned)
        .flat_map(|a| a.pre_pos.iter().chain(&a.pre_neg).chain(&a.add).chain(&a.delete).cloned())
        .chain(task.init.iter().cloned())
        .collect();
    all.sort();
    all.dedup();
    all
}

#[test]
fn fixture_round_trip() {
    for (dt, pt) in [
        (fixtures::CARE_DOMAIN, fixtures::CARE_PROBLEM),
        (fixtures::CARE_DOMAIN, fixtures::CARE_PROBLEM_STRIPPED),
        (fixtures::RIVER_DOMAIN, fixtures::RIVER_PROBLEM),
    ] {
        let d = parse_domain(dt).unwrap();
        let p = parse_problem(pt, &d).unwrap();
        let d_text = domain_to_string(&d);
        let d2 = parse_domain(&d_text).unwrap();
        assert_eq!(d2, d);
        assert_eq!(domain_to_string(&d2), d_text);
        let p_text = problem_to_string(&p);
        let p2 = parse_problem(&p_text, &d2).unwrap();
        assert_eq!(p2, p);
        assert_eq!(problem_to_string(&p2), p_text);
    }
}

#[test]
fn evaluate_matches_reference_evaluator() {
    for (task, policy) in [
        (care_task(), fixtures::CARE_POLICY),
        (river_task(), fixtures::RIVER_POLICY),
    ] {
        let objects: std::collections::BTreeMap<String, String> = task
            .objects
            .all()
            .iter()
            .map(|o| (o.clone(), task.objects.type_of(o).unwrap().to_string()))
            .collect();
        let policy = redline_core::constraint::ConstraintPolicy::parse(policy, &task).unwrap();
        let mut formulas = vec![task.goal.clone()];
        formulas.extend(policy.invariants().map(|i| i.formula.clone()));
        for s in common::reachable(&task, 100_000) {
            let facts = common::facts_of(&s);
            for f in &formulas {
                assert_eq!(evaluate(f, &s, &task.objects), common::holds(f, &facts, &objects, &mut Vec::new()));
            }
        }
    }
}

#[test]
fn pruned_actions_never_applicable() {
    for task in [care_task(), river_task()] {
        let states = common::reachable(&task, 100_000);
        assert!(states.len() > 1);
        for s in &states {
            for a in &task.pruned {
                assert!(!a.is_applicable(s), "{a} applicable in {s}");
            }
        }
    }
}

#[test]
fn care_pruning_drops_exactly_diary_cleaning() {
    let task = care_task();
    assert!(!task.pruned.is_empty());
    for a in &task.pruned {
        assert_eq!(a.name, "clean_from_table");
        // either the object is the diary or the target is not the removal area
        assert!(a.args[2] == "diary" || a.args[3] != "remove", "{a}");
    }
}

#[test]
fn apply_evaluate_coherence_on_reachable_states() {
    for task in [care_task(), river_task()] {
        for s in common::reachable(&task, 100_000) {
            for a in task.applicable(&s) {
                let next = apply(&s, a).unwrap();
                for atom in &a.add {
                    assert!(evaluate(&atom_formula(atom), &next, &task.objects));
                }
                for atom in a.delete.iter().filter(|d| !a.add.contains(d)) {
                    assert!(!evaluate(&atom_formula(atom), &next, &task.objects));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn fuzz_domains_round_trip(d in common::arb_domain()) {
        let text = domain_to_string(&d);
        let parsed = parse_domain(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&parsed, &d);
        let again = parse_domain(&domain_to_string(&parsed)).unwrap();
        prop_assert_eq!(again, parsed);
    }

    #[test]
    fn state_is_canonical(perm in Just((0..20usize).collect::<Vec<_>>()).prop_shuffle(), keep in prop::collection::vec(any::<bool>(), 20)) {
        let task = care_task();
        let universe = atom_universe(&task);
        let chosen: Vec<GroundAtom> = perm
            .iter()
            .filter(|&&i| i < universe.len() && keep[i])
            .map(|&i| universe[i].clone())
            .collect();
        let a: State = chosen.iter().cloned().collect();
        let b: State = chosen.iter().rev().cloned().collect();
        let mut c = State::new();
        for atom in chosen.iter().chain(&chosen) {
            c.insert(atom.clone());
        }
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
        prop_assert_eq!(hash_of(&a), hash_of(&b));
        prop_assert_eq!(a.digest(), c.digest());
    }

    #[test]
    fn successor_coherence_on_arbitrary_states(bits in prop::collection::vec(any::<bool>(), 64), pick in any::<prop::sample::Index>()) {
        let task = river_task();
        let universe = atom_universe(&task);
        let s: State = universe.iter().zip(bits.iter().cycle()).filter(|(_, b)| **b).map(|(a, _)| a.clone()).collect();
        let a = pick.get(&task.actions);
        let next = a.successor(&s);
        for atom in &a.add {
            prop_assert!(next.contains(atom));
        }
        for atom in a.delete.iter().filter(|d| !a.add.contains(d)) {
            prop_assert!(!next.contains(atom));
        }
        // untouched atoms carry over
        for atom in s.iter().filter(|x| !a.delete.contains(x)) {
            prop_assert!(next.contains(atom));
        }
    }

    #[test]
    fn evaluate_is_pure(bits in prop::collection::vec(any::<bool>(), 64)) {
        let task = care_task();
        let universe = atom_universe(&task);
        let s: State = universe.iter().zip(bits.iter().cycle()).filter(|(_, b)| **b).map(|(a, _)| a.clone()).collect();
        let first = evaluate(&task.goal, &s, &task.objects);
        for _ in 0..3 {
            prop_assert_eq!(evaluate(&task.goal, &s, &task.objects), first);
        }
    }

    #[test]
    fn garbage_input_never_panics(text in "[()a-z?:\\- \n\";0-9]{0,120}") {
        if let Err(e) = parse_domain(&text) {
            prop_assert!(e.pos.line >= 1 && e.pos.col >= 1);
            let prefix = format!("{}:{}:", e.pos.line, e.pos.col);
            prop_assert!(e.to_string().starts_with(&prefix));
        }
    }

    #[test]
    fn truncated_fixtures_fail_with_position(cut in 1usize..400) {
        let text = fixtures::RIVER_DOMAIN;
        let cut = cut.min(text.len() - 1);
        let truncated = &text[..cut];
        let e = parse_domain(truncated).expect_err("a truncated domain is malformed");
        let lines = truncated.lines().count().max(1);
        prop_assert!(e.pos.line >= 1 && e.pos.line <= lines + 1, "{} in {} lines", e, lines);
    }

    #[test]
    fn corrupted_problems_never_panic(at in any::<prop::sample::Index>(), ch in "[()?x \"]") {
        let d = parse_domain(fixtures::CARE_DOMAIN).unwrap();
        let mut text = fixtures::CARE_PROBLEM.to_string();
        let i = at.index(text.len());
        if text.is_char_boundary(i) {
            text.replace_range(i..i, &ch);
        }
        if let Err(e) = parse_problem(&text, &d) {
            prop_assert!(e.pos.line >= 1);
        }
    }
}
