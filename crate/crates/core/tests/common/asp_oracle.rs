//! Reference semantics by brute force: naive grounding over the Herbrand
//! universe and the reduct definition checked for every candidate set.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use nfl_core::asp::*;
use rand::seq::IndexedRandom;
use rand::Rng;

fn substitute(t: &Term, env: &BTreeMap<Symbol, Term>) -> Term {
    match t {
        Term::Var(v) => env[v].clone(),
        Term::Func(f, a) => Term::Func(f.clone(), a.iter().map(|x| substitute(x, env)).collect()),
        _ => t.clone(),
    }
}

fn sub_atom(a: &Atom, env: &BTreeMap<Symbol, Term>) -> Atom {
    Atom { predicate: a.predicate.clone(), args: a.args.iter().map(|t| substitute(t, env)).collect() }
}

fn sub_body(b: &[Literal], env: &BTreeMap<Symbol, Term>) -> Vec<Literal> {
    b.iter().map(|l| Literal { negated: l.negated, atom: sub_atom(&l.atom, env) }).collect()
}

fn constants(prog: &Program) -> Vec<Term> {
    fn walk(t: &Term, out: &mut BTreeSet<Term>) {
        match t {
            Term::Var(_) => {}
            _ => {
                out.insert(t.clone());
            }
        }
    }
    let mut out = BTreeSet::new();
    for a in prog.atoms() {
        a.args.iter().for_each(|t| walk(t, &mut out));
    }
    out.into_iter().collect()
}

fn envs(vars: &[Symbol], consts: &[Term]) -> Vec<BTreeMap<Symbol, Term>> {
    let mut acc = vec![BTreeMap::new()];
    for v in vars {
        let mut next = Vec::new();
        for e in &acc {
            for c in consts {
                let mut e2 = e.clone();
                e2.insert(v.clone(), c.clone());
                next.push(e2);
            }
        }
        acc = next;
    }
    acc
}

/// Instantiates every variable with every constant.
pub fn naive_ground(prog: &Program) -> Program {
    let consts = constants(prog);
    let mut out = Program::new();
    for r in &prog.rules {
        for e in envs(&r.vars(), &consts) {
            out.rules.push(Rule::new(r.head.as_ref().map(|h| sub_atom(h, &e)), sub_body(&r.body, &e)));
        }
    }
    for c in &prog.choices {
        let mut vars = Vec::new();
        c.elements.iter().for_each(|a| a.collect_vars(&mut vars));
        c.body.iter().for_each(|l| l.atom.collect_vars(&mut vars));
        for e in envs(&vars, &consts) {
            out.choices.push(ChoiceRule {
                lower: c.lower,
                upper: c.upper,
                elements: c.elements.iter().map(|a| sub_atom(a, &e)).collect(),
                body: sub_body(&c.body, &e),
                span: Span::default(),
            });
        }
    }
    for w in &prog.weaks {
        let mut vars = Vec::new();
        w.body.iter().for_each(|l| l.atom.collect_vars(&mut vars));
        for e in envs(&vars, &consts) {
            out.weaks.push(WeakConstraint {
                body: sub_body(&w.body, &e),
                weight: substitute(&w.weight, &e),
                level: substitute(&w.level, &e),
                terms: w.terms.iter().map(|t| substitute(t, &e)).collect(),
                span: Span::default(),
            });
        }
    }
    out
}

/// Answer sets by the reduct definition over every subset of the atoms
/// occurring in the (naively grounded) program.
pub fn reduct_answer_sets(prog: &Program) -> Vec<Interpretation> {
    let g = if prog.is_ground() { prog.clone() } else { naive_ground(prog) };
    let hb: Vec<Atom> = g.atoms().into_iter().collect();
    assert!(hb.len() <= 16, "oracle limited to small Herbrand bases");
    let mut out = Vec::new();
    for mask in 0u32..(1 << hb.len()) {
        let i: HashSet<&Atom> = (0..hb.len()).filter(|k| mask >> k & 1 == 1).map(|k| &hb[k]).collect();
        if is_answer_set(&g, &i) {
            out.push(i.into_iter().cloned().collect::<Interpretation>());
        }
    }
    out.sort();
    out
}

fn is_answer_set(g: &Program, i: &HashSet<&Atom>) -> bool {
    // (head or bottom, positive body) pairs of the reduct.
    let mut definite: Vec<(Option<Atom>, Vec<Atom>)> = Vec::new();
    let blocked = |b: &[Literal]| b.iter().any(|l| l.negated && i.contains(&l.atom));
    let pos = |b: &[Literal]| b.iter().filter(|l| !l.negated).map(|l| l.atom.clone()).collect::<Vec<_>>();
    for r in &g.rules {
        if !blocked(&r.body) {
            definite.push((r.head.clone(), pos(&r.body)));
        }
    }
    for c in &g.choices {
        if blocked(&c.body) {
            continue;
        }
        let elems: BTreeSet<&Atom> = c.elements.iter().collect();
        let n = elems.iter().filter(|a| i.contains(**a)).count();
        let ok = n >= c.lower as usize && c.upper.is_none_or(|u| n <= u as usize);
        if ok {
            for a in elems.into_iter().filter(|a| i.contains(*a)) {
                definite.push((Some(a.clone()), pos(&c.body)));
            }
        } else {
            definite.push((None, pos(&c.body)));
        }
    }
    let mut model: HashSet<Atom> = HashSet::new();
    let mut bottom = false;
    loop {
        let mut changed = false;
        for (h, b) in &definite {
            if b.iter().all(|a| model.contains(a)) {
                match h {
                    Some(h) => changed |= model.insert(h.clone()),
                    None => bottom = true,
                }
            }
        }
        if !changed {
            break;
        }
    }
    !bottom && model.len() == i.len() && model.iter().all(|a| i.contains(a))
}

/// Weak cost by the definition: distinct satisfied tuples summed per level.
pub fn oracle_cost(prog: &Program, i: &Interpretation) -> BTreeMap<i64, i64> {
    let g = if prog.is_ground() { prog.clone() } else { naive_ground(prog) };
    let mut tuples = BTreeSet::new();
    for w in &g.weaks {
        let sat = w.body.iter().all(|l| i.contains(&l.atom) != l.negated);
        if sat {
            tuples.insert((w.weight.as_int().unwrap(), w.level.as_int().unwrap(), w.terms.clone()));
        }
    }
    let mut cost = BTreeMap::new();
    for (w, l, _) in tuples {
        *cost.entry(l).or_insert(0) += w;
    }
    cost.retain(|_, v| *v != 0);
    cost
}

/// Optimal answer sets by exhaustive comparison of oracle costs.
pub fn oracle_optimal(prog: &Program) -> (BTreeMap<i64, i64>, Vec<Interpretation>) {
    let sets = reduct_answer_sets(prog);
    let levels: BTreeSet<i64> = sets.iter().flat_map(|s| oracle_cost(prog, s).into_keys()).collect();
    let dense = |c: &BTreeMap<i64, i64>| -> Vec<i64> {
        levels.iter().rev().map(|l| c.get(l).copied().unwrap_or(0)).collect()
    };
    let mut best: Option<Vec<i64>> = None;
    let mut out = Vec::new();
    let mut best_cost = BTreeMap::new();
    for s in sets {
        let c = oracle_cost(prog, &s);
        let d = dense(&c);
        match &best {
            Some(b) if d > *b => {}
            Some(b) if d == *b => out.push(s),
            _ => {
                best = Some(d);
                best_cost = c;
                out = vec![s];
            }
        }
    }
    (best_cost, out)
}

fn atom(level: usize, j: usize) -> Atom {
    Atom::new(&format!("l{level}"), vec![Term::Int(j as i64)])
}

fn lits(rng: &mut impl Rng, pool: &[Atom], max: usize) -> Vec<Literal> {
    let n = rng.random_range(0..=max.min(pool.len()));
    let mut out: Vec<Literal> = Vec::new();
    for _ in 0..n {
        let a = pool.choose(rng).unwrap().clone();
        if out.iter().any(|l| l.atom == a) {
            continue;
        }
        out.push(Literal { negated: rng.random_bool(0.4), atom: a });
    }
    out
}

/// Random ground non-recursive program over at most `max_atoms` atoms.
/// Atoms `lK(j)` at level K only depend on lower levels.
pub fn random_ground_program(rng: &mut impl Rng, max_atoms: usize) -> Program {
    let n_levels = rng.random_range(1..=4usize);
    let per_level = (max_atoms / n_levels).clamp(1, 3);
    let levels: Vec<Vec<Atom>> =
        (0..n_levels).map(|k| (0..rng.random_range(1..=per_level)).map(|j| atom(k, j)).collect()).collect();
    let mut p = Program::new();
    let below = |k: usize| -> Vec<Atom> { levels[..k].iter().flatten().cloned().collect() };
    let all: Vec<Atom> = levels.iter().flatten().cloned().collect();
    for _ in 0..rng.random_range(1..=8) {
        let k = rng.random_range(0..n_levels);
        match rng.random_range(0..10) {
            0..=3 => {
                let h = levels[k].choose(rng).unwrap().clone();
                let body = lits(rng, &below(k), 3);
                p.rules.push(Rule::new(Some(h), body));
            }
            4..=5 => {
                let body = lits(rng, &all, 3);
                if !body.is_empty() {
                    p.rules.push(Rule::new(None, body));
                }
            }
            6..=8 => {
                let mut elements: Vec<Atom> = levels[k].iter().filter(|_| rng.random_bool(0.7)).cloned().collect();
                if elements.is_empty() {
                    elements.push(levels[k][0].clone());
                }
                let lower = rng.random_range(0..=2u32);
                let upper = if rng.random_bool(0.3) { None } else { Some(lower + rng.random_range(0..=2u32)) };
                let body = lits(rng, &below(k), 2);
                p.choices.push(ChoiceRule { lower, upper, elements, body, span: Span::default() });
            }
            _ => {
                let mut body = lits(rng, &all, 2);
                if body.is_empty() {
                    body.push(Literal::pos(all.choose(rng).unwrap().clone()));
                }
                let terms = if rng.random_bool(0.5) { vec![] } else { vec![Term::Int(rng.random_range(0..3))] };
                p.weaks.push(WeakConstraint {
                    body,
                    weight: Term::Int(rng.random_range(1..=5)),
                    level: Term::Int(rng.random_range(1..=2)),
                    terms,
                    span: Span::default(),
                });
            }
        }
    }
    p
}

/// Random safe non-ground program over a two-constant domain.
pub fn random_nonground_program(rng: &mut impl Rng) -> Program {
    let mut text = String::from("d(1). d(2).\n");
    let n = rng.random_range(0..=2);
    if n > 0 {
        text.push_str(&format!("{{ c(X) }} {} :- d(X).\n", n));
    }
    if rng.random_bool(0.5) {
        text.push_str("e(X) :- d(X), not c(X).\n");
    } else {
        text.push_str("1 { e(X); f(X) } 1 :- c(X).\n");
    }
    if rng.random_bool(0.5) {
        text.push_str("g(X,Y) :- c(X), d(Y), not e(Y).\n");
    }
    if rng.random_bool(0.3) {
        text.push_str(":- c(1), c(2).\n");
    }
    if rng.random_bool(0.5) {
        text.push_str(":~ c(X). [X@1, X]\n");
    }
    parse_program(&text).unwrap()
}
