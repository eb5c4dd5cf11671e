//! Bottom-up grounding over the set of possibly-true atoms.

use std::collections::{HashMap, HashSet};

use super::deps::predicate_order;
use super::matching::{for_each_match, plan_body, Bindings, Database};
use super::syntax::*;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_GROUND_RULES: usize = 1_000_000;

/// Checks that every variable of a statement occurs in a positive body literal.
pub fn check_safety(prog: &Program) -> Result<()> {
    fn check(body: &[Literal], others: Vec<Symbol>, text: String, span: Span) -> Result<()> {
        let mut safe = Vec::new();
        for l in body.iter().filter(|l| !l.negated) {
            l.atom.collect_vars(&mut safe);
        }
        let mut needed = others;
        for l in body.iter().filter(|l| l.negated) {
            l.atom.collect_vars(&mut needed);
        }
        match needed.into_iter().find(|v| !safe.contains(v)) {
            Some(v) => Err(Error::UnsafeVariable { var: v.to_string(), rule: text, span: span.to_string() }),
            None => Ok(()),
        }
    }
    for r in &prog.rules {
        check(&r.body, r.head.as_ref().map(Atom::vars).unwrap_or_default(), r.to_string(), r.span)?;
    }
    for c in &prog.choices {
        let mut vs = Vec::new();
        c.elements.iter().for_each(|e| e.collect_vars(&mut vs));
        check(&c.body, vs, c.to_string(), c.span)?;
    }
    for w in &prog.weaks {
        let mut vs = Vec::new();
        w.weight.collect_vars(&mut vs);
        w.level.collect_vars(&mut vs);
        w.terms.iter().for_each(|t| t.collect_vars(&mut vs));
        check(&w.body, vs, w.to_string(), w.span)?;
    }
    for m in &prog.mins {
        let mut vs = m.head.vars();
        vs.retain(|v| *v != m.result);
        check(&m.body, vs, m.to_string(), m.span)?;
        let mut inner = Vec::new();
        m.value.collect_vars(&mut inner);
        let mut cond = m.condition.clone();
        cond.extend(m.body.iter().filter(|l| !l.negated).cloned());
        check(&cond, inner, m.to_string(), m.span)?;
    }
    Ok(())
}

fn ground_body(b: &Bindings, body: &[Literal]) -> Vec<Literal> {
    body.iter().map(|l| Literal { negated: l.negated, atom: b.apply_atom(&l.atom) }).collect()
}

fn positive(body: &[Literal]) -> Vec<Literal> {
    body.iter().filter(|l| !l.negated).cloned().collect()
}

/// Grounds a program with the default size limit.
pub fn ground(prog: &Program) -> Result<Program> {
    ground_with_limit(prog, DEFAULT_MAX_GROUND_RULES)
}

/// Grounds a safe, non-recursive program. The result has the same answer
/// sets and weak-constraint costs. `#min` rules are not grounded.
pub fn ground_with_limit(prog: &Program, max_rules: usize) -> Result<Program> {
    if !prog.mins.is_empty() {
        return Err(Error::Config("#min rules must be evaluated outside the grounder".into()));
    }
    let order = predicate_order(prog)?;
    check_safety(prog)?;
    let rank: HashMap<PredKey, usize> = order.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();

    let mut rules_at: Vec<Vec<&Rule>> = vec![Vec::new(); order.len()];
    let mut constraints = Vec::new();
    for r in &prog.rules {
        match &r.head {
            Some(h) => rules_at[rank[&h.key()]].push(r),
            None => constraints.push(r),
        }
    }
    let mut choices_at: Vec<Vec<&ChoiceRule>> = vec![Vec::new(); order.len()];
    for c in &prog.choices {
        if let Some(first) = c.elements.iter().map(|e| rank[&e.key()]).min() {
            choices_at[first].push(c);
        }
    }

    let mut possible = Database::new();
    let mut out = Program::new();
    let mut seen_rules: HashSet<Rule> = HashSet::new();
    let mut seen_choices: HashSet<ChoiceRule> = HashSet::new();
    let mut count = 0usize;
    let over = |count: usize| -> Result<()> {
        if count > max_rules {
            Err(Error::GroundingLimit { limit: max_rules })
        } else {
            Ok(())
        }
    };

    for level in 0..order.len() {
        let mut new_atoms = Vec::new();
        for r in &rules_at[level] {
            let pos = positive(&r.body);
            let plan = plan_body(&pos, &[]);
            let mut b = Bindings::new();
            let mut err = None;
            for_each_match(&pos, &plan, &possible, &mut b, &mut |m| {
                let head = m.apply_atom(r.head.as_ref().expect("headed"));
                let g = Rule { head: Some(head.clone()), body: ground_body(m, &r.body), span: r.span };
                if seen_rules.insert(g.clone()) {
                    count += 1;
                    if let Err(e) = over(count) {
                        err = Some(e);
                        return false;
                    }
                    out.rules.push(g);
                    new_atoms.push(head);
                }
                true
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        for c in &choices_at[level] {
            let pos = positive(&c.body);
            let plan = plan_body(&pos, &[]);
            let mut b = Bindings::new();
            let mut err = None;
            for_each_match(&pos, &plan, &possible, &mut b, &mut |m| {
                let mut elements: Vec<Atom> = c.elements.iter().map(|e| m.apply_atom(e)).collect();
                elements.sort();
                elements.dedup();
                let g = ChoiceRule {
                    lower: c.lower,
                    upper: c.upper,
                    elements: elements.clone(),
                    body: ground_body(m, &c.body),
                    span: c.span,
                };
                if seen_choices.insert(g.clone()) {
                    count += 1;
                    if let Err(e) = over(count) {
                        err = Some(e);
                        return false;
                    }
                    out.choices.push(g);
                    new_atoms.extend(elements);
                }
                true
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        for a in new_atoms {
            possible.insert(a);
        }
    }

    for r in constraints {
        let pos = positive(&r.body);
        let plan = plan_body(&pos, &[]);
        let mut b = Bindings::new();
        let mut err = None;
        for_each_match(&pos, &plan, &possible, &mut b, &mut |m| {
            let g = Rule { head: None, body: ground_body(m, &r.body), span: r.span };
            if seen_rules.insert(g.clone()) {
                count += 1;
                if let Err(e) = over(count) {
                    err = Some(e);
                    return false;
                }
                out.rules.push(g);
            }
            true
        });
        if let Some(e) = err {
            return Err(e);
        }
    }

    let mut seen_weaks = HashSet::new();
    for w in &prog.weaks {
        let pos = positive(&w.body);
        let plan = plan_body(&pos, &[]);
        let mut b = Bindings::new();
        let mut err = None;
        for_each_match(&pos, &plan, &possible, &mut b, &mut |m| {
            let g = WeakConstraint {
                body: ground_body(m, &w.body),
                weight: m.apply(&w.weight),
                level: m.apply(&w.level),
                terms: w.terms.iter().map(|t| m.apply(t)).collect(),
                span: w.span,
            };
            if seen_weaks.insert(g.clone()) {
                count += 1;
                if let Err(e) = over(count) {
                    err = Some(e);
                    return false;
                }
                out.weaks.push(g);
            }
            true
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(out)
}
