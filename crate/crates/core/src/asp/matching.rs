//! Indexed fact stores and body matching by backtracking joins.

use std::collections::{HashMap, HashSet};

use super::syntax::{Atom, Literal, Symbol, Term};

/// Variable substitution kept as a small stack so that backtracking is a
/// truncate.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    vars: Vec<(Symbol, Term)>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn get(&self, v: &Symbol) -> Option<&Term> {
        self.vars.iter().rev().find(|(k, _)| k == v).map(|(_, t)| t)
    }

    pub fn bind(&mut self, v: Symbol, t: Term) {
        self.vars.push((v, t));
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.vars.truncate(n);
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Symbol, Term)> {
        self.vars.iter()
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Func(f, args) => Term::Func(f.clone(), args.iter().map(|a| self.apply(a)).collect()),
            _ => t.clone(),
        }
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom { predicate: a.predicate.clone(), args: a.args.iter().map(|t| self.apply(t)).collect() }
    }

    /// Ground value of `t` under the bindings, if fully determined.
    pub fn resolve(&self, t: &Term) -> Option<Term> {
        match t {
            Term::Var(v) => self.get(v).cloned(),
            Term::Func(f, args) => {
                let mut out = Vec::with_capacity(args.len());
                for a in args {
                    out.push(self.resolve(a)?);
                }
                Some(Term::Func(f.clone(), out))
            }
            _ => Some(t.clone()),
        }
    }

    /// Extends the bindings so that `pattern` equals the ground `value`.
    /// On failure the bindings may hold partial extensions; callers truncate.
    pub fn unify(&mut self, pattern: &Term, value: &Term) -> bool {
        match pattern {
            Term::Var(v) => match self.get(v) {
                Some(t) => t == value,
                None => {
                    self.bind(v.clone(), value.clone());
                    true
                }
            },
            Term::Func(f, args) => match value {
                Term::Func(g, vals) if f == g && args.len() == vals.len() => {
                    args.iter().zip(vals).all(|(a, v)| self.unify(a, v))
                }
                _ => false,
            },
            _ => pattern == value,
        }
    }

    pub fn unify_atom(&mut self, pattern: &Atom, value: &Atom) -> bool {
        pattern.predicate == value.predicate
            && pattern.args.len() == value.args.len()
            && pattern.args.iter().zip(&value.args).all(|(p, v)| self.unify(p, v))
    }
}

/// Read access to a set of ground atoms.
pub trait Facts {
    fn contains(&self, a: &Atom) -> bool;

    /// Visits atoms with the given predicate and arity; when `bound` is
    /// given only atoms whose argument at that position equals the term.
    /// The visitor returns false to stop early; the return value reports
    /// whether the visit ran to completion.
    fn visit(&self, pred: &Symbol, arity: usize, bound: Option<(usize, &Term)>, f: &mut dyn FnMut(&Atom) -> bool)
        -> bool;
}

type PredIdx = (Symbol, usize);

/// A set of ground atoms indexed by predicate and by argument value.
#[derive(Clone, Debug, Default)]
pub struct Database {
    atoms: Vec<Atom>,
    set: HashSet<Atom>,
    by_pred: HashMap<PredIdx, Vec<u32>>,
    by_arg: HashMap<(PredIdx, usize, Term), Vec<u32>>,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Self {
        let mut db = Database::new();
        for a in atoms {
            db.insert(a.clone());
        }
        db
    }

    pub fn insert(&mut self, a: Atom) -> bool {
        if self.set.contains(&a) {
            return false;
        }
        let id = self.atoms.len() as u32;
        let key = (a.predicate.clone(), a.args.len());
        for (i, t) in a.args.iter().enumerate() {
            self.by_arg.entry((key.clone(), i, t.clone())).or_default().push(id);
        }
        self.by_pred.entry(key).or_default().push(id);
        self.set.insert(a.clone());
        self.atoms.push(a);
        true
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

impl Facts for Database {
    fn contains(&self, a: &Atom) -> bool {
        self.set.contains(a)
    }

    fn visit(&self, pred: &Symbol, arity: usize, bound: Option<(usize, &Term)>, f: &mut dyn FnMut(&Atom) -> bool)
        -> bool {
        let key = (pred.clone(), arity);
        let ids = match bound {
            Some((i, t)) => self.by_arg.get(&(key, i, t.clone())),
            None => self.by_pred.get(&key),
        };
        if let Some(ids) = ids {
            for &id in ids {
                if !f(&self.atoms[id as usize]) {
                    return false;
                }
            }
        }
        true
    }
}

/// Union of two stores, typically shared background plus a small overlay.
pub struct Layered<'a> {
    pub base: &'a Database,
    pub top: &'a Database,
}

impl Facts for Layered<'_> {
    fn contains(&self, a: &Atom) -> bool {
        self.top.contains(a) || self.base.contains(a)
    }

    fn visit(&self, pred: &Symbol, arity: usize, bound: Option<(usize, &Term)>, f: &mut dyn FnMut(&Atom) -> bool)
        -> bool {
        self.base.visit(pred, arity, bound, f) && self.top.visit(pred, arity, bound, f)
    }
}

/// Orders body literals for evaluation: positive literals greedily by
/// number of already-bound arguments, each negative literal as soon as its
/// variables are bound.
pub fn plan_body(body: &[Literal], prebound: &[Symbol]) -> Vec<usize> {
    let mut bound: Vec<Symbol> = prebound.to_vec();
    let mut pos: Vec<usize> = (0..body.len()).filter(|&i| !body[i].negated).collect();
    let mut neg: Vec<usize> = (0..body.len()).filter(|&i| body[i].negated).collect();
    let mut order = Vec::with_capacity(body.len());
    let ready = |i: usize, bound: &[Symbol]| body[i].atom.vars().iter().all(|v| bound.contains(v));
    loop {
        neg.retain(|&i| {
            if ready(i, &bound) {
                order.push(i);
                false
            } else {
                true
            }
        });
        if pos.is_empty() {
            break;
        }
        let score = |i: usize| {
            body[i]
                .atom
                .args
                .iter()
                .filter(|t| {
                    let mut vs = Vec::new();
                    t.collect_vars(&mut vs);
                    vs.iter().all(|v| bound.contains(v))
                })
                .count()
        };
        let (k, _) = pos
            .iter()
            .enumerate()
            .max_by(|(ia, &a), (ib, &b)| score(a).cmp(&score(b)).then(ib.cmp(ia)))
            .expect("nonempty");
        let i = pos.remove(k);
        body[i].atom.collect_vars(&mut bound);
        order.push(i);
    }
    order.extend(neg);
    order
}

/// Enumerates all extensions of `b` satisfying the body literals against
/// `facts`, in the given plan order. Negative literals must be ground by the
/// time they are reached (safe rules). The callback returns false to stop.
pub fn for_each_match<F: Facts + ?Sized>(
    body: &[Literal],
    plan: &[usize],
    facts: &F,
    b: &mut Bindings,
    f: &mut dyn FnMut(&Bindings) -> bool,
) -> bool {
    match_rec(body, plan, 0, facts, b, f)
}

fn match_rec<F: Facts + ?Sized>(
    body: &[Literal],
    plan: &[usize],
    k: usize,
    facts: &F,
    b: &mut Bindings,
    f: &mut dyn FnMut(&Bindings) -> bool,
) -> bool {
    if k == plan.len() {
        return f(b);
    }
    let lit = &body[plan[k]];
    if lit.negated {
        let g = b.apply_atom(&lit.atom);
        if facts.contains(&g) {
            return true;
        }
        return match_rec(body, plan, k + 1, facts, b, f);
    }
    let resolved: Vec<Option<Term>> = lit.atom.args.iter().map(|t| b.resolve(t)).collect();
    if resolved.iter().all(Option::is_some) {
        let g = Atom {
            predicate: lit.atom.predicate.clone(),
            args: resolved.into_iter().map(|t| t.expect("checked")).collect(),
        };
        if !facts.contains(&g) {
            return true;
        }
        return match_rec(body, plan, k + 1, facts, b, f);
    }
    let bound = resolved.iter().enumerate().find_map(|(i, t)| t.as_ref().map(|t| (i, t)));
    let mark = b.len();
    facts.visit(&lit.atom.predicate, lit.atom.args.len(), bound, &mut |cand| {
        let ok = b.unify_atom(&lit.atom, cand);
        let cont = !ok || match_rec(body, plan, k + 1, facts, b, f);
        b.truncate(mark);
        cont
    })
}

/// Convenience wrapper collecting every satisfying substitution.
pub fn all_matches<F: Facts + ?Sized>(body: &[Literal], facts: &F) -> Vec<Bindings> {
    let plan = plan_body(body, &[]);
    let mut out = Vec::new();
    let mut b = Bindings::new();
    for_each_match(body, &plan, facts, &mut b, &mut |m| {
        out.push(m.clone());
        true
    });
    out
}
