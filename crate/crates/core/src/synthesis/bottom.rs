//! Ground bottom rules, capture-guided enumeration of their conforming
//! subsets, and lifting to first-order rules.

use std::collections::{BTreeSet, HashSet};

use itertools::Itertools;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::asp::matching::Facts;
use crate::asp::syntax::*;
use crate::mode::{ModeBias, ModeDecl, Polarity, SlotKind};

/// A constant together with the type of the slot it occupies.
pub(crate) type Key = (Term, Symbol);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[serde(rename = "+")]
    Pos,
    #[serde(rename = "-")]
    Neg,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub example: String,
    pub table: usize,
    pub possibility: usize,
    pub z: Vec<usize>,
    pub target: String,
    pub sign: Sign,
}

/// A maximal ground rule for one target atom of one possibility.
#[derive(Clone, Debug, PartialEq)]
pub struct BottomRule {
    pub rule: Rule,
    pub origin: Origin,
}

fn polar(args: &[Term], d: &ModeDecl, p: Polarity) -> Vec<Key> {
    args.iter()
        .zip(&d.slots)
        .filter(|(_, s)| s.kind == SlotKind::Var && s.polarity == p)
        .map(|(t, s)| (t.clone(), s.ty.clone()))
        .collect()
}

fn var_keys(args: &[Term], d: &ModeDecl) -> Vec<Key> {
    args.iter()
        .zip(&d.slots)
        .filter(|(_, s)| s.kind == SlotKind::Var)
        .map(|(t, s)| (t.clone(), s.ty.clone()))
        .collect()
}

/// Ground head read through a head declaration.
#[derive(Clone, Debug)]
pub(crate) struct Target {
    pub atom: Atom,
    pub decl: usize,
    pub caps: Vec<Key>,
    pub rels: Vec<Key>,
}

impl Target {
    pub fn all(bias: &ModeBias, atom: &Atom) -> Vec<Target> {
        bias.heads
            .iter()
            .enumerate()
            .filter(|(_, d)| bias.compatible_ground(&Literal::pos(atom.clone()), d))
            .map(|(i, d)| Target {
                atom: atom.clone(),
                decl: i,
                caps: polar(&atom.args, d, Polarity::Capture),
                rels: polar(&atom.args, d, Polarity::Release),
            })
            .collect()
    }
}

/// A ground literal read through one body declaration.
#[derive(Clone, Debug)]
pub(crate) struct Instance {
    pub lit: Literal,
    pub decl: usize,
    pub caps: Vec<Key>,
    pub rels: Vec<Key>,
    pub vars: Vec<Key>,
}

impl Instance {
    fn new(lit: Literal, decl: usize, d: &ModeDecl) -> Self {
        Instance {
            caps: polar(&lit.atom.args, d, Polarity::Capture),
            rels: polar(&lit.atom.args, d, Polarity::Release),
            vars: var_keys(&lit.atom.args, d),
            lit,
            decl,
        }
    }
}

fn slot_values(bias: &ModeBias, d: &ModeDecl, released: &[Key], avail: &[Key]) -> Option<Vec<Vec<Term>>> {
    let mut out = Vec::with_capacity(d.slots.len());
    for s in &d.slots {
        let vals: Vec<Term> = match (s.kind, s.polarity) {
            (SlotKind::Const, _) => bias.types.get(&s.ty).map(|v| v.iter().cloned().collect()).unwrap_or_default(),
            (SlotKind::Var, Polarity::Release) => return None,
            (SlotKind::Var, Polarity::Capture) => {
                released.iter().filter(|(_, ty)| *ty == s.ty).map(|(t, _)| t.clone()).unique().collect()
            }
            (SlotKind::Var, Polarity::Neutral) => {
                avail.iter().filter(|(_, ty)| *ty == s.ty).map(|(t, _)| t.clone()).unique().collect()
            }
        };
        out.push(vals);
    }
    Some(out)
}

/// Literal instances whose captured constants are all in `released`.
/// Negative literals range over `avail` for their neutral slots.
pub(crate) fn extensions<F: Facts + ?Sized>(bias: &ModeBias, facts: &F, released: &[Key], avail: &[Key]) -> Vec<Instance> {
    let mut out = Vec::new();
    negative_extensions(bias, facts, released, avail, &mut out);
    positive_extensions(bias, facts, released, None, &mut out);
    out
}

fn negative_extensions<F: Facts + ?Sized>(
    bias: &ModeBias,
    facts: &F,
    released: &[Key],
    avail: &[Key],
    out: &mut Vec<Instance>,
) {
    for (di, d) in bias.bodies.iter().enumerate().filter(|(_, d)| d.negated) {
        let Some(values) = slot_values(bias, d, released, avail) else { continue };
        let combos: Vec<Vec<Term>> =
            if values.is_empty() { vec![Vec::new()] } else { values.into_iter().multi_cartesian_product().collect() };
        for args in combos {
            let atom = Atom { predicate: d.predicate.clone(), args };
            if facts.contains(&atom) {
                continue;
            }
            let lit = Literal::neg(atom);
            if bias.compatible_ground(&lit, d) {
                out.push(Instance::new(lit, di, d));
            }
        }
    }
}

/// Positive instances with all captures in `released`. With `fresh`, only
/// those capturing at least one of the fresh keys, each once.
fn positive_extensions<F: Facts + ?Sized>(
    bias: &ModeBias,
    facts: &F,
    released: &[Key],
    fresh: Option<&[Key]>,
    out: &mut Vec<Instance>,
) {
    for (di, d) in bias.bodies.iter().enumerate().filter(|(_, d)| !d.negated) {
        let cap_slots: Vec<usize> = (0..d.slots.len())
            .filter(|&j| d.slots[j].kind == SlotKind::Var && d.slots[j].polarity == Polarity::Capture)
            .collect();
        let start = out.len();
        let take = |a: &Atom, out: &mut Vec<Instance>| {
            let lit = Literal::pos(a.clone());
            if bias.compatible_ground(&lit, d) {
                let inst = Instance::new(lit, di, d);
                if inst.caps.iter().all(|k| released.contains(k)) {
                    out.push(inst);
                }
            }
        };
        match (cap_slots.first(), fresh) {
            (None, Some(_)) => {}
            (None, None) => {
                facts.visit(&d.predicate, d.arity(), None, &mut |a| {
                    take(a, out);
                    true
                });
            }
            (Some(&j), None) => {
                let ty = &d.slots[j].ty;
                let consts: Vec<&Term> = released.iter().filter(|(_, t)| t == ty).map(|(c, _)| c).unique().collect();
                for c in consts {
                    facts.visit(&d.predicate, d.arity(), Some((j, c)), &mut |a| {
                        take(a, out);
                        true
                    });
                }
            }
            (Some(_), Some(fresh)) => {
                for &j in &cap_slots {
                    let ty = &d.slots[j].ty;
                    for c in fresh.iter().filter(|(_, t)| t == ty).map(|(c, _)| c).unique() {
                        facts.visit(&d.predicate, d.arity(), Some((j, c)), &mut |a| {
                            take(a, out);
                            true
                        });
                    }
                }
                let mut seen = HashSet::new();
                let mut k = start;
                while k < out.len() {
                    if seen.insert(out[k].lit.clone()) {
                        k += 1;
                    } else {
                        out.swap_remove(k);
                    }
                }
            }
        }
    }
}

/// Enumerates every body (set of literal instances, at most `max` of them)
/// that can be built by adding one instance at a time whose captures are
/// released and whose releases are fresh.
pub(crate) struct Walker<'a, F: Facts + ?Sized> {
    bias: &'a ModeBias,
    facts: &'a F,
    max: usize,
    repeat: bool,
    pub arena: Vec<Instance>,
    index: FxHashMap<(Literal, usize), u32>,
    visited: FxHashSet<Vec<u32>>,
}

impl<'a, F: Facts + ?Sized> Walker<'a, F> {
    pub fn new(bias: &'a ModeBias, facts: &'a F, max: usize) -> Self {
        Walker { bias, facts, max, repeat: false, arena: Vec::new(), index: FxHashMap::default(), visited: FxHashSet::default() }
    }

    /// Also walks bodies that release the same constant more than once.
    pub fn allow_repeats(mut self, on: bool) -> Self {
        self.repeat = on;
        self
    }

    fn intern(&mut self, inst: Instance) -> u32 {
        let key = (inst.lit.clone(), inst.decl);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.arena.push(inst);
        let i = (self.arena.len() - 1) as u32;
        self.index.insert(key, i);
        i
    }

    /// Calls `emit(body, released)` once per distinct body.
    pub fn run(&mut self, released: Vec<Key>, avail: Vec<Key>, emit: &mut dyn FnMut(&[u32], &[Instance], &[Key])) {
        self.visited.clear();
        let (mut released, mut avail) = (released, avail);
        let next = extensions(self.bias, self.facts, &released, &avail);
        let next: Vec<u32> = next.into_iter().map(|i| self.intern(i)).collect();
        self.visited.insert(Vec::new());
        self.walk(&mut Vec::new(), &mut released, &mut avail, &next, emit);
    }

    /// `chosen` is sorted and not yet emitted. `next` holds the instances
    /// available at this node; positive ones are inherited by children, who
    /// add those enabled by their fresh releases.
    fn walk(
        &mut self,
        chosen: &mut Vec<u32>,
        released: &mut Vec<Key>,
        avail: &mut Vec<Key>,
        next: &[u32],
        emit: &mut dyn FnMut(&[u32], &[Instance], &[Key]),
    ) {
        emit(chosen, &self.arena, released);
        if chosen.len() >= self.max {
            return;
        }
        for &id in next {
            let inst = &self.arena[id as usize];
            let Err(pos) = chosen.binary_search(&id) else { continue };
            if !self.repeat
                && (inst.rels.iter().any(|k| released.contains(k)) || inst.rels.iter().duplicates().next().is_some())
            {
                continue;
            }
            chosen.insert(pos, id);
            if !self.visited.insert(chosen.clone()) {
                chosen.remove(pos);
                continue;
            }
            let (rm, am) = (released.len(), avail.len());
            released.extend(inst.rels.iter().cloned());
            avail.extend(inst.vars.iter().cloned());
            let mut child: Vec<u32> = Vec::new();
            if chosen.len() < self.max {
                let mut grown = Vec::new();
                negative_extensions(self.bias, self.facts, released, avail, &mut grown);
                positive_extensions(self.bias, self.facts, released, Some(&released[rm..]), &mut grown);
                child = next.iter().copied().filter(|&i| !self.arena[i as usize].lit.negated).collect();
                child.extend(grown.into_iter().map(|i| self.intern(i)));
                if self.repeat {
                    let mut seen = FxHashSet::default();
                    child.retain(|i| seen.insert(*i));
                }
            }
            self.walk(chosen, released, avail, &child, emit);
            chosen.remove(pos);
            released.truncate(rm);
            avail.truncate(am);
        }
    }
}

/// Names each distinct (constant, slot type) met in variable slots
/// `V1, V2, ...` in order of first occurrence.
#[derive(Clone, Default)]
pub(crate) struct Lifter {
    names: Vec<Key>,
    pub vars: Vec<Term>,
}

impl Lifter {
    pub fn atom(&mut self, a: &Atom, d: &ModeDecl) -> Atom {
        Atom {
            predicate: a.predicate.clone(),
            args: a
                .args
                .iter()
                .zip(&d.slots)
                .map(|(t, s)| {
                    if s.kind == SlotKind::Const {
                        return t.clone();
                    }
                    let key = (t.clone(), s.ty.clone());
                    let i = self.names.iter().position(|k| *k == key).unwrap_or_else(|| {
                        self.names.push(key);
                        self.names.len() - 1
                    });
                    while self.vars.len() <= i {
                        self.vars.push(Term::var(&format!("V{}", self.vars.len() + 1)));
                    }
                    self.vars[i].clone()
                })
                .collect(),
        }
    }

    pub fn body(&mut self, body: &[(&Literal, &ModeDecl)]) -> Vec<Literal> {
        let mut lits: Vec<Literal> =
            body.iter().map(|(l, d)| Literal { negated: l.negated, atom: self.atom(&l.atom, d) }).collect();
        lits.dedup();
        lits
    }
}

/// Replaces every variable-slot constant by a variable, one per distinct
/// (constant, slot type), named in order of first occurrence.
pub(crate) fn lift(head: &Atom, head_decl: &ModeDecl, body: &[(&Literal, &ModeDecl)]) -> Rule {
    let mut l = Lifter::default();
    let h = l.atom(head, head_decl);
    Rule::new(Some(h), l.body(body))
}

/// Liftings with one variable per released occurrence. Captured and
/// neutral occurrences link to a variable released with the same constant,
/// in every possible way; those with none share one variable per constant.
pub(crate) fn lift_split(head: &Atom, head_decl: &ModeDecl, body: &[(&Literal, &ModeDecl)]) -> Vec<Rule> {
    let atoms: Vec<(&Atom, &ModeDecl)> =
        std::iter::once((head, head_decl)).chain(body.iter().map(|(l, d)| (&l.atom, *d))).collect();
    let mut n = 0;
    let mut fresh = || {
        n += 1;
        Term::var(&format!("V{n}"))
    };
    let mut released: FxHashMap<Key, Vec<Term>> = FxHashMap::default();
    // Per atom and slot: a fixed term, or a key to link.
    let mut slots: Vec<Vec<Result<Term, Key>>> = Vec::with_capacity(atoms.len());
    for (a, d) in &atoms {
        let mut row = Vec::with_capacity(a.args.len());
        for (t, s) in a.args.iter().zip(&d.slots) {
            if s.kind == SlotKind::Const {
                row.push(Ok(t.clone()));
            } else if s.polarity == Polarity::Release {
                let v = fresh();
                released.entry((t.clone(), s.ty.clone())).or_default().push(v.clone());
                row.push(Ok(v));
            } else {
                row.push(Err((t.clone(), s.ty.clone())));
            }
        }
        slots.push(row);
    }
    let mut shared: FxHashMap<Key, Term> = FxHashMap::default();
    let choices: Vec<Vec<Term>> = slots
        .iter()
        .flatten()
        .filter_map(|x| x.as_ref().err())
        .map(|k| match released.get(k) {
            Some(vs) => vs.clone(),
            None => vec![shared.entry(k.clone()).or_insert_with(&mut fresh).clone()],
        })
        .collect();
    let combos: Vec<Vec<Term>> =
        if choices.is_empty() { vec![Vec::new()] } else { choices.into_iter().multi_cartesian_product().collect() };
    combos
        .into_iter()
        .map(|pick| {
            let mut pick = pick.into_iter();
            let mut lifted = atoms.iter().zip(&slots).map(|((a, _), row)| Atom {
                predicate: a.predicate.clone(),
                args: row.iter().map(|x| x.clone().unwrap_or_else(|_| pick.next().unwrap())).collect(),
            });
            let h = lifted.next().unwrap();
            let mut lits: Vec<Literal> =
                lifted.zip(body).map(|(atom, (l, _))| Literal { negated: l.negated, atom }).collect();
            lits.dedup();
            Rule::new(Some(h), lits)
        })
        .collect()
}

pub(crate) fn constants(atoms: impl IntoIterator<Item = Atom>) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for a in atoms {
        for t in a.args {
            if matches!(t, Term::Int(_) | Term::Sym(_)) {
                out.insert(t);
            }
        }
    }
    out
}

/// Every ground literal compatible with a body declaration and true in
/// `facts`. Negative literals range over `universe` for variable slots.
pub(crate) fn maximal_body<F: Facts + ?Sized>(bias: &ModeBias, facts: &F, universe: &BTreeSet<Term>) -> Vec<Literal> {
    let mut out: BTreeSet<Literal> = BTreeSet::new();
    for d in &bias.bodies {
        if d.negated {
            let values: Vec<Vec<Term>> = d
                .slots
                .iter()
                .map(|s| match s.kind {
                    SlotKind::Const => bias.types.get(&s.ty).map(|v| v.iter().cloned().collect()).unwrap_or_default(),
                    SlotKind::Var => universe.iter().cloned().collect(),
                })
                .collect();
            let combos: Vec<Vec<Term>> =
                if values.is_empty() { vec![Vec::new()] } else { values.into_iter().multi_cartesian_product().collect() };
            for args in combos {
                let atom = Atom { predicate: d.predicate.clone(), args };
                let lit = Literal::neg(atom);
                if !facts.contains(&lit.atom) && bias.compatible_ground(&lit, d) {
                    out.insert(lit);
                }
            }
        } else {
            facts.visit(&d.predicate, d.arity(), None, &mut |a| {
                let lit = Literal::pos(a.clone());
                if bias.compatible_ground(&lit, d) {
                    out.insert(lit);
                }
                true
            });
        }
    }
    out.into_iter().collect()
}

/// Lifts a bottom rule. Only the literals reachable from the head through
/// released constants within `max_body` steps are kept, since no conforming
/// subrule can contain the others. Returns one rule per compatible head
/// declaration whose captures can be released.
pub(crate) fn lift_bottom(bias: &ModeBias, rule: &Rule) -> Vec<Rule> {
    let Some(head) = &rule.head else { return Vec::new() };
    let mut instances: Vec<Instance> = Vec::new();
    for l in &rule.body {
        for (i, d) in bias.bodies.iter().enumerate() {
            if bias.compatible_ground(l, d) {
                instances.push(Instance::new(l.clone(), i, d));
            }
        }
    }
    let mut out = Vec::new();
    for t in Target::all(bias, head) {
        let mut released: Vec<Key> = t.rels.clone();
        let mut avail: Vec<Key> = var_keys(&head.args, &bias.heads[t.decl]);
        let mut taken = vec![false; instances.len()];
        for _ in 0..bias.max_body {
            let layer: Vec<usize> = (0..instances.len())
                .filter(|&i| !taken[i] && instances[i].caps.iter().all(|k| released.contains(k)))
                .filter(|&i| !instances[i].lit.negated || instances[i].vars.iter().all(|k| avail.contains(k) || released.contains(k)))
                .collect();
            if layer.is_empty() {
                break;
            }
            for i in layer {
                taken[i] = true;
                released.extend(instances[i].rels.iter().cloned());
                avail.extend(instances[i].vars.iter().cloned());
            }
        }
        if !t.caps.iter().all(|k| released.contains(k)) {
            continue;
        }
        let body: Vec<(&Literal, &ModeDecl)> = instances
            .iter()
            .zip(&taken)
            .filter(|(_, &k)| k)
            .map(|(inst, _)| (&inst.lit, &bias.bodies[inst.decl]))
            .collect();
        out.push(lift(head, &bias.heads[t.decl], &body));
    }
    out
}
