//! Answer-set enumeration for ground non-recursive programs.
//!
//! Atoms are stratified by the topological rank of their predicate. The
//! search walks the strata in order: choice rules branch when their earliest
//! element stratum is reached, normal rules are evaluated in a single pass
//! (their bodies only mention lower strata) and constraints and cardinality
//! bounds are checked as soon as every atom they mention is final.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::deps::predicate_order;
use super::ground::ground;
use super::matching::{all_matches, Database};
use super::syntax::*;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Body {
    pos: Vec<u32>,
    neg: Vec<u32>,
}

impl Body {
    fn holds(&self, interp: &[bool]) -> bool {
        self.pos.iter().all(|&a| interp[a as usize]) && self.neg.iter().all(|&a| !interp[a as usize])
    }
}

#[derive(Clone, Debug)]
struct Choice {
    lower: usize,
    upper: usize,
    elems: Vec<u32>,
    body: Body,
    exclusive: bool,
}

#[derive(Clone, Debug)]
struct Weak {
    body: Body,
    weight: i64,
    level: i64,
    terms: Vec<Term>,
}

/// A ground program compiled to integer atom ids.
#[derive(Clone, Debug)]
pub struct Compiled {
    atoms: Vec<Atom>,
    index: HashMap<Atom, u32>,
    rules_at: Vec<Vec<(u32, Body)>>,
    constraints_at: Vec<Vec<Body>>,
    open_at: Vec<Vec<usize>>,
    bounds_at: Vec<Vec<usize>>,
    choices: Vec<Choice>,
    weaks: Vec<Weak>,
    always_false: bool,
    needs_dedup: bool,
}

impl Compiled {
    /// Compiles a ground program. Non-ground input is grounded first.
    pub fn new(prog: &Program) -> Result<Self> {
        if !prog.is_ground() {
            return Compiled::new(&ground(prog)?);
        }
        let order = predicate_order(prog)?;
        let rank: HashMap<PredKey, usize> = order.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let n_strata = order.len().max(1);
        let mut it = Interner::default();
        // Head occurrences per atom; atoms defined more than once are not
        // exclusive to a single choice rule.
        let mut occurrences: HashMap<u32, usize> = HashMap::new();
        let mut rules_at = vec![Vec::new(); n_strata];
        let mut raw_constraints = Vec::new();
        for r in &prog.rules {
            let b = it.body(&r.body);
            match &r.head {
                Some(h) => {
                    let hid = it.id(h);
                    *occurrences.entry(hid).or_default() += 1;
                    rules_at[rank[&h.key()]].push((hid, b));
                }
                None => raw_constraints.push(b),
            }
        }
        let mut raw_choices = Vec::new();
        for c in &prog.choices {
            let b = it.body(&c.body);
            let mut elems: Vec<(u32, usize)> = Vec::new();
            for e in &c.elements {
                let eid = it.id(e);
                if !elems.iter().any(|(x, _)| *x == eid) {
                    *occurrences.entry(eid).or_default() += 1;
                    elems.push((eid, rank[&e.key()]));
                }
            }
            raw_choices.push((c.lower as usize, c.upper.map(|u| u as usize), elems, b));
        }
        let mut weaks = Vec::new();
        for w in &prog.weaks {
            let b = it.body(&w.body);
            let weight = w.weight.as_int().ok_or_else(|| Error::Config(format!("non-integer weight in `{w}`")))?;
            let level = w.level.as_int().ok_or_else(|| Error::Config(format!("non-integer level in `{w}`")))?;
            weaks.push(Weak { body: b, weight, level, terms: w.terms.clone() });
        }
        let Interner { atoms, index } = it;
        let stratum_of = |b: &Body| b.pos.iter().chain(&b.neg).map(|&a| rank[&atoms[a as usize].key()]).max();
        let mut constraints_at = vec![Vec::new(); n_strata];
        let mut always_false = false;
        for b in raw_constraints {
            match stratum_of(&b) {
                Some(s) => constraints_at[s].push(b),
                None => always_false = true,
            }
        }
        let mut open_at = vec![Vec::new(); n_strata];
        let mut bounds_at = vec![Vec::new(); n_strata];
        let mut choices = Vec::new();
        let mut needs_dedup = false;
        for (lower, upper, elems, b) in raw_choices {
            let k = elems.len();
            let exclusive = elems.iter().all(|(e, _)| occurrences[e] == 1);
            needs_dedup |= !exclusive;
            let idx = choices.len();
            if let Some(open) = elems.iter().map(|(_, s)| *s).min() {
                open_at[open].push(idx);
                let close = elems.iter().map(|(_, s)| *s).max().expect("nonempty");
                bounds_at[close].push(idx);
            } else if lower > 0 {
                // An empty choice with a positive lower bound acts as a constraint.
                match stratum_of(&b) {
                    Some(s) => constraints_at[s].push(b.clone()),
                    None => always_false = true,
                }
            }
            choices.push(Choice {
                lower,
                upper: upper.unwrap_or(k).min(k),
                elems: elems.into_iter().map(|(e, _)| e).collect(),
                body: b,
                exclusive,
            });
        }
        Ok(Compiled {
            atoms,
            index,
            rules_at,
            constraints_at,
            open_at,
            bounds_at,
            choices,
            weaks,
            always_false,
            needs_dedup,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom_id(&self, a: &Atom) -> Option<u32> {
        self.index.get(a).copied()
    }

    /// Calls `f` with the sorted atom ids of every answer set, once each.
    pub fn for_each_answer_set(&self, f: &mut dyn FnMut(&[u32])) {
        if self.always_false {
            return;
        }
        let mut interp = vec![false; self.atoms.len()];
        let mut active = vec![false; self.choices.len()];
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let mut emit = |interp: &[bool]| {
            let ids: Vec<u32> = (0..interp.len() as u32).filter(|&i| interp[i as usize]).collect();
            if !self.needs_dedup || seen.insert(ids.clone()) {
                f(&ids);
            }
        };
        self.stratum(0, &mut interp, &mut active, &mut emit);
    }

    fn stratum(&self, s: usize, interp: &mut Vec<bool>, active: &mut Vec<bool>, emit: &mut dyn FnMut(&[bool])) {
        if s == self.rules_at.len() {
            emit(interp);
            return;
        }
        self.open_choice(s, 0, interp, active, emit);
    }

    fn open_choice(
        &self,
        s: usize,
        k: usize,
        interp: &mut Vec<bool>,
        active: &mut Vec<bool>,
        emit: &mut dyn FnMut(&[bool]),
    ) {
        if k == self.open_at[s].len() {
            self.close_stratum(s, interp, active, emit);
            return;
        }
        let ci = self.open_at[s][k];
        let c = &self.choices[ci];
        if !c.body.holds(interp) {
            active[ci] = false;
            self.open_choice(s, k + 1, interp, active, emit);
            return;
        }
        active[ci] = true;
        let free: Vec<u32> = c.elems.iter().copied().filter(|&e| !interp[e as usize]).collect();
        let already = c.elems.len() - free.len();
        if already > c.upper {
            return;
        }
        let min_size = if c.exclusive { c.lower.saturating_sub(already) } else { 0 };
        let max_size = (c.upper - already).min(free.len());
        for size in min_size..=max_size {
            for subset in free.iter().combinations(size) {
                let mut next = interp.clone();
                for &&e in &subset {
                    next[e as usize] = true;
                }
                self.open_choice(s, k + 1, &mut next, active, emit);
            }
        }
    }

    fn close_stratum(&self, s: usize, interp: &mut Vec<bool>, active: &mut Vec<bool>, emit: &mut dyn FnMut(&[bool])) {
        for (h, b) in &self.rules_at[s] {
            if !interp[*h as usize] && b.holds(interp) {
                interp[*h as usize] = true;
            }
        }
        if self.constraints_at[s].iter().any(|b| b.holds(interp)) {
            return;
        }
        for &ci in &self.bounds_at[s] {
            if active[ci] {
                let c = &self.choices[ci];
                let n = c.elems.iter().filter(|&&e| interp[e as usize]).count();
                if n < c.lower || n > c.upper {
                    return;
                }
            }
        }
        self.stratum(s + 1, interp, active, emit);
    }

    /// Cost of an answer set given as sorted atom ids.
    pub fn cost(&self, ids: &[u32]) -> Cost {
        let mut interp = vec![false; self.atoms.len()];
        for &i in ids {
            interp[i as usize] = true;
        }
        let mut tuples = HashSet::new();
        for w in &self.weaks {
            if w.body.holds(&interp) {
                tuples.insert((w.weight, w.level, w.terms.clone()));
            }
        }
        let mut cost = Cost::default();
        for (weight, level, _) in tuples {
            *cost.0.entry(level).or_insert(0) += weight;
        }
        cost
    }

    pub fn interpretation(&self, ids: &[u32]) -> Interpretation {
        ids.iter().map(|&i| self.atoms[i as usize].clone()).collect()
    }
}

#[derive(Default)]
struct Interner {
    atoms: Vec<Atom>,
    index: HashMap<Atom, u32>,
}

impl Interner {
    fn id(&mut self, a: &Atom) -> u32 {
        if let Some(&i) = self.index.get(a) {
            return i;
        }
        let i = self.atoms.len() as u32;
        self.atoms.push(a.clone());
        self.index.insert(a.clone(), i);
        i
    }

    fn body(&mut self, lits: &[Literal]) -> Body {
        Body {
            pos: lits.iter().filter(|l| !l.negated).map(|l| self.id(&l.atom)).collect(),
            neg: lits.iter().filter(|l| l.negated).map(|l| self.id(&l.atom)).collect(),
        }
    }
}

/// Weak-constraint cost per priority level.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cost(pub BTreeMap<i64, i64>);

impl Cost {
    pub fn at(&self, level: i64) -> i64 {
        self.0.get(&level).copied().unwrap_or(0)
    }
}

impl Ord for Cost {
    /// Compares from the highest priority level down.
    fn cmp(&self, other: &Self) -> Ordering {
        let levels: BTreeSet<i64> = self.0.keys().chain(other.0.keys()).copied().collect();
        for l in levels.into_iter().rev() {
            match self.at(l).cmp(&other.at(l)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All answer sets in canonical order.
pub fn answer_sets(prog: &Program) -> Result<Vec<Interpretation>> {
    let c = Compiled::new(prog)?;
    let mut out = Vec::new();
    c.for_each_answer_set(&mut |ids| out.push(c.interpretation(ids)));
    out.sort();
    Ok(out)
}

/// Minimal cost and every answer set attaining it. No answer sets gives an
/// empty list.
pub fn optimal_answer_sets(prog: &Program) -> Result<(Cost, Vec<Interpretation>)> {
    let c = Compiled::new(prog)?;
    let mut best: Option<Cost> = None;
    let mut sets = Vec::new();
    c.for_each_answer_set(&mut |ids| {
        let cost = c.cost(ids);
        match best.as_ref().map(|b| cost.cmp(b)) {
            Some(Ordering::Greater) => {}
            Some(Ordering::Equal) => sets.push(c.interpretation(ids)),
            _ => {
                best = Some(cost);
                sets = vec![c.interpretation(ids)];
            }
        }
    });
    sets.sort();
    Ok((best.unwrap_or_default(), sets))
}

/// Minimum per key. Empty groups are an error.
pub fn min_aggregate_eval<K: Ord + Clone + std::fmt::Debug>(
    groups: &BTreeMap<K, BTreeSet<i64>>,
) -> Result<BTreeMap<K, i64>> {
    groups
        .iter()
        .map(|(k, vs)| match vs.iter().next() {
            Some(&m) => Ok((k.clone(), m)),
            None => Err(Error::EmptyMin { key: format!("{k:?}") }),
        })
        .collect()
}

impl MinRule {
    /// Head atoms derived by this rule in the interpretation. Keys whose
    /// condition set is empty are an error.
    pub fn evaluate(&self, interp: &Interpretation) -> Result<Vec<Atom>> {
        let db = Database::from_atoms(interp.iter());
        let mut groups: BTreeMap<Vec<Term>, BTreeSet<i64>> = BTreeMap::new();
        let mut outer_vars = Vec::new();
        self.body.iter().for_each(|l| l.atom.collect_vars(&mut outer_vars));
        let outer = all_matches(&self.body, &db);
        for b in &outer {
            let key: Vec<Term> = outer_vars.iter().map(|v| b.apply(&Term::Var(v.clone()))).collect();
            let entry = groups.entry(key).or_default();
            let cond: Vec<Literal> = self
                .condition
                .iter()
                .map(|l| Literal { negated: l.negated, atom: b.apply_atom(&l.atom) })
                .collect();
            for inner in all_matches(&cond, &db) {
                match inner.apply(&b.apply(&self.value)) {
                    Term::Int(v) => {
                        entry.insert(v);
                    }
                    t => return Err(Error::Config(format!("#min over non-integer value {t}"))),
                }
            }
        }
        let mins = min_aggregate_eval(&groups)?;
        let mut out = Vec::new();
        for b in outer {
            let key: Vec<Term> = outer_vars.iter().map(|v| b.apply(&Term::Var(v.clone()))).collect();
            let mut b = b.clone();
            b.bind(self.result.clone(), Term::Int(mins[&key]));
            out.push(b.apply_atom(&self.head));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}
