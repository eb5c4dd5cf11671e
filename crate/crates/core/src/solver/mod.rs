//! Optimal hypothesis under the trained network: length prior plus the best
//! covered latent assignment per example.

pub mod psolve;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abduction::Abduction;
use crate::asp::syntax::Atom;
use crate::error::{Error, Result};
use crate::synthesis::{OptSufficientSpace, Synthesis};

pub use psolve::{emit_psolve, run_clingo, solve_psolve_internal, ExternalResult, PsolveResult, PSOLVE_SCALE};

/// Lower clamp on probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-9;

/// (e − 1)·e^{−|H|}.
pub fn prior(h_len: usize) -> f64 {
    (std::f64::consts::E - 1.0) * (-(h_len as f64)).exp()
}

/// −ln max(p, ε).
pub fn penalty(p: f64) -> f64 {
    -p.max(PROB_EPS).ln()
}

/// e^k / (1 + e^k) with k = |E|·|H*|.
pub fn almost_perfect_threshold(examples: usize, h_star_len: usize) -> f64 {
    let k = (examples * h_star_len) as f64;
    1.0 / (1.0 + (-k).exp())
}

/// Whether every raw input's gold latent has probability at least the
/// almost-perfect threshold.
pub fn verify_almost_perfect(gold_probs: &[Option<f64>], examples: usize, h_star_len: usize) -> Result<bool> {
    let t = almost_perfect_threshold(examples, h_star_len);
    let mut ok = true;
    for p in gold_probs {
        match p {
            Some(p) => ok &= *p >= t,
            None => return Err(Error::Data("gold latents are missing".into())),
        }
    }
    Ok(ok)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveRule {
    pub id: usize,
    pub text: String,
    pub length: usize,
    /// (table, possibility, relevant atom) triples the rule derives.
    pub derived: Vec<(u32, u32, u32)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTable {
    pub atoms: Vec<Atom>,
    /// Relevant atom ids true in each possibility.
    pub present: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveGroup {
    pub z: Vec<usize>,
    pub z_id: usize,
    pub possibilities: Vec<usize>,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveExample {
    pub id: String,
    pub table: usize,
    pub inclusions: Vec<u32>,
    pub exclusions: Vec<u32>,
    pub groups: Vec<SolveGroup>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveInstance {
    pub rules: Vec<SolveRule>,
    pub tables: Vec<SolveTable>,
    pub examples: Vec<SolveExample>,
}

impl SolveInstance {
    /// `penalties[e][g]` is −log P_θ(z | x) of group g of example e.
    pub fn new(syn: &Synthesis, space: &OptSufficientSpace, penalties: &[Vec<f64>]) -> Result<Self> {
        let abd = syn.abduction;
        if penalties.len() != abd.examples.len() {
            return Err(Error::Config(format!("{} penalty rows for {} examples", penalties.len(), abd.examples.len())));
        }
        let layout = &space.layout;
        let tables = layout
            .tables
            .iter()
            .enumerate()
            .map(|(t, tl)| {
                let present = (0..tl.possibilities)
                    .map(|q| {
                        let a = abd.tables[t].answer_set(q);
                        (0..tl.atoms.len() as u32).filter(|&i| a.contains(&tl.atoms[i as usize])).collect()
                    })
                    .collect();
                SolveTable { atoms: tl.atoms.clone(), present }
            })
            .collect();
        let rules = space
            .rules
            .iter()
            .zip(&space.signatures)
            .map(|(r, s)| {
                let mut derived = Vec::with_capacity(s.bits.len());
                for (t, tl) in layout.tables.iter().enumerate() {
                    for q in 0..tl.possibilities {
                        derived.extend(layout.derived(s, t, q).map(|a| (t as u32, q as u32, a)));
                    }
                }
                SolveRule { id: r.id, text: r.text.clone(), length: r.length(), derived }
            })
            .collect();
        let mut examples = Vec::with_capacity(abd.examples.len());
        for (e, (ex, ep)) in syn.task.examples.iter().zip(&abd.examples).enumerate() {
            let tl = &layout.tables[ep.table];
            let ids = |atoms: &[Atom]| -> Vec<u32> {
                let mut v: Vec<u32> = atoms.iter().filter_map(|a| tl.atom_id(a)).collect();
                v.sort_unstable();
                v.dedup();
                v
            };
            if penalties[e].len() != ep.groups.len() {
                return Err(Error::Config(format!("example {}: {} penalties for {} groups", ex.id, penalties[e].len(), ep.groups.len())));
            }
            if let Some(p) = penalties[e].iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::Config(format!("example {}: invalid penalty {p}", ex.id)));
            }
            examples.push(SolveExample {
                id: ex.id.clone(),
                table: ep.table,
                inclusions: ids(&ex.inclusions),
                exclusions: ids(&ex.exclusions),
                groups: ep
                    .groups
                    .iter()
                    .zip(&penalties[e])
                    .map(|(g, &p)| SolveGroup { z: g.z.clone(), z_id: g.z_id, possibilities: g.possibilities.clone(), penalty: p })
                    .collect(),
            });
        }
        Ok(SolveInstance { rules, tables, examples })
    }

    pub fn rule_index(&self, id: usize) -> Option<usize> {
        self.rules.iter().position(|r| r.id == id)
    }
}

/// Group penalties from per-position probability vectors:
/// −ln max(Π_j p_j(z_j), ε).
pub fn penalties_from_probs(abd: &Abduction, probs: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    abd.examples
        .iter()
        .zip(probs)
        .map(|(ep, pe)| {
            ep.groups.iter().map(|g| penalty(g.z.iter().zip(pe).map(|(&k, p)| p[k]).product())).collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chosen {
    pub example: String,
    pub z: Vec<usize>,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Space rule ids, ascending.
    pub rules: Vec<usize>,
    /// Rule texts, sorted.
    pub texts: Vec<String>,
    pub length: usize,
    /// |E|·|H| + Σ_e chosen penalty.
    pub objective: f64,
    pub chosen: Vec<Chosen>,
    /// Hypotheses seen with the optimal objective.
    pub ties: usize,
    pub nodes: u64,
}

/// Bitset view of an instance used by the search.
pub struct Evaluator<'a> {
    inst: &'a SolveInstance,
    /// Word offset of each table's first possibility, and words per
    /// possibility.
    base: Vec<usize>,
    words: Vec<usize>,
    total: usize,
    present: Vec<u64>,
    contrib: Vec<Vec<(usize, u64)>>,
    classes: Vec<Class>,
    /// Per example, group indices by ascending penalty.
    order: Vec<Vec<usize>>,
}

struct Class {
    table: usize,
    inc: Vec<u64>,
    exc: Vec<u64>,
    examples: Vec<usize>,
    /// Possibilities that already contain an exclusion.
    blocked: Vec<bool>,
    /// Possibility list per group, shared by the class's examples.
    groups: Vec<Vec<usize>>,
}

fn mask(ids: &[u32], w: usize) -> Vec<u64> {
    let mut m = vec![0u64; w];
    for &i in ids {
        m[i as usize / 64] |= 1 << (i % 64);
    }
    m
}

impl<'a> Evaluator<'a> {
    pub fn new(inst: &'a SolveInstance) -> Self {
        let mut base = Vec::new();
        let mut words = Vec::new();
        let mut total = 0;
        for t in &inst.tables {
            let w = t.atoms.len().div_ceil(64).max(1);
            base.push(total);
            words.push(w);
            total += w * t.present.len();
        }
        let mut present = vec![0u64; total];
        for (t, tab) in inst.tables.iter().enumerate() {
            for (q, ids) in tab.present.iter().enumerate() {
                let m = mask(ids, words[t]);
                let o = base[t] + q * words[t];
                present[o..o + words[t]].copy_from_slice(&m);
            }
        }
        let contrib = inst
            .rules
            .iter()
            .map(|r| {
                let mut acc: BTreeMap<usize, u64> = BTreeMap::new();
                for &(t, q, a) in &r.derived {
                    let (t, q) = (t as usize, q as usize);
                    *acc.entry(base[t] + q * words[t] + a as usize / 64).or_default() |= 1 << (a % 64);
                }
                acc.into_iter().collect()
            })
            .collect();
        let mut by_key: BTreeMap<(usize, &[u32], &[u32]), usize> = BTreeMap::new();
        let mut classes: Vec<Class> = Vec::new();
        for (e, ex) in inst.examples.iter().enumerate() {
            let key = (ex.table, ex.inclusions.as_slice(), ex.exclusions.as_slice());
            let groups: Vec<Vec<usize>> = ex.groups.iter().map(|g| g.possibilities.clone()).collect();
            match by_key.get(&key) {
                Some(&c) if classes[c].groups == groups => classes[c].examples.push(e),
                _ => {
                    let t = ex.table;
                    let w = words[t];
                    let exc = mask(&ex.exclusions, w);
                    let blocked = (0..inst.tables[t].present.len())
                        .map(|q| {
                            let o = base[t] + q * w;
                            (0..w).any(|i| present[o + i] & exc[i] != 0)
                        })
                        .collect();
                    by_key.insert(key, classes.len());
                    classes.push(Class { table: t, inc: mask(&ex.inclusions, w), exc, examples: vec![e], blocked, groups });
                }
            }
        }
        let order = inst
            .examples
            .iter()
            .map(|ex| {
                let mut o: Vec<usize> = (0..ex.groups.len()).collect();
                o.sort_by(|&a, &b| ex.groups[a].penalty.total_cmp(&ex.groups[b].penalty).then(a.cmp(&b)));
                o
            })
            .collect();
        Evaluator { inst, base, words, total, present, contrib, classes, order }
    }

    pub fn empty_state(&self) -> Vec<u64> {
        vec![0; self.total]
    }

    pub fn add_rule(&self, state: &mut [u64], r: usize) {
        for &(i, b) in &self.contrib[r] {
            state[i] |= b;
        }
    }

    fn q_status(&self, c: &Class, state: &[u64], q: usize) -> (bool, bool) {
        if c.blocked[q] {
            return (false, false);
        }
        let w = self.words[c.table];
        let o = self.base[c.table] + q * w;
        let mut alive = true;
        let mut ok = true;
        for i in 0..w {
            let d = state[o + i];
            if d & c.exc[i] != 0 {
                alive = false;
                ok = false;
                break;
            }
            if c.inc[i] & !self.present[o + i] & !d != 0 {
                ok = false;
            }
        }
        (alive, ok)
    }

    /// False when some example has no group that can still be accepted by
    /// adding rules (exclusions only accumulate).
    pub fn viable(&self, state: &[u64]) -> bool {
        self.classes.iter().all(|c| c.groups.iter().any(|ps| ps.iter().any(|&q| self.q_status(c, state, q).0)))
    }

    /// Per example, the accepted group of least penalty; `None` when some
    /// example is not covered.
    pub fn choose(&self, state: &[u64]) -> Option<Vec<usize>> {
        let mut out = vec![0; self.inst.examples.len()];
        for c in &self.classes {
            let acc: Vec<bool> =
                c.groups.iter().map(|ps| ps.iter().any(|&q| self.q_status(c, state, q).1)).collect();
            for &e in &c.examples {
                out[e] = *self.order[e].iter().find(|&&g| acc[g])?;
            }
        }
        Some(out)
    }

    /// Objective of the hypothesis given by instance rule indices.
    pub fn evaluate(&self, rules: &[usize]) -> Option<(f64, Vec<usize>)> {
        let mut s = self.empty_state();
        for &r in rules {
            self.add_rule(&mut s, r);
        }
        let len: usize = rules.iter().map(|&r| self.inst.rules[r].length).sum();
        let chosen = self.choose(&s)?;
        Some((self.objective(len, &chosen), chosen))
    }

    fn objective(&self, len: usize, chosen: &[usize]) -> f64 {
        let pen: f64 = chosen.iter().enumerate().map(|(e, &g)| self.inst.examples[e].groups[g].penalty).sum();
        (self.inst.examples.len() * len) as f64 + pen
    }

    /// Σ_e min_z penalty.
    pub fn penalty_floor(&self) -> f64 {
        self.inst
            .examples
            .iter()
            .enumerate()
            .map(|(e, ex)| self.order[e].first().map_or(0.0, |&g| ex.groups[g].penalty))
            .sum()
    }

    /// Examples that no set of rules can cover on its own.
    pub fn uncoverable(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.classes {
            let ok = c.groups.iter().flatten().any(|&q| {
                if c.blocked[q] {
                    return false;
                }
                let mut s = self.empty_state();
                for r in 0..self.inst.rules.len() {
                    let mut one = self.empty_state();
                    self.add_rule(&mut one, r);
                    if self.q_status(c, &one, q).0 {
                        self.add_rule(&mut s, r);
                    }
                }
                self.q_status(c, &s, q).1
            });
            if !ok {
                out.extend(c.examples.iter().map(|&e| self.inst.examples[e].id.clone()));
            }
        }
        out
    }
}

#[derive(Clone)]
struct Candidate {
    objective: f64,
    texts: Vec<String>,
    ids: Vec<usize>,
    rules: Vec<usize>,
    chosen: Vec<usize>,
    ties: usize,
}

impl Candidate {
    fn cmp_key(&self, o: &Candidate) -> Ordering {
        self.objective.total_cmp(&o.objective).then_with(|| self.texts.cmp(&o.texts)).then_with(|| self.ids.cmp(&o.ids))
    }
}

fn merge(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            let ties = if a.objective == b.objective { a.ties + b.ties } else if a.objective < b.objective { a.ties } else { b.ties };
            let mut best = if a.cmp_key(&b) == Ordering::Greater { b } else { a };
            best.ties = ties;
            Some(best)
        }
    }
}

struct Search<'a> {
    ev: &'a Evaluator<'a>,
    inst: &'a SolveInstance,
    /// Instance rule indices considered, sorted by (length, text).
    order: Vec<usize>,
}

impl Search<'_> {
    fn leaf(&self, picked: &[usize], len: usize, state: &[u64]) -> Option<Candidate> {
        let chosen = self.ev.choose(state)?;
        let mut ids: Vec<usize> = picked.iter().map(|&r| self.inst.rules[r].id).collect();
        ids.sort_unstable();
        let mut texts: Vec<String> = picked.iter().map(|&r| self.inst.rules[r].text.clone()).collect();
        texts.sort();
        Some(Candidate { objective: self.ev.objective(len, &chosen), texts, ids, rules: picked.to_vec(), chosen, ties: 1 })
    }

    /// Best subset of `order[start..]` extending `picked` with total length
    /// exactly `target`.
    fn dfs(&self, start: usize, picked: &mut Vec<usize>, len: usize, state: &[u64], target: usize, nodes: &mut u64) -> Option<Candidate> {
        *nodes += 1;
        if len == target {
            return self.leaf(picked, len, state);
        }
        let mut best = None;
        for i in start..self.order.len() {
            let r = self.order[i];
            let l = self.inst.rules[r].length;
            if len + l > target {
                break;
            }
            let mut s = state.to_vec();
            self.ev.add_rule(&mut s, r);
            if !self.ev.viable(&s) {
                continue;
            }
            picked.push(r);
            best = merge(best, self.dfs(i + 1, picked, len + l, &s, target, nodes));
            picked.pop();
        }
        best
    }

    fn level(&self, target: usize) -> (Option<Candidate>, u64) {
        let root = self.ev.empty_state();
        if target == 0 {
            let mut n = 0;
            return (self.dfs(0, &mut Vec::new(), 0, &root, 0, &mut n), n);
        }
        let parts: Vec<(Option<Candidate>, u64)> = (0..self.order.len())
            .into_par_iter()
            .map(|i| {
                let r = self.order[i];
                let l = self.inst.rules[r].length;
                let mut n = 0;
                if l > target {
                    return (None, 0);
                }
                let mut s = root.clone();
                self.ev.add_rule(&mut s, r);
                if !self.ev.viable(&s) {
                    return (None, 1);
                }
                (self.dfs(i + 1, &mut vec![r], l, &s, target, &mut n), n)
            })
            .collect();
        parts.into_iter().fold((None, 1), |(b, n), (c, m)| (merge(b, c), n + m))
    }
}

/// Exact minimiser of |E|·|H| + Σ_e min_{z ∈ cov(H,e)} −log P_θ(z | x).
/// Levels of increasing total length are searched exhaustively until the
/// bound |E|·L + Σ_e min_z penalty exceeds the incumbent.
pub fn solve_native(inst: &SolveInstance) -> Result<Solution> {
    let ev = Evaluator::new(inst);
    let uncovered = ev.uncoverable();
    if !uncovered.is_empty() {
        return Err(Error::Unsatisfiable { uncovered });
    }
    // Rules deriving nothing only add length; of rules with equal
    // derivations only the shortest, then smallest text, can be optimal.
    let mut keep: BTreeMap<&Vec<(usize, u64)>, usize> = BTreeMap::new();
    for (r, c) in ev.contrib.iter().enumerate() {
        if c.is_empty() {
            continue;
        }
        let cand = &inst.rules[r];
        keep.entry(c)
            .and_modify(|k| {
                let cur = &inst.rules[*k];
                if (cand.length, &cand.text) < (cur.length, &cur.text) {
                    *k = r;
                }
            })
            .or_insert(r);
    }
    let mut order: Vec<usize> = keep.into_values().collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&inst.rules[a], &inst.rules[b]);
        (ra.length, &ra.text, ra.id).cmp(&(rb.length, &rb.text, rb.id))
    });
    let max_len: usize = order.iter().map(|&r| inst.rules[r].length).sum();
    let search = Search { ev: &ev, inst, order };
    let floor = ev.penalty_floor();
    let n = inst.examples.len() as f64;
    let mut best: Option<Candidate> = None;
    let mut nodes = 0;
    for target in 0..=max_len {
        if let Some(b) = &best {
            if b.objective < n * target as f64 + floor || inst.examples.is_empty() {
                break;
            }
        }
        let (c, k) = search.level(target);
        nodes += k;
        best = merge(best, c);
    }
    let Some(b) = best else {
        return Err(Error::Unsatisfiable { uncovered: inst.examples.iter().map(|e| e.id.clone()).collect() });
    };
    let length: usize = b.rules.iter().map(|&r| inst.rules[r].length).sum();
    debug_assert!(n * length as f64 + floor <= b.objective + 1e-9);
    Ok(Solution {
        rules: b.ids,
        texts: b.texts,
        length,
        objective: b.objective,
        chosen: b
            .chosen
            .iter()
            .enumerate()
            .map(|(e, &g)| {
                let ex = &inst.examples[e];
                Chosen { example: ex.id.clone(), z: ex.groups[g].z.clone(), penalty: ex.groups[g].penalty }
            })
            .collect(),
        ties: b.ties,
        nodes,
    })
}

#[cfg(test)]
mod tests;
