//! Reference coverage and search by direct solving.
//!
//! Every rule is evaluated by solving B ∪ ctx ∪ nn-facts(z) ∪ {r} for each
//! example and latent assignment. Tasks are OPL, so the answer set of a
//! hypothesis is the union of its rules' answer sets.

use std::collections::{BTreeMap, BTreeSet};

use nfl_core::asp::*;
use nfl_core::mode::{ModeBias, SlotKind};
use nfl_core::task::SymbolicTask;

pub struct CoverTable {
    pub examples: usize,
    pub zs: usize,
    pub texts: Vec<String>,
    pub lengths: Vec<usize>,
    inc: Vec<u128>,
    exc: Vec<u128>,
    /// Per example and z: relevant atoms true without any rule, or `None`
    /// when B ∪ ctx ∪ z has no answer set.
    base: Vec<Vec<Option<u128>>>,
    /// Per rule, example and z.
    rules: Vec<Vec<Vec<u128>>>,
}

fn relevant_mask(set: &Interpretation, atoms: &[Atom]) -> u128 {
    atoms.iter().enumerate().filter(|(_, a)| set.contains(a)).fold(0, |m, (i, _)| m | (1u128 << i))
}

fn single_answer_set(p: &Program) -> Option<Interpretation> {
    let mut sets = answer_sets(p).unwrap();
    assert!(sets.len() <= 1, "oracle expects at most one answer set per assignment");
    sets.pop()
}

impl CoverTable {
    pub fn new(task: &SymbolicTask, rules: &[Rule]) -> Self {
        let latent = task.latent.as_ref().expect("latent task");
        let zs = latent.size();
        let mut inc = Vec::new();
        let mut exc = Vec::new();
        let mut base = Vec::new();
        let mut per_rule = vec![Vec::new(); rules.len()];
        for ex in &task.examples {
            let atoms: Vec<Atom> = ex.inclusions.iter().chain(&ex.exclusions).cloned().collect();
            assert!(atoms.len() <= 128);
            let n_inc = ex.inclusions.len();
            inc.push((0..n_inc).fold(0u128, |m, i| m | (1 << i)));
            exc.push((n_inc..atoms.len()).fold(0u128, |m, i| m | (1 << i)));
            let mut row = Vec::with_capacity(zs);
            let mut rows = vec![Vec::with_capacity(zs); rules.len()];
            for z in 0..zs {
                let mut p = task.background.clone();
                p.extend(ex.context.clone());
                for a in latent.facts(&latent.from_z_id(z)) {
                    p.add_fact(a);
                }
                let b = single_answer_set(&p);
                row.push(b.as_ref().map(|s| relevant_mask(s, &atoms)));
                for (r, rule) in rules.iter().enumerate() {
                    let m = match &b {
                        None => 0,
                        Some(_) => {
                            let mut q = p.clone();
                            q.rules.push(rule.clone());
                            relevant_mask(&single_answer_set(&q).expect("rules cannot remove answer sets"), &atoms)
                        }
                    };
                    rows[r].push(m);
                }
            }
            base.push(row);
            for (r, row) in rows.into_iter().enumerate() {
                per_rule[r].push(row);
            }
        }
        CoverTable {
            examples: task.examples.len(),
            zs,
            texts: rules.iter().map(|r| task.bias.canonical_string(r)).collect(),
            lengths: rules.iter().map(Rule::length).collect(),
            inc,
            exc,
            base,
            rules: per_rule,
        }
    }

    pub fn covers(&self, h: &[usize], e: usize, z: usize) -> bool {
        let Some(b) = self.base[e][z] else { return false };
        let m = h.iter().fold(b, |m, &r| m | self.rules[r][e][z]);
        m & self.inc[e] == self.inc[e] && m & self.exc[e] == 0
    }

    pub fn coverage(&self, h: &[usize], e: usize) -> Vec<usize> {
        (0..self.zs).filter(|&z| self.covers(h, e, z)).collect()
    }

    pub fn length(&self, h: &[usize]) -> usize {
        h.iter().map(|&r| self.lengths[r]).sum()
    }

    /// |E|·|H| + Σ_e min over covered z of `pen[e][z]`; `None` when some
    /// example is uncovered.
    pub fn objective(&self, h: &[usize], pen: &[Vec<f64>]) -> Option<f64> {
        let mut total = (self.examples * self.length(h)) as f64;
        for (e, pe) in pen.iter().enumerate() {
            let best = self.coverage(h, e).into_iter().map(|z| pe[z]).fold(f64::INFINITY, f64::min);
            if !best.is_finite() {
                return None;
            }
            total += best;
        }
        Some(total)
    }

    /// Sorted canonical texts of a hypothesis.
    pub fn texts_of(&self, h: &[usize]) -> Vec<String> {
        let mut t: Vec<String> = h.iter().map(|&r| self.texts[r].clone()).collect();
        t.sort();
        t
    }
}

#[derive(Clone, Debug)]
pub struct Best {
    pub objective: f64,
    pub rules: Vec<usize>,
    pub texts: Vec<String>,
    /// Hypotheses within 1e-9 of the optimum.
    pub ties: usize,
}

/// Minimum objective over every subset of `candidates` whose length is at
/// most `max_len`. Ties within 1e-9 go to the smallest sorted text list.
pub fn best_subset(table: &CoverTable, candidates: &[usize], max_len: usize, pen: &[Vec<f64>]) -> Option<Best> {
    fn rec(t: &CoverTable, c: &[usize], i: usize, cur: &mut Vec<usize>, len: usize, max_len: usize, pen: &[Vec<f64>], best: &mut Option<Best>) {
        if let Some(obj) = t.objective(cur, pen) {
            let texts = t.texts_of(cur);
            match best {
                Some(b) if obj > b.objective + 1e-9 => {}
                Some(b) if (obj - b.objective).abs() <= 1e-9 => {
                    b.ties += 1;
                    if texts < b.texts {
                        b.rules = cur.clone();
                        b.texts = texts;
                    }
                }
                _ => *best = Some(Best { objective: obj, rules: cur.clone(), texts, ties: 1 }),
            }
        }
        for j in i..c.len() {
            let l = t.lengths[c[j]];
            if len + l <= max_len {
                cur.push(c[j]);
                rec(t, c, j + 1, cur, len + l, max_len, pen, best);
                cur.pop();
            }
        }
    }
    let mut best = None;
    rec(table, candidates, 0, &mut Vec::new(), 0, max_len, pen, &mut best);
    best
}

/// Shortest hypothesis covering every example under its gold assignment.
pub fn min_gold_length(table: &CoverTable, candidates: &[usize], gold_z: &[usize], max_len: usize) -> Option<usize> {
    let mut pen = vec![vec![f64::INFINITY; table.zs]; table.examples];
    for (e, &z) in gold_z.iter().enumerate() {
        pen[e][z] = 0.0;
    }
    best_subset(table, candidates, max_len, &pen).map(|b| table.length(&b.rules))
}

/// Every rule admitted by the bias, in canonical form, by adding one body
/// literal at a time with arguments drawn from the rule's variables, one
/// fresh variable or the declared constants.
pub fn bias_rules(bias: &ModeBias) -> Vec<Rule> {
    fn var(i: usize) -> Term {
        Term::var(&format!("V{i}"))
    }
    fn instances(slots: &[(SlotKind, Symbol)], vars: usize, bias: &ModeBias) -> Vec<(Vec<Term>, usize)> {
        let mut acc: Vec<(Vec<Term>, usize)> = vec![(Vec::new(), vars)];
        for (kind, ty) in slots {
            let mut next = Vec::new();
            for (args, n) in &acc {
                match kind {
                    SlotKind::Const => {
                        for c in &bias.types[ty] {
                            let mut a = args.clone();
                            a.push(c.clone());
                            next.push((a, *n));
                        }
                    }
                    SlotKind::Var => {
                        for v in 1..=*n + 1 {
                            let mut a = args.clone();
                            a.push(var(v));
                            next.push((a, (*n).max(v)));
                        }
                    }
                }
            }
            acc = next;
        }
        acc
    }
    let mut out: BTreeMap<String, Rule> = BTreeMap::new();
    let mut frontier: BTreeMap<String, (Rule, usize)> = BTreeMap::new();
    for h in &bias.heads {
        let slots: Vec<_> = h.slots.iter().map(|s| (s.kind, s.ty.clone())).collect();
        for (args, n) in instances(&slots, 0, bias) {
            let r = Rule::new(Some(Atom { predicate: h.predicate.clone(), args }), vec![]);
            frontier.insert(r.to_string(), (r, n));
        }
    }
    for depth in 0..=bias.max_body {
        for (r, _) in frontier.values() {
            if bias.conforms(r) {
                let c = bias.canonical_rule(r);
                out.insert(c.to_string(), c);
            }
        }
        if depth == bias.max_body {
            break;
        }
        let mut next: BTreeMap<String, (Rule, usize)> = BTreeMap::new();
        for (r, n) in frontier.values() {
            for d in &bias.bodies {
                let slots: Vec<_> = d.slots.iter().map(|s| (s.kind, s.ty.clone())).collect();
                for (args, m) in instances(&slots, *n, bias) {
                    let lit = Literal { negated: d.negated, atom: Atom { predicate: d.predicate.clone(), args } };
                    if r.body.contains(&lit) {
                        continue;
                    }
                    let mut body = r.body.clone();
                    body.push(lit);
                    let cand = Rule::new(r.head.clone(), body);
                    let key = bias.canonical_string(&cand);
                    next.entry(key).or_insert((cand, m));
                }
            }
        }
        frontier = next;
    }
    out.into_values().collect()
}

/// Whether `rule` derives an excluded atom of example `e` under every
/// possible latent assignment.
pub fn fatal_for(table: &CoverTable, rule: usize, e: usize) -> bool {
    let possible: BTreeSet<usize> = (0..table.zs).filter(|&z| table.base[e][z].is_some()).collect();
    !possible.is_empty() && possible.iter().all(|&z| table.rules[rule][e][z] & table.exc[e] != 0)
}
