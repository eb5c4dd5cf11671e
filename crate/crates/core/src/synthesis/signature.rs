//! Coverage signatures and the neural optimisations of a rule.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::abduction::{Abduction, TableIndex};
use crate::asp::matching::{for_each_match, plan_body, Bindings, Facts};
use crate::asp::syntax::*;
use crate::error::{Error, Result};
use crate::task::SymbolicTask;

use super::bottom::{constants, lift_bottom, maximal_body, BottomRule, Origin, Sign, Target};

/// Bit positions of (table, possibility, relevant atom) triples. The relevant
/// atoms of a table are the inclusions and exclusions of its examples.
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureLayout {
    pub tables: Vec<TableLayout>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableLayout {
    pub offset: u32,
    pub possibilities: usize,
    /// Sorted.
    pub atoms: Vec<Atom>,
}

impl TableLayout {
    pub fn atom_id(&self, a: &Atom) -> Option<u32> {
        self.atoms.binary_search(a).ok().map(|i| i as u32)
    }

    pub fn bit(&self, q: usize, atom: u32) -> u32 {
        self.offset + (q * self.atoms.len()) as u32 + atom
    }

    fn range(&self, q: usize) -> (u32, u32) {
        let lo = self.offset + (q * self.atoms.len()) as u32;
        (lo, lo + self.atoms.len() as u32)
    }
}

impl SignatureLayout {
    pub fn new(task: &SymbolicTask, abd: &Abduction) -> Result<Self> {
        let mut atoms: Vec<Vec<Atom>> = vec![Vec::new(); abd.tables.len()];
        for (e, ex) in task.examples.iter().zip(&abd.examples) {
            atoms[ex.table].extend(e.inclusions.iter().chain(&e.exclusions).cloned());
        }
        let mut tables = Vec::with_capacity(atoms.len());
        let mut offset: u64 = 0;
        for (t, mut a) in atoms.into_iter().enumerate() {
            a.sort();
            a.dedup();
            let possibilities = abd.tables[t].possibilities.len();
            tables.push(TableLayout { offset: offset as u32, possibilities, atoms: a.clone() });
            offset += (possibilities * a.len()) as u64;
        }
        if offset > u64::from(u32::MAX) {
            return Err(Error::Config(format!("coverage signatures need {offset} bits, more than supported")));
        }
        Ok(SignatureLayout { tables })
    }

    /// Relevant atom ids derived in possibility `q` of table `t`.
    pub fn derived<'a>(&'a self, sig: &'a CoverageSignature, t: usize, q: usize) -> impl Iterator<Item = u32> + 'a {
        let (lo, hi) = self.tables[t].range(q);
        let start = sig.bits.partition_point(|&b| b < lo);
        sig.bits[start..].iter().take_while(move |&&b| b < hi).map(move |&b| b - lo)
    }
}

/// For every (table, possibility, relevant atom): whether the rule derives
/// the atom on top of the possibility. Stored as sorted set bits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoverageSignature {
    pub bits: Vec<u32>,
}

impl CoverageSignature {
    pub fn fires(&self, bit: u32) -> bool {
        self.bits.binary_search(&bit).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_superset_of(&self, other: &CoverageSignature) -> bool {
        let mut i = 0;
        for b in &other.bits {
            while i < self.bits.len() && self.bits[i] < *b {
                i += 1;
            }
            if i == self.bits.len() || self.bits[i] != *b {
                return false;
            }
        }
        true
    }
}

/// Shared state for rule synthesis over an abduced task.
pub struct Synthesis<'a> {
    pub task: &'a SymbolicTask,
    pub abduction: &'a Abduction,
    pub layout: SignatureLayout,
    pub(crate) indexes: Vec<TableIndex>,
    /// (table, sorted exclusion atom ids) of every distinct example.
    classes: Vec<(usize, Vec<u32>)>,
}

impl<'a> Synthesis<'a> {
    pub fn new(task: &'a SymbolicTask, abduction: &'a Abduction) -> Result<Self> {
        if task.examples.len() != abduction.examples.len() {
            return Err(Error::Task("abduction does not match the task's examples".into()));
        }
        for e in &task.examples {
            for a in &e.inclusions {
                if task.bias.head_decls_for(a, true).next().is_none() {
                    return Err(Error::UnlearnableAtom { atom: a.to_string() });
                }
            }
        }
        let layout = SignatureLayout::new(task, abduction)?;
        let indexes = abduction.tables.par_iter().map(|t| t.index()).collect();
        let mut classes: Vec<(usize, Vec<u32>)> = task
            .examples
            .iter()
            .zip(&abduction.examples)
            .map(|(e, ex)| {
                let tl = &layout.tables[ex.table];
                let mut ids: Vec<u32> = e.exclusions.iter().filter_map(|a| tl.atom_id(a)).collect();
                ids.sort_unstable();
                (ex.table, ids)
            })
            .collect();
        classes.sort();
        classes.dedup();
        Ok(Synthesis { task, abduction, layout, indexes, classes })
    }

    pub fn table_of(&self, e: usize) -> usize {
        self.abduction.examples[e].table
    }

    pub fn signature(&self, rule: &Rule) -> CoverageSignature {
        let Some(head) = &rule.head else { return CoverageSignature::default() };
        let plan = plan_body(&rule.body, &[]);
        let mut bits = Vec::new();
        let mut b = Bindings::new();
        for (t, tl) in self.layout.tables.iter().enumerate() {
            if tl.atoms.is_empty() {
                continue;
            }
            let table = &self.abduction.tables[t];
            // Matches only see atoms unifiable with some body literal, so
            // possibilities agreeing on those derive the same heads.
            let mut relevant: FxHashMap<u32, bool> = FxHashMap::default();
            let mut memo: FxHashMap<Vec<u32>, Vec<u32>> = FxHashMap::default();
            for q in 0..tl.possibilities {
                let key: Vec<u32> = table.possibilities[q]
                    .extra
                    .iter()
                    .copied()
                    .filter(|&i| {
                        *relevant.entry(i).or_insert_with(|| {
                            let a = &table.atoms[i as usize];
                            rule.body.iter().any(|l| may_match(&l.atom, a))
                        })
                    })
                    .collect();
                let derived = memo.entry(key).or_insert_with(|| {
                    let facts = self.indexes[t].facts(q);
                    let mut ids = Vec::new();
                    for_each_match(&rule.body, &plan, &facts, &mut b, &mut |m| {
                        if let Some(i) = tl.atom_id(&m.apply_atom(head)) {
                            ids.push(i);
                        }
                        true
                    });
                    ids.sort_unstable();
                    ids.dedup();
                    ids
                });
                bits.extend(derived.iter().map(|&i| tl.bit(q, i)));
            }
        }
        bits.sort_unstable();
        CoverageSignature { bits }
    }

    /// The rule derives an exclusion of some example in every possibility
    /// of that example.
    pub fn is_fatal(&self, sig: &CoverageSignature) -> bool {
        // per table: one bit mask of derived atoms per possibility
        let mut masks: Vec<Option<Vec<u64>>> = vec![None; self.layout.tables.len()];
        self.classes.iter().any(|(t, exc)| {
            let tl = &self.layout.tables[*t];
            let words = tl.atoms.len().div_ceil(64);
            if exc.is_empty() || words == 0 {
                return false;
            }
            let m = masks[*t].get_or_insert_with(|| {
                let mut m = vec![0u64; tl.possibilities * words];
                let (lo, hi) = (tl.offset, tl.offset + (tl.possibilities * tl.atoms.len()) as u32);
                let start = sig.bits.partition_point(|&b| b < lo);
                for &b in sig.bits[start..].iter().take_while(|&&b| b < hi) {
                    let (q, a) = (((b - lo) as usize) / tl.atoms.len(), ((b - lo) as usize) % tl.atoms.len());
                    m[q * words + a / 64] |= 1 << (a % 64);
                }
                m
            });
            let mut em = vec![0u64; words];
            for &a in exc {
                em[a as usize / 64] |= 1 << (a % 64);
            }
            m.chunks(words).all(|d| d.iter().zip(&em).any(|(x, y)| x & y != 0))
        })
    }

    /// Minimal-length subrules of `r`, one per distinct coverage signature,
    /// that are not fatal.
    pub fn neuropt(&self, r: &Rule) -> Vec<Rule> {
        let subs = self.task.bias.subrules(r, 0);
        let sigs: Vec<CoverageSignature> = subs.par_iter().map(|s| self.signature(s)).collect();
        let mut best: HashMap<&CoverageSignature, (usize, String, &Rule)> = HashMap::new();
        for (s, sig) in subs.iter().zip(&sigs) {
            if s.head.is_none() || self.is_fatal(sig) {
                continue;
            }
            let key = (s.length(), s.to_string());
            match best.get(sig) {
                Some((l, t, _)) if (*l, t) <= (key.0, &key.1) => {}
                _ => {
                    best.insert(sig, (key.0, key.1, s));
                }
            }
        }
        let mut out: Vec<(usize, String, Rule)> = best.into_values().map(|(l, t, r)| (l, t, r.clone())).collect();
        out.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        out.into_iter().map(|(_, _, r)| r).collect()
    }

    fn bottom_rules(&self, e: usize, q: usize, sign: Sign) -> Result<Vec<BottomRule>> {
        let ex = &self.task.examples[e];
        let t = self.table_of(e);
        let table = &self.abduction.tables[t];
        let facts = self.indexes[t].facts(q);
        let targets = match sign {
            Sign::Pos => &ex.inclusions,
            Sign::Neg => &ex.exclusions,
        };
        let mut out = Vec::new();
        let mut body: Option<Vec<Literal>> = None;
        for a in targets {
            if Target::all(&self.task.bias, a).is_empty() {
                if sign == Sign::Pos {
                    return Err(Error::UnlearnableAtom { atom: a.to_string() });
                }
                continue;
            }
            if sign == Sign::Pos && facts.contains(a) {
                continue;
            }
            let body = body.get_or_insert_with(|| {
                let mut universe = constants(table.answer_set(q).iter().cloned());
                universe.extend(constants(targets.iter().cloned()));
                maximal_body(&self.task.bias, &facts, &universe)
            });
            out.push(BottomRule {
                rule: Rule::new(Some(a.clone()), body.clone()),
                origin: Origin {
                    example: ex.id.clone(),
                    table: t,
                    possibility: q,
                    z: table.possibilities[q].z.clone(),
                    target: a.to_string(),
                    sign,
                },
            });
        }
        Ok(out)
    }

    /// Maximal rules for the inclusions of example `e` not already true in
    /// possibility `q` of its table.
    pub fn build_c_plus(&self, e: usize, q: usize) -> Result<Vec<BottomRule>> {
        self.bottom_rules(e, q, Sign::Pos)
    }

    /// Maximal rules for the exclusions of example `e` in possibility `q`.
    pub fn build_c_minus(&self, e: usize, q: usize) -> Result<Vec<BottomRule>> {
        self.bottom_rules(e, q, Sign::Neg)
    }

    /// C⁺ over every example and possibility.
    pub fn all_c_plus(&self) -> Result<Vec<BottomRule>> {
        let mut out = Vec::new();
        for e in 0..self.task.examples.len() {
            for q in 0..self.abduction.tables[self.table_of(e)].possibilities.len() {
                out.extend(self.build_c_plus(e, q)?);
            }
        }
        Ok(out)
    }
}

/// Lifted, canonical and deduplicated generalisation of bottom rules,
/// sorted by length then text.
pub fn generalise(bottoms: &[BottomRule], bias: &crate::mode::ModeBias) -> Vec<Rule> {
    let lifted: Vec<Vec<Rule>> = bottoms.par_iter().map(|b| lift_bottom(bias, &b.rule)).collect();
    let mut seen: BTreeMap<(usize, String), Rule> = BTreeMap::new();
    for r in lifted.into_iter().flatten() {
        let c = bias.canonical_rule(&r);
        seen.entry((c.length(), c.to_string())).or_insert(c);
    }
    seen.into_values().collect()
}

/// Whether a ground atom could unify with a literal's atom, judging
/// constants only.
fn may_match(pattern: &Atom, a: &Atom) -> bool {
    pattern.predicate == a.predicate
        && pattern.args.len() == a.args.len()
        && pattern.args.iter().zip(&a.args).all(|(p, v)| !p.is_ground() || p == v)
}
