//! Semantic-loss training of the perception model and the rule posterior.

pub mod loss;
pub mod mlp;
pub mod train;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::asp::matching::Facts;
use crate::asp::solve::answer_sets;
use crate::asp::syntax::*;
use crate::error::{Error, Result};
use crate::synthesis::{OptSufficientSpace, Synthesis};
use crate::task::{LatentSpace, SymbolicTask};

pub use loss::{semantic_loss, semantic_loss_grad, softmax, softmax_backward, LossCircuit};
pub use mlp::{Mlp, MlpConfig};
pub use train::{
    argmax, example_loss_grad, head_of_position, initial_model, latent_accuracy, train, EpochRecord, ModelFile, TrainConfig, Trained, TrainingData, MODEL_SCHEMA,
};

/// Positions of the X atoms: `use(i)` for i < M, then `nn(j, v)` at
/// M + offset_j + k where k indexes the value in Z_j.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomIndex {
    pub rules: usize,
    pub widths: Vec<usize>,
    offsets: Vec<usize>,
}

impl AtomIndex {
    pub fn new(rules: usize, latent: &LatentSpace) -> Self {
        let widths: Vec<usize> = latent.domains.iter().map(Vec::len).collect();
        let mut offsets = Vec::with_capacity(widths.len());
        let mut off = 0;
        for w in &widths {
            offsets.push(off);
            off += w;
        }
        AtomIndex { rules, widths, offsets }
    }

    pub fn size(&self) -> usize {
        self.rules + self.widths.iter().sum::<usize>()
    }

    pub fn use_atom(&self, i: usize) -> usize {
        i
    }

    /// `j` is the zero-based input position, `k` the value index.
    pub fn nn(&self, j: usize, k: usize) -> usize {
        self.rules + self.offsets[j] + k
    }

    pub fn nn_range(&self, j: usize) -> std::ops::Range<usize> {
        let s = self.nn(j, 0);
        s..s + self.widths[j]
    }

    /// Inverse of `use_atom` / `nn`.
    pub fn decode(&self, x: usize) -> XAtom {
        if x < self.rules {
            return XAtom::Use(x);
        }
        let r = x - self.rules;
        let j = self.offsets.partition_point(|&o| o <= r) - 1;
        XAtom::Nn(j, r - self.offsets[j])
    }

    /// X index of a ground `use/1` or `nn/2` atom.
    pub fn of_atom(&self, a: &Atom, latent: &LatentSpace) -> Option<usize> {
        match (a.predicate.as_str(), a.args.as_slice()) {
            ("use", [Term::Int(i)]) if (*i as usize) < self.rules && *i >= 0 => Some(*i as usize),
            ("nn", [Term::Int(j), v]) if *j >= 1 => {
                let j = *j as usize - 1;
                latent.index_of(j, v).map(|k| self.nn(j, k))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XAtom {
    Use(usize),
    Nn(usize, usize),
}

/// B ∪ ctx ∪ P_Z ∪ {head(r_i) :- use(i), body(r_i)} ∪ {:- not y} ∪
/// `1 { use(0..M-1) } 1`.
pub fn build_py(task: &SymbolicTask, e: usize, space: &OptSufficientSpace) -> Program {
    let ex = &task.examples[e];
    let mut p = task.full_background();
    p.extend(ex.context.clone());
    for r in &space.rules {
        let mut body = vec![Literal::pos(Atom::new("use", vec![Term::Int(r.id as i64)]))];
        body.extend(r.rule.body.iter().cloned());
        p.rules.push(Rule::new(r.rule.head.clone(), body));
    }
    for y in &ex.inclusions {
        p.rules.push(Rule::new(None, vec![Literal::neg(y.clone())]));
    }
    p.choices.push(ChoiceRule {
        lower: 1,
        upper: Some(1),
        elements: (0..space.len()).map(|i| Atom::new("use", vec![Term::Int(i as i64)])).collect(),
        body: Vec::new(),
        span: Span::default(),
    });
    p
}

/// The circuit of example `e` by solving P_y and projecting its answer sets
/// onto the X atoms.
pub fn circuit_via_asp(task: &SymbolicTask, e: usize, space: &OptSufficientSpace) -> Result<LossCircuit> {
    let latent = task.latent.as_ref().ok_or_else(|| Error::Task("task has no latent space".into()))?;
    let index = AtomIndex::new(space.len(), latent);
    let sets = answer_sets(&build_py(task, e, space))?
        .into_iter()
        .map(|a| a.iter().filter_map(|x| index.of_atom(x, latent)).map(|x| x as u32).collect())
        .collect();
    Ok(LossCircuit::new(task.examples[e].id.clone(), index.size(), sets))
}

/// Circuits of every example read off the coverage signatures: rule i and
/// assignment z form an answer set of P_y when some possibility of z
/// contains or, with r_i, derives every inclusion.
pub fn build_circuits(syn: &Synthesis, space: &OptSufficientSpace) -> Result<Vec<LossCircuit>> {
    let latent = syn.task.latent.as_ref().ok_or_else(|| Error::Task("task has no latent space".into()))?;
    let index = AtomIndex::new(space.len(), latent);
    // bit -> rules deriving it
    let mut derivers: HashMap<u32, Vec<u32>> = HashMap::new();
    for (i, s) in space.signatures.iter().enumerate() {
        for &b in &s.bits {
            derivers.entry(b).or_default().push(i as u32);
        }
    }
    (0..syn.task.examples.len())
        .into_par_iter()
        .map(|e| {
            let ex = &syn.task.examples[e];
            let t = syn.table_of(e);
            let tl = &space.layout.tables[t];
            let mut sets = Vec::new();
            for g in &syn.abduction.examples[e].groups {
                let nn: Vec<u32> = g.z.iter().enumerate().map(|(j, &k)| index.nn(j, k) as u32).collect();
                let mut rules: Vec<u32> = Vec::new();
                for &q in &g.possibilities {
                    let present = syn.indexes[t].facts(q);
                    let missing: Vec<&Atom> = ex.inclusions.iter().filter(|a| !present.contains(a)).collect();
                    if missing.is_empty() {
                        rules = (0..space.len() as u32).collect();
                        break;
                    }
                    let bits: Option<Vec<u32>> = missing.iter().map(|a| tl.atom_id(a).map(|i| tl.bit(q, i))).collect();
                    let Some(bits) = bits else { continue };
                    let Some(first) = derivers.get(&bits[0]) else { continue };
                    for &r in first {
                        if bits[1..].iter().all(|b| space.signatures[r as usize].fires(*b)) {
                            rules.push(r);
                        }
                    }
                }
                rules.sort_unstable();
                rules.dedup();
                for r in rules {
                    let mut s = vec![index.use_atom(r as usize) as u32];
                    s.extend(&nn);
                    sets.push(s);
                }
            }
            if sets.is_empty() {
                return Err(Error::LabelUnprovable {
                    example: ex.id.clone(),
                    label: ex.inclusions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "),
                });
            }
            Ok(LossCircuit::new(ex.id.clone(), index.size(), sets))
        })
        .collect()
}
