//! Learning tasks: raw-data tasks, weighted context-dependent partial
//! interpretations and the symbolic task handed to synthesis.

pub mod data;
pub mod manifest;

use std::collections::{BTreeMap, BTreeSet};

use crate::asp::syntax::*;
use crate::error::{Error, Result};
use crate::mode::ModeBias;

pub use data::Dataset;
pub use manifest::Manifest;

/// One labelled training point: raw-input references and a label atom.
#[derive(Clone, Debug, PartialEq)]
pub struct RawExample {
    pub id: String,
    pub label: Atom,
    pub raw: Vec<String>,
    pub context: Program,
}

/// Domains Z_1..Z_n of the latent concepts, one per raw-input position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatentSpace {
    pub domains: Vec<Vec<Term>>,
}

impl LatentSpace {
    pub fn positions(&self) -> usize {
        self.domains.len()
    }

    /// Number of joint latent assignments.
    pub fn size(&self) -> usize {
        self.domains.iter().map(Vec::len).product()
    }

    /// Mixed-radix index of a latent assignment (lexicographic in Z).
    pub fn z_id(&self, z: &[usize]) -> usize {
        z.iter().zip(&self.domains).fold(0, |acc, (&v, d)| acc * d.len() + v)
    }

    pub fn from_z_id(&self, mut id: usize) -> Vec<usize> {
        let mut out = vec![0; self.domains.len()];
        for (slot, d) in out.iter_mut().zip(&self.domains).rev() {
            *slot = id % d.len();
            id /= d.len();
        }
        out
    }

    /// Neural facts `nn(i, v)` (1-based positions) for an assignment.
    pub fn facts(&self, z: &[usize]) -> Vec<Atom> {
        z.iter()
            .enumerate()
            .map(|(i, &v)| Atom::new("nn", vec![Term::Int(i as i64 + 1), self.domains[i][v].clone()]))
            .collect()
    }

    /// `1 { nn(i, v) : v in Z_i } 1.` for every position.
    pub fn program(&self) -> Program {
        let mut p = Program::new();
        for (i, d) in self.domains.iter().enumerate() {
            p.choices.push(ChoiceRule {
                lower: 1,
                upper: Some(1),
                elements: d.iter().map(|v| Atom::new("nn", vec![Term::Int(i as i64 + 1), v.clone()])).collect(),
                body: Vec::new(),
                span: Span::default(),
            });
        }
        p
    }

    /// Value index of `t` at position `i`.
    pub fn index_of(&self, i: usize, t: &Term) -> Option<usize> {
        self.domains.get(i)?.iter().position(|v| v == t)
    }

    /// Reads the assignment back from the `nn/2` atoms of an interpretation.
    pub fn decode<'a>(&self, atoms: impl IntoIterator<Item = &'a Atom>) -> Option<Vec<usize>> {
        let mut z = vec![None; self.domains.len()];
        for a in atoms {
            if a.is_reserved() {
                let i = a.args[0].as_int()? as usize;
                if i == 0 || i > z.len() {
                    return None;
                }
                z[i - 1] = Some(self.index_of(i - 1, &a.args[1])?);
            }
        }
        z.into_iter().collect()
    }
}

/// Weighted context-dependent partial interpretation. `weight == None`
/// means the example must be covered.
#[derive(Clone, Debug, PartialEq)]
pub struct Wcdpi {
    pub id: String,
    pub weight: Option<u64>,
    pub inclusions: Vec<Atom>,
    pub exclusions: Vec<Atom>,
    pub context: Program,
}

impl Wcdpi {
    /// `I` accepts the example when it contains every inclusion and no
    /// exclusion.
    pub fn accepts(&self, i: &Interpretation) -> bool {
        self.inclusions.iter().all(|a| i.contains(a)) && !self.exclusions.iter().any(|a| i.contains(a))
    }
}

/// Converts a labelled point into a WCDPI: the label is the only inclusion
/// and every other label is an exclusion.
pub fn datapoint_to_example(raw: &RawExample, label_space: &[Atom]) -> Result<Wcdpi> {
    if !label_space.contains(&raw.label) {
        return Err(Error::LabelNotInSpace { example: raw.id.clone(), label: raw.label.to_string() });
    }
    Ok(Wcdpi {
        id: raw.id.clone(),
        weight: None,
        inclusions: vec![raw.label.clone()],
        exclusions: label_space.iter().filter(|a| **a != raw.label).cloned().collect(),
        context: raw.context.clone(),
    })
}

/// A neuro-symbolic learning task over raw data.
#[derive(Clone, Debug)]
pub struct NeuralTask {
    pub name: String,
    pub background: Program,
    pub bias: ModeBias,
    pub latent: LatentSpace,
    pub label_space: Vec<Atom>,
    pub examples: Vec<RawExample>,
    pub test_examples: Vec<RawExample>,
    pub data: Dataset,
    /// Gold latent value per raw-input reference, when known.
    pub gold_latents: BTreeMap<String, Term>,
    /// Generating hypothesis, when known.
    pub target: Vec<Rule>,
}

impl NeuralTask {
    /// Checks references, labels, latent arity and the one-predicate
    /// learning restriction.
    pub fn validate(&self) -> Result<()> {
        if self.latent.domains.iter().any(Vec::is_empty) {
            return Err(Error::Task("latent domains must be non-empty".into()));
        }
        for e in self.examples.iter().chain(&self.test_examples) {
            if e.raw.len() != self.latent.positions() {
                return Err(Error::Task(format!(
                    "example {} has {} raw inputs but the latent space has {} positions",
                    e.id,
                    e.raw.len(),
                    self.latent.positions()
                )));
            }
            for r in &e.raw {
                if !self.data.contains(r) {
                    return Err(Error::DanglingRawRef { example: e.id.clone(), reference: r.clone() });
                }
            }
            if !self.label_space.contains(&e.label) {
                return Err(Error::LabelNotInSpace { example: e.id.clone(), label: e.label.to_string() });
            }
        }
        let mut ids = BTreeSet::new();
        for e in &self.examples {
            if !ids.insert(&e.id) {
                return Err(Error::Task(format!("duplicate example id {}", e.id)));
            }
        }
        validate_opl(&self.background, &self.bias, self.examples.iter().map(|e| &e.context))?;
        Ok(())
    }

    /// The symbolic task: background, bias, latent choice and one WCDPI per
    /// training point.
    pub fn symbolic(&self) -> Result<SymbolicTask> {
        let examples = self
            .examples
            .iter()
            .map(|e| datapoint_to_example(e, &self.label_space))
            .collect::<Result<Vec<_>>>()?;
        Ok(SymbolicTask {
            background: self.background.clone(),
            bias: self.bias.clone(),
            latent: Some(self.latent.clone()),
            examples,
        })
    }

    /// Gold latent assignment of an example, if every raw input has one.
    pub fn gold_z(&self, e: &RawExample) -> Option<Vec<usize>> {
        e.raw
            .iter()
            .enumerate()
            .map(|(i, r)| self.gold_latents.get(r).and_then(|t| self.latent.index_of(i, t)))
            .collect()
    }
}

/// Symbolic learning task; `latent == None` when no latent choice is added.
#[derive(Clone, Debug)]
pub struct SymbolicTask {
    pub background: Program,
    pub bias: ModeBias,
    pub latent: Option<LatentSpace>,
    pub examples: Vec<Wcdpi>,
}

impl SymbolicTask {
    /// Background plus the latent choice program.
    pub fn full_background(&self) -> Program {
        let mut p = self.background.clone();
        if let Some(l) = &self.latent {
            p.extend(l.program());
        }
        p
    }
}

/// Replaces the latent choice by the given assignment per example: the
/// neural facts move into each context.
pub fn collapse(task: &SymbolicTask, z: &[Vec<usize>]) -> Result<SymbolicTask> {
    let latent = task.latent.as_ref().ok_or_else(|| Error::Task("task has no latent space to collapse".into()))?;
    if z.len() != task.examples.len() {
        return Err(Error::Task("one latent assignment per example is required".into()));
    }
    let examples = task
        .examples
        .iter()
        .zip(z)
        .map(|(e, z)| {
            let mut e = e.clone();
            for a in latent.facts(z) {
                e.context.add_fact(a);
            }
            e
        })
        .collect();
    Ok(SymbolicTask { background: task.background.clone(), bias: task.bias.clone(), latent: None, examples })
}

/// One-predicate learning: every head declaration shares one predicate and
/// that predicate occurs in no rule body of the background, the contexts or
/// the body declarations.
pub fn validate_opl<'a>(background: &Program, bias: &ModeBias, contexts: impl IntoIterator<Item = &'a Program>) -> Result<()> {
    let heads = bias.head_predicates();
    let names: BTreeSet<&Symbol> = heads.iter().map(|k| &k.name).collect();
    if names.len() != 1 {
        return Err(Error::NotOpl(format!("expected one head predicate, found {}", names.len())));
    }
    let check = |p: &Program, what: &str| -> Result<()> {
        let bodies = p
            .rules
            .iter()
            .flat_map(|r| &r.body)
            .chain(p.choices.iter().flat_map(|c| &c.body))
            .chain(p.weaks.iter().flat_map(|w| &w.body));
        for l in bodies {
            if heads.contains(&l.atom.key()) {
                return Err(Error::NotOpl(format!("head predicate {} occurs in a rule body of the {what}", l.atom.key())));
            }
        }
        Ok(())
    };
    check(background, "background")?;
    for c in contexts {
        check(c, "context")?;
    }
    for d in &bias.bodies {
        let key = PredKey { name: d.predicate.clone(), arity: d.arity() };
        if heads.contains(&key) {
            return Err(Error::NotOpl(format!("head predicate {key} is also a body declaration")));
        }
    }
    Ok(())
}
