//! JSON task manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::data::{load_reference, Dataset};
use super::{LatentSpace, NeuralTask, RawExample};
use crate::asp::parser::{parse_atom, parse_atoms_expanding, parse_program, parse_rule, parse_term};
use crate::asp::syntax::*;
use crate::error::{Error, Result};
use crate::mode::{ModeBias, ModeDecl, DEFAULT_MAX_BODY};

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestExample {
    pub id: String,
    pub label: String,
    pub raw: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub ctx: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DataValue {
    Vector(Vec<f64>),
    Reference(String),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub background: String,
    pub modeh: Vec<String>,
    pub modeb: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub types: BTreeMap<String, Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_body: Option<usize>,
    pub latent: Vec<Vec<Value>>,
    pub label_space: Vec<String>,
    pub examples: Vec<ManifestExample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_examples: Vec<ManifestExample>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, DataValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gold_latents: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_hypothesis: Option<String>,
}

fn default_schema() -> u32 {
    MANIFEST_SCHEMA
}

fn value_term(v: &Value) -> Result<Term> {
    match v {
        Value::Number(n) => n.as_i64().map(Term::Int).ok_or_else(|| Error::Task(format!("non-integer constant {n}"))),
        Value::String(s) => parse_term(s),
        other => Err(Error::Task(format!("unsupported constant {other}"))),
    }
}

fn term_value(t: &Term) -> Value {
    match t {
        Term::Int(i) => Value::from(*i),
        other => Value::from(other.to_string()),
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<(Manifest, Dataset)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(Error::Schema { expected: MANIFEST_SCHEMA.to_string(), found: m.schema_version.to_string() });
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let data = m.load_data(base)?;
        Ok((m, data))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    fn load_data(&self, base: &Path) -> Result<Dataset> {
        let mut ds = Dataset::new();
        if let Some(f) = &self.data_file {
            ds.load_csv_table(&base.join(f))?;
        }
        let mut cache = BTreeMap::new();
        for (k, v) in &self.data {
            let vec = match v {
                DataValue::Vector(x) => x.clone(),
                DataValue::Reference(r) => load_reference(base, r, &mut cache)?,
            };
            ds.insert(k.clone(), vec)?;
        }
        Ok(ds)
    }

    fn example(e: &ManifestExample) -> Result<RawExample> {
        Ok(RawExample {
            id: e.id.clone(),
            label: parse_atom(&e.label)?,
            raw: e.raw.clone(),
            context: if e.ctx.trim().is_empty() { Program::new() } else { parse_program(&e.ctx)? },
        })
    }

    /// Builds and validates the task.
    pub fn to_task(&self, data: Dataset) -> Result<NeuralTask> {
        let types = self
            .types
            .iter()
            .map(|(k, vs)| Ok((Symbol::new(k), vs.iter().map(value_term).collect::<Result<BTreeSet<_>>>()?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let heads = self.modeh.iter().map(|s| ModeDecl::parse(s)).collect::<Result<Vec<_>>>()?;
        let bodies = self.modeb.iter().map(|s| ModeDecl::parse(s)).collect::<Result<Vec<_>>>()?;
        let bias = ModeBias::new(heads, bodies, types, self.max_body.unwrap_or(DEFAULT_MAX_BODY))?;
        let latent = LatentSpace {
            domains: self.latent.iter().map(|d| d.iter().map(value_term).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?,
        };
        let mut label_space = Vec::new();
        for l in &self.label_space {
            for a in parse_atoms_expanding(l)? {
                if !label_space.contains(&a) {
                    label_space.push(a);
                }
            }
        }
        let target = match &self.target_hypothesis {
            Some(t) => {
                let p = parse_program(t)?;
                p.rules.into_iter().map(|r| parse_rule(&r.to_string())).collect::<Result<Vec<_>>>()?
            }
            None => Vec::new(),
        };
        let task = NeuralTask {
            name: self.name.clone(),
            background: parse_program(&self.background)?,
            bias,
            latent,
            label_space,
            examples: self.examples.iter().map(Manifest::example).collect::<Result<_>>()?,
            test_examples: self.test_examples.iter().map(Manifest::example).collect::<Result<_>>()?,
            data,
            gold_latents: self
                .gold_latents
                .iter()
                .map(|(k, v)| Ok((k.clone(), value_term(v)?)))
                .collect::<Result<_>>()?,
            target,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn latent_from_terms(domains: &[Vec<Term>]) -> Vec<Vec<Value>> {
        domains.iter().map(|d| d.iter().map(term_value).collect()).collect()
    }

    pub fn term_to_value(t: &Term) -> Value {
        term_value(t)
    }
}

/// Loads and validates a task manifest.
pub fn load_task(path: &Path) -> Result<NeuralTask> {
    let (m, data) = Manifest::load(path)?;
    m.to_task(data)
}
