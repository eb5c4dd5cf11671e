//! Abduction of latent possibilities.
//!
//! For every distinct example context the answer sets of
//! `B ∪ P_Z ∪ ctx` are enumerated once. Each answer set is stored as the
//! atoms shared by all answer sets of its table plus a small remainder, and
//! examples reference the table grouped by latent assignment.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asp::matching::{for_each_match, plan_body, Bindings, Database, Facts, Layered};
use crate::asp::parser::parse_atom;
use crate::asp::solve::Compiled;
use crate::asp::syntax::*;
use crate::error::{Error, Result};
use crate::task::{LatentSpace, SymbolicTask, Wcdpi};

pub const DEFAULT_MAX_POSSIBILITIES: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Possibility {
    pub z: Vec<usize>,
    pub z_id: usize,
    /// Sorted table atom ids not in the table's common part.
    pub extra: Vec<u32>,
}

/// The answer sets of one background-plus-context program.
#[derive(Clone, Debug, PartialEq)]
pub struct PossibilityTable {
    pub atoms: Vec<Atom>,
    pub common: Vec<u32>,
    pub possibilities: Vec<Possibility>,
}

impl PossibilityTable {
    pub fn answer_set(&self, p: usize) -> Interpretation {
        self.common
            .iter()
            .chain(&self.possibilities[p].extra)
            .map(|&i| self.atoms[i as usize].clone())
            .collect()
    }

    pub fn index(&self) -> TableIndex {
        let base = Database::from_atoms(self.common.iter().map(|&i| &self.atoms[i as usize]));
        let tops = self
            .possibilities
            .iter()
            .map(|p| Database::from_atoms(p.extra.iter().map(|&i| &self.atoms[i as usize])))
            .collect();
        TableIndex { base, tops }
    }
}

/// Indexed fact stores for every possibility of a table.
pub struct TableIndex {
    pub base: Database,
    pub tops: Vec<Database>,
}

impl TableIndex {
    pub fn facts(&self, p: usize) -> Layered<'_> {
        Layered { base: &self.base, top: &self.tops[p] }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub z: Vec<usize>,
    pub z_id: usize,
    /// Possibility indices within the example's table.
    pub possibilities: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExamplePossibilities {
    pub table: usize,
    pub groups: Vec<Group>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Abduction {
    pub latent: Option<LatentSpace>,
    pub tables: Vec<PossibilityTable>,
    pub examples: Vec<ExamplePossibilities>,
}

impl Abduction {
    pub fn possibility_count(&self) -> usize {
        self.tables.iter().map(|t| t.possibilities.len()).sum()
    }

    /// Per example: every (z, answer sets) group.
    pub fn groups_of(&self, e: usize) -> Vec<(Vec<usize>, Vec<Interpretation>)> {
        let ex = &self.examples[e];
        let t = &self.tables[ex.table];
        ex.groups.iter().map(|g| (g.z.clone(), g.possibilities.iter().map(|&p| t.answer_set(p)).collect())).collect()
    }
}

fn solve_table(program: &Program, latent: Option<&LatentSpace>, limit: usize) -> Result<PossibilityTable> {
    let compiled = Compiled::new(program)?;
    let mut sets: Vec<Vec<u32>> = Vec::new();
    let mut over = false;
    compiled.for_each_answer_set(&mut |ids| {
        if sets.len() >= limit {
            over = true;
        } else {
            sets.push(ids.to_vec());
        }
    });
    if over {
        return Err(Error::PossibilityLimit { limit });
    }
    let atoms = compiled.atoms().to_vec();
    let mut common: Vec<u32> = sets.first().cloned().unwrap_or_default();
    for s in &sets[1.min(sets.len())..] {
        let mut k = 0;
        common.retain(|x| {
            while k < s.len() && s[k] < *x {
                k += 1;
            }
            k < s.len() && s[k] == *x
        });
    }
    let mut possibilities = Vec::with_capacity(sets.len());
    for s in sets {
        let set: Vec<&Atom> = s.iter().map(|&i| &atoms[i as usize]).collect();
        let z = match latent {
            Some(l) => l
                .decode(set.iter().copied())
                .ok_or_else(|| Error::Task("answer set without a complete latent assignment".into()))?,
            None => Vec::new(),
        };
        let z_id = latent.map_or(0, |l| l.z_id(&z));
        let extra: Vec<u32> = s.into_iter().filter(|x| common.binary_search(x).is_err()).collect();
        possibilities.push(Possibility { z, z_id, extra });
    }
    possibilities.sort_by(|a, b| a.z_id.cmp(&b.z_id).then_with(|| a.extra.cmp(&b.extra)));
    Ok(PossibilityTable { atoms, common, possibilities })
}

fn groups_for(table: &PossibilityTable) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    for (i, p) in table.possibilities.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if g.z_id == p.z_id => g.possibilities.push(i),
            _ => groups.push(Group { z: p.z.clone(), z_id: p.z_id, possibilities: vec![i] }),
        }
    }
    groups
}

/// Enumerates and groups the possibilities of every example.
pub fn abduce(task: &SymbolicTask) -> Result<Abduction> {
    abduce_with_limit(task, DEFAULT_MAX_POSSIBILITIES)
}

pub fn abduce_with_limit(task: &SymbolicTask, limit: usize) -> Result<Abduction> {
    let background = task.full_background();
    let mut by_ctx: BTreeMap<String, usize> = BTreeMap::new();
    let mut contexts: Vec<&Program> = Vec::new();
    let mut table_of = Vec::with_capacity(task.examples.len());
    for e in &task.examples {
        let key = e.context.to_string();
        let next = by_ctx.len();
        let t = *by_ctx.entry(key).or_insert_with(|| {
            contexts.push(&e.context);
            next
        });
        table_of.push(t);
    }
    let tables = contexts
        .par_iter()
        .map(|ctx| {
            let mut p = background.clone();
            p.extend((*ctx).clone());
            solve_table(&p, task.latent.as_ref(), limit)
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = tables.iter().map(|t| t.possibilities.len()).sum();
    if total > limit {
        return Err(Error::PossibilityLimit { limit });
    }
    let groups: Vec<Vec<Group>> = tables.iter().map(groups_for).collect();
    let mut examples = Vec::with_capacity(task.examples.len());
    for (e, &t) in task.examples.iter().zip(&table_of) {
        if groups[t].is_empty() {
            return Err(Error::NoPossibilities { example: e.id.clone() });
        }
        examples.push(ExamplePossibilities { table: t, groups: groups[t].clone() });
    }
    Ok(Abduction { latent: task.latent.clone(), tables, examples })
}

/// Head atoms derived by `rule` on top of a possibility.
pub fn derive<F: Facts + ?Sized>(rule: &Rule, facts: &F) -> Vec<Atom> {
    let Some(head) = &rule.head else { return Vec::new() };
    let plan = plan_body(&rule.body, &[]);
    let mut out = Vec::new();
    let mut b = Bindings::new();
    for_each_match(&rule.body, &plan, facts, &mut b, &mut |m| {
        out.push(m.apply_atom(head));
        true
    });
    out.sort();
    out.dedup();
    out
}

/// Latent assignments (by z_id) under which `rules` make the example
/// accepted in some possibility of the group.
pub fn coverage(rules: &[Rule], e: &Wcdpi, ex: &ExamplePossibilities, index: &TableIndex) -> Vec<usize> {
    let mut out = Vec::new();
    for g in &ex.groups {
        let covered = g.possibilities.iter().any(|&p| {
            let facts = index.facts(p);
            let derived: Vec<Atom> = rules.iter().flat_map(|r| derive(r, &facts)).collect();
            let holds = |a: &Atom| facts.contains(a) || derived.contains(a);
            e.inclusions.iter().all(holds) && !e.exclusions.iter().any(holds)
        });
        if covered {
            out.push(g.z_id);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct JsonPossibility {
    z: Vec<usize>,
    z_id: usize,
    extra: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    common: Vec<String>,
    possibilities: Vec<JsonPossibility>,
}

#[derive(Serialize, Deserialize)]
struct JsonGroup {
    z: Vec<usize>,
    z_id: usize,
    possibilities: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct JsonExample {
    id: String,
    table: usize,
    groups: Vec<JsonGroup>,
}

#[derive(Serialize, Deserialize)]
pub struct PossibilitiesFile {
    schema_version: u32,
    tables: Vec<JsonTable>,
    examples: Vec<JsonExample>,
}

pub const POSSIBILITIES_SCHEMA: u32 = 1;

impl Abduction {
    pub fn to_file(&self, example_ids: &[String]) -> PossibilitiesFile {
        let tables = self
            .tables
            .iter()
            .map(|t| JsonTable {
                common: t.common.iter().map(|&i| t.atoms[i as usize].to_string()).collect(),
                possibilities: t
                    .possibilities
                    .iter()
                    .map(|p| JsonPossibility {
                        z: p.z.clone(),
                        z_id: p.z_id,
                        extra: p.extra.iter().map(|&i| t.atoms[i as usize].to_string()).collect(),
                    })
                    .collect(),
            })
            .collect();
        let examples = self
            .examples
            .iter()
            .zip(example_ids)
            .map(|(e, id)| JsonExample {
                id: id.clone(),
                table: e.table,
                groups: e
                    .groups
                    .iter()
                    .map(|g| JsonGroup { z: g.z.clone(), z_id: g.z_id, possibilities: g.possibilities.clone() })
                    .collect(),
            })
            .collect();
        PossibilitiesFile { schema_version: POSSIBILITIES_SCHEMA, tables, examples }
    }

    pub fn from_file(f: &PossibilitiesFile, latent: Option<LatentSpace>, example_ids: &[String]) -> Result<Abduction> {
        if f.schema_version != POSSIBILITIES_SCHEMA {
            return Err(Error::Schema {
                expected: POSSIBILITIES_SCHEMA.to_string(),
                found: f.schema_version.to_string(),
            });
        }
        let mut tables = Vec::new();
        for t in &f.tables {
            let mut atoms = Vec::new();
            let mut index: HashMap<Atom, u32> = HashMap::new();
            let mut intern = |s: &str| -> Result<u32> {
                let a = parse_atom(s)?;
                Ok(*index.entry(a.clone()).or_insert_with(|| {
                    atoms.push(a);
                    (atoms.len() - 1) as u32
                }))
            };
            let mut common = t.common.iter().map(|s| intern(s)).collect::<Result<Vec<_>>>()?;
            common.sort();
            let mut possibilities = Vec::new();
            for p in &t.possibilities {
                let mut extra = p.extra.iter().map(|s| intern(s)).collect::<Result<Vec<_>>>()?;
                extra.sort();
                possibilities.push(Possibility { z: p.z.clone(), z_id: p.z_id, extra });
            }
            tables.push(PossibilityTable { atoms, common, possibilities });
        }
        if f.examples.len() != example_ids.len() || f.examples.iter().zip(example_ids).any(|(e, id)| e.id != *id) {
            return Err(Error::Task("possibilities file does not match the task's examples".into()));
        }
        let examples = f
            .examples
            .iter()
            .map(|e| ExamplePossibilities {
                table: e.table,
                groups: e
                    .groups
                    .iter()
                    .map(|g| Group { z: g.z.clone(), z_id: g.z_id, possibilities: g.possibilities.clone() })
                    .collect(),
            })
            .collect();
        Ok(Abduction { latent, tables, examples })
    }
}
