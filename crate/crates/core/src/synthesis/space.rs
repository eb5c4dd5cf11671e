//! The opt-sufficient space S_M^opt.

use std::collections::{BTreeMap, HashMap};

use log::{debug, info};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::asp::matching::Facts;
use crate::asp::parser::parse_rule;
use crate::asp::syntax::*;
use crate::error::{Error, Result};

use super::bottom::{lift_split, Key, Lifter, Origin, Sign, Target, Walker};
use super::signature::{generalise, CoverageSignature, SignatureLayout, Synthesis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// G(T) is listed only when there are at most this many bottom rules.
    pub generalisation_limit: usize,
    /// Also lift repeated constants to distinct variables, linking each
    /// captured occurrence to one of the variables releasing it.
    pub split_repeated: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig { generalisation_limit: 500, split_repeated: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceRule {
    pub id: usize,
    pub rule: Rule,
    pub text: String,
    pub origin: Origin,
}

impl SpaceRule {
    pub fn length(&self) -> usize {
        self.rule.length()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceStats {
    /// (possibility, target, head declaration) triples with a bottom rule.
    pub bottom_rules: usize,
    /// Distinct conforming lifted subrules considered.
    pub candidates: usize,
    pub fatal: usize,
    pub generalised: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptSufficientSpace {
    pub rules: Vec<SpaceRule>,
    pub signatures: Vec<CoverageSignature>,
    pub layout: SignatureLayout,
    pub generalised: Option<Vec<String>>,
    pub stats: SpaceStats,
}

impl OptSufficientSpace {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Id of the rule with the same canonical form as `r`.
    pub fn find(&self, r: &Rule, bias: &crate::mode::ModeBias) -> Option<usize> {
        let c = bias.canonical_string(r);
        self.rules.iter().position(|s| s.text == c)
    }
}

struct Candidates {
    table: usize,
    q: usize,
    /// Per target: the target and the local ids of its lifted subrules.
    targets: Vec<(Target, Vec<u32>)>,
    bodies: Vec<Vec<Literal>>,
    /// Lifted rules as (body id, head).
    raws: Vec<(u32, Atom)>,
}

struct Found {
    table: usize,
    q: usize,
    targets: Vec<(Atom, Vec<u32>)>,
}

const CHUNK: usize = 64;

fn enumerate_possibility(syn: &Synthesis, t: usize, q: usize, heads: &[Atom], split: bool) -> Candidates {
    let bias = &syn.task.bias;
    let facts = syn.indexes[t].facts(q);
    let mut targets: Vec<Target> = heads.iter().filter(|a| !facts.contains(a)).flat_map(|a| Target::all(bias, a)).collect();
    targets.sort_by(|a, b| (&a.rels, &a.atom, a.decl).cmp(&(&b.rels, &b.atom, b.decl)));
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); targets.len()];
    let mut raws: Vec<(u32, Atom)> = Vec::new();
    let mut bodies: FxHashMap<Vec<Literal>, u32> = FxHashMap::default();
    let mut var_cache: Vec<Term> = Vec::new();
    let mut local: FxHashMap<(u32, Atom), u32> = FxHashMap::default();
    let mut walker = Walker::new(bias, &facts, bias.max_body).allow_repeats(split);
    let mut start = 0;
    while start < targets.len() {
        let end = start + targets[start..].iter().take_while(|x| x.rels == targets[start].rels).count();
        let group = &targets[start..end];
        let mut avail: Vec<Key> = Vec::new();
        for x in group {
            let d = &bias.heads[x.decl];
            for (arg, s) in x.atom.args.iter().zip(&d.slots) {
                if s.kind == crate::mode::SlotKind::Var {
                    avail.push((arg.clone(), s.ty.clone()));
                }
            }
        }
        walker.run(group[0].rels.clone(), avail, &mut |body, arena, released| {
            let mut lifted: Option<(Lifter, u32)> = None;
            for (k, x) in group.iter().enumerate() {
                if !x.caps.iter().all(|c| released.contains(c)) {
                    continue;
                }
                // The body is lifted first, once, and shared by every head.
                let (lf, bid) = lifted.get_or_insert_with(|| {
                    let ground: Vec<(&Literal, &crate::mode::ModeDecl)> =
                        body.iter().map(|&i| (&arena[i as usize].lit, &bias.bodies[arena[i as usize].decl])).collect();
                    let mut lf = Lifter::default();
                    lf.vars = std::mem::take(&mut var_cache);
                    let lits = lf.body(&ground);
                    let n = bodies.len() as u32;
                    let bid = *bodies.entry(lits).or_insert(n);
                    (lf, bid)
                });
                let mut hl = lf.clone();
                let head = hl.atom(&x.atom, &bias.heads[x.decl]);
                let id = match local.get(&(*bid, head.clone())) {
                    Some(&id) => id,
                    None => {
                        raws.push((*bid, head.clone()));
                        let id = (raws.len() - 1) as u32;
                        local.insert((*bid, head), id);
                        id
                    }
                };
                lists[start + k].push(id);
                if split {
                    let ground: Vec<(&Literal, &crate::mode::ModeDecl)> =
                        body.iter().map(|&i| (&arena[i as usize].lit, &bias.bodies[arena[i as usize].decl])).collect();
                    for r in lift_split(&x.atom, &bias.heads[x.decl], &ground) {
                        let n = bodies.len() as u32;
                        let bid = *bodies.entry(r.body).or_insert(n);
                        let head = r.head.unwrap();
                        let id = *local.entry((bid, head.clone())).or_insert_with(|| {
                            raws.push((bid, head));
                            (raws.len() - 1) as u32
                        });
                        lists[start + k].push(id);
                    }
                }
            }
            if let Some((lf, _)) = lifted {
                var_cache = lf.vars;
            }
        });
        start = end;
    }
    let mut body_of: Vec<Vec<Literal>> = vec![Vec::new(); bodies.len()];
    for (b, i) in bodies {
        body_of[i as usize] = b;
    }
    Candidates { table: t, q, targets: targets.into_iter().zip(lists).collect(), bodies: body_of, raws }
}

impl Synthesis<'_> {
    /// S_M^opt: for every bottom rule, the shortest non-fatal conforming
    /// subrule of its generalisation per coverage signature, unioned and
    /// sorted by length then text.
    pub fn build_opt_space(&self, cfg: &SynthesisConfig) -> Result<OptSufficientSpace> {
        let bias = &self.task.bias;
        // Targets of (table, possibility): inclusions of the examples that
        // admit it, each with the first such example.
        let mut heads: BTreeMap<(usize, usize), BTreeMap<Atom, usize>> = BTreeMap::new();
        for (e, ex) in self.task.examples.iter().enumerate() {
            let t = self.table_of(e);
            for g in &self.abduction.examples[e].groups {
                for &q in &g.possibilities {
                    let h = heads.entry((t, q)).or_default();
                    for a in &ex.inclusions {
                        h.entry(a.clone()).or_insert(e);
                    }
                }
            }
        }
        let jobs: Vec<((usize, usize), Vec<Atom>)> =
            heads.iter().map(|(&k, h)| (k, h.keys().cloned().collect())).collect();
        debug!("walking {} possibilities", jobs.len());
        // Liftings are merged into one table chunk by chunk so that only
        // global ids are kept per (possibility, target).
        let mut body_ids: FxHashMap<Vec<Literal>, u32> = FxHashMap::default();
        let mut raw_ids: FxHashMap<(u32, Atom), usize> = FxHashMap::default();
        let mut raws: Vec<(u32, Atom)> = Vec::new();
        let mut found: Vec<Found> = Vec::with_capacity(jobs.len());
        for chunk in jobs.chunks(CHUNK) {
            let part: Vec<Candidates> = chunk.par_iter().map(|((t, q), h)| enumerate_possibility(self, *t, *q, h, cfg.split_repeated)).collect();
            for c in part {
                let bmap: Vec<u32> = c
                    .bodies
                    .into_iter()
                    .map(|b| {
                        let n = body_ids.len() as u32;
                        *body_ids.entry(b).or_insert(n)
                    })
                    .collect();
                let map: Vec<u32> = c
                    .raws
                    .into_iter()
                    .map(|(b, h)| {
                        let n = raws.len();
                        let id = *raw_ids.entry((bmap[b as usize], h)).or_insert_with_key(|(b, h)| {
                            raws.push((*b, h.clone()));
                            n
                        });
                        id as u32
                    })
                    .collect();
                let targets = c
                    .targets
                    .into_iter()
                    .map(|(x, locals)| {
                        let mut ids: Vec<u32> = locals.into_iter().map(|l| map[l as usize]).collect();
                        ids.sort_unstable();
                        ids.dedup();
                        (x.atom, ids)
                    })
                    .collect();
                found.push(Found { table: c.table, q: c.q, targets });
            }
        }
        drop(raw_ids);
        let mut body_of: Vec<Vec<Literal>> = vec![Vec::new(); body_ids.len()];
        for (b, i) in body_ids {
            body_of[i as usize] = b;
        }
        let raws: Vec<Rule> = raws.into_iter().map(|(b, h)| Rule::new(Some(h), body_of[b as usize].clone())).collect();
        drop(body_of);
        let bottom_rules: usize = found.iter().map(|c| c.targets.len()).sum();
        debug!("{} distinct raw liftings", raws.len());
        let canon: Vec<Option<Rule>> =
            raws.par_iter().map(|r| bias.conforms(r).then(|| bias.canonical_rule(r))).collect();
        let mut cand_ids: HashMap<String, usize> = HashMap::new();
        let mut cands: Vec<(Rule, String)> = Vec::new();
        let raw_to_cand: Vec<Option<usize>> = canon
            .into_iter()
            .map(|c| {
                c.map(|r| {
                    let s = r.to_string();
                    *cand_ids.entry(s.clone()).or_insert_with(|| {
                        cands.push((r, s));
                        cands.len() - 1
                    })
                })
            })
            .collect();
        info!("{} conforming candidate rules from {bottom_rules} bottom rules", cands.len());

        let sigs: Vec<CoverageSignature> = cands.par_iter().map(|(r, _)| self.signature(r)).collect();
        let fatal: Vec<bool> = sigs.par_iter().map(|s| self.is_fatal(s)).collect();
        let mut sig_ids: HashMap<&CoverageSignature, usize> = HashMap::new();
        let sig_of: Vec<usize> = sigs
            .iter()
            .map(|s| {
                let n = sig_ids.len();
                *sig_ids.entry(s).or_insert(n)
            })
            .collect();

        let mut selected: BTreeMap<usize, Origin> = BTreeMap::new();
        for c in &found {
            for (target, ids) in &c.targets {
                let mut best: HashMap<usize, usize> = HashMap::new();
                for &l in ids {
                    let Some(ci) = raw_to_cand[l as usize] else { continue };
                    if fatal[ci] {
                        continue;
                    }
                    let key = |i: usize| (cands[i].0.length(), &cands[i].1);
                    best.entry(sig_of[ci]).and_modify(|b| if key(ci) < key(*b) { *b = ci }).or_insert(ci);
                }
                for ci in best.into_values() {
                    selected.entry(ci).or_insert_with(|| {
                        let e = heads[&(c.table, c.q)][target];
                        Origin {
                            example: self.task.examples[e].id.clone(),
                            table: c.table,
                            possibility: c.q,
                            z: self.abduction.tables[c.table].possibilities[c.q].z.clone(),
                            target: target.to_string(),
                            sign: Sign::Pos,
                        }
                    });
                }
            }
        }
        let mut order: Vec<usize> = selected.keys().copied().collect();
        order.sort_by(|&a, &b| (cands[a].0.length(), &cands[a].1).cmp(&(cands[b].0.length(), &cands[b].1)));
        let rules: Vec<SpaceRule> = order
            .iter()
            .enumerate()
            .map(|(id, &ci)| SpaceRule {
                id,
                rule: cands[ci].0.clone(),
                text: cands[ci].1.clone(),
                origin: selected[&ci].clone(),
            })
            .collect();
        let signatures = order.iter().map(|&ci| sigs[ci].clone()).collect();
        let generalised = if bottom_rules <= cfg.generalisation_limit {
            Some(generalise(&self.all_c_plus()?, bias).iter().map(|r| r.to_string()).collect::<Vec<_>>())
        } else {
            None
        };
        let stats = SpaceStats {
            bottom_rules,
            candidates: cands.len(),
            fatal: fatal.iter().filter(|&&f| f).count(),
            generalised: generalised.as_ref().map(Vec::len),
        };
        info!("opt-sufficient space has {} rules", rules.len());
        Ok(OptSufficientSpace { rules, signatures, layout: self.layout.clone(), generalised, stats })
    }

    /// Rebuilds a space from rule texts in id order, recomputing signatures.
    pub fn space_from_rules(&self, texts: &[String], origins: Vec<Origin>) -> Result<OptSufficientSpace> {
        let rules: Vec<Rule> = texts.iter().map(|t| parse_rule(t)).collect::<Result<_>>()?;
        if origins.len() != rules.len() {
            return Err(Error::Config("one origin per space rule is required".into()));
        }
        let signatures = rules.par_iter().map(|r| self.signature(r)).collect();
        let rules = rules
            .into_iter()
            .zip(texts)
            .zip(origins)
            .enumerate()
            .map(|(id, ((rule, text), origin))| SpaceRule { id, rule, text: text.clone(), origin })
            .collect();
        Ok(OptSufficientSpace { rules, signatures, layout: self.layout.clone(), generalised: None, stats: SpaceStats::default() })
    }
}

pub const SPACE_SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpaceFileRule {
    pub id: usize,
    pub rule: String,
    pub length: usize,
    pub origin: Origin,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpaceFile {
    pub schema_version: u32,
    pub stats: SpaceStats,
    #[serde(default)]
    pub generalisation: Option<Vec<String>>,
    pub rules: Vec<SpaceFileRule>,
}

impl OptSufficientSpace {
    pub fn to_file(&self) -> SpaceFile {
        SpaceFile {
            schema_version: SPACE_SCHEMA,
            stats: self.stats.clone(),
            generalisation: self.generalised.clone(),
            rules: self
                .rules
                .iter()
                .map(|r| SpaceFileRule { id: r.id, rule: r.text.clone(), length: r.length(), origin: r.origin.clone() })
                .collect(),
        }
    }

    pub fn from_file(f: &SpaceFile, syn: &Synthesis) -> Result<OptSufficientSpace> {
        if f.schema_version != SPACE_SCHEMA {
            return Err(Error::Schema { expected: SPACE_SCHEMA.to_string(), found: f.schema_version.to_string() });
        }
        if f.rules.iter().enumerate().any(|(i, r)| r.id != i) {
            return Err(Error::Config("space rule ids must be 0..M-1 in order".into()));
        }
        let texts: Vec<String> = f.rules.iter().map(|r| r.rule.clone()).collect();
        let mut s = syn.space_from_rules(&texts, f.rules.iter().map(|r| r.origin.clone()).collect())?;
        s.generalised = f.generalisation.clone();
        s.stats = f.stats.clone();
        Ok(s)
    }
}
