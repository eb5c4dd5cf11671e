//! The weak-constraint encoding P_solve, an internal evaluator for small
//! instances, and an optional external check with clingo.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::process::{Command, Stdio};

use crate::asp::matching::{all_matches, Database};
use crate::asp::parser::parse_program;
use crate::asp::solve::Compiled;
use crate::asp::syntax::*;
use crate::error::{Error, Result};

use super::SolveInstance;

/// Integer weights are round(PSOLVE_SCALE · value).
pub const PSOLVE_SCALE: f64 = 1000.0;

fn scaled(x: f64) -> i64 {
    (PSOLVE_SCALE * x).round() as i64
}

/// P_solve text. Rule `i` of the space is `in_h(i)`, example `e` is its
/// position in the task, groups are named by z_id and possibility atoms
/// `poss_not_covered(p)` are numbered per (example, possibility).
pub fn emit_psolve(inst: &SolveInstance) -> String {
    let n = inst.examples.len() as i64;
    let mut out = String::new();
    for r in &inst.rules {
        let _ = writeln!(out, "0 {{ in_h({}) }} 1.", r.id);
        let _ = writeln!(out, ":~ in_h({}). [{}@1, in_h({})]", r.id, scaled((n * r.length as i64) as f64), r.id);
    }
    // (table, possibility, atom) -> rule ids deriving it
    let mut derivers: HashMap<(u32, u32, u32), Vec<usize>> = HashMap::new();
    for r in &inst.rules {
        for &k in &r.derived {
            derivers.entry(k).or_default().push(r.id);
        }
    }
    let mut p_id = 0usize;
    for (e, ex) in inst.examples.iter().enumerate() {
        let _ = writeln!(out, "example({e}).");
        let _ = writeln!(out, ":- not covered({e}).");
        let t = ex.table;
        for g in &ex.groups {
            let z = g.z_id;
            let _ = writeln!(out, "covered({e}) :- pgroup_covered({e},{z}).");
            let _ = writeln!(out, "poss_group_penalty({e},{z},{}).", scaled(g.penalty));
            for &q in &g.possibilities {
                let p = p_id;
                p_id += 1;
                let _ = writeln!(out, "pgroup_covered({e},{z}) :- not poss_not_covered({p}).");
                let present = &inst.tables[t].present[q];
                let mut fact = false;
                for a in &ex.inclusions {
                    if present.binary_search(a).is_ok() {
                        continue;
                    }
                    match derivers.get(&(t as u32, q as u32, *a)) {
                        Some(hs) => {
                            let body: Vec<String> = hs.iter().map(|h| format!("not in_h({h})")).collect();
                            let _ = writeln!(out, "poss_not_covered({p}) :- {}.", body.join(", "));
                        }
                        None => fact = true,
                    }
                }
                for a in &ex.exclusions {
                    if present.binary_search(a).is_ok() {
                        fact = true;
                        continue;
                    }
                    for h in derivers.get(&(t as u32, q as u32, *a)).into_iter().flatten() {
                        let _ = writeln!(out, "poss_not_covered({p}) :- in_h({h}).");
                    }
                }
                if fact {
                    let _ = writeln!(out, "poss_not_covered({p}).");
                }
            }
        }
    }
    out.push_str("pgrp_pen(E,Z,P) :- pgroup_covered(E,Z), poss_group_penalty(E,Z,P).\n");
    out.push_str("min_ex_penalty(Ex,P) :- example(Ex), P = #min{ Q : pgrp_pen(Ex,Z,Q) }.\n");
    out.push_str(":~ min_ex_penalty(Ex,P). [P@1, Ex]\n");
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsolveResult {
    /// Optimal level-1 cost; `None` when unsatisfiable.
    pub cost: Option<i64>,
    /// `in_h` ids of every optimal answer set, each sorted.
    pub optimal: Vec<Vec<usize>>,
}

fn in_h_ids<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Vec<usize> {
    let mut v: Vec<usize> = atoms
        .into_iter()
        .filter(|a| a.predicate.as_str() == "in_h")
        .filter_map(|a| a.args.first().and_then(Term::as_int))
        .map(|i| i as usize)
        .collect();
    v.sort_unstable();
    v
}

/// Solves P_solve text by enumerating answer sets of its aggregate-free
/// part, then adding `#min` heads and the weak constraints over them.
/// Only for small instances.
pub fn solve_psolve_internal(text: &str) -> Result<PsolveResult> {
    let mut prog = parse_program(text)?;
    let mins = std::mem::take(&mut prog.mins);
    let min_preds: HashSet<&str> = mins.iter().map(|m| m.head.predicate.as_str()).collect();
    let (post, weaks): (Vec<WeakConstraint>, Vec<WeakConstraint>) = std::mem::take(&mut prog.weaks)
        .into_iter()
        .partition(|w| w.body.iter().any(|l| min_preds.contains(l.atom.predicate.as_str())));
    prog.weaks = weaks;
    let c = Compiled::new(&prog)?;
    let mut best: Option<i64> = None;
    let mut optimal = Vec::new();
    let mut err = None;
    c.for_each_answer_set(&mut |ids| {
        if err.is_some() {
            return;
        }
        let mut interp = c.interpretation(ids);
        for m in &mins {
            match m.evaluate(&interp) {
                Ok(atoms) => atoms.into_iter().for_each(|a| {
                    interp.insert(a);
                }),
                Err(e) => {
                    err = Some(e);
                    return;
                }
            }
        }
        let db = Database::from_atoms(interp.iter());
        let mut tuples: BTreeSet<(i64, i64, Vec<Term>)> = BTreeSet::new();
        for w in &post {
            for b in all_matches(&w.body, &db) {
                let (Some(weight), Some(level)) = (b.apply(&w.weight).as_int(), b.apply(&w.level).as_int()) else {
                    err = Some(Error::Config(format!("non-integer weight in `{w}`")));
                    return;
                };
                tuples.insert((weight, level, w.terms.iter().map(|t| b.apply(t)).collect()));
            }
        }
        let mut cost = c.cost(ids);
        for (w, l, _) in tuples {
            *cost.0.entry(l).or_insert(0) += w;
        }
        if cost.0.keys().any(|&l| l != 1) {
            err = Some(Error::Config("P_solve uses priority level 1 only".into()));
            return;
        }
        let v = cost.at(1);
        let h = in_h_ids(interp.iter());
        match best {
            Some(b) if v > b => {}
            Some(b) if v == b => optimal.push(h),
            _ => {
                best = Some(v);
                optimal = vec![h];
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    optimal.sort();
    optimal.dedup();
    Ok(PsolveResult { cost: best, optimal })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExternalResult {
    /// No external solver could be started.
    Unavailable(String),
    Solved(PsolveResult),
}

/// Runs `python3 -m clingo --opt-mode=optN` on the text.
pub fn run_clingo(text: &str) -> Result<ExternalResult> {
    let child = Command::new("python3")
        .args(["-m", "clingo", "--opt-mode=optN", "--outf=2", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => return Ok(ExternalResult::Unavailable(e.to_string())),
    };
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(text.as_bytes())
        .map_err(|e| Error::io("clingo stdin", e))?;
    let out = child.wait_with_output().map_err(|e| Error::io("clingo", e))?;
    let json: serde_json::Value = match serde_json::from_slice(&out.stdout) {
        Ok(v) => v,
        Err(_) => return Ok(ExternalResult::Unavailable(String::from_utf8_lossy(&out.stderr).into_owned())),
    };
    if json["Result"] == "UNSATISFIABLE" {
        return Ok(ExternalResult::Solved(PsolveResult { cost: None, optimal: Vec::new() }));
    }
    let mut by_cost: BTreeMap<i64, BTreeSet<Vec<usize>>> = BTreeMap::new();
    for call in json["Call"].as_array().into_iter().flatten() {
        for w in call["Witnesses"].as_array().into_iter().flatten() {
            let cost = w["Costs"].as_array().and_then(|c| c.first()).and_then(|c| c.as_i64()).unwrap_or(0);
            let atoms: Vec<Atom> = w["Value"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|v| v.as_str())
                .filter_map(|s| crate::asp::parser::parse_atom(s).ok())
                .collect();
            by_cost.entry(cost).or_default().insert(in_h_ids(&atoms));
        }
    }
    Ok(ExternalResult::Solved(match by_cost.into_iter().next() {
        Some((c, sets)) => PsolveResult { cost: Some(c), optimal: sets.into_iter().collect() },
        None => PsolveResult { cost: None, optimal: Vec::new() },
    }))
}
