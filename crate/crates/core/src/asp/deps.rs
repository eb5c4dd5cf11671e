//! Predicate dependency graph: recursion check and evaluation order.

use std::collections::BTreeSet;

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graphmap::DiGraphMap;

use super::syntax::{PredKey, Program};
use crate::error::{Error, Result};

struct DepGraph {
    preds: Vec<PredKey>,
    graph: DiGraphMap<usize, ()>,
}

impl DepGraph {
    fn build(prog: &Program) -> Self {
        let mut keys = BTreeSet::new();
        let mut edges = Vec::new();
        let mut add = |from: PredKey, to: PredKey, keys: &mut BTreeSet<PredKey>| {
            keys.insert(from.clone());
            keys.insert(to.clone());
            edges.push((from, to));
        };
        for r in &prog.rules {
            if let Some(h) = &r.head {
                keys.insert(h.key());
                for l in &r.body {
                    add(l.atom.key(), h.key(), &mut keys);
                }
            } else {
                keys.extend(r.body.iter().map(|l| l.atom.key()));
            }
        }
        for c in &prog.choices {
            for e in &c.elements {
                keys.insert(e.key());
                for l in &c.body {
                    add(l.atom.key(), e.key(), &mut keys);
                }
            }
            keys.extend(c.body.iter().map(|l| l.atom.key()));
        }
        for m in &prog.mins {
            keys.insert(m.head.key());
            for l in m.body.iter().chain(&m.condition) {
                add(l.atom.key(), m.head.key(), &mut keys);
            }
        }
        for w in &prog.weaks {
            keys.extend(w.body.iter().map(|l| l.atom.key()));
        }
        let preds: Vec<PredKey> = keys.into_iter().collect();
        let index = |k: &PredKey| preds.binary_search(k).expect("collected key");
        let mut graph = DiGraphMap::new();
        for i in 0..preds.len() {
            graph.add_node(i);
        }
        for (a, b) in &edges {
            graph.add_edge(index(a), index(b), ());
        }
        DepGraph { preds, graph }
    }
}

/// Fails with the offending cycle when some predicate depends on itself.
pub fn check_non_recursive(prog: &Program) -> Result<()> {
    let g = DepGraph::build(prog);
    for scc in tarjan_scc(&g.graph) {
        let cyclic = scc.len() > 1 || g.graph.contains_edge(scc[0], scc[0]);
        if cyclic {
            let mut names: Vec<String> = scc.iter().map(|&i| g.preds[i].to_string()).collect();
            names.sort();
            names.push(names[0].clone());
            return Err(Error::Recursion { cycle: names.join(" -> ") });
        }
    }
    Ok(())
}

/// Predicates in a topological order of the dependency graph. Ties are
/// broken deterministically.
pub fn predicate_order(prog: &Program) -> Result<Vec<PredKey>> {
    let g = DepGraph::build(prog);
    match toposort(&g.graph, None) {
        Ok(order) => Ok(order.into_iter().map(|i| g.preds[i].clone()).collect()),
        Err(_) => {
            check_non_recursive(prog)?;
            unreachable!("toposort failed on an acyclic graph")
        }
    }
}
