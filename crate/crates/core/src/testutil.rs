//! Small tasks shared by unit tests.

use std::collections::{BTreeMap, BTreeSet};

use crate::asp::parser::parse_program;
use crate::asp::syntax::*;
use crate::mode::ModeBias;
use crate::task::{datapoint_to_example, LatentSpace, RawExample, SymbolicTask};

pub fn idx_types(n: i64) -> BTreeMap<Symbol, BTreeSet<Term>> {
    let mut m = BTreeMap::new();
    m.insert(Symbol::new("idx"), (1..=n).map(Term::Int).collect());
    m
}

pub fn add_background(max: i64) -> Program {
    let mut text = String::new();
    for a in 0..=max {
        for b in 0..=max {
            text.push_str(&format!("plus({a},{b},{}). ", a + b));
        }
    }
    parse_program(&text).unwrap()
}

pub fn add_task(labels: &[i64], digits: i64, bias: ModeBias) -> SymbolicTask {
    let space: Vec<Atom> = (0..=2 * (digits - 1)).map(|i| Atom::new("result", vec![Term::Int(i)])).collect();
    let examples = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let raw = RawExample {
                id: format!("e{i}"),
                label: Atom::new("result", vec![Term::Int(y)]),
                raw: vec![],
                context: Program::new(),
            };
            datapoint_to_example(&raw, &space).unwrap()
        })
        .collect();
    SymbolicTask {
        background: add_background(digits - 1),
        bias,
        latent: Some(LatentSpace { domains: vec![(0..digits).map(Term::Int).collect(); 2] }),
        examples,
    }
}

pub fn cr_bias() -> ModeBias {
    ModeBias::parse(
        &["result(var(n)-)"],
        &["nn(const(idx), var(n)+)", "plus(var(n)-, var(n)-, var(n)+) [symmetric(1,2)]"],
        idx_types(2),
        3,
    )
    .unwrap()
}

