//! Small symbolic tasks with gold latents for integration tests.

use std::collections::{BTreeMap, BTreeSet};

use nfl_core::asp::*;
use nfl_core::mode::ModeBias;
use nfl_core::task::{datapoint_to_example, LatentSpace, RawExample, SymbolicTask};
use rand::Rng;

pub fn idx_types(n: i64) -> BTreeMap<Symbol, BTreeSet<Term>> {
    let mut m = BTreeMap::new();
    m.insert(Symbol::new("idx"), (1..=n).map(Term::Int).collect());
    m
}

pub fn plus_facts(a: i64, b: i64) -> String {
    let mut text = String::new();
    for x in 0..=a {
        for y in 0..=b {
            text.push_str(&format!("plus({x},{y},{}). ", x + y));
        }
    }
    text
}

pub fn result(v: i64) -> Atom {
    Atom::new("result", vec![Term::Int(v)])
}

/// A task whose examples carry the given labels over `result(0..=max_label)`.
pub fn labelled_task(background: &str, bias: ModeBias, positions: usize, digits: i64, labels: &[i64], max_label: i64) -> SymbolicTask {
    let space: Vec<Atom> = (0..=max_label).map(result).collect();
    let examples = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let raw = RawExample { id: format!("e{i}"), label: result(y), raw: vec![], context: Program::new() };
            datapoint_to_example(&raw, &space).unwrap()
        })
        .collect();
    SymbolicTask {
        background: parse_program(background).unwrap(),
        bias,
        latent: Some(LatentSpace { domains: vec![(0..digits).map(Term::Int).collect(); positions] }),
        examples,
    }
}

pub fn add_bias(max_body: usize) -> ModeBias {
    ModeBias::parse(
        &["result(var(n)-)"],
        &["nn(const(idx), var(n)+)", "plus(var(n)-, var(n)-, var(n)+) [symmetric(1,2)]"],
        idx_types(2),
        max_body,
    )
    .unwrap()
}

pub fn add_task(labels: &[i64], digits: i64) -> SymbolicTask {
    let d = digits - 1;
    labelled_task(&plus_facts(d, d), add_bias(3), 2, digits, labels, 2 * d)
}

/// A randomly generated task family member with its gold latents.
pub struct GoldTask {
    pub family: &'static str,
    pub task: SymbolicTask,
    pub gold: Vec<Vec<usize>>,
}

/// Draws examples of one of three families: a + b, a parity switch with
/// negation, and a successor of a single digit.
pub fn random_task(rng: &mut impl Rng, max_examples: usize) -> GoldTask {
    let n = rng.random_range(1..=max_examples);
    let digits = rng.random_range(2..=3i64);
    let d = digits - 1;
    match rng.random_range(0..3) {
        0 => {
            let gold: Vec<Vec<usize>> = (0..n).map(|_| vec![rng.random_range(0..digits) as usize, rng.random_range(0..digits) as usize]).collect();
            let labels: Vec<i64> = gold.iter().map(|z| (z[0] + z[1]) as i64).collect();
            GoldTask { family: "add", task: add_task(&labels, digits), gold }
        }
        1 => {
            let bg = format!("{}even(0). even(2).", plus_facts(d, d));
            let bias = ModeBias::parse(
                &["result(var(n)-)"],
                &["nn(const(idx), var(n)+)", "even(var(n)-)", "not even(var(n)-)", "plus(var(n)-, var(n)-, var(n)+) [symmetric(1,2)]"],
                idx_types(2),
                3,
            )
            .unwrap();
            let gold: Vec<Vec<usize>> = (0..n).map(|_| vec![rng.random_range(0..digits) as usize, rng.random_range(0..digits) as usize]).collect();
            let labels: Vec<i64> = gold.iter().map(|z| if z[0] % 2 == 0 { (z[0] + z[1]) as i64 } else { z[1] as i64 }).collect();
            GoldTask { family: "parity", task: labelled_task(&bg, bias, 2, digits, &labels, 2 * d), gold }
        }
        _ => {
            let bg: String = (0..=d).map(|x| format!("succ({x},{}). ", x + 1)).collect();
            let bias = ModeBias::parse(&["result(var(n)-)"], &["nn(const(idx), var(n)+)", "succ(var(n)-, var(n)+)"], idx_types(1), 2).unwrap();
            let gold: Vec<Vec<usize>> = (0..n).map(|_| vec![rng.random_range(0..digits) as usize]).collect();
            let labels: Vec<i64> = gold.iter().map(|z| z[0] as i64 + 1).collect();
            GoldTask { family: "succ", task: labelled_task(&bg, bias, 1, digits, &labels, digits), gold }
        }
    }
}
