//! Parsing, grounding and answer-set solving for the non-recursive ASP
//! fragment used by tasks, hypotheses and the optimisation encoding.

pub mod deps;
pub mod ground;
pub mod matching;
pub mod parser;
pub mod solve;
pub mod syntax;

pub use ground::{check_safety, ground, ground_with_limit};
pub use matching::{Bindings, Database, Facts, Layered};
pub use parser::{parse_atom, parse_program, parse_rule, parse_term};
pub use solve::{answer_sets, min_aggregate_eval, optimal_answer_sets, Compiled, Cost};
pub use syntax::*;
