mod common;

use common::asp_oracle::*;
use nfl_core::asp::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cost_map(c: &Cost) -> std::collections::BTreeMap<i64, i64> {
    c.0.iter().filter(|(_, v)| **v != 0).map(|(k, v)| (*k, *v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ground_programs_match_reduct_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_ground_program(&mut rng, 12);
        prop_assert_eq!(answer_sets(&p).unwrap(), reduct_answer_sets(&p), "program:\n{}", p);
    }

    #[test]
    fn optimal_sets_match_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_ground_program(&mut rng, 10);
        let (cost, sets) = optimal_answer_sets(&p).unwrap();
        let (ocost, osets) = oracle_optimal(&p);
        prop_assert_eq!(&sets, &osets, "program:\n{}", p);
        if !sets.is_empty() {
            prop_assert_eq!(cost_map(&cost), ocost);
        }
    }

    #[test]
    fn nonground_programs_match_naive_grounding(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_nonground_program(&mut rng);
        prop_assert_eq!(answer_sets(&p).unwrap(), reduct_answer_sets(&p), "program:\n{}", p);
        let (_, sets) = optimal_answer_sets(&p).unwrap();
        prop_assert_eq!(sets, oracle_optimal(&p).1);
    }

    #[test]
    fn answer_sets_are_sorted_and_unique(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_ground_program(&mut rng, 12);
        let s = answer_sets(&p).unwrap();
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grounding_preserves_answer_sets(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_nonground_program(&mut rng);
        let g = ground(&p).unwrap();
        prop_assert!(g.is_ground());
        prop_assert_eq!(answer_sets(&g).unwrap(), answer_sets(&p).unwrap());
    }
}

#[test]
fn spec_examples() {
    let sets = |s: &str| -> Vec<String> {
        answer_sets(&parse_program(s).unwrap()).unwrap().iter().map(|i| i.to_string()).collect()
    };
    assert_eq!(sets("1{a;b}1."), ["{a}", "{b}"]);
    assert_eq!(sets("a :- not b."), ["{a}"]);
    assert!(sets("a. :- a.").is_empty());
    let p = parse_program("1{a;b}1. :~ a.[2@1,a] :~ b.[1@1,b]").unwrap();
    let (cost, best) = optimal_answer_sets(&p).unwrap();
    assert_eq!(cost.at(1), 1);
    assert_eq!(best.len(), 1);
    assert_eq!(best[0].to_string(), "{b}");
}
