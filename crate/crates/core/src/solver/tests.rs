use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::abduction::{abduce, coverage};
use crate::synthesis::SynthesisConfig;
use crate::task::SymbolicTask;
use crate::testutil::*;

#[test]
fn prior_closed_form() {
    assert!((prior(0) - 1.718281828459045).abs() < 1e-12);
    assert!((prior(1) - 0.6321205588285577).abs() < 1e-12);
    for k in 0..10 {
        assert!((prior(k) / prior(k + 1) - std::f64::consts::E).abs() < 1e-9);
    }
}

#[test]
fn almost_perfect_thresholds() {
    assert!((almost_perfect_threshold(1, 1) - 0.7310585786300049).abs() < 1e-12);
    assert!((almost_perfect_threshold(2, 2) - 0.9820137900379085).abs() < 1e-12);
    assert!(verify_almost_perfect(&[Some(1.0); 4], 7, 9).unwrap());
    assert!(!verify_almost_perfect(&[Some(1.0), Some(0.9)], 2, 2).unwrap());
    assert!(verify_almost_perfect(&[Some(1.0), None], 2, 2).is_err());
}

fn random_penalties(abd: &crate::abduction::Abduction, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    abd.examples.iter().map(|ep| ep.groups.iter().map(|_| rng.random_range(0.0..6.0)).collect()).collect()
}

/// Exhaustive minimiser computed from rule derivations on each
/// possibility, independent of signatures.
fn brute_force(task: &SymbolicTask, abd: &crate::abduction::Abduction, space: &OptSufficientSpace, pen: &[Vec<f64>]) -> Option<(f64, Vec<String>)> {
    let idx: Vec<_> = abd.tables.iter().map(|t| t.index()).collect();
    let m = space.len();
    let mut best: Option<(f64, Vec<String>, Vec<usize>)> = None;
    for mask in 0u32..(1 << m) {
        let ids: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let rules: Vec<_> = ids.iter().map(|&i| space.rules[i].rule.clone()).collect();
        let len: usize = rules.iter().map(|r| r.length()).sum();
        let mut obj = (task.examples.len() * len) as f64;
        let mut ok = true;
        for (e, ex) in task.examples.iter().enumerate() {
            let ep = &abd.examples[e];
            let cov = coverage(&rules, ex, ep, &idx[ep.table]);
            let p = ep
                .groups
                .iter()
                .enumerate()
                .filter(|(_, g)| cov.contains(&g.z_id))
                .map(|(g, _)| pen[e][g])
                .fold(f64::INFINITY, f64::min);
            if p.is_infinite() {
                ok = false;
                break;
            }
            obj += p;
        }
        if !ok {
            continue;
        }
        let mut texts: Vec<String> = ids.iter().map(|&i| space.rules[i].text.clone()).collect();
        texts.sort();
        let better = match &best {
            None => true,
            Some((o, t, i)) => (obj, &texts, &ids) < (*o, t, i),
        };
        if better {
            best = Some((obj, texts, ids));
        }
    }
    best.map(|(o, t, _)| (o, t))
}

#[test]
fn native_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    let mut solved = 0;
    for round in 0..12 {
        let labels: Vec<i64> = (0..3).map(|_| rng.random_range(0..5)).collect();
        let task = add_task(&labels, 3, cr_bias());
        let abd = abduce(&task).unwrap();
        let syn = Synthesis::new(&task, &abd).unwrap();
        let space = syn.build_opt_space(&SynthesisConfig::default()).unwrap();
        if space.len() > 12 {
            continue;
        }
        let pen = random_penalties(&abd, &mut rng);
        let inst = SolveInstance::new(&syn, &space, &pen).unwrap();
        let want = brute_force(&task, &abd, &space, &pen);
        match solve_native(&inst) {
            Ok(s) => {
                let (o, t) = want.expect("oracle finds a solution");
                assert!((s.objective - o).abs() < 1e-9, "round {round}");
                assert_eq!(s.texts, t, "round {round}");
                let pen_sum: f64 = s.chosen.iter().map(|c| c.penalty).sum();
                assert!((s.objective - (task.examples.len() * s.length) as f64 - pen_sum).abs() < 1e-9);
                solved += 1;
            }
            Err(Error::Unsatisfiable { .. }) => assert!(want.is_none()),
            Err(e) => panic!("{e}"),
        }
        checked += 1;
    }
    assert!(checked >= 5 && solved >= 3, "{checked} {solved}");
}

#[test]
fn psolve_text_shape_and_internal_optimum() {
    let task = add_task(&[1, 3], 3, cr_bias());
    let abd = abduce(&task).unwrap();
    let syn = Synthesis::new(&task, &abd).unwrap();
    let space = syn.build_opt_space(&SynthesisConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pen = random_penalties(&abd, &mut rng);
    assert!(!space.is_empty() && space.len() <= 12, "{}", space.len());
    let inst = SolveInstance::new(&syn, &space, &pen).unwrap();
    let text = emit_psolve(&inst);
    assert_eq!(text.matches(" { in_h(").count(), space.len());
    let groups: usize = abd.examples.iter().map(|e| e.groups.len()).sum();
    assert_eq!(text.lines().filter(|l| l.starts_with("poss_group_penalty(")).count(), groups);
    let native = solve_native(&inst).unwrap();
    let r = solve_psolve_internal(&text).unwrap();
    let want = (PSOLVE_SCALE * native.objective).round() as i64;
    assert!((r.cost.unwrap() - want).abs() <= inst.examples.len() as i64);
    assert!(r.optimal.contains(&native.rules), "{:?} vs {:?}", r.optimal, native.rules);
    let ext = run_clingo(&text).unwrap();
    if let ExternalResult::Solved(ext) = ext {
        assert_eq!(ext, r);
    }
}

#[test]
fn single_rule_covers_or_is_unsatisfiable() {
    let task = add_task(&[1], 3, cr_bias());
    let abd = abduce(&task).unwrap();
    let syn = Synthesis::new(&task, &abd).unwrap();
    let space = syn.build_opt_space(&SynthesisConfig::default()).unwrap();
    let pen = vec![vec![1.0; abd.examples[0].groups.len()]];
    let s = solve_native(&SolveInstance::new(&syn, &space, &pen).unwrap()).unwrap();
    assert_eq!(s.rules.len(), 1);
    let empty = OptSufficientSpace { rules: vec![], signatures: vec![], ..space.clone() };
    let inst = SolveInstance::new(&syn, &empty, &pen).unwrap();
    assert!(matches!(solve_native(&inst), Err(Error::Unsatisfiable { .. })));
    let r = solve_psolve_internal(&emit_psolve(&inst)).unwrap();
    assert_eq!(r.cost, None);
}

