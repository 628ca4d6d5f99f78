//! Cross-module checks: every solver against the brute-force oracle or an
//! independent solver on seeded random instances.

use deadend_core::oracle::{OracleOptions, Scope};
use deadend_core::workbench::{parse_mdp, random_mdp, write_mdp, NamedMdp, RandomSpec};
use deadend_core::{
    enumerate_optimal, evaluate_policy, fret, ivi, lrtdp, maxprob_vi_from_below, shs, vi_fsspude,
    vi_mp, vi_ssp, BackupMode, Criterion, ExplicitMdp, Heuristic, HeuristicKind, SearchConfig,
    ViConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instances(seed: u64, count: usize, dead_end: bool) -> Vec<ExplicitMdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = if dead_end {
        RandomSpec::default().with_dead_end()
    } else {
        RandomSpec::default()
    };
    (0..count).map(|_| random_mdp(&mut rng, &spec)).collect()
}

fn all_states() -> OracleOptions {
    OracleOptions {
        scope: Scope::AllStates,
        ..OracleOptions::default()
    }
}

#[test]
fn vi_ssp_matches_expected_cost_oracle_when_goal_is_sure() {
    let mut checked = 0;
    for mdp in instances(11, 60, false) {
        let p = maxprob_vi_from_below(&mdp, 1e-12);
        if mdp.states().any(|s| p[s] < 1.0 - 1e-9) {
            continue;
        }
        let r = vi_ssp(&mdp, &ViConfig::with_epsilon(1e-10)).unwrap();
        let o = enumerate_optimal(&mdp, Criterion::ExpectedCost, &all_states()).unwrap();
        for s in mdp.states() {
            assert!((r.values[s] - o.values[s.0]).abs() < 1e-6);
        }
        checked += 1;
    }
    assert!(checked > 5, "only {checked} dead-end-free instances");
}

#[test]
fn lrtdp_finite_penalty_agrees_with_vi_fsspude_at_start() {
    let h = Heuristic::new(HeuristicKind::DeadendAwareCost);
    for (k, mdp) in instances(12, 40, true).into_iter().enumerate() {
        let m = mdp.with_penalty(25.0);
        let s0 = m.start().unwrap();
        let v = vi_fsspude(&m, &ViConfig::with_epsilon(1e-10)).unwrap();
        let l = lrtdp(
            &m,
            BackupMode::FinitePenalty,
            &h,
            &SearchConfig::new(1e-10).seed(k as u64),
        )
        .unwrap();
        assert!(l.converged);
        assert!(
            (l.values[s0] - v.values[s0]).abs() < 1e-6,
            "instance {k}: lrtdp {} vs vi {}",
            l.values[s0],
            v.values[s0]
        );
    }
}

#[test]
fn shs_and_fret_agree_with_exact_solvers_at_start() {
    let prob = Heuristic::new(HeuristicKind::ReachabilityProb);
    let zero = Heuristic::new(HeuristicKind::ZeroCost);
    for (k, mdp) in instances(13, 40, true).into_iter().enumerate() {
        let s0 = mdp.start().unwrap();
        let exact = ivi(&mdp, &ViConfig::with_epsilon(1e-10)).unwrap();
        let staged = shs(&mdp, &prob, &zero, &SearchConfig::new(1e-10)).unwrap();
        let ep = exact.probs.as_ref().unwrap()[s0];
        let sp = staged.probs.as_ref().unwrap()[s0];
        assert!((ep - sp).abs() < 1e-6, "instance {k}: P {ep} vs {sp}");
        if ep > 0.0 {
            assert!(
                (exact.values[s0] - staged.values[s0]).abs() < 1e-5,
                "instance {k}: cost {} vs {}",
                exact.values[s0],
                staged.values[s0]
            );
        }

        let f = fret(&mdp, &prob, &SearchConfig::new(1e-10)).unwrap();
        let below = maxprob_vi_from_below(&mdp, 1e-12);
        assert!((f.probs[s0] - below[s0]).abs() < 1e-6, "instance {k}: fret");
        let m = vi_mp(&mdp, &ViConfig::with_epsilon(1e-10)).unwrap();
        assert!(
            (m.probs[s0] - below[s0]).abs() < 1e-6,
            "instance {k}: vi_mp"
        );
    }
}

#[test]
fn ivi_policy_achieves_reported_values() {
    for mdp in instances(14, 40, true) {
        let r = ivi(&mdp, &ViConfig::with_epsilon(1e-10)).unwrap();
        let probs = r.probs.as_ref().unwrap();
        let s0 = mdp.start().unwrap();
        let mut pol = r.policy.clone();
        // states that cannot reach the goal need some action to be evaluated
        for s in mdp.states() {
            if pol.get(s).is_none() && !mdp.is_goal(s) {
                if let Some(a) = mdp.applicable(s).next() {
                    pol.assign(s, a);
                }
            }
        }
        let e = evaluate_policy(&mdp, &pol).unwrap();
        assert!((e.goal_prob[s0.0] - probs[s0]).abs() < 1e-6);
        if probs[s0] > 0.0 {
            assert!((e.conditional_cost[s0.0] - r.values[s0]).abs() < 1e-5);
        }
    }
}

#[test]
fn mdp_files_round_trip() {
    for mdp in instances(15, 20, true) {
        let named = NamedMdp::anonymous(mdp.with_penalty(3.5));
        let back = parse_mdp(&write_mdp(&named)).unwrap();
        assert_eq!(back.mdp, named.mdp);
        assert_eq!(back.state_names, named.state_names);
    }
}
