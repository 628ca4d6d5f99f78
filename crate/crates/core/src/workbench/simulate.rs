use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{dead_end_mask, ActionId, ExplicitMdp, Policy, StateId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("no start state set")]
    NoStart,
    #[error("policy reaches {0}, which it does not assign")]
    Unassigned(StateId),
    #[error("action {1} is not applicable in {0}")]
    Inapplicable(StateId, ActionId),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub trials: usize,
    pub goal_hits: usize,
    pub dead_hits: usize,
    pub horizon_cutoffs: usize,
    /// Mean accumulated cost over goal-reaching trials; NaN if none.
    pub mean_cost_given_goal: f64,
    pub empirical_goal_prob: f64,
    /// Standard error of `empirical_goal_prob`.
    pub goal_prob_std_err: f64,
    /// Standard error of `mean_cost_given_goal`.
    pub cost_std_err: f64,
    pub seed: u64,
}

enum End {
    Goal(f64),
    Dead,
    Horizon,
}

/// Runs `trials` rollouts of `policy` from the start. Trial `i` draws from
/// its own generator stream, so the result does not depend on scheduling.
pub fn simulate(
    mdp: &ExplicitMdp,
    policy: &Policy,
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<SimReport, SimError> {
    if horizon < 1 {
        return Err(SimError::Horizon);
    }
    let s0 = mdp.start().ok_or(SimError::NoStart)?;
    if let Some(&(s, a)) = policy.inapplicable(mdp).first() {
        return Err(SimError::Inapplicable(s, a));
    }
    let dead = dead_end_mask(mdp);

    let rollout = |trial: usize| -> Result<End, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut s = s0;
        let mut cost = 0.0;
        for _ in 0..horizon {
            if mdp.is_goal(s) {
                return Ok(End::Goal(cost));
            }
            if dead[s.0] {
                return Ok(End::Dead);
            }
            let a = policy.get(s).ok_or(SimError::Unassigned(s))?;
            let row = mdp.row(s, a).unwrap();
            cost += row.cost;
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut next = row.outcomes.last().unwrap().next;
            for o in &row.outcomes {
                acc += o.prob;
                if u < acc {
                    next = o.next;
                    break;
                }
            }
            s = next;
        }
        Ok(if mdp.is_goal(s) {
            End::Goal(cost)
        } else if dead[s.0] {
            End::Dead
        } else {
            End::Horizon
        })
    };

    #[derive(Default, Clone, Copy)]
    struct Acc {
        goal: usize,
        dead: usize,
        cut: usize,
        sum: f64,
        sum_sq: f64,
    }
    let acc = (0..trials)
        .into_par_iter()
        .map(|t| {
            rollout(t).map(|e| match e {
                End::Goal(c) => Acc {
                    goal: 1,
                    sum: c,
                    sum_sq: c * c,
                    ..Acc::default()
                },
                End::Dead => Acc {
                    dead: 1,
                    ..Acc::default()
                },
                End::Horizon => Acc {
                    cut: 1,
                    ..Acc::default()
                },
            })
        })
        .try_reduce(Acc::default, |a, b| {
            Ok(Acc {
                goal: a.goal + b.goal,
                dead: a.dead + b.dead,
                cut: a.cut + b.cut,
                sum: a.sum + b.sum,
                sum_sq: a.sum_sq + b.sum_sq,
            })
        })?;

    let p = if trials > 0 {
        acc.goal as f64 / trials as f64
    } else {
        f64::NAN
    };
    let g = acc.goal as f64;
    let mean = if acc.goal > 0 { acc.sum / g } else { f64::NAN };
    let var = if acc.goal > 1 {
        ((acc.sum_sq - g * mean * mean) / (g - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(SimReport {
        trials,
        goal_hits: acc.goal,
        dead_hits: acc.dead,
        horizon_cutoffs: acc.cut,
        mean_cost_given_goal: mean,
        empirical_goal_prob: p,
        goal_prob_std_err: (p * (1.0 - p) / trials as f64).sqrt(),
        cost_std_err: if acc.goal > 0 {
            (var / g).sqrt()
        } else {
            f64::NAN
        },
        seed,
    })
}
