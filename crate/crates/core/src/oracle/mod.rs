//! Ground truth at desk scale: exact policy evaluation, exhaustive policy
//! enumeration under each criterion, and an empirical search for the
//! penalty above which the capped and lexicographic criteria agree.

mod evaluate;
mod linalg;
mod threshold;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use evaluate::{evaluate_policy, PolicyEvaluation};
pub use linalg::solve as solve_linear_system;
pub use threshold::{find_penalty_threshold, geometric_grid, AgreementRow, ThresholdReport};

use crate::model::{reachable_mask, ActionId, ExplicitMdp, Policy, StateId};

/// Band within which two goal probabilities count as equal.
pub const PROB_TIE_TOL: f64 = 1e-7;
/// Relative band within which two costs count as equal.
pub const COST_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("state {0} is reachable under the policy but has no action")]
    Unassigned(StateId),
    #[error("action {1} is not applicable in {0}")]
    Inapplicable(StateId, ActionId),
    #[error("singular linear system")]
    Singular,
    #[error("instance too large for enumeration: {states} states, {policies} policies")]
    TooLarge { states: usize, policies: f64 },
    #[error("no start state set")]
    NoStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criterion {
    ExpectedCost,
    FinitePenalty,
    Lexicographic,
}

/// Goal probability first, then conditional cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LexValue {
    pub prob: f64,
    pub cond_cost: f64,
}

pub(crate) fn costs_tie(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if a.is_infinite() || b.is_infinite() {
        return false;
    }
    (a - b).abs() <= COST_TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

impl LexValue {
    /// `Greater` means `self` is preferable: higher goal probability, or
    /// equal probability (within [`PROB_TIE_TOL`]) and lower conditional cost.
    pub fn compare(&self, other: &LexValue) -> Ordering {
        if (self.prob - other.prob).abs() > PROB_TIE_TOL {
            return self.prob.partial_cmp(&other.prob).unwrap();
        }
        if costs_tie(self.cond_cost, other.cond_cost) {
            Ordering::Equal
        } else {
            other.cond_cost.partial_cmp(&self.cond_cost).unwrap()
        }
    }

    /// `self ≺ other`: `other` is strictly preferable.
    pub fn worse_than(&self, other: &LexValue) -> bool {
        self.compare(other) == Ordering::Less
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Only states reachable from the start are assigned; optimality is
    /// judged at the start.
    Rooted,
    /// Every non-goal state is assigned; a policy is optimal when it is
    /// optimal at every state.
    AllStates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub max_states: usize,
    pub max_policies: f64,
    pub scope: Scope,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_states: 10,
            max_policies: 1e6,
            scope: Scope::Rooted,
        }
    }
}

/// Result of exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub criterion: Criterion,
    /// Every optimal policy, ties included.
    pub optimal: Vec<Policy>,
    /// Per-state optimum: cost for the cost criteria, conditional cost for
    /// the lexicographic one. NaN outside the enumerated states.
    pub values: Vec<f64>,
    /// Per-state optimal goal probability (lexicographic criterion only).
    pub probs: Option<Vec<f64>>,
    pub policies_evaluated: usize,
    pub assigned_states: Vec<StateId>,
}

impl Enumeration {
    pub fn optimal_set(&self) -> BTreeSet<Policy> {
        self.optimal.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Score {
    Cost(f64),
    Lex(LexValue),
}

impl Score {
    fn cmp_better(&self, other: &Score) -> Ordering {
        match (self, other) {
            (Score::Cost(a), Score::Cost(b)) => {
                if costs_tie(*a, *b) {
                    Ordering::Equal
                } else {
                    b.partial_cmp(a).unwrap()
                }
            }
            (Score::Lex(a), Score::Lex(b)) => a.compare(b),
            _ => unreachable!("mixed criteria"),
        }
    }
}

fn scores(e: &PolicyEvaluation, criterion: Criterion, s: usize) -> Score {
    match criterion {
        Criterion::ExpectedCost => Score::Cost(e.expected_cost[s]),
        Criterion::FinitePenalty => Score::Cost(e.finite_penalty_cost[s]),
        Criterion::Lexicographic => Score::Lex(LexValue {
            prob: e.goal_prob[s],
            cond_cost: e.conditional_cost[s],
        }),
    }
}

/// Enumerates every deterministic policy over the scoped states and returns
/// all optimal ones under `criterion` (with `mdp`'s penalty for the capped
/// criterion).
pub fn enumerate_optimal(
    mdp: &ExplicitMdp,
    criterion: Criterion,
    opts: &OracleOptions,
) -> Result<Enumeration, OracleError> {
    let n = mdp.num_states();
    let in_scope: Vec<bool> = match opts.scope {
        Scope::Rooted => reachable_mask(mdp, mdp.start().ok_or(OracleError::NoStart)?),
        Scope::AllStates => vec![true; n],
    };
    let assigned: Vec<StateId> = mdp
        .states()
        .filter(|&s| in_scope[s.0] && !mdp.is_goal(s))
        .collect();
    let choices: Vec<Vec<ActionId>> = assigned
        .iter()
        .map(|&s| mdp.applicable(s).collect())
        .collect();
    let total: f64 = choices.iter().map(|c| c.len() as f64).product();
    if assigned.len() > opts.max_states || total > opts.max_policies {
        return Err(OracleError::TooLarge {
            states: assigned.len(),
            policies: total,
        });
    }
    let total = total as usize;
    let policy_at = |mut idx: usize| -> Policy {
        assigned
            .iter()
            .zip(&choices)
            .map(|(&s, c)| {
                let a = c[idx % c.len()];
                idx /= c.len();
                (s, a)
            })
            .collect()
    };
    let scoped: Vec<usize> = (0..n).filter(|&s| in_scope[s]).collect();
    let root = mdp.start();
    let eval_scores = |idx: usize| -> Result<Vec<Score>, OracleError> {
        let e = evaluate_policy(mdp, &policy_at(idx))?;
        Ok(scoped.iter().map(|&s| scores(&e, criterion, s)).collect())
    };

    // Pass 1: per-state optimum.
    let best: Vec<Score> = (0..total)
        .into_par_iter()
        .map(eval_scores)
        .try_reduce_with(|a, b| {
            Ok(a.into_iter()
                .zip(b)
                .map(|(x, y)| {
                    if y.cmp_better(&x) == Ordering::Greater {
                        y
                    } else {
                        x
                    }
                })
                .collect())
        })
        .expect("at least one policy")?;

    // Pass 2: the policies attaining it.
    let judged: Vec<usize> = match (opts.scope, root) {
        (Scope::Rooted, Some(r)) => vec![scoped.iter().position(|&s| s == r.0).unwrap()],
        _ => (0..scoped.len()).collect(),
    };
    let mut optimal_idx: Vec<usize> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let sc = eval_scores(idx)?;
            Ok(judged
                .iter()
                .all(|&k| sc[k].cmp_better(&best[k]) != Ordering::Less)
                .then_some(idx))
        })
        .collect::<Result<Vec<Option<usize>>, OracleError>>()?
        .into_iter()
        .flatten()
        .collect();
    optimal_idx.sort_unstable();

    let mut values = vec![f64::NAN; n];
    let mut probs = vec![f64::NAN; n];
    for (k, &s) in scoped.iter().enumerate() {
        match best[k] {
            Score::Cost(c) => values[s] = c,
            Score::Lex(l) => {
                values[s] = l.cond_cost;
                probs[s] = l.prob;
            }
        }
    }
    Ok(Enumeration {
        criterion,
        optimal: optimal_idx.into_iter().map(policy_at).collect(),
        values,
        probs: (criterion == Criterion::Lexicographic).then_some(probs),
        policies_evaluated: total,
        assigned_states: assigned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, A_D, A_G, DEAD, START};

    fn pol(pairs: &[(StateId, ActionId)]) -> Policy {
        pairs.iter().copied().collect()
    }

    #[test]
    fn lex_ordering() {
        let a = LexValue {
            prob: 0.5,
            cond_cost: 1.0,
        };
        let b = LexValue {
            prob: 1.0,
            cond_cost: 3.0,
        };
        assert!(a.worse_than(&b));
        let c = LexValue {
            prob: 1.0 - 1e-9,
            cond_cost: 2.0,
        };
        assert!(b.worse_than(&c));
        let z1 = LexValue {
            prob: 0.0,
            cond_cost: 0.0,
        };
        assert_eq!(z1.compare(&z1), Ordering::Equal);
    }

    #[test]
    fn three_state_capped_tie_at_four() {
        let e = enumerate_optimal(
            &fixtures::three_state(4.0),
            Criterion::FinitePenalty,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(e.values[START.0], 3.0);
        assert_eq!(
            e.optimal,
            vec![
                pol(&[(START, A_D), (DEAD, A_D)]),
                pol(&[(START, A_G), (DEAD, A_D)])
            ]
        );
    }

    #[test]
    fn three_state_lexicographic() {
        let e = enumerate_optimal(
            &fixtures::three_state(4.0),
            Criterion::Lexicographic,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(e.optimal, vec![pol(&[(START, A_G), (DEAD, A_D)])]);
        assert_eq!(e.probs.as_ref().unwrap()[START.0], 1.0);
        assert_eq!(e.values[START.0], 3.0);
    }

    #[test]
    fn three_state_capped_unique_at_five() {
        let e = enumerate_optimal(
            &fixtures::three_state(5.0),
            Criterion::FinitePenalty,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(e.optimal.len(), 1);
        assert_eq!(e.optimal[0].get(START), Some(A_G));
    }

    #[test]
    fn expected_cost_criterion() {
        let e = enumerate_optimal(
            &fixtures::three_state(4.0),
            Criterion::ExpectedCost,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(e.values[START.0], 3.0);
        assert_eq!(e.values[DEAD.0], f64::INFINITY);
        assert_eq!(e.optimal.len(), 1);
    }

    #[test]
    fn refuses_large_instances() {
        let opts = OracleOptions {
            max_states: 1,
            ..Default::default()
        };
        assert!(matches!(
            enumerate_optimal(&fixtures::three_state(4.0), Criterion::Lexicographic, &opts),
            Err(OracleError::TooLarge { states: 2, .. })
        ));
    }
}
