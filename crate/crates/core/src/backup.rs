//! Single-state backup operators shared by every solver.
//!
//! Tables are plain `&[f64]` indexed by state. `f64::INFINITY` saturates:
//! any stored successor (probability > 0) with infinite value makes the
//! expectation infinite.

use crate::model::{ActionId, ActionRow, ExplicitMdp, StateId};

/// Default tolerance for greedy-set membership.
pub const DEFAULT_ETA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyMode {
    MinCost,
    MaxProb,
}

/// Actions of `state` scoring within `tolerance` of the best.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedySet {
    pub state: StateId,
    /// Sorted by id, never empty for a state with applicable actions.
    pub actions: Vec<ActionId>,
    pub tolerance: f64,
}

impl GreedySet {
    /// Lowest-id member, the documented tie-break.
    pub fn first(&self) -> Option<ActionId> {
        self.actions.first().copied()
    }

    pub fn contains(&self, a: ActionId) -> bool {
        self.actions.binary_search(&a).is_ok()
    }
}

#[inline]
pub(crate) fn row_q(row: &ActionRow, values: &[f64]) -> f64 {
    let e = row.expect(values);
    if e == f64::INFINITY {
        f64::INFINITY
    } else {
        row.cost + e
    }
}

/// `C(s,a) + Σ T(s,a,s') values[s']`.
///
/// # Panics
/// If `a` is not applicable in `s`.
pub fn q_value(mdp: &ExplicitMdp, values: &[f64], s: StateId, a: ActionId) -> f64 {
    let row = mdp
        .row(s, a)
        .unwrap_or_else(|| panic!("action {a} is not applicable in {s}"));
    row_q(row, values)
}

#[inline]
pub(crate) fn min_q(mdp: &ExplicitMdp, values: &[f64], s: StateId) -> f64 {
    mdp.rows(s)
        .iter()
        .map(|r| row_q(r, values))
        .fold(f64::INFINITY, f64::min)
}

/// Clamped to 1 so rounding in the outcome sum cannot push a probability
/// past it.
#[inline]
pub(crate) fn max_prob_q(mdp: &ExplicitMdp, probs: &[f64], s: StateId) -> f64 {
    mdp.rows(s)
        .iter()
        .map(|r| r.expect(probs))
        .fold(0.0, f64::max)
        .min(1.0)
}

/// Bellman backup: minimum Q-value over applicable actions.
pub fn bellman_backup(mdp: &ExplicitMdp, values: &[f64], s: StateId) -> f64 {
    if mdp.is_goal(s) {
        return 0.0;
    }
    min_q(mdp, values, s)
}

/// Backup with the option of paying the penalty instead of acting:
/// `min{D, min_a Q(s,a)}`. Returns `None` when the MDP's penalty is not
/// finite.
pub fn finite_penalty_backup(mdp: &ExplicitMdp, values: &[f64], s: StateId) -> Option<f64> {
    let d = mdp.penalty();
    if !d.is_finite() {
        return None;
    }
    Some(if mdp.is_goal(s) {
        0.0
    } else {
        min_q(mdp, values, s).min(d)
    })
}

/// Goal-probability backup: maximum over actions of the expected successor
/// probability. Goals stay at 1.
pub fn maxprob_backup(mdp: &ExplicitMdp, probs: &[f64], s: StateId) -> f64 {
    if mdp.is_goal(s) {
        return 1.0;
    }
    max_prob_q(mdp, probs, s)
}

/// Actions of `s` within `eta` of the best score under `mode`.
pub fn greedy_set(
    mdp: &ExplicitMdp,
    table: &[f64],
    s: StateId,
    mode: GreedyMode,
    eta: f64,
) -> GreedySet {
    let scores: Vec<(ActionId, f64)> = mdp
        .rows(s)
        .iter()
        .map(|r| {
            let score = match mode {
                GreedyMode::MinCost => row_q(r, table),
                GreedyMode::MaxProb => r.expect(table),
            };
            (r.action, score)
        })
        .collect();
    let actions = match mode {
        GreedyMode::MinCost => {
            let best = scores.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            scores
                .iter()
                .filter(|(_, q)| *q <= best + eta || (best == f64::INFINITY && *q == best))
                .map(|(a, _)| *a)
                .collect()
        }
        GreedyMode::MaxProb => {
            let best = scores.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            scores
                .iter()
                .filter(|(_, p)| *p >= best - eta)
                .map(|(a, _)| *a)
                .collect()
        }
    };
    GreedySet {
        state: s,
        actions,
        tolerance: eta,
    }
}

/// Lowest-id action attaining the minimum Q-value within `eta`.
pub fn greedy_action(mdp: &ExplicitMdp, values: &[f64], s: StateId, eta: f64) -> Option<ActionId> {
    greedy_set(mdp, values, s, GreedyMode::MinCost, eta).first()
}

#[inline]
pub(crate) fn abs_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Largest absolute change between two tables over `scope`; two equal
/// infinities count as no change.
pub fn residual(old: &[f64], new: &[f64], scope: impl IntoIterator<Item = StateId>) -> f64 {
    scope
        .into_iter()
        .map(|s| abs_diff(old[s.0], new[s.0]))
        .fold(0.0, f64::max)
}
