//! The conditional MDP: restrict an MDP to states that can reach a goal and
//! to actions that are optimal for reaching it, and reweight every
//! transition by the goal probability of its target. The optimal cost of the
//! result is the expected cost of goal-reaching trajectories.

use std::collections::VecDeque;

use thiserror::Error;

use crate::backup::{self, DEFAULT_ETA};
use crate::exact::{self, SolveError, ViConfig};
use crate::model::{
    dead_end_mask, ExplicitMdp, GoalProbFn, MdpBuilder, Policy, StateId, ValueFn, Violation,
};
use crate::report::SolveReport;

/// Goal probabilities at or below this are treated as zero.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionalError {
    #[error("no state can reach a goal")]
    Empty,
    #[error("root state {0} cannot reach a goal")]
    DeadRoot(StateId),
    #[error("goal-probability table has {got} entries, MDP has {expected} states")]
    LengthMismatch { expected: usize, got: usize },
    #[error("conditional MDP failed validation: {0:?}")]
    Invalid(Vec<Violation>),
}

/// A standalone SSP over the kept states of a base MDP, re-indexed densely.
/// Action ids are those of the base MDP.
#[derive(Debug, Clone)]
pub struct ConditionalMdp {
    pub mdp: ExplicitMdp,
    /// Base id of each conditional state.
    pub to_base: Vec<StateId>,
    /// Conditional id of each base state, if kept.
    pub from_base: Vec<Option<StateId>>,
    pub eta: f64,
}

impl ConditionalMdp {
    pub fn base_len(&self) -> usize {
        self.from_base.len()
    }

    /// Base-indexed table from a conditional-indexed one, 0 on dropped states.
    pub fn lift(&self, table: &[f64]) -> ValueFn {
        let mut out = vec![0.0; self.base_len()];
        for (i, &b) in self.to_base.iter().enumerate() {
            out[b.0] = table[i];
        }
        ValueFn(out)
    }

    /// Conditional-indexed table from a base-indexed one.
    pub fn project(&self, table: &[f64]) -> Vec<f64> {
        self.to_base.iter().map(|b| table[b.0]).collect()
    }
}

/// Builds the conditional MDP over every state with positive goal
/// probability. Graph-detected dead ends are dropped regardless of `probs`.
pub fn build_conditional(
    mdp: &ExplicitMdp,
    probs: &GoalProbFn,
    eta: f64,
) -> Result<ConditionalMdp, ConditionalError> {
    let dead = dead_end_mask(mdp);
    build(mdp, probs, eta, None, Some(&dead))
}

/// Builds only the part of the conditional MDP reachable from `root` through
/// kept actions. States off that fragment need not have valid entries in
/// `probs`.
pub fn build_conditional_rooted(
    mdp: &ExplicitMdp,
    probs: &GoalProbFn,
    eta: f64,
    root: StateId,
) -> Result<ConditionalMdp, ConditionalError> {
    build(mdp, probs, eta, Some(root), None)
}

fn build(
    mdp: &ExplicitMdp,
    probs: &GoalProbFn,
    eta: f64,
    root: Option<StateId>,
    dead: Option<&[bool]>,
) -> Result<ConditionalMdp, ConditionalError> {
    let n = mdp.num_states();
    if probs.len() != n {
        return Err(ConditionalError::LengthMismatch {
            expected: n,
            got: probs.len(),
        });
    }
    let p = probs.as_slice();
    let keep = |s: StateId| p[s.0] > PROB_FLOOR && !dead.map(|d| d[s.0]).unwrap_or(false);

    // Kept rows per base state: (action, cost, reweighted outcomes).
    type Row = (usize, f64, Vec<(usize, f64)>);
    let kept_rows = |s: StateId| -> Vec<Row> {
        if mdp.is_goal(s) {
            return Vec::new();
        }
        let scored: Vec<(f64, &crate::model::ActionRow)> =
            mdp.rows(s).iter().map(|r| (r.expect(p), r)).collect();
        let best = scored.iter().map(|x| x.0).fold(0.0, f64::max);
        let threshold = best - eta;
        scored
            .into_iter()
            .filter(|(q, _)| *q >= threshold && *q > PROB_FLOOR)
            .filter_map(|(_, row)| {
                let weighted: Vec<(usize, f64)> = row
                    .outcomes
                    .iter()
                    .filter(|o| keep(o.next))
                    .map(|o| (o.next.0, o.prob * p[o.next.0]))
                    .collect();
                let total: f64 = weighted.iter().map(|x| x.1).sum();
                if total <= 0.0 {
                    return None;
                }
                let outs = weighted.into_iter().map(|(t, w)| (t, w / total)).collect();
                Some((row.action.0, row.cost, outs))
            })
            .collect()
    };

    let mut rows: Vec<Option<Vec<Row>>> = vec![None; n];
    match root {
        Some(r) => {
            if !keep(r) {
                return Err(ConditionalError::DeadRoot(r));
            }
            let mut queue = VecDeque::from([r]);
            rows[r.0] = Some(kept_rows(r));
            while let Some(s) = queue.pop_front() {
                let succ: Vec<usize> = rows[s.0]
                    .as_ref()
                    .unwrap()
                    .iter()
                    .flat_map(|(_, _, o)| o.iter().map(|x| x.0))
                    .collect();
                for t in succ {
                    if rows[t].is_none() {
                        rows[t] = Some(kept_rows(StateId(t)));
                        queue.push_back(StateId(t));
                    }
                }
            }
        }
        None => {
            for s in mdp.states() {
                if keep(s) {
                    rows[s.0] = Some(kept_rows(s));
                }
            }
        }
    }

    let to_base: Vec<StateId> = (0..n).filter(|&s| rows[s].is_some()).map(StateId).collect();
    if to_base.is_empty() {
        return Err(ConditionalError::Empty);
    }
    let mut from_base = vec![None; n];
    for (i, b) in to_base.iter().enumerate() {
        from_base[b.0] = Some(StateId(i));
    }
    let mut b = MdpBuilder::new(to_base.len(), mdp.num_actions());
    for (i, &base) in to_base.iter().enumerate() {
        if mdp.is_goal(base) {
            b.goal(i).unwrap();
        }
        for (a, cost, outs) in rows[base.0].take().unwrap() {
            let outs: Vec<(usize, f64)> = outs
                .into_iter()
                .map(|(t, q)| (from_base[t].unwrap().0, q))
                .collect();
            b.add_action(i, a, cost, &outs).unwrap();
        }
    }
    if let Some(s0) = root.or(mdp.start()) {
        if let Some(c) = from_base[s0.0] {
            b.start(c.0).unwrap();
        }
    }
    let cond = b.build().map_err(|e| match e {
        crate::model::MdpError::Invalid(v) => ConditionalError::Invalid(v),
        other => unreachable!("builder indices are in range: {other}"),
    })?;
    Ok(ConditionalMdp {
        mdp: cond,
        to_base,
        from_base,
        eta,
    })
}

/// Optimal conditional costs by plain value iteration on the conditional
/// MDP. The returned table is base-indexed with 0 on dropped states; the
/// report describes the inner solve in conditional indexing.
pub fn conditional_values(
    cond: &ConditionalMdp,
    cfg: &ViConfig,
) -> Result<(ValueFn, SolveReport), SolveError> {
    let inner = exact::vi_ssp(&cond.mdp, cfg)?;
    Ok((cond.lift(inner.values.as_slice()), inner))
}

/// Cost-greedy policy over the conditional MDP, in base ids. Undefined on
/// dropped states and goals.
pub fn extract_policy(cond: &ConditionalMdp, values: &ValueFn) -> Policy {
    let local = cond.project(values.as_slice());
    cond.mdp
        .states()
        .filter(|&s| !cond.mdp.is_goal(s))
        .filter_map(|s| {
            backup::greedy_action(&cond.mdp, &local, s, DEFAULT_ETA).map(|a| (cond.to_base[s.0], a))
        })
        .collect()
}
