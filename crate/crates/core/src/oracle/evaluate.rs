//! Exact evaluation of a fixed deterministic policy on the absorbing chain
//! it induces.

use std::collections::VecDeque;

use super::linalg;
use super::OracleError;
use crate::model::{ActionRow, ExplicitMdp, Policy, StateId};

/// All criteria of one policy. Entries are NaN for states outside the
/// policy's domain: goals, assigned states, the start and everything they
/// reach.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    /// Expected total cost; +inf where the goal is missed with positive
    /// probability.
    pub expected_cost: Vec<f64>,
    pub goal_prob: Vec<f64>,
    /// Expected cost of the goal-reaching trajectories; 0 where the goal
    /// probability is 0.
    pub conditional_cost: Vec<f64>,
    /// Cost when paying the penalty is allowed at any point, `<= D`.
    /// Equals `expected_cost` for an infinite penalty.
    pub finite_penalty_cost: Vec<f64>,
    pub domain: Vec<bool>,
}

struct Chain<'a> {
    rows: Vec<Option<&'a ActionRow>>,
    domain: Vec<bool>,
    goal: &'a [bool],
}

fn build_chain<'a>(mdp: &'a ExplicitMdp, policy: &Policy) -> Result<Chain<'a>, OracleError> {
    let n = mdp.num_states();
    if let Some(&(s, a)) = policy.inapplicable(mdp).first() {
        return Err(OracleError::Inapplicable(s, a));
    }
    let mut domain = mdp.goal_mask().to_vec();
    let mut queue: VecDeque<StateId> = policy.iter().map(|(s, _)| s).chain(mdp.start()).collect();
    for s in &queue {
        domain[s.0] = true;
    }
    let mut rows = vec![None; n];
    while let Some(s) = queue.pop_front() {
        if mdp.is_goal(s) {
            continue;
        }
        let a = policy.get(s).ok_or(OracleError::Unassigned(s))?;
        let row = mdp.row(s, a).unwrap();
        rows[s.0] = Some(row);
        for o in &row.outcomes {
            if !domain[o.next.0] {
                domain[o.next.0] = true;
                queue.push_back(o.next);
            }
        }
    }
    Ok(Chain {
        rows,
        domain,
        goal: mdp.goal_mask(),
    })
}

impl Chain<'_> {
    fn n(&self) -> usize {
        self.domain.len()
    }

    /// States of the domain that reach `targets` with positive probability.
    fn can_reach(&self, targets: &[bool]) -> Vec<bool> {
        let n = self.n();
        let mut preds = vec![Vec::new(); n];
        for (s, row) in self.rows.iter().enumerate() {
            if let Some(row) = row {
                for o in &row.outcomes {
                    preds[o.next.0].push(s);
                }
            }
        }
        let mut mark = targets.to_vec();
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| mark[s]).collect();
        while let Some(s) = queue.pop_front() {
            for &p in &preds[s] {
                if !mark[p] {
                    mark[p] = true;
                    queue.push_back(p);
                }
            }
        }
        mark
    }

    /// Solves `x(s) = c(s) + Σ w(s, s') x(s')` over `states`, with `x`
    /// fixed to `known` outside them. `weights` yields each transient row.
    fn solve_linear(
        &self,
        states: &[usize],
        known: &[f64],
        mut row: impl FnMut(usize) -> (f64, Vec<(usize, f64)>),
    ) -> Result<Vec<f64>, OracleError> {
        let mut idx = vec![usize::MAX; self.n()];
        for (i, &s) in states.iter().enumerate() {
            idx[s] = i;
        }
        let m = states.len();
        let mut a = vec![vec![0.0; m]; m];
        let mut b = vec![0.0; m];
        for (i, &s) in states.iter().enumerate() {
            a[i][i] += 1.0;
            let (c, ws) = row(s);
            b[i] = c;
            for (t, w) in ws {
                if idx[t] != usize::MAX {
                    a[i][idx[t]] -= w;
                } else {
                    b[i] += w * known[t];
                }
            }
        }
        let x = linalg::solve(a, b).ok_or(OracleError::Singular)?;
        let mut out = known.to_vec();
        for (i, &s) in states.iter().enumerate() {
            out[s] = x[i];
        }
        Ok(out)
    }

    fn outcomes(&self, s: usize) -> (f64, Vec<(usize, f64)>) {
        let row = self.rows[s].unwrap();
        (
            row.cost,
            row.outcomes.iter().map(|o| (o.next.0, o.prob)).collect(),
        )
    }
}

/// Evaluates `policy` on every state it reaches.
///
/// Every non-goal state reachable (under the policy) from an assigned state
/// or the start must be assigned an applicable action.
pub fn evaluate_policy(
    mdp: &ExplicitMdp,
    policy: &Policy,
) -> Result<PolicyEvaluation, OracleError> {
    let chain = build_chain(mdp, policy)?;
    let n = chain.n();
    let transient = |s: usize| chain.domain[s] && !chain.goal[s];

    let reaches_goal = chain.can_reach(chain.goal);
    let mut base = vec![f64::NAN; n];
    for s in 0..n {
        if chain.domain[s] {
            base[s] = if chain.goal[s] { 1.0 } else { 0.0 };
        }
    }
    let hitting: Vec<usize> = (0..n)
        .filter(|&s| transient(s) && reaches_goal[s])
        .collect();
    let goal_prob = chain.solve_linear(&hitting, &base, |s| {
        let (_, ws) = chain.outcomes(s);
        (0.0, ws)
    })?;
    let goal_prob: Vec<f64> = goal_prob
        .into_iter()
        .map(|p| if p.is_nan() { p } else { p.clamp(0.0, 1.0) })
        .collect();

    let zero_on_domain: Vec<f64> = (0..n)
        .map(|s| if chain.domain[s] { 0.0 } else { f64::NAN })
        .collect();

    // States that may end up somewhere the goal is unreachable accrue
    // unbounded cost.
    let stuck: Vec<bool> = (0..n).map(|s| transient(s) && !reaches_goal[s]).collect();
    let doomed = chain.can_reach(&stuck);
    let proper: Vec<usize> = (0..n).filter(|&s| transient(s) && !doomed[s]).collect();
    let mut cost_known = zero_on_domain.clone();
    for s in 0..n {
        if transient(s) && doomed[s] {
            cost_known[s] = f64::INFINITY;
        }
    }
    let expected_cost = chain.solve_linear(&proper, &cost_known, |s| chain.outcomes(s))?;

    let conditional_cost = chain.solve_linear(&hitting, &zero_on_domain, |s| {
        let (c, ws) = chain.outcomes(s);
        let ps = goal_prob[s];
        let ws = ws
            .into_iter()
            .filter(|&(t, _)| goal_prob[t] > 0.0)
            .map(|(t, w)| (t, w * goal_prob[t] / ps))
            .collect();
        (c, ws)
    })?;

    let d = mdp.penalty();
    let finite_penalty_cost = if d.is_finite() {
        capped_cost(&chain, d, &zero_on_domain)?
    } else {
        expected_cost.clone()
    };

    Ok(PolicyEvaluation {
        expected_cost,
        goal_prob,
        conditional_cost,
        finite_penalty_cost,
        domain: chain.domain,
    })
}

/// Least fixed point of `J(s) = min{D, C(s) + Σ T J(s')}` on the chain, by
/// policy iteration over "continue" / "pay D" with exact linear solves.
fn capped_cost(chain: &Chain<'_>, d: f64, zero_on_domain: &[f64]) -> Result<Vec<f64>, OracleError> {
    let n = chain.n();
    let transient: Vec<usize> = (0..n)
        .filter(|&s| chain.domain[s] && !chain.goal[s])
        .collect();
    let mut cont = vec![false; n];
    let mut j = zero_on_domain.to_vec();
    for &s in &transient {
        j[s] = d;
    }
    for _ in 0..=transient.len() + 1 {
        let mut changed = false;
        for &s in &transient {
            let (c, ws) = chain.outcomes(s);
            let q = c + ws.iter().map(|&(t, w)| w * j[t]).sum::<f64>();
            let tol = 1e-12 * d.max(1.0);
            let want = if cont[s] { q <= d + tol } else { q < d - tol };
            if want != cont[s] {
                cont[s] = want;
                changed = true;
            }
        }
        if !changed {
            return Ok(j);
        }
        let mut known = j.clone();
        for &s in &transient {
            if !cont[s] {
                known[s] = d;
            }
        }
        let active: Vec<usize> = transient.iter().copied().filter(|&s| cont[s]).collect();
        j = chain.solve_linear(&active, &known, |s| chain.outcomes(s))?;
    }
    Ok(j)
}
