//! Find, Revise, Eliminate Traps for goal probabilities.
//!
//! Starting from an upper bound on the optimal goal probabilities, repeat:
//! revise values along the greedy graph from the start until it is
//! `epsilon`-consistent, then build the graph of *all* `eta`-greedy actions
//! from the start and lower every trap in it to its escape value. Stops when
//! a build finds neither inconsistent states nor traps to lower.

use std::time::Instant;

use super::{Heuristic, SearchConfig};
use crate::backup;
use crate::exact::SolveError;
use crate::model::{ExplicitMdp, GoalProbFn, StateId};
use crate::report::{MaxProbReport, SearchStats};
use crate::traps::{self, EndComponents, GreedyGraph};

struct Fret<'a> {
    mdp: &'a ExplicitMdp,
    probs: Vec<f64>,
    touched: Vec<bool>,
    n_touched: usize,
    backups: usize,
}

impl Fret<'_> {
    fn mark(&mut self, s: StateId) {
        if !self.touched[s.0] {
            self.touched[s.0] = true;
            self.n_touched += 1;
        }
    }

    fn mark_row_successors(&mut self, s: StateId) {
        let mdp = self.mdp;
        for row in mdp.rows(s) {
            for o in &row.outcomes {
                self.mark(o.next);
            }
        }
    }

    /// One depth-first pass over the single-action greedy graph from `root`,
    /// backing up states in post-order. Returns the largest change.
    fn revise_pass(&mut self, root: StateId) -> f64 {
        let mdp = self.mdp;
        let n = mdp.num_states();
        let mut seen = vec![false; n];
        let mut res: f64 = 0.0;
        // (state, expanded)
        let mut stack = vec![(root, false)];
        seen[root.0] = true;
        while let Some((s, expanded)) = stack.pop() {
            if mdp.is_goal(s) {
                continue;
            }
            if expanded {
                let new = backup::max_prob_q(mdp, &self.probs, s);
                self.backups += 1;
                res = res.max((new - self.probs[s.0]).abs());
                self.probs[s.0] = new;
                continue;
            }
            stack.push((s, true));
            self.mark_row_successors(s);
            let best = mdp
                .rows(s)
                .iter()
                .max_by(|x, y| {
                    // lowest id among the maxima
                    x.expect(&self.probs)
                        .partial_cmp(&y.expect(&self.probs))
                        .unwrap()
                        .then(y.action.cmp(&x.action))
                })
                .unwrap();
            for o in &best.outcomes {
                if !seen[o.next.0] {
                    seen[o.next.0] = true;
                    stack.push((o.next, false));
                }
            }
        }
        res
    }
}

/// Goal probabilities from the start state by heuristic search.
///
/// `heuristic` must be a probability kind (`P̂ ≥ P*`). The returned table is
/// exact to `cfg.epsilon` on every state of the final greedy graph from the
/// start; other entries hold the heuristic or intermediate values.
/// `touched` marks every state whose value was read.
pub fn fret(
    mdp: &ExplicitMdp,
    heuristic: &Heuristic,
    cfg: &SearchConfig,
) -> Result<MaxProbReport, SolveError> {
    let s0 = mdp.start().ok_or(SolveError::NoStart)?;
    if !(cfg.epsilon > 0.0) || heuristic.kind().is_cost() {
        return Err(SolveError::BadConfig);
    }
    let t0 = Instant::now();
    let n = mdp.num_states();
    let mut st = Fret {
        mdp,
        probs: heuristic.table(mdp),
        touched: vec![false; n],
        n_touched: 0,
        backups: 0,
    };
    for g in mdp.goals() {
        st.probs[g.0] = 1.0;
    }
    st.mark(s0);
    let ecs = EndComponents::of(mdp);
    let mut passes = 0;
    let mut builds = 0;
    let mut trap_rounds = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    'outer: while st.backups < cfg.max_backups {
        loop {
            residual = st.revise_pass(s0);
            passes += 1;
            if residual <= cfg.epsilon {
                break;
            }
            if st.backups >= cfg.max_backups {
                break 'outer;
            }
        }
        let graph = GreedyGraph::build(mdp, &st.probs, Some(s0), cfg.eta);
        builds += 1;
        st.backups += graph.q_evals;
        for &m in &graph.members {
            st.mark(m);
            st.mark_row_successors(m);
        }
        if graph.max_residual > cfg.epsilon {
            // Inconsistent states off the single-action graph: revise the
            // whole greedy graph once before searching again.
            for &m in graph.members.iter().rev() {
                if !mdp.is_goal(m) {
                    st.probs[m.0] = backup::max_prob_q(mdp, &st.probs, m);
                    st.backups += 1;
                }
            }
            continue;
        }
        let round = traps::eliminate_traps(mdp, &mut st.probs, &graph, &ecs, cfg.eta);
        if round.lowered == 0 {
            converged = true;
            residual = graph.max_residual;
            break;
        }
        trap_rounds += 1;
    }
    log::debug!("fret: {passes} passes, {builds} graph builds, {trap_rounds} trap rounds");
    Ok(MaxProbReport {
        probs: GoalProbFn(st.probs),
        sweeps: passes,
        residual_final: residual,
        trap_rounds,
        converged,
        wall_time: t0.elapsed(),
        stats: SearchStats {
            states_touched: st.n_touched,
            backups: st.backups,
            greedy_graph_builds: builds,
        },
        touched: st.touched,
    })
}
