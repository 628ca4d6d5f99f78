//! Labeled RTDP (Bonet & Geffner) with a plain or penalty-capped backup.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundHeuristic, Heuristic, SearchConfig};
use crate::backup::{self, DEFAULT_ETA};
use crate::exact::SolveError;
use crate::model::{ActionId, ExplicitMdp, Policy, StateId, ValueFn};
use crate::report::{SearchStats, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackupMode {
    /// Plain Bellman backup; only sound when dead ends are avoidable.
    Ssp,
    /// `min{D, min_a Q}` with the MDP's finite penalty.
    FinitePenalty,
}

struct Lrtdp<'a> {
    mdp: &'a ExplicitMdp,
    heuristic: BoundHeuristic<'a>,
    cap: f64,
    eps: f64,
    values: Vec<f64>,
    touched: Vec<bool>,
    n_touched: usize,
    solved: Vec<bool>,
    backups: usize,
    budget: usize,
}

impl<'a> Lrtdp<'a> {
    fn touch(&mut self, s: StateId) {
        if !self.touched[s.0] {
            self.touched[s.0] = true;
            self.n_touched += 1;
            self.values[s.0] = if self.mdp.is_goal(s) {
                0.0
            } else {
                self.heuristic.value(s).min(self.cap)
            };
            if self.mdp.is_goal(s) {
                self.solved[s.0] = true;
            }
        }
    }

    /// Best capped Q-value and the lowest-id action attaining the raw
    /// minimum. `None` as action means the state gives up (pays the penalty).
    fn evaluate(&mut self, s: StateId) -> (f64, Option<ActionId>) {
        self.backups += 1;
        let mdp = self.mdp;
        for row in mdp.rows(s) {
            for o in &row.outcomes {
                self.touch(o.next);
            }
        }
        let mut best = f64::INFINITY;
        let mut arg = None;
        for row in mdp.rows(s) {
            let q = backup::row_q(row, &self.values);
            if arg.is_none() || q < best - DEFAULT_ETA {
                best = q;
                arg = Some(row.action);
            }
        }
        if best >= self.cap {
            (self.cap, None)
        } else {
            (best, arg)
        }
    }

    fn update(&mut self, s: StateId) -> Option<ActionId> {
        let (v, a) = self.evaluate(s);
        self.values[s.0] = v;
        a
    }

    fn residual(&mut self, s: StateId) -> (f64, Option<ActionId>) {
        let (v, a) = self.evaluate(s);
        (backup::abs_diff(v, self.values[s.0]), a)
    }

    fn sample(&self, s: StateId, a: ActionId, rng: &mut ChaCha8Rng) -> StateId {
        let row = self.mdp.row(s, a).unwrap();
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        for o in &row.outcomes {
            acc += o.prob;
            if r < acc {
                return o.next;
            }
        }
        row.outcomes.last().unwrap().next
    }

    fn check_solved(&mut self, s: StateId) -> bool {
        let mut rv = true;
        let mut open = Vec::new();
        let mut closed = Vec::new();
        let mut listed = std::collections::HashSet::new();
        if !self.solved[s.0] {
            open.push(s);
            listed.insert(s);
        }
        while let Some(s) = open.pop() {
            closed.push(s);
            let (res, a) = self.residual(s);
            if res > self.eps {
                rv = false;
                continue;
            }
            let Some(a) = a else { continue };
            for o in &self.mdp.row(s, a).unwrap().outcomes {
                if !self.solved[o.next.0] && listed.insert(o.next) {
                    open.push(o.next);
                }
            }
            if self.backups >= self.budget {
                return false;
            }
        }
        if rv {
            for s in closed {
                self.solved[s.0] = true;
            }
        } else {
            while let Some(s) = closed.pop() {
                self.update(s);
            }
        }
        rv
    }

    /// Greedy policy over the envelope reachable from `root`.
    fn policy(&mut self, root: StateId) -> Policy {
        let mut policy = Policy::new();
        let mut seen = vec![false; self.mdp.num_states()];
        let mut stack = vec![root];
        seen[root.0] = true;
        while let Some(s) = stack.pop() {
            if self.mdp.is_goal(s) {
                continue;
            }
            let (_, a) = self.evaluate(s);
            self.backups -= 1;
            let a = match a {
                Some(a) => a,
                None => {
                    // gave up; record the cheapest action but do not expand
                    if let Some(a) = backup::greedy_action(self.mdp, &self.values, s, DEFAULT_ETA) {
                        policy.assign(s, a);
                    }
                    continue;
                }
            };
            policy.assign(s, a);
            for o in &self.mdp.row(s, a).unwrap().outcomes {
                if !seen[o.next.0] {
                    seen[o.next.0] = true;
                    stack.push(o.next);
                }
            }
        }
        policy
    }
}

/// Trial-based search from the start state with solved-labeling.
///
/// On return every state of the greedy graph from the start has residual at
/// most `cfg.epsilon`, unless the backup budget ran out (`converged` false).
/// In [`BackupMode::Ssp`] an infinite start value also counts as failure.
pub fn lrtdp(
    mdp: &ExplicitMdp,
    mode: BackupMode,
    heuristic: &Heuristic,
    cfg: &SearchConfig,
) -> Result<SolveReport, SolveError> {
    let s0 = mdp.start().ok_or(SolveError::NoStart)?;
    if !(cfg.epsilon > 0.0) {
        return Err(SolveError::BadConfig);
    }
    let cap = match mode {
        BackupMode::Ssp => f64::INFINITY,
        BackupMode::FinitePenalty => {
            let d = mdp.penalty();
            if !d.is_finite() {
                return Err(SolveError::InfinitePenalty(d));
            }
            d
        }
    };
    let t0 = Instant::now();
    let n = mdp.num_states();
    let mut st = Lrtdp {
        mdp,
        heuristic: heuristic.bind(mdp),
        cap,
        eps: cfg.epsilon,
        values: vec![0.0; n],
        touched: vec![false; n],
        n_touched: 0,
        solved: vec![false; n],
        backups: 0,
        budget: cfg.max_backups,
    };
    let depth_cap = cfg.depth_cap.unwrap_or(10 * n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    st.touch(s0);
    let mut trials = 0usize;
    while !st.solved[s0.0] && st.backups < st.budget {
        trials += 1;
        let mut visited = Vec::new();
        let mut s = s0;
        while !st.solved[s.0] {
            visited.push(s);
            let Some(a) = st.update(s) else { break };
            s = st.sample(s, a, &mut rng);
            if visited.len() >= depth_cap || st.backups >= st.budget {
                break;
            }
        }
        while let Some(s) = visited.pop() {
            if !st.check_solved(s) {
                break;
            }
        }
    }
    let solved = st.solved[s0.0];
    let start_value = st.values[s0.0];
    let policy = st.policy(s0);
    log::debug!(
        "lrtdp: {trials} trials, {} backups, {} states touched",
        st.backups,
        st.n_touched
    );
    let mut values = std::mem::take(&mut st.values);
    for s in mdp.states() {
        if !st.touched[s.0] {
            values[s.0] = if mdp.is_goal(s) {
                0.0
            } else {
                st.heuristic.value(s).min(cap)
            };
        }
    }
    let mut report = SolveReport::empty(n);
    report.values = ValueFn(values);
    report.policy = policy;
    report.sweeps = trials;
    report.backups = st.backups;
    report.residual_final = if solved { 0.0 } else { f64::INFINITY };
    report.converged = solved && start_value.is_finite();
    report.seed = Some(cfg.seed);
    report.wall_time = t0.elapsed();
    report.stats = SearchStats {
        states_touched: st.n_touched,
        backups: st.backups,
        greedy_graph_builds: 0,
    };
    Ok(report)
}
