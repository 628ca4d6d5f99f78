use std::time::Duration;

use serde::Serialize;

use crate::model::{GoalProbFn, Policy, ValueFn};

/// Work counters of a solver run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    /// Distinct states whose value was read or written.
    pub states_touched: usize,
    pub backups: usize,
    /// Full greedy-graph constructions (trap-elimination checks).
    pub greedy_graph_builds: usize,
}

impl SearchStats {
    pub fn merge(self, other: SearchStats) -> SearchStats {
        SearchStats {
            states_touched: self.states_touched.max(other.states_touched),
            backups: self.backups + other.backups,
            greedy_graph_builds: self.greedy_graph_builds + other.greedy_graph_builds,
        }
    }
}

/// Output of every cost-producing solver.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub values: ValueFn,
    pub probs: Option<GoalProbFn>,
    pub policy: Policy,
    pub sweeps: usize,
    pub backups: usize,
    pub residual_final: f64,
    pub wall_time: Duration,
    pub converged: bool,
    /// Set when the start state cannot reach a goal.
    pub dead_start: bool,
    /// Seed of the exploration generator, for randomized solvers.
    pub seed: Option<u64>,
    pub stats: SearchStats,
}

impl SolveReport {
    pub(crate) fn empty(n: usize) -> SolveReport {
        SolveReport {
            values: ValueFn::filled(n, 0.0),
            probs: None,
            policy: Policy::new(),
            sweeps: 0,
            backups: 0,
            residual_final: 0.0,
            wall_time: Duration::ZERO,
            converged: true,
            dead_start: false,
            seed: None,
            stats: SearchStats::default(),
        }
    }
}

/// Output of the goal-probability solvers.
#[derive(Debug, Clone)]
pub struct MaxProbReport {
    pub probs: GoalProbFn,
    pub sweeps: usize,
    pub residual_final: f64,
    /// Rounds in which at least one trap was lowered.
    pub trap_rounds: usize,
    pub converged: bool,
    pub wall_time: Duration,
    pub stats: SearchStats,
    /// States the solver actually evaluated; all states for full sweeps.
    pub touched: Vec<bool>,
}
