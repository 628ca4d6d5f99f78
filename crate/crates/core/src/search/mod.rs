//! Heuristic search rooted at the start state: labeled RTDP for cost
//! criteria, FRET for goal probabilities, and the staged combination of the
//! two for the infinite-penalty criterion.

mod fret;
mod heuristic;
mod lrtdp;
mod shs;

pub use fret::fret;
pub use heuristic::{BoundHeuristic, Heuristic, HeuristicKind};
pub use lrtdp::{lrtdp, BackupMode};
pub use shs::shs;

use crate::backup::DEFAULT_ETA;

pub const DEFAULT_MAX_BACKUPS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Residual threshold for labeling a state solved.
    pub epsilon: f64,
    /// Greedy tolerance for goal-probability actions (trap detection and the
    /// conditional MDP).
    pub eta: f64,
    pub seed: u64,
    /// Work budget; exhausting it ends the run unconverged.
    pub max_backups: usize,
    /// Trial length bound; `None` means ten times the number of states.
    pub depth_cap: Option<usize>,
}

impl SearchConfig {
    /// Config with `eta = 10 * epsilon`, the default coupling between the
    /// two stages of the staged search.
    pub fn new(epsilon: f64) -> SearchConfig {
        SearchConfig {
            epsilon,
            eta: (10.0 * epsilon).max(DEFAULT_ETA),
            seed: 0,
            max_backups: DEFAULT_MAX_BACKUPS,
            depth_cap: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn max_backups(mut self, n: usize) -> Self {
        self.max_backups = n;
        self
    }

    pub fn eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig::new(crate::exact::DEFAULT_EPSILON)
    }
}
