//! Solvers for goal-oriented MDPs whose goal may be unreachable from some
//! states: value iteration and heuristic search for the expected-cost,
//! finite-penalty and goal-probability-first criteria, plus a brute-force
//! oracle and instance tooling.

pub mod backup;
pub mod conditional;
pub mod exact;
pub mod fixtures;
pub mod model;
pub mod oracle;
pub mod report;
pub mod search;
pub mod traps;
pub mod workbench;

pub use conditional::{
    build_conditional, build_conditional_rooted, ConditionalError, ConditionalMdp,
};
pub use exact::{
    ivi, maxprob_vi_from_below, vi_fsspude, vi_mp, vi_ssp, InitTable, SolveError, ViConfig,
};
pub use model::{
    detect_dead_ends, validate, ActionId, ActionRow, ExplicitMdp, GoalProbFn, MdpBuilder, MdpError,
    Outcome, Policy, StateId, ValueFn, Violation,
};
pub use oracle::{
    enumerate_optimal, evaluate_policy, find_penalty_threshold, Criterion, LexValue, OracleError,
};
pub use report::{MaxProbReport, SearchStats, SolveReport};
pub use search::{fret, lrtdp, shs, BackupMode, Heuristic, HeuristicKind, SearchConfig};
