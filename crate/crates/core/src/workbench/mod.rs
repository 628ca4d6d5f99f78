//! File formats, instance generators, the Monte Carlo simulator and the
//! benchmark runner.

mod bench;
mod format;
mod grid;
mod random;
mod simulate;

pub use bench::{
    bench_compare, run_lrtdp, run_shs, BenchConfig, BenchInstance, BenchRow, BenchTable,
    InstanceSource, Manifest, ManifestEntry, ManifestError, RunStats,
};
pub use format::{parse_mdp, parse_policy, write_mdp, write_policy, FormatError, NamedMdp};
pub use grid::{
    generate_grid, generate_grid_world, Cell, GridError, GridLayout, GridSpec, GridWorld, MOVES,
};
pub use random::{random_mdp, RandomSpec};
pub use simulate::{simulate, SimError, SimReport};
