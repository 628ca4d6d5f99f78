//! Instance families shared by the criterion benchmarks.

use deadend_core::workbench::{generate_grid, random_mdp, GridSpec, RandomSpec};
use deadend_core::ExplicitMdp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Square slippery grid with one hazard row and a few random pits.
pub fn hazard_grid(side: usize, penalty: f64) -> ExplicitMdp {
    let mut spec = GridSpec::open(side, side);
    spec.p_slip = 0.2;
    spec.hazard_rows = vec![side / 2];
    spec.random_pits = side / 2;
    generate_grid(&spec, 7)
        .expect("benchmark grid spec is valid")
        .with_penalty(penalty)
}

/// Square slippery grid without dead ends.
pub fn open_grid(side: usize) -> ExplicitMdp {
    let mut spec = GridSpec::open(side, side);
    spec.p_slip = 0.2;
    generate_grid(&spec, 0).expect("benchmark grid spec is valid")
}

/// Seeded random MDPs with an unavoidable dead end.
pub fn random_dead_end(count: usize, seed: u64) -> Vec<ExplicitMdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomSpec {
        min_states: 8,
        max_states: 12,
        ..RandomSpec::default()
    }
    .with_dead_end();
    (0..count).map(|_| random_mdp(&mut rng, &spec)).collect()
}
