//! Random small MDPs for property checks and oracle comparisons.

use rand::seq::index::sample;
use rand::Rng;

use crate::model::{ExplicitMdp, MdpBuilder};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub min_states: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_successors: usize,
    pub cost_range: (f64, f64),
    /// Adds a sink that every start action can fall into, so the goal
    /// cannot be reached surely from the start.
    pub unavoidable_dead_end: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            min_states: 2,
            max_states: 8,
            max_actions: 3,
            max_successors: 3,
            cost_range: (0.1, 10.0),
            unavoidable_dead_end: false,
        }
    }
}

impl RandomSpec {
    pub fn with_dead_end(mut self) -> Self {
        self.unavoidable_dead_end = true;
        self
    }
}

/// State 0 is the start; the last state is a goal, and with probability
/// one half so is the one before it (when there are at least four states).
pub fn random_mdp<R: Rng>(rng: &mut R, spec: &RandomSpec) -> ExplicitMdp {
    let reserve = usize::from(spec.unavoidable_dead_end);
    let n = rng.gen_range(spec.min_states.max(2 + reserve)..=spec.max_states.max(2 + reserve));
    let sink = spec.unavoidable_dead_end.then_some(n - 2);
    let mut goals = vec![n - 1];
    if n >= 4 + reserve && rng.gen_bool(0.5) {
        goals.push(n - 2 - reserve);
    }
    let mut b = MdpBuilder::new(n, spec.max_actions);
    b.start(0).unwrap();
    for &g in &goals {
        b.goal(g).unwrap();
    }
    for s in 0..n {
        if goals.contains(&s) {
            continue;
        }
        if Some(s) == sink {
            b.add_action(s, 0, 1.0, &[(s, 1.0)]).unwrap();
            continue;
        }
        let k = rng.gen_range(1..=spec.max_actions);
        for a in sample(rng, spec.max_actions, k).into_iter() {
            let m = rng.gen_range(1..=spec.max_successors.min(n));
            let succ = sample(rng, n, m).into_vec();
            let mut weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
            let mut outs: Vec<(usize, f64)> = succ.into_iter().zip(weights.drain(..)).collect();
            if s == 0 {
                if let Some(d) = sink {
                    let w = rng.gen_range(0.05..0.5);
                    match outs.iter_mut().find(|o| o.0 == d) {
                        Some(o) => o.1 += w,
                        None => outs.push((d, w)),
                    }
                }
            }
            let total: f64 = outs.iter().map(|x| x.1).sum();
            for o in &mut outs {
                o.1 /= total;
            }
            let cost = rng.gen_range(spec.cost_range.0..spec.cost_range.1);
            b.add_action(s, a, cost, &outs).unwrap();
        }
    }
    b.build().expect("random MDPs are valid")
}
