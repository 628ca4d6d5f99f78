//! Full-sweep value iteration for every problem class: plain SSP backups,
//! penalty-capped backups, goal probabilities with trap elimination, and the
//! staged infinite-penalty solver.
//!
//! Sweeps are Gauss–Seidel over states in id order. A solve never loops
//! forever: `max_sweeps` bounds the work and exhaustion is reported through
//! `converged = false`.

use std::time::Instant;

use thiserror::Error;

use crate::backup::{self, DEFAULT_ETA};
use crate::conditional::{self, ConditionalError};
use crate::model::{ExplicitMdp, GoalProbFn, MdpBuilder, Policy, StateId, ValueFn};
use crate::report::{MaxProbReport, SearchStats, SolveReport};
use crate::traps::{self, EndComponents, GreedyGraph};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum InitTable {
    Zeros,
    Constant(f64),
    Table(Vec<f64>),
}

impl InitTable {
    pub fn materialize(&self, n: usize) -> Vec<f64> {
        match self {
            InitTable::Zeros => vec![0.0; n],
            InitTable::Constant(c) => vec![*c; n],
            InitTable::Table(t) => {
                assert_eq!(t.len(), n, "initial table has wrong length");
                t.clone()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViConfig {
    /// Convergence threshold on the per-sweep residual.
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub init: InitTable,
    /// Greedy-set tolerance for exact ties.
    pub eta: f64,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            epsilon: DEFAULT_EPSILON,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            init: InitTable::Zeros,
            eta: DEFAULT_ETA,
        }
    }
}

impl ViConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        ViConfig {
            epsilon,
            ..Default::default()
        }
    }

    pub fn init(mut self, init: InitTable) -> Self {
        self.init = init;
        self
    }

    pub fn max_sweeps(mut self, n: usize) -> Self {
        self.max_sweeps = n;
        self
    }

    /// Tolerance for deciding which actions are goal-probability greedy when
    /// the probabilities are only known to `epsilon`.
    pub fn coupling_eta(&self) -> f64 {
        self.eta.max(10.0 * self.epsilon)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("penalty must be finite for the capped criterion (got {0})")]
    InfinitePenalty(f64),
    #[error("no start state set")]
    NoStart,
    #[error("epsilon must be positive and max_sweeps at least 1")]
    BadConfig,
    #[error(transparent)]
    Conditional(#[from] ConditionalError),
}

struct SweepOutcome {
    sweeps: usize,
    backups: usize,
    residual: f64,
    converged: bool,
}

/// Gauss–Seidel sweeps over all non-goal states until the largest change in
/// a sweep is at most `eps` and the remaining distance to the fixed point,
/// extrapolated from the ratio of the last two residuals, is too.
fn sweep_to_fixed_point(
    mdp: &ExplicitMdp,
    table: &mut [f64],
    eps: f64,
    max_sweeps: usize,
    mut update: impl FnMut(&ExplicitMdp, &[f64], StateId) -> f64,
) -> SweepOutcome {
    let mut out = SweepOutcome {
        sweeps: 0,
        backups: 0,
        residual: f64::INFINITY,
        converged: false,
    };
    let mut prev = f64::INFINITY;
    while out.sweeps < max_sweeps {
        let mut res: f64 = 0.0;
        for s in mdp.states() {
            if mdp.is_goal(s) {
                continue;
            }
            let new = update(mdp, table, s);
            res = res.max(backup::abs_diff(new, table[s.0]));
            table[s.0] = new;
            out.backups += 1;
        }
        out.sweeps += 1;
        out.residual = res;
        if res == 0.0 || (res <= eps && tail_bound(prev, res) <= eps) {
            out.converged = true;
            break;
        }
        prev = res;
    }
    out
}

/// Geometric-tail estimate of the distance left after a sweep with residual
/// `res`, preceded by one with residual `prev`.
fn tail_bound(prev: f64, res: f64) -> f64 {
    let rho = res / prev;
    if rho < 1.0 {
        res * rho / (1.0 - rho)
    } else {
        f64::INFINITY
    }
}

fn check(cfg: &ViConfig) -> Result<(), SolveError> {
    if cfg.epsilon > 0.0 && cfg.max_sweeps >= 1 {
        Ok(())
    } else {
        Err(SolveError::BadConfig)
    }
}

/// Greedy policy over every non-goal state, ties to the lowest action id.
pub fn greedy_policy(mdp: &ExplicitMdp, values: &[f64], eta: f64) -> Policy {
    mdp.states()
        .filter(|&s| !mdp.is_goal(s))
        .filter_map(|s| backup::greedy_action(mdp, values, s, eta).map(|a| (s, a)))
        .collect()
}

fn cost_init(mdp: &ExplicitMdp, cfg: &ViConfig) -> Vec<f64> {
    let mut v = cfg.init.materialize(mdp.num_states());
    for g in mdp.goals() {
        v[g.0] = 0.0;
    }
    v
}

/// Value iteration with the plain Bellman backup.
///
/// On an MDP with dead ends their values keep growing and the run stops at
/// `max_sweeps` with `converged = false`.
pub fn vi_ssp(mdp: &ExplicitMdp, cfg: &ViConfig) -> Result<SolveReport, SolveError> {
    check(cfg)?;
    let t0 = Instant::now();
    let mut values = cost_init(mdp, cfg);
    let o = sweep_to_fixed_point(mdp, &mut values, cfg.epsilon, cfg.max_sweeps, |m, v, s| {
        backup::min_q(m, v, s)
    });
    if !o.converged {
        log::info!(
            "vi-ssp stopped after {} sweeps, residual {}",
            o.sweeps,
            o.residual
        );
    }
    Ok(finish_cost_report(mdp, values, o, cfg.eta, t0))
}

fn finish_cost_report(
    mdp: &ExplicitMdp,
    values: Vec<f64>,
    o: SweepOutcome,
    eta: f64,
    t0: Instant,
) -> SolveReport {
    let policy = greedy_policy(mdp, &values, eta);
    SolveReport {
        policy,
        sweeps: o.sweeps,
        backups: o.backups,
        residual_final: o.residual,
        converged: o.converged,
        stats: SearchStats {
            states_touched: mdp.num_states(),
            backups: o.backups,
            greedy_graph_builds: 0,
        },
        values: ValueFn(values),
        wall_time: t0.elapsed(),
        ..SolveReport::empty(0)
    }
}

/// Value iteration with the penalty-capped backup `min{D, min_a Q}`.
/// Converges from any initial table; every value ends at or below `D`.
pub fn vi_fsspude(mdp: &ExplicitMdp, cfg: &ViConfig) -> Result<SolveReport, SolveError> {
    check(cfg)?;
    let d = mdp.penalty();
    if !d.is_finite() {
        return Err(SolveError::InfinitePenalty(d));
    }
    let t0 = Instant::now();
    let mut values = cost_init(mdp, cfg);
    let o = sweep_to_fixed_point(mdp, &mut values, cfg.epsilon, cfg.max_sweeps, |m, v, s| {
        backup::min_q(m, v, s).min(d)
    });
    Ok(finish_cost_report(mdp, values, o, cfg.eta, t0))
}

/// Adds a give-up action (new id `num_actions`) of cost `penalty` to every
/// non-goal state, leading surely to the first goal. Plain value iteration
/// on the result solves the capped criterion of the original.
///
/// # Panics
/// If the MDP has no goal.
pub fn give_up_augmented(mdp: &ExplicitMdp, penalty: f64) -> ExplicitMdp {
    let goal = mdp.goals().next().expect("augmentation needs a goal state");
    let mut b = MdpBuilder::new(mdp.num_states(), mdp.num_actions() + 1);
    for g in mdp.goals() {
        b.goal(g.0).unwrap();
    }
    if let Some(s0) = mdp.start() {
        b.start(s0.0).unwrap();
    }
    for s in mdp.states() {
        for row in mdp.rows(s) {
            let outs: Vec<(usize, f64)> = row.outcomes.iter().map(|o| (o.next.0, o.prob)).collect();
            b.add_action(s.0, row.action.0, row.cost, &outs).unwrap();
        }
        if !mdp.is_goal(s) {
            b.add_action(s.0, mdp.num_actions(), penalty, &[(goal.0, 1.0)])
                .unwrap();
        }
    }
    b.build_unchecked()
}

/// Least fixed point of the goal-probability equations, approached from
/// below: 1 on goals, 0 elsewhere, then max-probability sweeps.
pub fn maxprob_vi_from_below(mdp: &ExplicitMdp, epsilon: f64) -> GoalProbFn {
    maxprob_from_below_report(mdp, epsilon, DEFAULT_MAX_SWEEPS).probs
}

pub fn maxprob_from_below_report(
    mdp: &ExplicitMdp,
    epsilon: f64,
    max_sweeps: usize,
) -> MaxProbReport {
    let t0 = Instant::now();
    let mut p: Vec<f64> = mdp
        .goal_mask()
        .iter()
        .map(|&g| if g { 1.0 } else { 0.0 })
        .collect();
    let o = sweep_to_fixed_point(mdp, &mut p, epsilon, max_sweeps, |m, t, s| {
        backup::max_prob_q(m, t, s)
    });
    MaxProbReport {
        probs: GoalProbFn(p),
        sweeps: o.sweeps,
        residual_final: o.residual,
        trap_rounds: 0,
        converged: o.converged,
        wall_time: t0.elapsed(),
        stats: SearchStats {
            states_touched: mdp.num_states(),
            backups: o.backups,
            greedy_graph_builds: 0,
        },
        touched: vec![true; mdp.num_states()],
    }
}

/// Goal-probability value iteration from an arbitrary table in `[0, 1]`.
///
/// Alternates max-probability sweeps to a fixed point with trap
/// elimination on the graph of all `cfg.eta`-greedy actions, until a fixed
/// point has no trap valued above its escape value.
pub fn vi_mp(mdp: &ExplicitMdp, cfg: &ViConfig) -> Result<MaxProbReport, SolveError> {
    check(cfg)?;
    let t0 = Instant::now();
    let mut p: Vec<f64> = cfg
        .init
        .materialize(mdp.num_states())
        .into_iter()
        .map(|x| x.clamp(0.0, 1.0))
        .collect();
    for g in mdp.goals() {
        p[g.0] = 1.0;
    }
    let mut stats = SearchStats {
        states_touched: mdp.num_states(),
        ..Default::default()
    };
    let mut sweeps = 0;
    let mut trap_rounds = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let ecs = EndComponents::of(mdp);
    while sweeps < cfg.max_sweeps {
        let o = sweep_to_fixed_point(
            mdp,
            &mut p,
            cfg.epsilon,
            cfg.max_sweeps - sweeps,
            backup::max_prob_q,
        );
        sweeps += o.sweeps;
        stats.backups += o.backups;
        residual = o.residual;
        if !o.converged {
            break;
        }
        let graph = GreedyGraph::build(mdp, &p, None, cfg.eta);
        stats.greedy_graph_builds += 1;
        stats.backups += graph.q_evals;
        let round = traps::eliminate_traps(mdp, &mut p, &graph, &ecs, cfg.eta);
        if round.lowered == 0 {
            converged = true;
            break;
        }
        trap_rounds += 1;
    }
    Ok(MaxProbReport {
        probs: GoalProbFn(p),
        sweeps,
        residual_final: residual,
        trap_rounds,
        converged,
        wall_time: t0.elapsed(),
        stats,
        touched: vec![true; mdp.num_states()],
    })
}

/// Infinite-penalty value iteration.
///
/// Stage one computes the optimal goal probabilities with [`vi_mp`] from the
/// all-ones table. Stage two solves the conditional MDP built from them with
/// plain value iteration. The returned values are conditional expected
/// costs (0 on dead ends) and the policy covers every non-goal state that
/// can reach a goal, also when the start cannot. The MDP's own penalty is
/// ignored.
pub fn ivi(mdp: &ExplicitMdp, cfg: &ViConfig) -> Result<SolveReport, SolveError> {
    check(cfg)?;
    let t0 = Instant::now();
    let n = mdp.num_states();
    let mp = vi_mp(
        mdp,
        &ViConfig {
            init: InitTable::Constant(1.0),
            ..cfg.clone()
        },
    )?;
    let mut report = SolveReport::empty(n);
    report.sweeps = mp.sweeps;
    report.backups = mp.stats.backups;
    report.stats = mp.stats;
    report.residual_final = mp.residual_final;
    report.converged = mp.converged;
    report.probs = Some(mp.probs.clone());

    if let Some(s0) = mdp.start() {
        report.dead_start = mp.probs[s0] <= conditional::PROB_FLOOR;
    }
    let cond = match conditional::build_conditional(mdp, &mp.probs, cfg.coupling_eta()) {
        Ok(c) => c,
        Err(ConditionalError::Empty) => {
            report.dead_start = mdp.start().is_some();
            report.wall_time = t0.elapsed();
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let (values, inner) = conditional::conditional_values(
        &cond,
        &ViConfig {
            init: InitTable::Zeros,
            ..cfg.clone()
        },
    )?;
    report.policy = conditional::extract_policy(&cond, &values);
    report.values = values;
    report.sweeps += inner.sweeps;
    report.backups += inner.backups;
    report.stats.backups += inner.backups;
    report.residual_final = report.residual_final.max(inner.residual_final);
    report.converged &= inner.converged;
    report.wall_time = t0.elapsed();
    Ok(report)
}
