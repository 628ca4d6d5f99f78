use std::time::Instant;

use super::{fret, lrtdp, BackupMode, Heuristic, SearchConfig};
use crate::conditional::{self, PROB_FLOOR};
use crate::exact::SolveError;
use crate::model::{ExplicitMdp, Policy, ValueFn};
use crate::report::SolveReport;

/// Staged heuristic search for the infinite-penalty criterion.
///
/// Stage one runs [`fret`] for goal probabilities from the start. Stage two
/// builds the conditional MDP over the `cfg.eta`-greedy fragment reachable
/// from the start and solves it with [`lrtdp`]. The policy covers only the
/// states an optimal policy visits from the start.
pub fn shs(
    mdp: &ExplicitMdp,
    prob_heuristic: &Heuristic,
    cost_heuristic: &Heuristic,
    cfg: &SearchConfig,
) -> Result<SolveReport, SolveError> {
    let s0 = mdp.start().ok_or(SolveError::NoStart)?;
    if !cost_heuristic.kind().is_cost() {
        return Err(SolveError::BadConfig);
    }
    let t0 = Instant::now();
    let n = mdp.num_states();
    let mp = fret(mdp, prob_heuristic, cfg)?;
    let mut report = SolveReport::empty(n);
    report.seed = Some(cfg.seed);
    report.stats = mp.stats;
    report.backups = mp.stats.backups;
    report.sweeps = mp.sweeps;
    report.converged = mp.converged;
    report.residual_final = mp.residual_final;
    report.probs = Some(mp.probs.clone());
    if !mp.converged {
        report.wall_time = t0.elapsed();
        return Ok(report);
    }
    if mp.probs[s0] <= PROB_FLOOR {
        report.dead_start = true;
        report.wall_time = t0.elapsed();
        return Ok(report);
    }
    let cond = conditional::build_conditional_rooted(mdp, &mp.probs, cfg.eta, s0)?;
    let remaining = SearchConfig {
        max_backups: cfg.max_backups.saturating_sub(report.backups).max(1),
        ..cfg.clone()
    };
    let inner = lrtdp(&cond.mdp, BackupMode::Ssp, cost_heuristic, &remaining)?;
    let lifted: ValueFn = cond.lift(inner.values.as_slice());
    report.values = lifted;
    report.policy = inner
        .policy
        .iter()
        .map(|(s, a)| (cond.to_base[s.0], a))
        .collect::<Policy>();
    report.backups += inner.backups;
    report.sweeps += inner.sweeps;
    report.stats = report.stats.merge(inner.stats);
    report.stats.states_touched = mp.stats.states_touched.max(inner.stats.states_touched);
    report.converged &= inner.converged;
    report.wall_time = t0.elapsed();
    Ok(report)
}
