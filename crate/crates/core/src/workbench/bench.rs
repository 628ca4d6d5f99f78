//! Side-by-side runs of the finite-penalty search and the staged
//! infinite-penalty search.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::format::{parse_mdp, FormatError};
use super::grid::{generate_grid, GridError, GridSpec};
use crate::exact::SolveError;
use crate::model::{ExplicitMdp, Policy};
use crate::oracle::evaluate_policy;
use crate::report::SolveReport;
use crate::search::{lrtdp, shs, BackupMode, Heuristic, HeuristicKind, SearchConfig};

/// Relative tolerance on conditional cost for the policy-agreement check.
pub const AGREE_COST_TOL: f64 = 1e-4;
pub const AGREE_PROB_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub penalty: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Per-run work budget; a run that exhausts it is reported timed out.
    pub max_backups: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            penalty: 500.0,
            epsilon: 1e-6,
            seed: 0,
            max_backups: 20_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub name: String,
    pub mdp: ExplicitMdp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub wall_ms: f64,
    pub backups: usize,
    pub states_touched: usize,
    pub greedy_graph_builds: usize,
    pub converged: bool,
    pub timed_out: bool,
    /// Goal probability of the returned policy at the start.
    pub start_prob: Option<f64>,
    /// Conditional cost of the returned policy at the start.
    pub start_cond_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub states: usize,
    pub lrtdp: RunStats,
    pub shs: RunStats,
    /// Both policies reach the goal with the same probability at the same
    /// conditional cost; `None` when either run failed.
    pub agree: Option<bool>,
    /// shs wall time over lrtdp wall time.
    pub time_ratio: f64,
    pub backup_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
}

/// Fills states the policy reaches but leaves unassigned (where the
/// finite-penalty search chose to give up) with their first action.
fn complete(mdp: &ExplicitMdp, policy: &Policy) -> Policy {
    let mut out = policy.clone();
    let Some(s0) = mdp.start() else { return out };
    let mut seen = vec![false; mdp.num_states()];
    let mut queue = VecDeque::from([s0]);
    seen[s0.0] = true;
    while let Some(s) = queue.pop_front() {
        if mdp.is_goal(s) {
            continue;
        }
        let a = match out.get(s) {
            Some(a) => a,
            None => {
                let a = mdp.applicable(s).next().expect("valid MDP");
                out.assign(s, a);
                a
            }
        };
        for o in &mdp.row(s, a).unwrap().outcomes {
            if !seen[o.next.0] {
                seen[o.next.0] = true;
                queue.push_back(o.next);
            }
        }
    }
    out
}

fn stats(mdp: &ExplicitMdp, r: Result<SolveReport, SolveError>) -> RunStats {
    match r {
        Ok(r) => {
            let eval = mdp
                .start()
                .filter(|_| r.converged && !r.dead_start)
                .zip(evaluate_policy(mdp, &complete(mdp, &r.policy)).ok());
            RunStats {
                wall_ms: r.wall_time.as_secs_f64() * 1e3,
                backups: r.backups,
                states_touched: r.stats.states_touched,
                greedy_graph_builds: r.stats.greedy_graph_builds,
                converged: r.converged,
                timed_out: !r.converged && !r.dead_start,
                start_prob: eval.as_ref().map(|(s0, e)| e.goal_prob[s0.0]),
                start_cond_cost: eval.as_ref().map(|(s0, e)| e.conditional_cost[s0.0]),
            }
        }
        Err(e) => {
            log::error!("bench run failed: {e}");
            RunStats {
                wall_ms: f64::NAN,
                backups: 0,
                states_touched: 0,
                greedy_graph_builds: 0,
                converged: false,
                timed_out: false,
                start_prob: None,
                start_cond_cost: None,
            }
        }
    }
}

/// Finite-penalty LRTDP with the dead-end-aware heuristic at
/// `config.penalty`.
pub fn run_lrtdp(
    mdp: &ExplicitMdp,
    config: &BenchConfig,
    kind: HeuristicKind,
) -> Result<SolveReport, SolveError> {
    let cfg = SearchConfig::new(config.epsilon)
        .seed(config.seed)
        .max_backups(config.max_backups);
    lrtdp(
        &mdp.with_penalty(config.penalty),
        BackupMode::FinitePenalty,
        &Heuristic::new(kind),
        &cfg,
    )
}

/// The staged search with the reachability goal-probability heuristic.
pub fn run_shs(mdp: &ExplicitMdp, config: &BenchConfig) -> Result<SolveReport, SolveError> {
    let cfg = SearchConfig::new(config.epsilon)
        .seed(config.seed)
        .max_backups(config.max_backups);
    shs(
        mdp,
        &Heuristic::new(HeuristicKind::ReachabilityProb),
        &Heuristic::new(HeuristicKind::ZeroCost),
        &cfg,
    )
}

pub fn bench_compare(instances: &[BenchInstance], config: &BenchConfig) -> BenchTable {
    let rows = instances
        .iter()
        .map(|inst| {
            log::info!("bench: {}", inst.name);
            let l = stats(
                &inst.mdp,
                run_lrtdp(&inst.mdp, config, HeuristicKind::DeadendAwareCost),
            );
            let s = stats(&inst.mdp, run_shs(&inst.mdp, config));
            let agree = match (
                l.start_prob,
                l.start_cond_cost,
                s.start_prob,
                s.start_cond_cost,
            ) {
                (Some(lp), Some(lc), Some(sp), Some(sc)) => Some(
                    (lp - sp).abs() <= AGREE_PROB_TOL
                        && (lc - sc).abs() <= AGREE_COST_TOL * lc.abs().max(sc.abs()).max(1.0),
                ),
                _ => None,
            };
            BenchRow {
                instance: inst.name.clone(),
                states: inst.mdp.num_states(),
                time_ratio: s.wall_ms / l.wall_ms,
                backup_ratio: s.backups as f64 / l.backups.max(1) as f64,
                lrtdp: l,
                shs: s,
                agree,
            }
        })
        .collect();
    BenchTable {
        config: config.clone(),
        rows,
    }
}

impl BenchTable {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "penalty={} epsilon={} seed={} max_backups={}",
            self.config.penalty, self.config.epsilon, self.config.seed, self.config.max_backups
        )
        .unwrap();
        writeln!(
            out,
            "{:<24} {:>7} | {:>10} {:>10} {:>8} | {:>10} {:>10} {:>8} {:>6} | {:>8} {:>8} {:>6}",
            "instance",
            "states",
            "lrtdp ms",
            "backups",
            "touched",
            "shs ms",
            "backups",
            "touched",
            "builds",
            "t-ratio",
            "b-ratio",
            "agree"
        )
        .unwrap();
        let mark = |r: &RunStats, v: String| if r.timed_out { format!("{v}*") } else { v };
        for r in &self.rows {
            writeln!(
                out,
                "{:<24} {:>7} | {:>10} {:>10} {:>8} | {:>10} {:>10} {:>8} {:>6} | {:>8.2} {:>8.2} {:>6}",
                r.instance,
                r.states,
                mark(&r.lrtdp, format!("{:.2}", r.lrtdp.wall_ms)),
                r.lrtdp.backups,
                r.lrtdp.states_touched,
                mark(&r.shs, format!("{:.2}", r.shs.wall_ms)),
                r.shs.backups,
                r.shs.states_touched,
                r.shs.greedy_graph_builds,
                r.time_ratio,
                r.backup_ratio,
                match r.agree {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "-",
                }
            )
            .unwrap();
        }
        if self
            .rows
            .iter()
            .any(|r| r.lrtdp.timed_out || r.shs.timed_out)
        {
            writeln!(out, "* timed out (backup budget exhausted)").unwrap();
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("instance {name}: {source}")]
    Format { name: String, source: FormatError },
    #[error("instance {name}: {source}")]
    Grid { name: String, source: GridError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Grid {
        grid: GridSpec,
        #[serde(default)]
        seed: u64,
    },
    File {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    #[serde(flatten)]
    pub source: InstanceSource,
}

/// A benchmark manifest: shared settings plus a list of instances given as
/// grid specs or MDP files (relative to the manifest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub config: BenchConfig,
    pub instances: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, ManifestError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load_instances(&self, base: &Path) -> Result<Vec<BenchInstance>, ManifestError> {
        self.instances
            .iter()
            .map(|e| {
                let mdp = match &e.source {
                    InstanceSource::Grid { grid, seed } => {
                        generate_grid(grid, *seed).map_err(|source| ManifestError::Grid {
                            name: e.name.clone(),
                            source,
                        })?
                    }
                    InstanceSource::File { file } => {
                        let path = base.join(file);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|source| ManifestError::Io { path, source })?;
                        parse_mdp(&text)
                            .map_err(|source| ManifestError::Format {
                                name: e.name.clone(),
                                source,
                            })?
                            .mdp
                    }
                };
                Ok(BenchInstance {
                    name: e.name.clone(),
                    mdp,
                })
            })
            .collect()
    }
}
