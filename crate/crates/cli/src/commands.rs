use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use deadend_core::backup::DEFAULT_ETA;
use deadend_core::exact::DEFAULT_MAX_SWEEPS;
use deadend_core::oracle::{OracleOptions, ThresholdReport};
use deadend_core::workbench::{
    bench_compare, generate_grid_world, parse_mdp, parse_policy, write_mdp, write_policy, GridSpec,
    Manifest, NamedMdp,
};
use deadend_core::{
    detect_dead_ends, enumerate_optimal, find_penalty_threshold, fret, ivi, lrtdp, shs, vi_fsspude,
    vi_mp, vi_ssp, BackupMode, Criterion, Heuristic, HeuristicKind, MaxProbReport, Policy,
    SearchConfig, SearchStats, SolveReport, ViConfig,
};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::{Algo, OracleCriterion, Status};

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn load_mdp(path: &Path, penalty: Option<f64>) -> Result<NamedMdp, CliError> {
    let mut named = parse_mdp(&read(path)?).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(d) = penalty {
        if !(d > 0.0) {
            return Err(CliError::Usage(format!(
                "penalty must be positive, got {d}"
            )));
        }
        named.mdp = named.mdp.with_penalty(d);
    }
    Ok(named)
}

/// Prints pretty JSON; a closed stdout (e.g. `| head`) is not an error.
fn print(value: &Value) {
    let text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Per-state table keyed by state name, skipping non-finite entries.
fn named_table(named: &NamedMdp, table: &[f64]) -> BTreeMap<String, f64> {
    table
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| (named.state_names[i].clone(), v))
        .collect()
}

fn named_policy(named: &NamedMdp, policy: &Policy) -> BTreeMap<String, String> {
    policy
        .iter()
        .map(|(s, a)| {
            (
                named.state_name(s).to_string(),
                named.action_name(a).to_string(),
            )
        })
        .collect()
}

pub struct SolveArgs {
    pub algo: Algo,
    pub input: PathBuf,
    pub penalty: Option<f64>,
    pub eps: f64,
    pub eta: Option<f64>,
    pub seed: u64,
    pub max_backups: Option<usize>,
    pub out: Option<PathBuf>,
}

/// What every solver reports, cost-based or not.
struct Solved {
    values: Option<Vec<f64>>,
    probs: Option<Vec<f64>>,
    policy: Policy,
    converged: bool,
    dead_start: bool,
    sweeps: usize,
    backups: usize,
    residual: f64,
    wall_ms: f64,
    seed: Option<u64>,
    stats: SearchStats,
    trap_rounds: Option<usize>,
}

impl From<SolveReport> for Solved {
    fn from(r: SolveReport) -> Solved {
        Solved {
            values: Some(r.values.into_inner()),
            probs: r.probs.map(|p| p.into_inner()),
            policy: r.policy,
            converged: r.converged,
            dead_start: r.dead_start,
            sweeps: r.sweeps,
            backups: r.backups,
            residual: r.residual_final,
            wall_ms: r.wall_time.as_secs_f64() * 1e3,
            seed: r.seed,
            stats: r.stats,
            trap_rounds: None,
        }
    }
}

impl From<MaxProbReport> for Solved {
    fn from(r: MaxProbReport) -> Solved {
        Solved {
            values: None,
            probs: Some(r.probs.into_inner()),
            policy: Policy::new(),
            converged: r.converged,
            dead_start: false,
            sweeps: r.sweeps,
            backups: r.stats.backups,
            residual: r.residual_final,
            wall_ms: r.wall_time.as_secs_f64() * 1e3,
            seed: None,
            stats: r.stats,
            trap_rounds: Some(r.trap_rounds),
        }
    }
}

pub fn solve(args: &SolveArgs) -> Result<Status, CliError> {
    if !(args.eps > 0.0) {
        return Err(CliError::Usage(format!(
            "--eps must be positive, got {}",
            args.eps
        )));
    }
    let named = load_mdp(&args.input, args.penalty)?;
    let mdp = &named.mdp;
    let n = mdp.num_states().max(1);
    let vi_cfg = ViConfig {
        epsilon: args.eps,
        eta: args.eta.unwrap_or(DEFAULT_ETA),
        max_sweeps: args
            .max_backups
            .map_or(DEFAULT_MAX_SWEEPS, |b| (b / n).max(1)),
        ..ViConfig::default()
    };
    let mut search_cfg = SearchConfig::new(args.eps).seed(args.seed);
    if let Some(eta) = args.eta {
        search_cfg = search_cfg.eta(eta);
    }
    if let Some(b) = args.max_backups {
        search_cfg = search_cfg.max_backups(b);
    }
    let prob_h = Heuristic::new(HeuristicKind::ReachabilityProb);
    let solved: Solved = match args.algo {
        Algo::ViSsp => vi_ssp(mdp, &vi_cfg)?.into(),
        Algo::ViFsspude => vi_fsspude(mdp, &vi_cfg)?.into(),
        Algo::ViMp => vi_mp(mdp, &vi_cfg)?.into(),
        Algo::Ivi => ivi(mdp, &vi_cfg)?.into(),
        Algo::Lrtdp => {
            let mode = if mdp.penalty().is_finite() {
                BackupMode::FinitePenalty
            } else {
                BackupMode::Ssp
            };
            lrtdp(
                mdp,
                mode,
                &Heuristic::new(HeuristicKind::DeadendAwareCost),
                &search_cfg,
            )?
            .into()
        }
        Algo::Fret => fret(mdp, &prob_h, &search_cfg)?.into(),
        Algo::Shs => shs(
            mdp,
            &prob_h,
            &Heuristic::new(HeuristicKind::ZeroCost),
            &search_cfg,
        )?
        .into(),
    };

    let start = mdp.start();
    let dead_start =
        solved.dead_start || start.is_some_and(|s0| detect_dead_ends(mdp).contains(&s0));
    let at_start = |t: &Option<Vec<f64>>| -> Value {
        match (start, t) {
            (Some(s0), Some(t)) => json!(t[s0.0]),
            _ => Value::Null,
        }
    };
    let mut summary = json!({
        "algo": args.algo.to_possible_value_name(),
        "converged": solved.converged,
        "dead_start": dead_start,
        "start": start.map(|s| named.state_name(s).to_string()),
        "start_value": at_start(&solved.values),
        "start_prob": at_start(&solved.probs),
        "sweeps": solved.sweeps,
        "backups": solved.backups,
        "residual": solved.residual,
        "wall_ms": solved.wall_ms,
        "seed": solved.seed,
        "states_touched": solved.stats.states_touched,
        "greedy_graph_builds": solved.stats.greedy_graph_builds,
        "policy": named_policy(&named, &solved.policy),
    });
    if let Some(rounds) = solved.trap_rounds {
        summary["trap_rounds"] = json!(rounds);
    }
    if let Some(out) = &args.out {
        let doc = write_policy(
            &named,
            &solved.policy,
            solved.values.as_deref(),
            solved.probs.as_deref(),
        );
        write(out, &doc)?;
    }
    print(&summary);
    Ok(if dead_start {
        Status::DeadStart
    } else if !solved.converged {
        Status::Unconverged
    } else {
        Status::Solved
    })
}

trait ValueName {
    fn to_possible_value_name(&self) -> String;
}

impl<T: clap::ValueEnum> ValueName for T {
    fn to_possible_value_name(&self) -> String {
        self.to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }
}

pub fn oracle(
    criterion: OracleCriterion,
    input: &Path,
    penalty: Option<f64>,
) -> Result<Status, CliError> {
    let named = load_mdp(input, penalty)?;
    let mdp = &named.mdp;
    let crit = match criterion {
        OracleCriterion::Cost => Criterion::ExpectedCost,
        OracleCriterion::FinitePenalty => {
            if !mdp.penalty().is_finite() {
                return Err(CliError::Usage(
                    "the finite-penalty criterion needs a finite penalty (file or --penalty)"
                        .into(),
                ));
            }
            Criterion::FinitePenalty
        }
        OracleCriterion::Lex => Criterion::Lexicographic,
    };
    let e = enumerate_optimal(mdp, crit, &OracleOptions::default())?;
    let start = mdp.start();
    let value_at = |t: &[f64]| start.map(|s0| t[s0.0]).filter(|v| !v.is_nan());
    let mut out = json!({
        "criterion": criterion.to_possible_value_name(),
        "penalty": if mdp.penalty().is_finite() { json!(mdp.penalty()) } else { json!("inf") },
        "policies_evaluated": e.policies_evaluated,
        "optimal": e.optimal.iter().map(|p| named_policy(&named, p)).collect::<Vec<_>>(),
        "start_value": value_at(&e.values).map(|v| if v.is_finite() { json!(v) } else { json!("inf") }),
        "values": named_table(&named, &e.values),
    });
    if let Some(p) = &e.probs {
        out["start_prob"] = json!(value_at(p));
        out["probs"] = json!(named_table(&named, p));
    }
    print(&out);
    Ok(Status::Solved)
}

pub fn sweep_penalty(input: &Path, dmin: f64, dmax: f64, steps: usize) -> Result<Status, CliError> {
    if !(dmin > 0.0 && dmax >= dmin && dmax.is_finite() && steps >= 1) {
        return Err(CliError::Usage(format!(
            "need 0 < dmin <= dmax < inf and steps >= 1 (got {dmin}, {dmax}, {steps})"
        )));
    }
    let named = load_mdp(input, None)?;
    let grid = deadend_core::oracle::geometric_grid(dmin, dmax, steps);
    let report: ThresholdReport =
        find_penalty_threshold(&named.mdp, &grid, &OracleOptions::default())?;
    print(&serde_json::to_value(&report).expect("report serializes"));
    Ok(Status::Solved)
}

pub fn simulate(
    input: &Path,
    policy: &Path,
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<Status, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let named = load_mdp(input, None)?;
    let pi = parse_policy(&named, &read(policy)?).map_err(|source| CliError::Format {
        path: policy.to_path_buf(),
        source,
    })?;
    let report = deadend_core::workbench::simulate(&named.mdp, &pi, trials, horizon, seed)?;
    print(&serde_json::to_value(&report).expect("report serializes"));
    Ok(Status::Solved)
}

pub fn gen_grid(spec: &Path, seed: u64, out: &Path) -> Result<Status, CliError> {
    let spec: GridSpec = read_json(spec)?;
    let world = generate_grid_world(&spec, seed)?;
    write(out, &write_mdp(&world.named))?;
    print(&json!({
        "states": world.named.mdp.num_states(),
        "pits": world.layout.pits.len(),
        "out": out,
    }));
    Ok(Status::Solved)
}

pub fn bench(manifest: &Path, out: &Path) -> Result<Status, CliError> {
    let m = Manifest::parse(&read(manifest)?)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let instances = m.load_instances(base)?;
    let table = bench_compare(&instances, &m.config);
    fs::create_dir_all(out).map_err(|source| CliError::Write {
        path: out.to_path_buf(),
        source,
    })?;
    let text = table.to_text();
    write(&out.join("bench.txt"), &text)?;
    write(
        &out.join("bench.json"),
        &serde_json::to_string_pretty(&table).expect("table serializes"),
    )?;
    let _ = write!(std::io::stdout().lock(), "{text}");
    let timed_out = table
        .rows
        .iter()
        .any(|r| r.lrtdp.timed_out || r.shs.timed_out);
    Ok(if timed_out {
        Status::Unconverged
    } else {
        Status::Solved
    })
}
