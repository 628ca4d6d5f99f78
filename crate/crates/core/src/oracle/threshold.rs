use serde::Serialize;

use super::{enumerate_optimal, Criterion, OracleError, OracleOptions};
use crate::model::ExplicitMdp;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub penalty: f64,
    /// Capped and lexicographic optimal policy sets coincide.
    pub agree: bool,
    pub capped_optimal: usize,
    pub lex_optimal: usize,
    /// The capped set strictly contains the lexicographic one.
    pub capped_superset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub rows: Vec<AgreementRow>,
    /// Smallest grid penalty from which the sets agree at every larger grid
    /// point; `None` if agreement never settles within the grid.
    pub threshold: Option<f64>,
    /// Once the sets first agree they keep agreeing on the rest of the grid.
    pub persists: bool,
}

/// `steps` penalties spaced geometrically from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && steps >= 1);
    if steps == 1 {
        return vec![lo];
    }
    let r = (hi / lo).powf(1.0 / (steps - 1) as f64);
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo * r.powi(i as i32)
            }
        })
        .collect()
}

/// Compares the capped criterion at each grid penalty with the
/// lexicographic criterion, by exhaustive enumeration.
pub fn find_penalty_threshold(
    mdp: &ExplicitMdp,
    grid: &[f64],
    opts: &OracleOptions,
) -> Result<ThresholdReport, OracleError> {
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lex = enumerate_optimal(mdp, Criterion::Lexicographic, opts)?.optimal_set();
    let mut rows = Vec::with_capacity(grid.len());
    for &d in &grid {
        let capped =
            enumerate_optimal(&mdp.with_penalty(d), Criterion::FinitePenalty, opts)?.optimal_set();
        rows.push(AgreementRow {
            penalty: d,
            agree: capped == lex,
            capped_optimal: capped.len(),
            lex_optimal: lex.len(),
            capped_superset: capped.is_superset(&lex) && capped.len() > lex.len(),
        });
    }
    let first = rows.iter().position(|r| r.agree);
    let persists = first.is_none_or(|i| rows[i..].iter().all(|r| r.agree));
    let settled = (0..rows.len()).rev().take_while(|&i| rows[i].agree).last();
    Ok(ThresholdReport {
        threshold: settled.map(|i| rows[i].penalty),
        rows,
        persists,
    })
}
