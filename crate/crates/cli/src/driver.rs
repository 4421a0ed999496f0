//! Timed, thread-parallel study drivers.
//!
//! Grid cells and independent searches run concurrently; selection folds the
//! cell results in the same fixed order as the sequential core routines, so
//! a driver study is bit-identical to its sequential counterpart (plus
//! wall-clock fields).

use std::time::Instant;

use anyhow::{anyhow, Result};
use kronspec_core::baseline_iid::{bic_iid, extract_edges_iid, find_no_edge_lambda_iid, fit_iid};
use kronspec_core::eval::{
    mc_instance, mc_summarize, roc_pool, row_from_edges, EstimatorKind, McReport, McRow, McScenario, RocCell,
    SelectionRule,
};
use kronspec_core::flipflop::{extract_edges, fit_with, FitResult, FlipFlopConfig};
use kronspec_core::model_select::{bic_cached, find_no_edge_lambda_cached, BicScore, LambdaAxis, LambdaGrid};
use kronspec_core::rng::derive_seed;
use kronspec_core::spectral::{dft, plan_windows, MatrixSeries, SpectralStats};
use kronspec_core::synth::{generate_series, GenSeed, GroundTruth};
use rayon::prelude::*;

/// Evaluates every `(lambda_p, lambda_q)` cell concurrently, in the same
/// logical order the sequential search uses (descending q, descending p).
fn scan_cells<R: Send>(
    p_values: &[f64],
    q_values: &[f64],
    cell: impl Fn(f64, f64) -> Option<R> + Sync,
) -> Vec<Option<R>> {
    let order: Vec<(f64, f64)> = q_values
        .iter()
        .rev()
        .flat_map(|&lq| p_values.iter().rev().map(move |&lp| (lp, lq)))
        .collect();
    order.into_par_iter().map(|(lp, lq)| cell(lp, lq)).collect()
}

/// Parallel BIC grid search; selection semantics identical to the core
/// sequential search.
pub fn grid_search_parallel(
    stats: &SpectralStats,
    alpha: f64,
    grid: &LambdaGrid,
    base: &FlipFlopConfig,
) -> Result<(f64, f64, FitResult, Vec<BicScore>, usize)> {
    let cells = scan_cells(&grid.p_values, &grid.q_values, |lambda_p, lambda_q| {
        let config = FlipFlopConfig {
            lambda_p,
            lambda_q,
            alpha,
            ..*base
        };
        let fitted = fit_with(stats, &config).ok()?;
        let mut score = bic_cached(&fitted, stats).ok()?;
        score.lambda_p = lambda_p;
        score.lambda_q = lambda_q;
        Some((score, fitted))
    });
    let mut scores = Vec::new();
    let mut best: Option<(BicScore, FitResult)> = None;
    let mut skipped = 0usize;
    for entry in cells {
        let Some((score, fitted)) = entry else {
            skipped += 1;
            continue;
        };
        scores.push(score);
        let better = match &best {
            None => true,
            Some((incumbent, _)) => {
                (score.converged && !incumbent.converged)
                    || (score.converged == incumbent.converged && score.value < incumbent.value)
            }
        };
        if better {
            best = Some((score, fitted));
        }
    }
    let (score, fitted) = best.ok_or_else(|| anyhow!("all grid cells failed"))?;
    Ok((score.lambda_p, score.lambda_q, fitted, scores, skipped))
}

fn proposed_run(scenario: &McScenario, run: usize, truth: &GroundTruth, stats: &SpectralStats) -> Result<McRow> {
    let (lp, lq) = rayon::join(
        || find_no_edge_lambda_cached(stats, LambdaAxis::P, 0.0, &scenario.base),
        || find_no_edge_lambda_cached(stats, LambdaAxis::Q, 0.0, &scenario.base),
    );
    let grid = LambdaGrid::from_no_edge(lp?, lq?, scenario.grid_points)?;
    match scenario.selection {
        SelectionRule::Bic => {
            let (best_p, best_q, fitted, _, _) = grid_search_parallel(stats, scenario.base.alpha, &grid, &scenario.base)?;
            let edges = extract_edges(&fitted);
            Ok(row_from_edges(&edges, truth, run, best_p, best_q))
        }
        SelectionRule::OracleF1 => {
            let rows = scan_cells(&grid.p_values, &grid.q_values, |lambda_p, lambda_q| {
                let config = FlipFlopConfig {
                    lambda_p,
                    lambda_q,
                    ..scenario.base
                };
                let fitted = fit_with(stats, &config).ok()?;
                let edges = extract_edges(&fitted);
                Some(row_from_edges(&edges, truth, run, lambda_p, lambda_q))
            });
            let mut best: Option<McRow> = None;
            for row in rows.into_iter().flatten() {
                if best.as_ref().map_or(true, |b| row.f1 > b.f1) {
                    best = Some(row);
                }
            }
            best.ok_or_else(|| anyhow!("all oracle scan cells failed"))
        }
    }
}

fn baseline_run(scenario: &McScenario, run: usize, truth: &GroundTruth, series: &MatrixSeries) -> Result<McRow> {
    let (lp, lq) = rayon::join(
        || find_no_edge_lambda_iid(series, LambdaAxis::P, 0.0, &scenario.base),
        || find_no_edge_lambda_iid(series, LambdaAxis::Q, 0.0, &scenario.base),
    );
    let grid = LambdaGrid::from_no_edge(lp?, lq?, scenario.grid_points)?;
    let rows = scan_cells(&grid.p_values, &grid.q_values, |lambda_p, lambda_q| {
        let fitted = fit_iid(series, lambda_p, lambda_q, &scenario.base).ok()?;
        let edges = extract_edges_iid(&fitted);
        let row = row_from_edges(&edges, truth, run, lambda_p, lambda_q);
        let key = match scenario.selection {
            SelectionRule::Bic => -bic_iid(&fitted, series).ok()?,
            SelectionRule::OracleF1 => row.f1,
        };
        Some((key, row))
    });
    let mut best: Option<(f64, McRow)> = None;
    for (key, row) in rows.into_iter().flatten() {
        if best.as_ref().map_or(true, |(k, _)| key > *k) {
            best = Some((key, row));
        }
    }
    best.map(|(_, row)| row).ok_or_else(|| anyhow!("all baseline cells failed"))
}

/// One timed Monte-Carlo replicate with intra-run parallelism. Selection is
/// bit-identical to `kronspec_core::eval::mc_run_once`; only `wall_secs`
/// differs.
pub fn run_once_timed(scenario: &McScenario, run: usize) -> Result<McRow> {
    let start = Instant::now();
    let (truth, dfts, plan) = mc_instance(scenario, run).map_err(|e| anyhow!("{e}"))?;
    let mut row = match scenario.estimator {
        EstimatorKind::Proposed => {
            let stats = SpectralStats::new(&dfts, &plan).map_err(|e| anyhow!("{e}"))?;
            proposed_run(scenario, run, &truth, &stats)?
        }
        EstimatorKind::IidBaseline => {
            let series = generate_series(
                &truth,
                scenario.n,
                GenSeed {
                    seed: derive_seed(scenario.master_seed, 2 * run as u64 + 1),
                    family: scenario.noise,
                },
            )
            .map_err(|e| anyhow!("{e}"))?;
            baseline_run(scenario, run, &truth, &series)?
        }
    };
    row.wall_secs = start.elapsed().as_secs_f64();
    Ok(row)
}

/// Runs the whole study: replicates sequential (each internally parallel and
/// individually timed), aggregation by run index.
pub fn benchmark(scenario: &McScenario) -> Result<McReport> {
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for run in 0..scenario.runs {
        match run_once_timed(scenario, run) {
            Ok(row) => rows.push(row),
            Err(err) => {
                eprintln!("warning: run {run} failed: {err}");
                failures += 1;
            }
        }
    }
    if rows.is_empty() {
        return Err(anyhow!("all {} runs failed", scenario.runs));
    }
    let summary = mc_summarize(&rows, failures);
    Ok(McReport {
        rows,
        failures,
        summary,
    })
}

/// Multi-run pooled ROC sweeps for the proposed estimator and the i.i.d.
/// baseline on shared per-run datasets. Grids are derived from the no-edge
/// levels of the first run of each method.
pub struct RocStudy {
    pub proposed: Vec<RocCell>,
    pub baseline: Vec<RocCell>,
    pub skipped: usize,
}

pub fn roc_study(scenario: &McScenario, points_per_axis: usize, span_decades: f64) -> Result<RocStudy> {
    let mut proposed_sweeps = Vec::new();
    let mut baseline_sweeps = Vec::new();
    let mut skipped = 0usize;
    let mut grids: Option<(LambdaGrid, LambdaGrid)> = None;
    for run in 0..scenario.runs {
        let (truth, dfts, plan) = mc_instance(scenario, run).map_err(|e| anyhow!("{e}"))?;
        let series = generate_series(
            &truth,
            scenario.n,
            GenSeed {
                seed: derive_seed(scenario.master_seed, 2 * run as u64 + 1),
                family: scenario.noise,
            },
        )
        .map_err(|e| anyhow!("{e}"))?;
        let stats = SpectralStats::new(&dfts, &plan).map_err(|e| anyhow!("{e}"))?;
        if grids.is_none() {
            // wide grids spanning several decades below the no-edge levels
            let (lp, lq) = rayon::join(
                || find_no_edge_lambda_cached(&stats, LambdaAxis::P, 0.0, &scenario.base),
                || find_no_edge_lambda_cached(&stats, LambdaAxis::Q, 0.0, &scenario.base),
            );
            let (lp, lq) = (lp?, lq?);
            let (blp, blq) = rayon::join(
                || find_no_edge_lambda_iid(&series, LambdaAxis::P, 0.0, &scenario.base),
                || find_no_edge_lambda_iid(&series, LambdaAxis::Q, 0.0, &scenario.base),
            );
            let (blp, blq) = (blp?, blq?);
            let span = 10f64.powf(span_decades);
            let proposed_grid = LambdaGrid::explicit(
                kronspec_core::model_select::log_spaced(lp / span, lp, points_per_axis)?,
                kronspec_core::model_select::log_spaced(lq / span, lq, points_per_axis)?,
            )?;
            let baseline_grid = LambdaGrid::explicit(
                kronspec_core::model_select::log_spaced(blp / span, blp, points_per_axis)?,
                kronspec_core::model_select::log_spaced(blq / span, blq, points_per_axis)?,
            )?;
            grids = Some((proposed_grid, baseline_grid));
        }
        let (proposed_grid, baseline_grid) = grids.as_ref().unwrap();

        let cells = scan_cells(&proposed_grid.p_values, &proposed_grid.q_values, |lambda_p, lambda_q| {
            let config = FlipFlopConfig {
                lambda_p,
                lambda_q,
                ..scenario.base
            };
            let fitted = fit_with(&stats, &config).ok()?;
            let edges = extract_edges(&fitted);
            let row = row_from_edges(&edges, &truth, run, lambda_p, lambda_q);
            Some(RocCell {
                lambda_p,
                lambda_q,
                omega: (
                    kronspec_core::eval::confusion(&edges, &truth, kronspec_core::eval::Scope::Omega).fpr(),
                    kronspec_core::eval::confusion(&edges, &truth, kronspec_core::eval::Scope::Omega).tpr(),
                ),
                gamma: (
                    kronspec_core::eval::confusion(&edges, &truth, kronspec_core::eval::Scope::Gamma).fpr(),
                    kronspec_core::eval::confusion(&edges, &truth, kronspec_core::eval::Scope::Gamma).tpr(),
                ),
                combined: (row.fpr, row.tpr),
            })
        });
        if cells.iter().any(Option::is_none) {
            skipped += cells.iter().filter(|c| c.is_none()).count();
        }
        proposed_sweeps.push(cells.into_iter().flatten().collect::<Vec<_>>());

        let cells = scan_cells(&baseline_grid.p_values, &baseline_grid.q_values, |lambda_p, lambda_q| {
            let fitted = fit_iid(&series, lambda_p, lambda_q, &scenario.base).ok()?;
            let edges = extract_edges_iid(&fitted);
            let row = row_from_edges(&edges, &truth, run, lambda_p, lambda_q);
            Some(RocCell {
                lambda_p,
                lambda_q,
                omega: (
                    kronspec_core::eval::confusion(&edges, &truth, kronspec_core::eval::Scope::Omega).fpr(),
                    kronspec_core::eval::confusion(&edges, &truth, kronspec_core::eval::Scope::Omega).tpr(),
                ),
                gamma: (
                    kronspec_core::eval::confusion(&edges, &truth, kronspec_core::eval::Scope::Gamma).fpr(),
                    kronspec_core::eval::confusion(&edges, &truth, kronspec_core::eval::Scope::Gamma).tpr(),
                ),
                combined: (row.fpr, row.tpr),
            })
        });
        if cells.iter().any(Option::is_none) {
            skipped += cells.iter().filter(|c| c.is_none()).count();
        }
        baseline_sweeps.push(cells.into_iter().flatten().collect::<Vec<_>>());
    }
    Ok(RocStudy {
        proposed: roc_pool(&proposed_sweeps).map_err(|e| anyhow!("{e}"))?,
        baseline: roc_pool(&baseline_sweeps).map_err(|e| anyhow!("{e}"))?,
        skipped,
    })
}

/// Timed single fit used by the `fit`/`select` commands.
pub fn timed_fit(dfts: &kronspec_core::spectral::DftStack, plan: &kronspec_core::spectral::SpectralPlan, config: &FlipFlopConfig) -> Result<(FitResult, f64)> {
    let start = Instant::now();
    let stats = SpectralStats::new(dfts, plan).map_err(|e| anyhow!("{e}"))?;
    let mut result = fit_with(&stats, config).map_err(|e| anyhow!("{e}"))?;
    let secs = start.elapsed().as_secs_f64();
    result.wall_secs = secs;
    Ok((result, secs))
}

/// Convenience wrapper building the plan and DFT from a series.
pub fn prepare(series: &MatrixSeries, m_freq: usize) -> Result<(kronspec_core::spectral::DftStack, kronspec_core::spectral::SpectralPlan)> {
    let plan = plan_windows(series.n(), m_freq).map_err(|e| anyhow!("{e}"))?;
    let stack = dft(series);
    Ok((stack, plan))
}
