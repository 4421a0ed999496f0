//! Edge-recovery metrics, Monte-Carlo studies, ROC sweeps, empirical rate
//! checks and the population-minimizer oracle.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::admm::AdmmConfig;
use crate::baseline_iid::{extract_edges_iid, fit_iid, find_no_edge_lambda_iid, bic_iid};
use crate::error::{Error, Result};
use crate::flipflop::{extract_edges, fit, fit_with, FlipFlopConfig, PopulationStats};
use crate::fmath;
use crate::linalg::{inv_pd_herm, CMat, HermMatrix, Mat};
use crate::model_select::{find_no_edge_lambda_cached, grid_search_cached, LambdaAxis, LambdaGrid};
use crate::rng::derive_seed;
use crate::spectral::{dft, plan_windows, DftStack, SpectralPlan, SpectralStats};
use crate::synth::{generate_series, GenSeed, GroundTruth, NoiseFamily, SynthParams};

/// Estimated edge sets of one fit: weighted factor graphs plus the combined
/// `pq`-node graph under the Kronecker conditional-independence rules.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeReport {
    pub p: usize,
    pub q: usize,
    /// Row-graph edges `(i, j, |omega_ij|)`, `i < j`.
    pub p_edges: Vec<(usize, usize, f64)>,
    /// Column-graph edges `(i, j, |Phi^(ij)| group norm)`, `i < j`.
    pub q_edges: Vec<(usize, usize, f64)>,
    /// Combined-graph edges between cell nodes `i * q + j`.
    pub combined: BTreeSet<(usize, usize)>,
}

impl EdgeReport {
    pub fn p_support(&self) -> BTreeSet<(usize, usize)> {
        self.p_edges.iter().map(|&(i, j, _)| (i, j)).collect()
    }

    pub fn q_support(&self) -> BTreeSet<(usize, usize)> {
        self.q_edges.iter().map(|&(i, j, _)| (i, j)).collect()
    }
}

/// Combined graph on `p * q` nodes (cell `(i, j)` is node `i * q + j`):
/// cells `(i, j)` and `(k, l)` are adjacent iff
/// (i) `i != k`, `j != l` and both `{i,k}` and `{j,l}` are factor edges,
/// (ii) `j == l` and `{i,k}` is a row edge, or
/// (iii) `i == k` and `{j,l}` is a column edge.
pub fn kpg_edges(
    s_p: &BTreeSet<(usize, usize)>,
    s_q: &BTreeSet<(usize, usize)>,
    p: usize,
    q: usize,
) -> BTreeSet<(usize, usize)> {
    let has_p = |a: usize, b: usize| s_p.contains(&(a.min(b), a.max(b)));
    let has_q = |a: usize, b: usize| s_q.contains(&(a.min(b), a.max(b)));
    let mut edges = BTreeSet::new();
    let nodes = p * q;
    for a in 0..nodes {
        let (i, j) = (a / q, a % q);
        for b in (a + 1)..nodes {
            let (k, l) = (b / q, b % q);
            let adjacent = if i != k && j != l {
                has_p(i, k) && has_q(j, l)
            } else if i != k {
                has_p(i, k)
            } else {
                has_q(j, l)
            };
            if adjacent {
                edges.insert((a, b));
            }
        }
    }
    edges
}

/// Edge-recovery counts over unordered node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Counts agreement of two edge sets over all `C(nodes, 2)` pairs.
    pub fn from_sets(est: &BTreeSet<(usize, usize)>, truth: &BTreeSet<(usize, usize)>, nodes: usize) -> Self {
        let mut c = Confusion {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        for i in 0..nodes {
            for j in (i + 1)..nodes {
                match (est.contains(&(i, j)), truth.contains(&(i, j))) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                    (false, false) => c.tn += 1,
                }
            }
        }
        c
    }

    pub fn tpr(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn tnr(&self) -> f64 {
        if self.tn + self.fp == 0 {
            1.0
        } else {
            self.tn as f64 / (self.tn + self.fp) as f64
        }
    }

    /// False positive rate `1 - TNR`.
    pub fn fpr(&self) -> f64 {
        1.0 - self.tnr()
    }

    /// `F1 = 2 TP / (2 TP + FP + FN)`; defined as 1 when all three vanish.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Which graph a metric is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Omega,
    Gamma,
    Combined,
}

/// True combined edge set of a ground-truth model.
pub fn combined_truth(truth: &GroundTruth) -> BTreeSet<(usize, usize)> {
    kpg_edges(&truth.s_p, &truth.s_q, truth.p(), truth.q())
}

/// Edge-recovery confusion of an estimate against the truth on one scope.
pub fn confusion(est: &EdgeReport, truth: &GroundTruth, scope: Scope) -> Confusion {
    match scope {
        Scope::Omega => Confusion::from_sets(&est.p_support(), &truth.s_p, truth.p()),
        Scope::Gamma => Confusion::from_sets(&est.q_support(), &truth.s_q, truth.q()),
        Scope::Combined => Confusion::from_sets(&est.combined, &combined_truth(truth), truth.p() * truth.q()),
    }
}

/// Which estimator a study runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Proposed,
    IidBaseline,
}

/// How penalties are selected within each run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    Bic,
    /// Scan the grid and keep the cell with the best combined-graph F1
    /// against the known truth (an oracle; reported for reference).
    OracleF1,
}

/// One Monte-Carlo study configuration.
#[derive(Debug, Clone)]
pub struct McScenario {
    pub params: SynthParams,
    pub n: usize,
    pub num_windows: usize,
    pub runs: usize,
    pub estimator: EstimatorKind,
    pub selection: SelectionRule,
    pub noise: NoiseFamily,
    pub master_seed: u64,
    /// Grid points per penalty axis.
    pub grid_points: usize,
    /// Solver constants; the penalties and `alpha` fields seed every cell.
    pub base: FlipFlopConfig,
}

impl McScenario {
    pub fn new(n: usize, num_windows: usize, runs: usize, master_seed: u64) -> Self {
        Self {
            params: SynthParams::default(),
            n,
            num_windows,
            runs,
            estimator: EstimatorKind::Proposed,
            selection: SelectionRule::Bic,
            noise: NoiseFamily::Gaussian,
            master_seed,
            grid_points: 10,
            base: FlipFlopConfig::new(0.0, 0.0),
        }
    }
}

/// Per-run outcome of a Monte-Carlo study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRow {
    pub run: usize,
    pub f1: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub omega_f1: f64,
    pub gamma_f1: f64,
    pub lambda_p: f64,
    pub lambda_q: f64,
    /// Filled by timing drivers; zero when untimed.
    pub wall_secs: f64,
}

/// Mean and sample deviation summary of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSummary {
    pub runs: usize,
    pub failures: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub tpr_mean: f64,
    pub tpr_std: f64,
    pub fpr_mean: f64,
    pub fpr_std: f64,
    pub wall_mean: f64,
    pub wall_std: f64,
}

/// Full study output.
#[derive(Debug, Clone)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub failures: usize,
    pub summary: McSummary,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, fmath::sqrt(var))
}

/// Aggregates per-run rows into the summary table row.
pub fn mc_summarize(rows: &[McRow], failures: usize) -> McSummary {
    let (f1_mean, f1_std) = mean_std(rows.iter().map(|r| r.f1));
    let (tpr_mean, tpr_std) = mean_std(rows.iter().map(|r| r.tpr));
    let (fpr_mean, fpr_std) = mean_std(rows.iter().map(|r| r.fpr));
    let (wall_mean, wall_std) = mean_std(rows.iter().map(|r| r.wall_secs));
    McSummary {
        runs: rows.len(),
        failures,
        f1_mean,
        f1_std,
        tpr_mean,
        tpr_std,
        fpr_mean,
        fpr_std,
        wall_mean,
        wall_std,
    }
}

/// Draws the replicate-`run` truth and data for a scenario.
pub fn mc_instance(scenario: &McScenario, run: usize) -> Result<(GroundTruth, DftStack, SpectralPlan)> {
    let truth = GroundTruth::generate(derive_seed(scenario.master_seed, 2 * run as u64), &scenario.params)?;
    let series = generate_series(
        &truth,
        scenario.n,
        GenSeed {
            seed: derive_seed(scenario.master_seed, 2 * run as u64 + 1),
            family: scenario.noise,
        },
    )?;
    let plan = plan_windows(scenario.n, scenario.num_windows)?;
    let dfts = dft(&series);
    Ok((truth, dfts, plan))
}

/// Scores an edge report against the truth on all scopes, as one study row.
pub fn row_from_edges(
    edges: &EdgeReport,
    truth: &GroundTruth,
    run: usize,
    lambda_p: f64,
    lambda_q: f64,
) -> McRow {
    let combined = confusion(edges, truth, Scope::Combined);
    McRow {
        run,
        f1: combined.f1(),
        tpr: combined.tpr(),
        fpr: combined.fpr(),
        omega_f1: confusion(edges, truth, Scope::Omega).f1(),
        gamma_f1: confusion(edges, truth, Scope::Gamma).f1(),
        lambda_p,
        lambda_q,
        wall_secs: 0.0,
    }
}

/// Runs one Monte-Carlo replicate end to end: draw truth and data, build the
/// penalty grid from the no-edge heuristic, select by BIC or by oracle F1,
/// and score the selected edges.
pub fn mc_run_once(scenario: &McScenario, run: usize) -> Result<McRow> {
    let (truth, dfts, plan) = mc_instance(scenario, run)?;
    match scenario.estimator {
        EstimatorKind::Proposed => {
            let stats = SpectralStats::new(&dfts, &plan)?;
            let lambda_psm = find_no_edge_lambda_cached(&stats, LambdaAxis::P, 0.0, &scenario.base)?;
            let lambda_qsm = find_no_edge_lambda_cached(&stats, LambdaAxis::Q, 0.0, &scenario.base)?;
            let grid = LambdaGrid::from_no_edge(lambda_psm, lambda_qsm, scenario.grid_points)?;
            match scenario.selection {
                SelectionRule::Bic => {
                    let gs = grid_search_cached(&stats, scenario.base.alpha, &grid, &scenario.base)?;
                    let edges = extract_edges(&gs.best_fit);
                    Ok(row_from_edges(&edges, &truth, run, gs.best_lambda_p, gs.best_lambda_q))
                }
                SelectionRule::OracleF1 => {
                    let mut best: Option<McRow> = None;
                    let mut attempts = 0usize;
                    for &lambda_q in grid.q_values.iter().rev() {
                        for &lambda_p in grid.p_values.iter().rev() {
                            attempts += 1;
                            let config = FlipFlopConfig {
                                lambda_p,
                                lambda_q,
                                ..scenario.base
                            };
                            let Ok(fitted) = fit_with(&stats, &config) else {
                                continue;
                            };
                            let edges = extract_edges(&fitted);
                            let row = row_from_edges(&edges, &truth, run, lambda_p, lambda_q);
                            if best.as_ref().map_or(true, |b| row.f1 > b.f1) {
                                best = Some(row);
                            }
                        }
                    }
                    best.ok_or(Error::AllCellsFailed {
                        context: "mc_run_once oracle scan",
                        attempts,
                    })
                }
            }
        }
        EstimatorKind::IidBaseline => {
            // the baseline sees the same time series
            let series = generate_series(
                &truth,
                scenario.n,
                GenSeed {
                    seed: derive_seed(scenario.master_seed, 2 * run as u64 + 1),
                    family: scenario.noise,
                },
            )?;
            let lambda_psm = find_no_edge_lambda_iid(&series, LambdaAxis::P, 0.0, &scenario.base)?;
            let lambda_qsm = find_no_edge_lambda_iid(&series, LambdaAxis::Q, 0.0, &scenario.base)?;
            let grid = LambdaGrid::from_no_edge(lambda_psm, lambda_qsm, scenario.grid_points)?;
            let mut best: Option<(f64, McRow)> = None;
            let mut attempts = 0usize;
            for &lambda_q in grid.q_values.iter().rev() {
                for &lambda_p in grid.p_values.iter().rev() {
                    attempts += 1;
                    let Ok(fitted) = fit_iid(&series, lambda_p, lambda_q, &scenario.base) else {
                        continue;
                    };
                    let edges = extract_edges_iid(&fitted);
                    let row = row_from_edges(&edges, &truth, run, lambda_p, lambda_q);
                    let key = match scenario.selection {
                        // minimize BIC / maximize F1, through a common
                        // "larger is better" key
                        SelectionRule::Bic => -bic_iid(&fitted, &series)?,
                        SelectionRule::OracleF1 => row.f1,
                    };
                    if best.as_ref().map_or(true, |(k, _)| key > *k) {
                        best = Some((key, row));
                    }
                }
            }
            best.map(|(_, row)| row).ok_or(Error::AllCellsFailed {
                context: "mc_run_once baseline scan",
                attempts,
            })
        }
    }
}

/// Sequential Monte-Carlo driver. Replicates use derived seeds, so any
/// parallel driver that computes the same rows yields the same report.
pub fn monte_carlo(scenario: &McScenario) -> Result<McReport> {
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for run in 0..scenario.runs {
        match mc_run_once(scenario, run) {
            Ok(row) => rows.push(row),
            Err(_) => failures += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::AllCellsFailed {
            context: "monte_carlo",
            attempts: scenario.runs,
        });
    }
    let summary = mc_summarize(&rows, failures);
    Ok(McReport {
        rows,
        failures,
        summary,
    })
}

/// One grid cell of an ROC sweep: operating points for all three scopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocCell {
    pub lambda_p: f64,
    pub lambda_q: f64,
    pub omega: (f64, f64),
    pub gamma: (f64, f64),
    pub combined: (f64, f64),
}

impl RocCell {
    pub fn point(&self, scope: Scope) -> (f64, f64) {
        match scope {
            Scope::Omega => self.omega,
            Scope::Gamma => self.gamma,
            Scope::Combined => self.combined,
        }
    }
}

/// Operating points of one edge report on all scopes.
pub fn roc_cell_from_edges(edges: &EdgeReport, truth: &GroundTruth, lambda_p: f64, lambda_q: f64) -> RocCell {
    let om = confusion(edges, truth, Scope::Omega);
    let ga = confusion(edges, truth, Scope::Gamma);
    let co = confusion(edges, truth, Scope::Combined);
    RocCell {
        lambda_p,
        lambda_q,
        omega: (om.fpr(), om.tpr()),
        gamma: (ga.fpr(), ga.tpr()),
        combined: (co.fpr(), co.tpr()),
    }
}

/// Fits every `(lambda_p, lambda_q)` cell on one dataset and records the
/// per-scope operating points. Failed cells are skipped (counted).
pub fn roc_sweep(
    dfts: &DftStack,
    plan: &SpectralPlan,
    lambda_p_grid: &[f64],
    lambda_q_grid: &[f64],
    truth: &GroundTruth,
    base: &FlipFlopConfig,
) -> Result<(Vec<RocCell>, usize)> {
    let stats = SpectralStats::new(dfts, plan)?;
    let mut cells = Vec::with_capacity(lambda_p_grid.len() * lambda_q_grid.len());
    let mut skipped = 0usize;
    for &lambda_q in lambda_q_grid {
        for &lambda_p in lambda_p_grid {
            let config = FlipFlopConfig {
                lambda_p,
                lambda_q,
                ..*base
            };
            match fit_with(&stats, &config) {
                Ok(fitted) => {
                    let edges = extract_edges(&fitted);
                    cells.push(roc_cell_from_edges(&edges, truth, lambda_p, lambda_q));
                }
                Err(_) => skipped += 1,
            }
        }
    }
    Ok((cells, skipped))
}

/// Baseline counterpart of [`roc_sweep`] on the raw series.
pub fn roc_sweep_iid(
    series: &crate::spectral::MatrixSeries,
    lambda_p_grid: &[f64],
    lambda_q_grid: &[f64],
    truth: &GroundTruth,
    base: &FlipFlopConfig,
) -> Result<(Vec<RocCell>, usize)> {
    let mut cells = Vec::with_capacity(lambda_p_grid.len() * lambda_q_grid.len());
    let mut skipped = 0usize;
    for &lambda_q in lambda_q_grid {
        for &lambda_p in lambda_p_grid {
            match fit_iid(series, lambda_p, lambda_q, base) {
                Ok(fitted) => {
                    let edges = extract_edges_iid(&fitted);
                    cells.push(roc_cell_from_edges(&edges, truth, lambda_p, lambda_q));
                }
                Err(_) => skipped += 1,
            }
        }
    }
    Ok((cells, skipped))
}

/// Averages aligned sweeps from several runs cell-by-cell.
pub fn roc_pool(sweeps: &[Vec<RocCell>]) -> Result<Vec<RocCell>> {
    let Some(first) = sweeps.first() else {
        return Err(Error::InvalidArgument {
            context: "roc_pool",
            message: alloc::format!("no sweeps to pool"),
        });
    };
    if sweeps.iter().any(|s| s.len() != first.len()) {
        return Err(Error::DimensionMismatch {
            context: "roc_pool",
            expected: first.len(),
            got: sweeps.iter().map(|s| s.len()).find(|&l| l != first.len()).unwrap_or(0),
        });
    }
    let m = sweeps.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let mut acc = RocCell {
                lambda_p: first[i].lambda_p,
                lambda_q: first[i].lambda_q,
                omega: (0.0, 0.0),
                gamma: (0.0, 0.0),
                combined: (0.0, 0.0),
            };
            for s in sweeps {
                acc.omega.0 += s[i].omega.0 / m;
                acc.omega.1 += s[i].omega.1 / m;
                acc.gamma.0 += s[i].gamma.0 / m;
                acc.gamma.1 += s[i].gamma.1 / m;
                acc.combined.0 += s[i].combined.0 / m;
                acc.combined.1 += s[i].combined.1 / m;
            }
            acc
        })
        .collect())
}

/// Operating points of one scope, sorted by false-positive rate.
pub fn roc_points(cells: &[RocCell], scope: Scope) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = cells.iter().map(|c| c.point(scope)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts
}

/// Trapezoid area under the upper envelope of an operating-point cloud,
/// anchored at `(0, 0)` and extended horizontally to `fpr = 1`.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut envelope: Vec<(f64, f64)> = alloc::vec![(0.0, 0.0)];
    let mut best = 0.0f64;
    for (fpr, tpr) in pts {
        best = best.max(tpr);
        envelope.push((fpr, best));
    }
    envelope.push((1.0, best));
    let mut auc = 0.0;
    for w in envelope.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x1 > x0 {
            auc += (x1 - x0) * 0.5 * (y0 + y1);
        }
    }
    auc
}

/// How the window count scales with `n` in a rate study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowRule {
    Fixed(usize),
    /// `M = max(2, round(n^{1/4}))`, so the window bandwidth shrinks.
    QuarterPower,
}

impl WindowRule {
    pub fn windows(&self, n: usize) -> usize {
        match self {
            WindowRule::Fixed(m) => *m,
            WindowRule::QuarterPower => (fmath::round(fmath::powf(n as f64, 0.25)) as usize).max(2),
        }
    }
}

/// Configuration for the error-vs-n trend study.
#[derive(Debug, Clone)]
pub struct RateScenario {
    pub params: SynthParams,
    pub n_list: Vec<usize>,
    pub runs: usize,
    pub master_seed: u64,
    pub window_rule: WindowRule,
    /// Calibration constants for the rate-order penalties.
    pub c_p: f64,
    pub c_q: f64,
    pub base: FlipFlopConfig,
}

impl Default for RateScenario {
    fn default() -> Self {
        Self {
            params: SynthParams::default(),
            n_list: alloc::vec![128, 512, 2048],
            runs: 10,
            master_seed: 7,
            window_rule: WindowRule::QuarterPower,
            c_p: 1.0,
            c_q: 1.0,
            base: FlipFlopConfig::new(0.0, 0.0),
        }
    }
}

/// One fitted point of the rate study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub run: usize,
    pub n: usize,
    pub num_windows: usize,
    pub window_len: usize,
    /// `min_c |Omega_hat - c Omega*|_F / |Omega*|_F`.
    pub omega_err: f64,
    /// `min_c |Gamma_hat - c Gamma*|_F / |Gamma*|_F` (one scalar across k).
    pub gamma_err: f64,
}

impl RateRow {
    pub fn combined_err(&self) -> f64 {
        self.omega_err + self.gamma_err
    }
}

/// Output of the rate study.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Mean combined error per entry of `n_list`.
    pub mean_errors: Vec<f64>,
    /// Fraction of seeds whose combined error strictly decreases along
    /// `n_list`.
    pub fraction_decreasing: f64,
    /// Least-squares slope of `ln(mean error)` against `ln(n)`.
    pub loglog_slope: f64,
}

/// Relative distance after the optimal shared rescaling:
/// `min_c |A - c B|_F / |B|_F` over real `c`.
pub fn scaled_relative_error_real(a: &Mat, b: &Mat) -> f64 {
    let denom = b.norm_squared();
    let c = a.dot(b) / denom;
    (a - b * c).norm() / fmath::sqrt(denom)
}

fn scaled_relative_error_gamma(est: &[HermMatrix], truth: &[CMat]) -> f64 {
    let mut inner = 0.0;
    let mut denom = 0.0;
    for (e, t) in est.iter().zip(truth.iter()) {
        for (x, y) in e.as_matrix().iter().zip(t.iter()) {
            inner += x.re * y.re + x.im * y.im;
            denom += y.norm_sqr();
        }
    }
    let c = inner / denom;
    let mut num = 0.0;
    for (e, t) in est.iter().zip(truth.iter()) {
        num += (e.as_matrix() - t * Complex64::new(c, 0.0)).norm_squared();
    }
    fmath::sqrt(num) / fmath::sqrt(denom)
}

/// Fits each `(run, n)` pair at rate-order penalties and reports the error
/// trend against the scaled truth. The truth is drawn once per run and
/// shared across sample sizes; data are drawn fresh per `(run, n)`.
pub fn rate_check(scenario: &RateScenario) -> Result<RateReport> {
    let tau = 2.5f64;
    let mut rows = Vec::new();
    for run in 0..scenario.runs {
        let truth = GroundTruth::generate(derive_seed(scenario.master_seed, 2 * run as u64), &scenario.params)?;
        for (ni, &n) in scenario.n_list.iter().enumerate() {
            let m = scenario.window_rule.windows(n);
            let plan = plan_windows(n, m)?;
            let series = generate_series(
                &truth,
                n,
                GenSeed {
                    seed: derive_seed(derive_seed(scenario.master_seed, 2 * run as u64 + 1), ni as u64),
                    family: NoiseFamily::Gaussian,
                },
            )?;
            let dfts = dft(&series);
            let (p, q) = (truth.p() as f64, truth.q() as f64);
            let k_len = plan.window_len() as f64;
            let lambda_p = scenario.c_p / p * fmath::sqrt(fmath::ln(p) / (m as f64 * k_len * q));
            let lambda_q = scenario.c_q / (m as f64 * q)
                * fmath::sqrt(fmath::ln(fmath::powf(m as f64, 1.0 / tau) * q) / (k_len * p));
            let config = FlipFlopConfig {
                lambda_p,
                lambda_q,
                ..scenario.base
            };
            let fitted = fit(&dfts, &plan, &config)?;
            let phi_truth: Vec<CMat> = (0..m)
                .map(|k| {
                    let sbar = HermMatrix::new(truth.sbar(plan.center_freq(k)))?;
                    inv_pd_herm(&sbar)
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(RateRow {
                run,
                n,
                num_windows: m,
                window_len: plan.window_len(),
                omega_err: scaled_relative_error_real(fitted.omega.as_matrix(), truth.omega.as_matrix()),
                gamma_err: scaled_relative_error_gamma(fitted.gamma.phis(), &phi_truth),
            });
        }
    }

    let n_count = scenario.n_list.len();
    let mean_errors: Vec<f64> = (0..n_count)
        .map(|ni| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == scenario.n_list[ni])
                .map(|r| r.combined_err())
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect();
    let mut decreasing = 0usize;
    for run in 0..scenario.runs {
        let errs: Vec<f64> = scenario
            .n_list
            .iter()
            .map(|&n| {
                rows.iter()
                    .find(|r| r.run == run && r.n == n)
                    .map(|r| r.combined_err())
                    .unwrap_or(f64::NAN)
            })
            .collect();
        if errs.windows(2).all(|w| w[1] < w[0]) {
            decreasing += 1;
        }
    }
    // least-squares slope of ln(mean err) on ln(n)
    let xs: Vec<f64> = scenario.n_list.iter().map(|&n| fmath::ln(n as f64)).collect();
    let ys: Vec<f64> = mean_errors.iter().map(|&e| fmath::ln(e)).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - xm) * (y - ym)).sum();

    Ok(RateReport {
        fraction_decreasing: decreasing as f64 / scenario.runs as f64,
        mean_errors,
        loglog_slope: sxy / sxx,
        rows,
    })
}

/// Result of the population-minimizer check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Report {
    /// Largest per-window relative residual of `Phi_hat_k = c Phi*_k` under
    /// the single fitted scalar `c`.
    pub phi_rel_err: f64,
    /// Relative residual of `Omega_hat = (1/c) Omega*` under the same `c`.
    pub omega_rel_err: f64,
    /// Largest relative error of the products `Phi_hat_k (x) Omega_hat`
    /// against the true `Phi*_k (x) Omega*` (scale cancels).
    pub product_rel_err: f64,
    /// The fitted shared scalar.
    pub shared_scale: f64,
    pub outer_iterations: usize,
}

/// Runs the unpenalized flip-flop on the exact population statistics of the
/// truth and checks recovery of both factors up to one shared scalar.
pub fn theorem1_check(truth: &GroundTruth, num_windows: usize, n_for_plan: usize) -> Result<Theorem1Report> {
    let plan = plan_windows(n_for_plan, num_windows)?;
    let sbars: Vec<HermMatrix> = (0..num_windows)
        .map(|k| HermMatrix::new(truth.sbar(plan.center_freq(k))))
        .collect::<Result<Vec<_>>>()?;
    let pop = PopulationStats::new(truth.sigma.clone(), sbars.clone())?;
    let config = FlipFlopConfig {
        admm: AdmmConfig::tight(),
        tau_ff: 1e-9,
        lambda_p: 0.0,
        lambda_q: 0.0,
        ..FlipFlopConfig::new(0.0, 0.0)
    };
    let fitted = fit_with(&pop, &config)?;

    let phi_truth: Vec<CMat> = sbars.iter().map(inv_pd_herm).collect::<Result<Vec<_>>>()?;
    // single scalar c from the Gamma side
    let mut inner = 0.0;
    let mut denom = 0.0;
    for (e, t) in fitted.gamma.phis().iter().zip(phi_truth.iter()) {
        for (x, y) in e.as_matrix().iter().zip(t.iter()) {
            inner += x.re * y.re + x.im * y.im;
            denom += y.norm_sqr();
        }
    }
    let c = inner / denom;
    let mut phi_rel_err = 0.0f64;
    for (e, t) in fitted.gamma.phis().iter().zip(phi_truth.iter()) {
        let err = (e.as_matrix() - t * Complex64::new(c, 0.0)).norm() / (t.norm() * c);
        phi_rel_err = phi_rel_err.max(err);
    }
    let omega_target = truth.omega.as_matrix() / c;
    let omega_rel_err = (fitted.omega.as_matrix() - &omega_target).norm() / omega_target.norm();

    let omega_c = fitted.omega.as_matrix().map(|x| Complex64::new(x, 0.0));
    let omega_truth_c = truth.omega.as_matrix().map(|x| Complex64::new(x, 0.0));
    let mut product_rel_err = 0.0f64;
    for (e, t) in fitted.gamma.phis().iter().zip(phi_truth.iter()) {
        let est = e.as_matrix().kronecker(&omega_c);
        let tru = t.kronecker(&omega_truth_c);
        let err = (&est - &tru).norm() / tru.norm();
        product_rel_err = product_rel_err.max(err);
    }

    Ok(Theorem1Report {
        phi_rel_err,
        omega_rel_err,
        product_rel_err,
        shared_scale: c,
        outer_iterations: fitted.outer_iterations,
    })
}
