//! On-disk formats: the long-format series CSV, ground-truth and estimate
//! JSON bundles, DOT graph files and study CSVs.
//!
//! Floats are written with Rust's shortest-roundtrip formatting, so files
//! parse back to bit-identical values and identical runs produce
//! byte-identical artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use kronspec_core::eval::{EdgeReport, McReport, RocCell, Scope};
use kronspec_core::flipflop::FitResult;
use kronspec_core::linalg::Mat;
use kronspec_core::model_select::BicScore;
use kronspec_core::spectral::MatrixSeries;
use kronspec_core::synth::GroundTruth;
use serde::{Deserialize, Serialize};

/// Writes a series in the long CSV format `t,row,col,value`, one record per
/// cell per time step, t-major then row then column.
pub fn write_series_csv(path: &Path, series: &MatrixSeries) -> Result<()> {
    let (p, q) = (series.p(), series.q());
    let mut out = String::with_capacity(series.n() * p * q * 16);
    out.push_str("t,row,col,value\n");
    for (t, z) in series.samples().iter().enumerate() {
        for row in 0..p {
            for col in 0..q {
                writeln!(&mut out, "{t},{row},{col},{}", z[(row, col)])?;
            }
        }
    }
    fs::write(path, out).with_context(|| format!("writing series to {}", path.display()))?;
    Ok(())
}

/// Reads a long-format series CSV, validating the complete `n * p * q` grid.
/// Returns the series and whether an odd trailing sample was dropped.
pub fn read_series_csv(path: &Path) -> Result<(MatrixSeries, bool)> {
    let data = read_series_grid(path)?;
    let (series, dropped) = MatrixSeries::truncating(data).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok((series, dropped))
}

/// Reads the raw complete grid of a long-format CSV without any length
/// adjustment (raw inputs to preprocessing may have odd length).
pub fn read_series_grid(path: &Path) -> Result<Vec<Mat>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening series file {}", path.display()))?;
    {
        let headers = reader.headers()?;
        let expect = ["t", "row", "col", "value"];
        if headers.len() != 4 || headers.iter().zip(expect).any(|(h, e)| h.trim() != e) {
            bail!("series file {} must have header t,row,col,value", path.display());
        }
    }
    let mut cells: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut max_t = 0usize;
    let mut max_row = 0usize;
    let mut max_col = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<usize> {
            record
                .get(i)
                .with_context(|| format!("record {line}: missing field {i}"))?
                .trim()
                .parse::<usize>()
                .with_context(|| format!("record {line}: bad integer in field {i}"))
        };
        let (t, row, col) = (parse(0)?, parse(1)?, parse(2)?);
        let value: f64 = record
            .get(3)
            .with_context(|| format!("record {line}: missing value"))?
            .trim()
            .parse()
            .with_context(|| format!("record {line}: bad value"))?;
        if !value.is_finite() {
            bail!("record {line}: non-finite value");
        }
        if cells.insert((t, row, col), value).is_some() {
            bail!("duplicate record for (t={t}, row={row}, col={col})");
        }
        max_t = max_t.max(t);
        max_row = max_row.max(row);
        max_col = max_col.max(col);
    }
    let (n, p, q) = (max_t + 1, max_row + 1, max_col + 1);
    if cells.len() != n * p * q {
        bail!(
            "incomplete grid: got {} records, expected {} (n={n}, p={p}, q={q})",
            cells.len(),
            n * p * q
        );
    }
    let mut data = Vec::with_capacity(n);
    for t in 0..n {
        let mut m = Mat::zeros(p, q);
        for row in 0..p {
            for col in 0..q {
                m[(row, col)] = *cells
                    .get(&(t, row, col))
                    .with_context(|| format!("missing record (t={t}, row={row}, col={col})"))?;
            }
        }
        data.push(m);
    }
    Ok(data)
}

/// Dense real matrix in row-major JSON form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_mat(m: &Mat) -> Self {
        let (rows, cols) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { rows, cols, data }
    }

    pub fn to_mat(&self) -> Result<Mat> {
        if self.data.len() != self.rows * self.cols {
            bail!("matrix data length {} does not match {}x{}", self.data.len(), self.rows, self.cols);
        }
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j]))
    }
}

/// Dense complex matrix as paired row-major real/imaginary arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexMatrixJson {
    pub fn from_cmat(m: &kronspec_core::linalg::CMat) -> Self {
        let (rows, cols) = (m.nrows(), m.ncols());
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { rows, cols, re, im }
    }
}

/// Seed bookkeeping stored next to simulated data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedManifest {
    pub master_seed: u64,
    pub truth_seed: u64,
    pub data_seed: u64,
    pub noise: String,
    pub n: usize,
}

/// Ground truth of a simulation, with derived edge sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthJson {
    pub p: usize,
    pub q: usize,
    pub ma_len: usize,
    pub b: Vec<MatrixJson>,
    pub f: MatrixJson,
    pub sigma: MatrixJson,
    pub omega: MatrixJson,
    pub s_p: Vec<(usize, usize)>,
    pub s_q: Vec<(usize, usize)>,
    pub seed_manifest: SeedManifest,
}

impl TruthJson {
    pub fn from_truth(truth: &GroundTruth, manifest: SeedManifest) -> Self {
        Self {
            p: truth.p(),
            q: truth.q(),
            ma_len: truth.params.ma_len,
            b: truth.b.iter().map(MatrixJson::from_mat).collect(),
            f: MatrixJson::from_mat(&truth.f_mix),
            sigma: MatrixJson::from_mat(truth.sigma.as_matrix()),
            omega: MatrixJson::from_mat(truth.omega.as_matrix()),
            s_p: truth.s_p.iter().copied().collect(),
            s_q: truth.s_q.iter().copied().collect(),
            seed_manifest: manifest,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeJson {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BicCellJson {
    pub lambda_p: f64,
    pub lambda_q: f64,
    pub value: f64,
    pub omega_nonzeros: usize,
    pub phi_nonzeros: usize,
    pub converged: bool,
    pub selected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BicJson {
    pub lambda_psm: f64,
    pub lambda_qsm: f64,
    pub table: Vec<BicCellJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceJson {
    pub iteration: usize,
    pub neg_log_like: f64,
    pub penalized_objective: f64,
    pub gamma_rel_change: f64,
    pub omega_rel_change: f64,
    pub gamma_iterations: usize,
    pub omega_iterations: usize,
}

/// The estimate bundle written by `fit` and `select`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateBundle {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub m_freq: usize,
    pub k_window: usize,
    pub half_window: usize,
    pub alpha: f64,
    pub lambda_p: f64,
    pub lambda_q: f64,
    pub lambda_mode: String,
    pub gamma_frobenius: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub max_stationarity_residual: f64,
    pub omega: MatrixJson,
    pub phi: Vec<ComplexMatrixJson>,
    pub p_edges: Vec<EdgeJson>,
    pub q_edges: Vec<EdgeJson>,
    pub combined_edges: Vec<(usize, usize)>,
    pub bic: Option<BicJson>,
    pub trace: Vec<TraceJson>,
    /// Wall-clock seconds; excluded from reproducibility comparisons.
    pub timing_secs: f64,
}

impl EstimateBundle {
    pub fn new(
        result: &FitResult,
        edges: &EdgeReport,
        plan: &kronspec_core::spectral::SpectralPlan,
        alpha: f64,
        lambda_p: f64,
        lambda_q: f64,
        lambda_mode: &str,
    ) -> Self {
        Self {
            p: edges.p,
            q: edges.q,
            n: plan.n(),
            m_freq: plan.num_windows(),
            k_window: plan.window_len(),
            half_window: plan.half_window(),
            alpha,
            lambda_p,
            lambda_q,
            lambda_mode: lambda_mode.to_string(),
            gamma_frobenius: result.gamma.frobenius(),
            converged: result.converged,
            outer_iterations: result.outer_iterations,
            max_stationarity_residual: result.max_stationarity_residual,
            omega: MatrixJson::from_mat(result.omega.as_matrix()),
            phi: result
                .gamma
                .phis()
                .iter()
                .map(|m| ComplexMatrixJson::from_cmat(m.as_matrix()))
                .collect(),
            p_edges: edges.p_edges.iter().map(|&(i, j, weight)| EdgeJson { i, j, weight }).collect(),
            q_edges: edges.q_edges.iter().map(|&(i, j, weight)| EdgeJson { i, j, weight }).collect(),
            combined_edges: edges.combined.iter().copied().collect(),
            bic: None,
            trace: result
                .trace
                .iter()
                .map(|t| TraceJson {
                    iteration: t.iteration,
                    neg_log_like: t.neg_log_like,
                    penalized_objective: t.penalized_objective,
                    gamma_rel_change: t.gamma_rel_change,
                    omega_rel_change: t.omega_rel_change,
                    gamma_iterations: t.gamma_iterations,
                    omega_iterations: t.omega_iterations,
                })
                .collect(),
            timing_secs: 0.0,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn dot_graph(name: &str, nodes: &[String], edges: &[(usize, usize, f64)]) -> String {
    let max_weight = edges.iter().map(|&(_, _, w)| w).fold(0.0f64, f64::max);
    let mut out = String::new();
    let _ = writeln!(&mut out, "graph {name} {{");
    let _ = writeln!(&mut out, "  layout=circo;");
    for node in nodes {
        let _ = writeln!(&mut out, "  {node};");
    }
    for &(a, b, w) in edges {
        // weights normalized so the largest magnitude is 1
        let norm = if max_weight > 0.0 { w / max_weight } else { 1.0 };
        let _ = writeln!(
            &mut out,
            "  {} -- {} [weight=\"{norm}\", penwidth=\"{:.2}\"];",
            nodes[a],
            nodes[b],
            0.5 + 3.0 * norm
        );
    }
    out.push_str("}\n");
    out
}

/// Writes the three DOT graphs (`<prefix>.rows.dot`, `<prefix>.cols.dot`,
/// `<prefix>.kron.dot`) with edge weights normalized to a maximum of one.
pub fn write_dot_files(prefix: &Path, edges: &EdgeReport) -> Result<()> {
    let row_nodes: Vec<String> = (0..edges.p).map(|i| format!("r{i}")).collect();
    let col_nodes: Vec<String> = (0..edges.q).map(|j| format!("c{j}")).collect();
    let cell_nodes: Vec<String> = (0..edges.p * edges.q)
        .map(|a| format!("r{}c{}", a / edges.q, a % edges.q))
        .collect();
    let rows = dot_graph("rows", &row_nodes, &edges.p_edges);
    let cols = dot_graph("cols", &col_nodes, &edges.q_edges);
    let combined: Vec<(usize, usize, f64)> = edges.combined.iter().map(|&(a, b)| (a, b, 1.0)).collect();
    let kron = dot_graph("kron", &cell_nodes, &combined);

    let with_ext = |ext: &str| {
        let mut os = prefix.as_os_str().to_owned();
        os.push(ext);
        std::path::PathBuf::from(os)
    };
    fs::write(with_ext(".rows.dot"), rows)?;
    fs::write(with_ext(".cols.dot"), cols)?;
    fs::write(with_ext(".kron.dot"), kron)?;
    Ok(())
}

/// Benchmark summary CSV (one row per scenario).
pub fn write_benchmark_csv(
    path: &Path,
    estimator: &str,
    selection: &str,
    noise: &str,
    n: usize,
    m_freq: usize,
    report: &McReport,
) -> Result<()> {
    let s = &report.summary;
    let mut out = String::new();
    out.push_str(
        "estimator,selection,noise,n,m_freq,runs,failures,f1_mean,f1_std,tpr_mean,tpr_std,fpr_mean,fpr_std,secs_per_run_mean,secs_per_run_std\n",
    );
    writeln!(
        &mut out,
        "{estimator},{selection},{noise},{n},{m_freq},{},{},{},{},{},{},{},{},{},{}",
        s.runs, s.failures, s.f1_mean, s.f1_std, s.tpr_mean, s.tpr_std, s.fpr_mean, s.fpr_std, s.wall_mean, s.wall_std
    )?;
    fs::write(path, out)?;
    Ok(())
}

/// Per-run benchmark rows.
pub fn write_benchmark_runs_csv(path: &Path, report: &McReport) -> Result<()> {
    let mut out = String::new();
    out.push_str("run,f1,tpr,fpr,omega_f1,gamma_f1,lambda_p,lambda_q,secs\n");
    for r in &report.rows {
        writeln!(
            &mut out,
            "{},{},{},{},{},{},{},{},{}",
            r.run, r.f1, r.tpr, r.fpr, r.omega_f1, r.gamma_f1, r.lambda_p, r.lambda_q, r.wall_secs
        )?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Pooled ROC point CSV for one or more methods.
pub fn write_roc_csv(path: &Path, blocks: &[(&str, Vec<RocCell>)]) -> Result<()> {
    let mut out = String::new();
    out.push_str("method,scope,lambda_p,lambda_q,fpr,tpr\n");
    for (method, cells) in blocks {
        for scope in [Scope::Omega, Scope::Gamma, Scope::Combined] {
            let name = match scope {
                Scope::Omega => "omega",
                Scope::Gamma => "gamma",
                Scope::Combined => "combined",
            };
            let mut rows: Vec<(f64, f64, f64, f64)> = cells
                .iter()
                .map(|c| {
                    let (fpr, tpr) = c.point(scope);
                    (fpr, tpr, c.lambda_p, c.lambda_q)
                })
                .collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            for (fpr, tpr, lambda_p, lambda_q) in rows {
                writeln!(&mut out, "{method},{name},{lambda_p},{lambda_q},{fpr},{tpr}")?;
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-fit rows of a rate study plus its trend summary as JSON.
pub fn write_rate_outputs(csv_path: &Path, json_path: &Path, report: &kronspec_core::eval::RateReport) -> Result<()> {
    let mut out = String::new();
    out.push_str("run,n,m_freq,k_window,omega_err,gamma_err,combined_err\n");
    for r in &report.rows {
        writeln!(
            &mut out,
            "{},{},{},{},{},{},{}",
            r.run,
            r.n,
            r.num_windows,
            r.window_len,
            r.omega_err,
            r.gamma_err,
            r.combined_err()
        )?;
    }
    fs::write(csv_path, out)?;

    #[derive(Serialize)]
    struct RateSummaryJson<'a> {
        mean_errors: &'a [f64],
        fraction_decreasing: f64,
        loglog_slope: f64,
    }
    write_json(
        json_path,
        &RateSummaryJson {
            mean_errors: &report.mean_errors,
            fraction_decreasing: report.fraction_decreasing,
            loglog_slope: report.loglog_slope,
        },
    )?;
    Ok(())
}

/// BIC grid table for the estimate bundle.
pub fn bic_table(scores: &[BicScore], best_lambda_p: f64, best_lambda_q: f64) -> Vec<BicCellJson> {
    scores
        .iter()
        .map(|s| BicCellJson {
            lambda_p: s.lambda_p,
            lambda_q: s.lambda_q,
            value: s.value,
            omega_nonzeros: s.omega_nonzeros,
            phi_nonzeros: s.phi_nonzeros,
            converged: s.converged,
            selected: s.lambda_p == best_lambda_p && s.lambda_q == best_lambda_q,
        })
        .collect()
}
