//! Raw-data preprocessing: per-cell log-ratio, linear detrend and scaling to
//! unit mean square. Zero readings are bumped by a small positive epsilon
//! (1e-6 of the cell's positive median) before the log transform; negative
//! readings are rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use kronspec_core::linalg::Mat;
use kronspec_core::spectral::MatrixSeries;

/// Input layout of the raw CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawFormat {
    /// One row per time step; `p * q` data columns in row-major cell order
    /// (cell `(i, j)` in column `i * q + j` after any skipped columns).
    Wide,
    /// Long format with header `t,row,col,value`.
    Long,
}

/// One cell's preprocessing outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    /// Zero readings bumped by the stated epsilon.
    BumpedZeros { count: usize, epsilon: f64 },
    /// Log-ratio series was constant; emitted as exact zeros.
    Degenerate,
}

#[derive(Debug)]
pub struct PreprocessReport {
    pub series: MatrixSeries,
    /// `(row, col, status)` for every cell whose status is not `Ok`.
    pub notes: Vec<(usize, usize, CellStatus)>,
    pub dropped_odd_sample: bool,
}

/// Reads raw positive-valued cell series from `path` and applies the
/// pipeline. The output length is the input length minus one (differencing),
/// then truncated to even if needed.
pub fn preprocess(path: &Path, format: RawFormat, p: usize, q: usize, skip_cols: usize) -> Result<PreprocessReport> {
    let cells = match format {
        RawFormat::Wide => read_wide(path, p, q, skip_cols)?,
        RawFormat::Long => read_long(path, p, q)?,
    };
    let n_raw = cells[0].len();
    if n_raw < 3 {
        bail!("need at least 3 time steps, got {n_raw}");
    }

    let mut notes = Vec::new();
    let mut transformed: Vec<Vec<f64>> = Vec::with_capacity(p * q);
    let mut bad_cells = Vec::new();
    for row in 0..p {
        for col in 0..q {
            let raw = &cells[row * q + col];
            if raw.iter().any(|&x| x < 0.0) {
                bad_cells.push((row, col));
                transformed.push(vec![0.0; n_raw - 1]);
                continue;
            }
            let (values, status) = transform_cell(raw);
            if status != CellStatus::Ok {
                notes.push((row, col, status));
            }
            transformed.push(values);
        }
    }
    if !bad_cells.is_empty() {
        bail!("negative values in cells {bad_cells:?}; inputs must be positive (after unit conversion)");
    }

    let n = n_raw - 1;
    let mut data = Vec::with_capacity(n);
    for t in 0..n {
        let mut m = Mat::zeros(p, q);
        for row in 0..p {
            for col in 0..q {
                m[(row, col)] = transformed[row * q + col][t];
            }
        }
        data.push(m);
    }
    let (series, dropped) = MatrixSeries::truncating(data).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(PreprocessReport {
        series,
        notes,
        dropped_odd_sample: dropped,
    })
}

/// log-ratio, detrend, unit mean square for one positive cell series.
pub fn transform_cell(raw: &[f64]) -> (Vec<f64>, CellStatus) {
    let positives: Vec<f64> = raw.iter().copied().filter(|&x| x > 0.0).collect();
    let epsilon = if positives.is_empty() {
        // all-zero cell: any tiny shift yields a constant series, which is
        // handled as degenerate below
        1.0
    } else {
        1e-6 * median(&positives)
    };
    let zero_count = raw.iter().filter(|&&x| x == 0.0).count();
    let bumped: Vec<f64> = raw.iter().map(|&x| if x == 0.0 { x + epsilon } else { x }).collect();

    let n = bumped.len() - 1;
    let mut y: Vec<f64> = (0..n).map(|t| (bumped[t + 1] / bumped[t]).ln()).collect();

    // least-squares straight line removal
    let tm = (n as f64 - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, &v) in y.iter().enumerate() {
        let dt = t as f64 - tm;
        sxx += dt * dt;
        sxy += dt * (v - ym);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    for (t, v) in y.iter_mut().enumerate() {
        *v -= ym + slope * (t as f64 - tm);
    }

    let mean_square = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if mean_square <= 1e-24 {
        return (vec![0.0; n], CellStatus::Degenerate);
    }
    let scale = mean_square.sqrt();
    for v in &mut y {
        *v /= scale;
    }
    let status = if zero_count > 0 {
        CellStatus::BumpedZeros {
            count: zero_count,
            epsilon,
        }
    } else {
        CellStatus::Ok
    };
    (y, status)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn read_wide(path: &Path, p: usize, q: usize, skip_cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening raw file {}", path.display()))?;
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); p * q];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < skip_cols + p * q {
            bail!(
                "row {line}: expected {} data columns after {skip_cols} skipped, got {}",
                p * q,
                record.len().saturating_sub(skip_cols)
            );
        }
        for c in 0..p * q {
            let field = record.get(skip_cols + c).unwrap().trim();
            let value: f64 = field
                .parse()
                .with_context(|| format!("row {line}, column {}: bad number {field:?}", skip_cols + c))?;
            if !value.is_finite() {
                bail!("row {line}: non-finite value");
            }
            cells[c].push(value);
        }
    }
    if cells[0].is_empty() {
        bail!("raw file {} has no data rows", path.display());
    }
    Ok(cells)
}

fn read_long(path: &Path, p: usize, q: usize) -> Result<Vec<Vec<f64>>> {
    let grid = crate::formats::read_series_grid(path)?;
    let (gp, gq) = (grid[0].nrows(), grid[0].ncols());
    if gp != p || gq != q {
        bail!("long input is {gp}x{gq}, expected {p}x{q}");
    }
    let mut cells = vec![Vec::with_capacity(grid.len()); p * q];
    for z in &grid {
        for row in 0..p {
            for col in 0..q {
                cells[row * q + col].push(z[(row, col)]);
            }
        }
    }
    Ok(cells)
}
