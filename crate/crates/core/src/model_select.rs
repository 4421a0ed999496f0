//! BIC scoring and the data-driven lambda-grid heuristic.
//!
//! The information criterion counts `2KM` real frequency-domain measurements
//! and charges each nonzero parameter `ln(2KM)`, with the symmetric `Omega`
//! count halved. The grid upper ends are half of the smallest penalties that
//! produce a no-edge model, found by geometric search plus bisection.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fmath;
use crate::flipflop::{fit_with, FitResult, FlipFlopConfig};
use crate::linalg::{log_det_pd_herm, log_det_pd_sym, re_trace_product, CMat};
use crate::spectral::{DftStack, SpectralPlan, SpectralStats};

/// BIC value with the nonzero counts that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicScore {
    pub value: f64,
    /// Nonzero entries of the Omega support, diagonal included.
    pub omega_nonzeros: usize,
    /// Total nonzero entries across the `M` Phi supports, diagonal included.
    pub phi_nonzeros: usize,
    pub lambda_p: f64,
    pub lambda_q: f64,
    /// Outer loop and final inner solves all converged.
    pub converged: bool,
}

/// Evaluates the BIC at a fitted model:
/// `-2KMq ln|Omega| + 2Kp sum_k(-ln|Phi_k| + Re tr(A_k)) + ln(2KM) (|Omega|_0/2 + sum_k |Phi_k|_0)`
/// with `A_k` recomputed from the data at the estimates and the nonzero
/// counts taken from the split-variable supports. The likelihood part is
/// exactly `2KMpq` times the Whittle objective `G`, i.e. `-2 ln` of the
/// windowed frequency-domain likelihood up to constants.
pub fn bic(fit: &FitResult, dfts: &DftStack, plan: &SpectralPlan) -> Result<BicScore> {
    let p = dfts.p();
    let q = dfts.q();
    let m = plan.num_windows();
    let k_len = plan.window_len() as f64;

    let log_det_omega = log_det_pd_sym(fit.omega.sym())?;
    let omega_c = fit.omega.as_matrix().map(|x| Complex64::new(x, 0.0));
    let mut phi_part = 0.0;
    for k in 0..m {
        let mut s = CMat::zeros(q, q);
        for idx in plan.member_indices(k) {
            let d = dfts.ordinate(idx);
            s += d.adjoint() * &omega_c * d;
        }
        let phi_conj = fit.gamma.phi(k).as_matrix().conjugate();
        let re_tr_a = re_trace_product(&s, &phi_conj) / (k_len * p as f64);
        phi_part += -log_det_pd_herm(fit.gamma.phi(k))? + re_tr_a;
    }

    let omega_nonzeros = fit
        .omega_support
        .as_matrix()
        .iter()
        .filter(|&&x| x != 0.0)
        .count();
    let phi_nonzeros = fit
        .gamma_support
        .iter()
        .map(|w| w.as_matrix().iter().filter(|z| **z != Complex64::new(0.0, 0.0)).count())
        .sum();

    let data_points = 2.0 * k_len * m as f64;
    let value = -2.0 * k_len * (m * q) as f64 * log_det_omega
        + 2.0 * k_len * p as f64 * phi_part
        + fmath::ln(data_points) * (omega_nonzeros as f64 / 2.0 + phi_nonzeros as f64);
    if !value.is_finite() {
        return Err(Error::NonFinite { context: "bic" });
    }
    Ok(BicScore {
        value,
        omega_nonzeros,
        phi_nonzeros,
        lambda_p: 0.0,
        lambda_q: 0.0,
        converged: fit_cell_converged(fit),
    })
}

fn fit_cell_converged(fit: &FitResult) -> bool {
    let inner_ok = fit
        .trace
        .last()
        .map(|t| t.gamma_converged && t.omega_converged)
        .unwrap_or(false);
    fit.converged && inner_ok
}

/// [`bic`] evaluated through the statistic cache: the data term uses the
/// trace identity `Re tr(A_k) = Re tr(theta_tilde_k(Omega) Phi_k)`.
pub fn bic_cached(fit: &FitResult, stats: &SpectralStats) -> Result<BicScore> {
    let p = stats.p();
    let q = stats.q();
    let plan = stats.plan();
    let m = plan.num_windows();
    let k_len = plan.window_len() as f64;

    let log_det_omega = log_det_pd_sym(fit.omega.sym())?;
    let thetas = stats.theta_tilde(fit.omega.as_matrix())?;
    let mut phi_part = 0.0;
    for k in 0..m {
        let re_tr_a = re_trace_product(thetas[k].as_matrix(), fit.gamma.phi(k).as_matrix());
        phi_part += -log_det_pd_herm(fit.gamma.phi(k))? + re_tr_a;
    }
    let omega_nonzeros = fit
        .omega_support
        .as_matrix()
        .iter()
        .filter(|&&x| x != 0.0)
        .count();
    let phi_nonzeros = fit
        .gamma_support
        .iter()
        .map(|w| w.as_matrix().iter().filter(|z| **z != Complex64::new(0.0, 0.0)).count())
        .sum();
    let data_points = 2.0 * k_len * m as f64;
    let value = -2.0 * k_len * (m * q) as f64 * log_det_omega
        + 2.0 * k_len * p as f64 * phi_part
        + fmath::ln(data_points) * (omega_nonzeros as f64 / 2.0 + phi_nonzeros as f64);
    if !value.is_finite() {
        return Err(Error::NonFinite { context: "bic_cached" });
    }
    Ok(BicScore {
        value,
        omega_nonzeros,
        phi_nonzeros,
        lambda_p: 0.0,
        lambda_q: 0.0,
        converged: fit_cell_converged(fit),
    })
}

/// Which penalty axis a no-edge search moves along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaAxis {
    P,
    Q,
}

/// Generic saturation search: geometric doubling (or halving) from `seed`
/// until `probe` reports a no-edge model, then ten bisection steps. Returns
/// the no-edge end of the final bracket.
pub fn no_edge_search<F>(mut probe: F, seed: f64, context: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    if !(seed > 0.0) || !seed.is_finite() {
        return Err(Error::InvalidArgument {
            context,
            message: format!("search seed must be positive and finite, got {seed}"),
        });
    }
    let mut lambda = seed;
    let (mut lo, mut hi);
    if probe(lambda)? {
        // seed already saturates: walk down to bracket the transition
        let mut steps = 0;
        loop {
            let lower = lambda / 2.0;
            if !probe(lower)? {
                lo = lower;
                hi = lambda;
                break;
            }
            lambda = lower;
            steps += 1;
            if steps >= 60 {
                return Err(Error::SearchFailed {
                    context,
                    message: format!("no edges appeared after 60 halvings from {seed:e}"),
                });
            }
        }
    } else {
        let mut steps = 0;
        loop {
            let upper = lambda * 2.0;
            if probe(upper)? {
                lo = lambda;
                hi = upper;
                break;
            }
            lambda = upper;
            steps += 1;
            if steps >= 60 {
                return Err(Error::SearchFailed {
                    context,
                    message: format!("saturation not reached after 60 doublings from {seed:e}"),
                });
            }
        }
    }
    for _ in 0..10 {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn support_is_diagonal(result: &FitResult, axis: LambdaAxis) -> bool {
    match axis {
        LambdaAxis::P => {
            let m = result.omega_support.as_matrix();
            let p = m.nrows();
            (0..p).all(|i| ((i + 1)..p).all(|j| m[(i, j)] == 0.0))
        }
        LambdaAxis::Q => result.gamma_support.iter().all(|w| {
            let m = w.as_matrix();
            let q = m.nrows();
            (0..q).all(|i| ((i + 1)..q).all(|j| m[(i, j)] == Complex64::new(0.0, 0.0)))
        }),
    }
}

fn search_seed(stats: &SpectralStats, axis: LambdaAxis) -> Result<f64> {
    // a scale-aware starting point a couple of decades below the expected
    // saturation level, from the statistics at identity weights
    let scale = match axis {
        LambdaAxis::P => {
            let gamma = crate::admm_gamma::GammaEstimate::identity(stats.q(), stats.plan().num_windows());
            let theta = stats.theta_check(gamma.phis())?;
            let m = theta.as_matrix();
            let p = m.nrows();
            let mut max = 0.0f64;
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        max = max.max(fmath::abs(m[(i, j)]));
                    }
                }
            }
            max / p as f64
        }
        LambdaAxis::Q => {
            let thetas = stats.theta_tilde(&crate::linalg::Mat::identity(stats.p(), stats.p()))?;
            let mut max = 0.0f64;
            for t in &thetas {
                let m = t.as_matrix();
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        if i != j {
                            max = max.max(m[(i, j)].norm());
                        }
                    }
                }
            }
            max / (stats.plan().num_windows() * stats.q()) as f64
        }
    };
    if !(scale > 0.0) {
        // degenerate data (e.g. all zeros): any tiny penalty saturates
        return Ok(1e-8);
    }
    Ok(scale * 1e-2)
}

/// Finds the smallest penalty on one axis that yields a no-edge model on
/// that axis, holding the other penalty fixed. Accurate to well under 5%.
pub fn find_no_edge_lambda(
    dfts: &DftStack,
    plan: &SpectralPlan,
    axis: LambdaAxis,
    other_lambda: f64,
    base: &FlipFlopConfig,
) -> Result<f64> {
    let stats = SpectralStats::new(dfts, plan)?;
    find_no_edge_lambda_cached(&stats, axis, other_lambda, base)
}

/// [`find_no_edge_lambda`] against a prebuilt statistic cache.
pub fn find_no_edge_lambda_cached(
    stats: &SpectralStats,
    axis: LambdaAxis,
    other_lambda: f64,
    base: &FlipFlopConfig,
) -> Result<f64> {
    let seed = search_seed(stats, axis)?;
    let probe = |lambda: f64| -> Result<bool> {
        let mut config = *base;
        match axis {
            LambdaAxis::P => {
                config.lambda_p = lambda;
                config.lambda_q = other_lambda;
            }
            LambdaAxis::Q => {
                config.lambda_q = lambda;
                config.lambda_p = other_lambda;
            }
        }
        let result = fit_with(stats, &config)?;
        Ok(support_is_diagonal(&result, axis))
    };
    no_edge_search(probe, seed, "find_no_edge_lambda")
}

/// Log-spaced penalty grid, built from the no-edge levels: upper end
/// `lambda_sm / 2`, lower end a decade below, `points` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
}

impl LambdaGrid {
    pub fn from_no_edge(lambda_psm: f64, lambda_qsm: f64, points: usize) -> Result<Self> {
        Ok(Self {
            p_values: log_spaced(lambda_psm / 2.0 / 10.0, lambda_psm / 2.0, points)?,
            q_values: log_spaced(lambda_qsm / 2.0 / 10.0, lambda_qsm / 2.0, points)?,
        })
    }

    pub fn explicit(p_values: Vec<f64>, q_values: Vec<f64>) -> Result<Self> {
        for v in p_values.iter().chain(q_values.iter()) {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument {
                    context: "LambdaGrid",
                    message: format!("penalties must be finite and nonnegative, got {v}"),
                });
            }
        }
        if p_values.is_empty() || q_values.is_empty() {
            return Err(Error::InvalidArgument {
                context: "LambdaGrid",
                message: format!("grid axes must be nonempty"),
            });
        }
        Ok(Self { p_values, q_values })
    }
}

/// `points` logarithmically spaced values on `[lo, hi]`, ascending.
pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || points == 0 {
        return Err(Error::InvalidArgument {
            context: "log_spaced",
            message: format!("need 0 < lo < hi and points > 0, got [{lo}, {hi}] x {points}"),
        });
    }
    if points == 1 {
        return Ok(alloc::vec![hi]);
    }
    let (llo, lhi) = (fmath::ln(lo), fmath::ln(hi));
    Ok((0..points)
        .map(|i| fmath::exp(llo + (lhi - llo) * i as f64 / (points - 1) as f64))
        .collect())
}

/// Outcome of a BIC grid search.
#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best_lambda_p: f64,
    pub best_lambda_q: f64,
    pub best_fit: FitResult,
    /// One score per successfully fitted cell, in evaluation order
    /// (descending lambda_q, then descending lambda_p).
    pub scores: Vec<BicScore>,
    /// Number of cells whose fit failed and were skipped.
    pub skipped: usize,
}

/// Fits every cell of the grid and returns the BIC argmin. Converged cells
/// are preferred over non-converged ones; ties break toward larger
/// penalties (sparser models) through the evaluation order.
pub fn grid_search(
    dfts: &DftStack,
    plan: &SpectralPlan,
    alpha: f64,
    grid: &LambdaGrid,
    base: &FlipFlopConfig,
) -> Result<GridSearchResult> {
    let stats = SpectralStats::new(dfts, plan)?;
    grid_search_cached(&stats, alpha, grid, base)
}

/// [`grid_search`] against a prebuilt statistic cache.
pub fn grid_search_cached(
    stats: &SpectralStats,
    alpha: f64,
    grid: &LambdaGrid,
    base: &FlipFlopConfig,
) -> Result<GridSearchResult> {
    let mut scores = Vec::with_capacity(grid.p_values.len() * grid.q_values.len());
    let mut best: Option<(BicScore, FitResult)> = None;
    let mut skipped = 0usize;
    for &lambda_q in grid.q_values.iter().rev() {
        for &lambda_p in grid.p_values.iter().rev() {
            let config = FlipFlopConfig {
                lambda_p,
                lambda_q,
                alpha,
                ..*base
            };
            let fitted = match fit_with(stats, &config) {
                Ok(f) => f,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            };
            let mut score = match bic_cached(&fitted, stats) {
                Ok(s) => s,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            };
            score.lambda_p = lambda_p;
            score.lambda_q = lambda_q;
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
    }
    let (score, best_fit) = best.ok_or(Error::AllCellsFailed {
        context: "grid_search",
        attempts: grid.p_values.len() * grid.q_values.len(),
    })?;
    Ok(GridSearchResult {
        best_lambda_p: score.lambda_p,
        best_lambda_q: score.lambda_q,
        best_fit,
        scores,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm_gamma::GammaEstimate;
    use crate::admm_omega::OmegaEstimate;
    use crate::linalg::{HermMatrix, Mat, RealSymMatrix};
    use crate::spectral::{dft, plan_windows, MatrixSeries};
    use approx::assert_relative_eq;

    fn identity_fit(p: usize, q: usize, m: usize) -> FitResult {
        FitResult {
            omega: OmegaEstimate::identity(p),
            gamma: GammaEstimate::identity(q, m),
            omega_support: RealSymMatrix::identity(p),
            gamma_support: alloc::vec![HermMatrix::identity(q); m],
            trace: Vec::new(),
            converged: true,
            outer_iterations: 0,
            max_stationarity_residual: 0.0,
            wall_secs: 0.0,
        }
    }

    #[test]
    fn bic_identity_estimates_zero_data() {
        let (p, q, n, m) = (3usize, 2usize, 32usize, 2usize);
        let series = MatrixSeries::new(alloc::vec![Mat::zeros(p, q); n]).unwrap();
        let dfts = dft(&series);
        let plan = plan_windows(n, m).unwrap();
        let score = bic(&identity_fit(p, q, m), &dfts, &plan).unwrap();
        let expect = ((2 * plan.window_len() * m) as f64).ln() * (p as f64 / 2.0 + (m * q) as f64);
        assert_relative_eq!(score.value, expect, epsilon = 1e-10);
        assert_eq!(score.omega_nonzeros, p);
        assert_eq!(score.phi_nonzeros, m * q);
    }

    #[test]
    fn bic_denser_support_scores_worse() {
        let (p, q, n, m) = (3usize, 2usize, 32usize, 2usize);
        let series = MatrixSeries::new(alloc::vec![Mat::zeros(p, q); n]).unwrap();
        let dfts = dft(&series);
        let plan = plan_windows(n, m).unwrap();
        let sparse = bic(&identity_fit(p, q, m), &dfts, &plan).unwrap();
        let mut dense_fit = identity_fit(p, q, m);
        let mut w = dense_fit.omega_support.as_matrix().clone();
        w[(0, 1)] = 0.5;
        w[(1, 0)] = 0.5;
        dense_fit.omega_support = RealSymMatrix::new(w).unwrap();
        let dense = bic(&dense_fit, &dfts, &plan).unwrap();
        assert!(dense.value > sparse.value);
    }

    #[test]
    fn log_spaced_bounds() {
        let v = log_spaced(0.1, 10.0, 5).unwrap();
        assert_eq!(v.len(), 5);
        assert_relative_eq!(v[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(v[4], 10.0, epsilon = 1e-12);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(log_spaced(1.0, 0.5, 3).is_err());
    }

    #[test]
    fn no_edge_search_on_analytic_threshold() {
        // probe saturates exactly at 0.37
        let result = no_edge_search(|l| Ok(l >= 0.37), 1e-3, "test").unwrap();
        assert!(result >= 0.37 && result < 0.37 * 1.05, "found {result}");
        // seed above the threshold works too
        let result = no_edge_search(|l| Ok(l >= 0.37), 50.0, "test").unwrap();
        assert!(result >= 0.37 && result < 0.37 * 1.05, "found {result}");
    }

    #[test]
    fn no_edge_search_never_saturates_errors() {
        let err = no_edge_search(|_| Ok(false), 1e-3, "test").unwrap_err();
        assert!(matches!(err, Error::SearchFailed { .. }));
    }
}
