//! The i.i.d.-modeling comparator: a lasso-penalized matrix-normal flip-flop
//! that treats the observations as independent samples, estimating a row
//! precision `Omega` and a single column precision `Upsilon` from the
//! time-domain statistics
//!
//! `S_Omega = (1/nq) sum_t Z(t) Upsilon Z(t)^T`,
//! `S_Upsilon = (1/np) sum_t Z(t)^T Omega Z(t)`.
//!
//! Both subproblems are the same penalized log-det program as the row side
//! of the spectral estimator, so the solver is reused as-is. This is a
//! reconstructed baseline: the cited comparison methods all solve this
//! bi-convex program with two lasso penalties.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::admm_omega::{solve_omega, OmegaEstimate};
use crate::error::{Error, Result};
use crate::eval::{kpg_edges, EdgeReport};
use crate::fmath;
use crate::flipflop::FlipFlopConfig;
use crate::linalg::{log_det_pd_sym, trace_product, Mat, RealSymMatrix};
use crate::model_select::{no_edge_search, LambdaAxis};
use crate::spectral::MatrixSeries;

/// Fitted i.i.d. model: `Upsilon` is normalized to unit Frobenius norm to
/// resolve the shared scale ambiguity.
#[derive(Debug, Clone)]
pub struct IidFit {
    pub omega: OmegaEstimate,
    pub upsilon: OmegaEstimate,
    pub omega_support: RealSymMatrix,
    pub upsilon_support: RealSymMatrix,
    pub converged: bool,
    pub outer_iterations: usize,
}

/// Row-side statistic at fixed `Upsilon`.
pub fn stat_omega(series: &MatrixSeries, upsilon: &OmegaEstimate) -> RealSymMatrix {
    let (n, p, q) = (series.n(), series.p(), series.q());
    let mut acc = Mat::zeros(p, p);
    for z in series.samples() {
        acc += z * upsilon.as_matrix() * z.transpose();
    }
    RealSymMatrix::new(acc / (n * q) as f64).expect("quadratic form is symmetric and finite")
}

/// Column-side statistic at fixed `Omega`.
pub fn stat_upsilon(series: &MatrixSeries, omega: &OmegaEstimate) -> RealSymMatrix {
    let (n, p, q) = (series.n(), series.p(), series.q());
    let mut acc = Mat::zeros(q, q);
    for z in series.samples() {
        acc += z.transpose() * omega.as_matrix() * z;
    }
    RealSymMatrix::new(acc / (n * p) as f64).expect("quadratic form is symmetric and finite")
}

/// Alternates penalized log-det solves on the two factors until both
/// relative changes drop below `config.tau_ff` or `config.m_max` sweeps.
pub fn fit_iid(series: &MatrixSeries, lambda_p: f64, lambda_q: f64, config: &FlipFlopConfig) -> Result<IidFit> {
    config.validate()?;
    if series.n() < 2 {
        return Err(Error::InvalidArgument {
            context: "fit_iid",
            message: alloc::format!("need at least two samples, got {}", series.n()),
        });
    }
    let (p, q) = (series.p(), series.q());
    let mut omega = OmegaEstimate::identity(p);
    let mut upsilon = OmegaEstimate::identity(q);
    let mut omega_support = RealSymMatrix::identity(p);
    let mut upsilon_support = RealSymMatrix::identity(q);
    let mut converged = false;
    let mut iterations = 0;

    for _outer in 1..=config.m_max {
        iterations += 1;
        let s_upsilon = stat_upsilon(series, &omega);
        let usol = solve_omega(&s_upsilon, lambda_q, &config.admm, Some(&upsilon))?;
        let norm = usol.estimate.as_matrix().norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonFinite {
                context: "fit_iid upsilon normalization",
            });
        }
        let upsilon_new = OmegaEstimate::new(RealSymMatrix::new(usol.estimate.as_matrix() / norm)?);
        let upsilon_rel = (upsilon_new.as_matrix() - upsilon.as_matrix()).norm() / upsilon.as_matrix().norm();
        upsilon_support = RealSymMatrix::new(usol.support.as_matrix() / norm)?;

        let s_omega = stat_omega(series, &upsilon_new);
        let osol = solve_omega(&s_omega, lambda_p, &config.admm, Some(&omega))?;
        let omega_rel = (osol.estimate.as_matrix() - omega.as_matrix()).norm() / omega.as_matrix().norm();

        upsilon = upsilon_new;
        omega = osol.estimate;
        omega_support = osol.support;

        if upsilon_rel <= config.tau_ff && omega_rel <= config.tau_ff {
            converged = true;
            break;
        }
    }

    Ok(IidFit {
        omega,
        upsilon,
        omega_support,
        upsilon_support,
        converged,
        outer_iterations: iterations,
    })
}

/// Edge sets of the i.i.d. fit: `Upsilon` plays the part of the inverse
/// column spectrum for the q-node and combined graphs.
pub fn extract_edges_iid(fit: &IidFit) -> EdgeReport {
    let p = fit.omega.dim();
    let q = fit.upsilon.dim();
    let mut p_edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let w = fit.omega_support.as_matrix()[(i, j)];
            if w != 0.0 {
                p_edges.push((i, j, fmath::abs(w)));
            }
        }
    }
    let mut q_edges = Vec::new();
    for i in 0..q {
        for j in (i + 1)..q {
            let w = fit.upsilon_support.as_matrix()[(i, j)];
            if w != 0.0 {
                q_edges.push((i, j, fmath::abs(w)));
            }
        }
    }
    let p_support: BTreeSet<(usize, usize)> = p_edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let q_support: BTreeSet<(usize, usize)> = q_edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let combined = kpg_edges(&p_support, &q_support, p, q);
    EdgeReport {
        p,
        q,
        p_edges,
        q_edges,
        combined,
    }
}

/// BIC for the i.i.d. model (standard matrix-normal likelihood with `n`
/// samples; both symmetric counts halved).
pub fn bic_iid(fit: &IidFit, series: &MatrixSeries) -> Result<f64> {
    let (n, p, q) = (series.n() as f64, series.p(), series.q());
    let log_det_omega = log_det_pd_sym(fit.omega.sym())?;
    let log_det_upsilon = log_det_pd_sym(fit.upsilon.sym())?;
    let mut quad = 0.0;
    for z in series.samples() {
        let m = z * fit.upsilon.as_matrix() * z.transpose();
        quad += trace_product(fit.omega.as_matrix(), &m);
    }
    let omega_nonzeros = fit.omega_support.as_matrix().iter().filter(|&&x| x != 0.0).count();
    let upsilon_nonzeros = fit.upsilon_support.as_matrix().iter().filter(|&&x| x != 0.0).count();
    Ok(-n * q as f64 * log_det_omega - n * p as f64 * log_det_upsilon
        + quad
        + fmath::ln(n) * (omega_nonzeros as f64 + upsilon_nonzeros as f64) / 2.0)
}

/// No-edge penalty search for the baseline, mirroring the spectral
/// estimator's heuristic.
pub fn find_no_edge_lambda_iid(
    series: &MatrixSeries,
    axis: LambdaAxis,
    other_lambda: f64,
    base: &FlipFlopConfig,
) -> Result<f64> {
    let seed = {
        let stat = match axis {
            LambdaAxis::P => stat_omega(series, &OmegaEstimate::identity(series.q())),
            LambdaAxis::Q => stat_upsilon(series, &OmegaEstimate::identity(series.p())),
        };
        let m = stat.as_matrix();
        let d = m.nrows();
        let mut max = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    max = max.max(fmath::abs(m[(i, j)]));
                }
            }
        }
        if max > 0.0 {
            max * 1e-2 / d as f64
        } else {
            1e-8
        }
    };
    let probe = |lambda: f64| -> Result<bool> {
        let (lp, lq) = match axis {
            LambdaAxis::P => (lambda, other_lambda),
            LambdaAxis::Q => (other_lambda, lambda),
        };
        let fitted = fit_iid(series, lp, lq, base)?;
        let support = match axis {
            LambdaAxis::P => &fitted.omega_support,
            LambdaAxis::Q => &fitted.upsilon_support,
        };
        let m = support.as_matrix();
        let d = m.nrows();
        Ok((0..d).all(|i| ((i + 1)..d).all(|j| m[(i, j)] == 0.0)))
    };
    no_edge_search(probe, seed, "find_no_edge_lambda_iid")
}
