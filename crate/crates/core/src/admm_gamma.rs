//! ADMM solver for the column-precision subproblem: minimize over `M`
//! Hermitian positive-definite `q x q` matrices `Phi_k` the objective
//!
//! `L2(Gamma) = (1/Mq) sum_k [ -Re ln|Phi_k| + Re tr(Theta_k Phi_k) ] + P_q`
//!
//! where `P_q` is a sparse-group lasso on the off-diagonal entries, grouping
//! each `(i, j)` entry across the `M` frequency matrices. The smooth step has
//! a closed-form eigenvalue update; the proximal step is entry-wise complex
//! soft-thresholding followed by group shrinkage.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::admm::{rho_update, stationarity_residual, stationary_root, AdmmConfig, AdmmDiagnostics, RhoChange};
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::{herm_eig, log_det_pd_herm, re_trace_product, soft_threshold, CMat, HermMatrix};

/// The `M` Hermitian positive-definite column precisions `Phi_k`; their
/// horizontal concatenation is the matrix `Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    phis: Vec<HermMatrix>,
}

impl GammaEstimate {
    pub fn new(phis: Vec<HermMatrix>) -> Result<Self> {
        if phis.is_empty() {
            return Err(Error::InvalidArgument {
                context: "GammaEstimate",
                message: format!("need at least one frequency matrix"),
            });
        }
        let q = phis[0].dim();
        if phis.iter().any(|m| m.dim() != q) {
            return Err(Error::DimensionMismatch {
                context: "GammaEstimate",
                expected: q,
                got: phis.iter().map(|m| m.dim()).find(|&d| d != q).unwrap_or(q),
            });
        }
        Ok(Self { phis })
    }

    pub fn identity(q: usize, num_windows: usize) -> Self {
        Self {
            phis: vec![HermMatrix::identity(q); num_windows],
        }
    }

    pub fn q(&self) -> usize {
        self.phis[0].dim()
    }

    pub fn num_windows(&self) -> usize {
        self.phis.len()
    }

    pub fn phi(&self, k: usize) -> &HermMatrix {
        &self.phis[k]
    }

    pub fn phis(&self) -> &[HermMatrix] {
        &self.phis
    }

    /// Frobenius norm of the concatenation `[Phi_1 ... Phi_M]`.
    pub fn frobenius(&self) -> f64 {
        fmath::sqrt(self.phis.iter().map(|m| m.as_matrix().norm_squared()).sum())
    }

    /// The group vector `Phi^(ij)`: entry `(i, j)` across all `M` matrices.
    pub fn group_vector(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.phis.iter().map(|m| m.as_matrix()[(i, j)]).collect()
    }

    /// Returns a copy with every `Phi_k` multiplied by `factor`.
    pub fn scale(&self, factor: f64) -> Result<Self> {
        let phis = self
            .phis
            .iter()
            .map(|m| HermMatrix::new(m.as_matrix() * Complex64::new(factor, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(phis)
    }
}

/// Result of one Gamma solve: the smooth iterate, the split variable carrying
/// exact zeros, and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct GammaSolution {
    /// Final `Phi` iterate (dense, positive definite).
    pub estimate: GammaEstimate,
    /// Final split variable `W_k`; its off-diagonal support defines edges.
    pub support: Vec<HermMatrix>,
    pub diagnostics: AdmmDiagnostics,
}

/// Closed-form smooth-step update: eigendecompose
/// `Theta_k - Mq rho (W_k - U_k) = P Delta P^H` and map each eigenvalue to
/// the positive root of `Mq rho x^2 + delta x - 1 = 0`.
///
/// Returns the updated Hermitian PD matrix and the largest normalized
/// stationarity residual over the mapped eigenvalues.
pub fn phi_update(
    theta_k: &HermMatrix,
    w_k: &CMat,
    u_k: &CMat,
    rho: f64,
    num_windows: usize,
    q: usize,
) -> Result<(HermMatrix, f64)> {
    let c = (num_windows * q) as f64 * rho;
    if !(c > 0.0) {
        return Err(Error::InvalidArgument {
            context: "phi_update",
            message: format!("need rho > 0, got {rho}"),
        });
    }
    let target = theta_k.as_matrix() - (w_k - u_k) * Complex64::new(c, 0.0);
    let eig = herm_eig(&target)?;
    let mut max_resid = 0.0f64;
    let d = theta_k.dim();
    let mut scaled = eig.vectors.clone();
    for l in 0..d {
        let delta = eig.values[l];
        let x = stationary_root(c, delta);
        max_resid = max_resid.max(stationarity_residual(c, delta, x));
        for r in 0..d {
            scaled[(r, l)] *= x;
        }
    }
    let out = scaled * eig.vectors.adjoint();
    Ok((HermMatrix::new(out)?, max_resid))
}

/// Proximal step: diagonals pass through, off-diagonals get entry-wise
/// complex soft-thresholding at `alpha lambda_q / rho` followed by group
/// shrinkage of each `(j, l)` vector across the `M` matrices. The upper
/// triangle is updated and mirrored by conjugation.
pub fn w_update(
    phi_new: &[HermMatrix],
    u: &[CMat],
    lambda_q: f64,
    alpha: f64,
    rho: f64,
) -> Vec<HermMatrix> {
    let m = phi_new.len();
    let q = phi_new[0].dim();
    let elem_thresh = alpha * lambda_q / rho;
    let group_level = (1.0 - alpha) * lambda_q * fmath::sqrt(m as f64) / rho;

    let g: Vec<CMat> = (0..m).map(|k| phi_new[k].as_matrix() + &u[k]).collect();
    let mut w: Vec<CMat> = vec![CMat::zeros(q, q); m];
    for k in 0..m {
        for j in 0..q {
            w[k][(j, j)] = Complex64::new(g[k][(j, j)].re, 0.0);
        }
    }
    for j in 0..q {
        for l in (j + 1)..q {
            let shrunk: Vec<Complex64> = (0..m).map(|k| soft_threshold(g[k][(j, l)], elem_thresh)).collect();
            let norm = fmath::sqrt(shrunk.iter().map(|z| z.norm_sqr()).sum());
            let factor = if norm > 0.0 {
                (1.0 - group_level / norm).max(0.0)
            } else {
                0.0
            };
            for k in 0..m {
                let v = shrunk[k] * factor;
                w[k][(j, l)] = v;
                w[k][(l, j)] = v.conj();
            }
        }
    }
    w.into_iter()
        .map(|m| HermMatrix::new(m).expect("w_update preserves Hermitian structure"))
        .collect()
}

fn stack_norm(mats: &[CMat]) -> f64 {
    fmath::sqrt(mats.iter().map(|m| m.norm_squared()).sum())
}

fn stack_norm_herm(mats: &[HermMatrix]) -> f64 {
    fmath::sqrt(mats.iter().map(|m| m.as_matrix().norm_squared()).sum())
}

/// ADMM loop for the Gamma subproblem.
///
/// `warm` seeds the smooth iterate (the split variable starts at the same
/// point with a zero dual). Stops when both scaled residuals drop below the
/// tolerances, or after `config.i_max` iterations with `converged = false`.
pub fn solve_gamma(
    thetas: &[HermMatrix],
    lambda_q: f64,
    alpha: f64,
    config: &AdmmConfig,
    warm: Option<&GammaEstimate>,
) -> Result<GammaSolution> {
    config.validate()?;
    if thetas.is_empty() {
        return Err(Error::InvalidArgument {
            context: "solve_gamma",
            message: format!("need at least one statistic matrix"),
        });
    }
    if !(lambda_q >= 0.0) || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument {
            context: "solve_gamma",
            message: format!("need lambda_q >= 0 and alpha in [0,1], got {lambda_q}, {alpha}"),
        });
    }
    let m = thetas.len();
    let q = thetas[0].dim();
    if let Some(g) = warm {
        if g.q() != q || g.num_windows() != m {
            return Err(Error::DimensionMismatch {
                context: "solve_gamma warm start",
                expected: q * m,
                got: g.q() * g.num_windows(),
            });
        }
    }

    let mut phis: Vec<HermMatrix> = match warm {
        Some(g) => g.phis().to_vec(),
        None => vec![HermMatrix::identity(q); m],
    };
    let mut w: Vec<CMat> = phis.iter().map(|p| p.as_matrix().clone()).collect();
    let mut u: Vec<CMat> = vec![CMat::zeros(q, q); m];

    let mut rho = config.rho0;
    let dim_term = q as f64 * fmath::sqrt(m as f64) * config.tau_abs;
    let mut diag = AdmmDiagnostics {
        final_rho: rho,
        ..AdmmDiagnostics::default()
    };

    for it in 0..config.i_max {
        for k in 0..m {
            let (phi, resid) = phi_update(&thetas[k], &w[k], &u[k], rho, m, q)?;
            diag.max_stationarity_residual = diag.max_stationarity_residual.max(resid);
            phis[k] = phi;
        }
        let w_new = w_update(&phis, &u, lambda_q, alpha, rho);
        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        for k in 0..m {
            let wn = w_new[k].as_matrix();
            let diff = phis[k].as_matrix() - wn;
            primal_sq += diff.norm_squared();
            dual_sq += (wn - &w[k]).norm_squared() * rho * rho;
            u[k] += diff;
            w[k] = wn.clone();
        }
        let primal = fmath::sqrt(primal_sq);
        let dual = fmath::sqrt(dual_sq);
        diag.iterations = it + 1;
        diag.primal_residual = primal;
        diag.dual_residual = dual;
        diag.final_rho = rho;

        let tau_pri = dim_term + config.tau_rel * stack_norm_herm(&phis).max(stack_norm(&w));
        let tau_dual = dim_term + config.tau_rel * stack_norm(&u) / rho;
        if primal <= tau_pri && dual <= tau_dual {
            diag.converged = true;
            break;
        }
        match rho_update(primal, dual, config.mu_bar) {
            RhoChange::Double if rho < crate::admm::RHO_MAX => {
                rho *= 2.0;
                for uk in &mut u {
                    *uk *= Complex64::new(0.5, 0.0);
                }
            }
            RhoChange::Halve if rho > crate::admm::RHO_MIN => {
                rho *= 0.5;
                for uk in &mut u {
                    *uk *= Complex64::new(2.0, 0.0);
                }
            }
            _ => {}
        }
    }

    Ok(GammaSolution {
        estimate: GammaEstimate::new(phis)?,
        support: w
            .into_iter()
            .map(|m| HermMatrix::new(m).expect("split variable stays Hermitian"))
            .collect(),
        diagnostics: diag,
    })
}

/// Sparse-group lasso penalty `P_q` evaluated over ordered off-diagonal
/// pairs, matching the solver's objective.
pub fn penalty_q(gamma: &GammaEstimate, lambda_q: f64, alpha: f64) -> f64 {
    let m = gamma.num_windows();
    let q = gamma.q();
    let mut l1 = 0.0;
    let mut group = 0.0;
    for i in 0..q {
        for j in 0..q {
            if i == j {
                continue;
            }
            let mut norm_sq = 0.0;
            for k in 0..m {
                let v = gamma.phi(k).as_matrix()[(i, j)];
                l1 += v.norm();
                norm_sq += v.norm_sqr();
            }
            group += fmath::sqrt(norm_sq);
        }
    }
    alpha * lambda_q * l1 + (1.0 - alpha) * fmath::sqrt(m as f64) * lambda_q * group
}

/// Full objective `L2` at `gamma` for the given statistics and penalty.
pub fn l2_objective(thetas: &[HermMatrix], gamma: &GammaEstimate, lambda_q: f64, alpha: f64) -> Result<f64> {
    let m = gamma.num_windows();
    let q = gamma.q() as f64;
    let mut smooth = 0.0;
    for k in 0..m {
        smooth -= log_det_pd_herm(gamma.phi(k))?;
        smooth += re_trace_product(thetas[k].as_matrix(), gamma.phi(k).as_matrix());
    }
    Ok(smooth / (m as f64 * q) + penalty_q(gamma, lambda_q, alpha))
}
