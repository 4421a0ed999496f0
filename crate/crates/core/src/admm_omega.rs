//! ADMM solver for the row-precision subproblem: minimize over symmetric
//! positive-definite `p x p` matrices the objective
//!
//! `L1(Omega) = -(1/p) ln|Omega| + (1/p) tr(Omega Theta) + lambda_p |Omega^-|_1`
//!
//! with an elementwise lasso on the off-diagonal. Same smooth/prox/dual
//! structure and adaptive penalty policy as the Gamma solver.

use alloc::format;


use crate::admm::{rho_update, stationarity_residual, stationary_root, AdmmConfig, AdmmDiagnostics, RhoChange};
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::{log_det_pd_sym, soft_threshold_real, sym_eig, trace_product, Mat, RealSymMatrix};

/// Symmetric positive-definite row precision `Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaEstimate {
    mat: RealSymMatrix,
}

impl OmegaEstimate {
    pub fn new(mat: RealSymMatrix) -> Self {
        Self { mat }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            mat: RealSymMatrix::identity(p),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn as_matrix(&self) -> &Mat {
        self.mat.as_matrix()
    }

    pub fn sym(&self) -> &RealSymMatrix {
        &self.mat
    }
}

/// Result of one Omega solve.
#[derive(Debug, Clone)]
pub struct OmegaSolution {
    /// Final smooth iterate (dense, positive definite).
    pub estimate: OmegaEstimate,
    /// Final split variable; its off-diagonal support defines edges.
    pub support: RealSymMatrix,
    pub diagnostics: AdmmDiagnostics,
}

/// Closed-form smooth-step update: eigendecompose
/// `Theta - p rho (Wbar - Ubar) = Q J Q^T` and map each eigenvalue to the
/// positive root of `p rho x^2 + j x - 1 = 0`.
pub fn omega_eigen_update(
    theta_check: &RealSymMatrix,
    wbar: &Mat,
    ubar: &Mat,
    rho: f64,
    p: usize,
) -> Result<(RealSymMatrix, f64)> {
    let c = p as f64 * rho;
    if !(c > 0.0) {
        return Err(Error::InvalidArgument {
            context: "omega_eigen_update",
            message: format!("need rho > 0, got {rho}"),
        });
    }
    let target = theta_check.as_matrix() - (wbar - ubar) * c;
    let eig = sym_eig(&target)?;
    let d = theta_check.dim();
    let mut max_resid = 0.0f64;
    let mut scaled = eig.vectors.clone();
    for l in 0..d {
        let j = eig.values[l];
        let x = stationary_root(c, j);
        max_resid = max_resid.max(stationarity_residual(c, j, x));
        for r in 0..d {
            scaled[(r, l)] *= x;
        }
    }
    let out = scaled * eig.vectors.transpose();
    Ok((RealSymMatrix::new(out)?, max_resid))
}

/// Proximal step: diagonal of `Omega + Ubar` passes through, off-diagonals
/// are soft-thresholded at `lambda_p / rho`. The prox base `Omega + Ubar`
/// follows from the scaled augmented Lagrangian and the dual update
/// `Ubar += Omega - Wbar`, mirroring the Gamma-side step.
pub fn omega_w_update(omega_new: &RealSymMatrix, ubar: &Mat, lambda_p: f64, rho: f64) -> RealSymMatrix {
    let d = omega_new.dim();
    let g = omega_new.as_matrix() + ubar;
    let mut w = Mat::zeros(d, d);
    for j in 0..d {
        w[(j, j)] = g[(j, j)];
        for k in (j + 1)..d {
            let v = soft_threshold_real(0.5 * (g[(j, k)] + g[(k, j)]), lambda_p / rho);
            w[(j, k)] = v;
            w[(k, j)] = v;
        }
    }
    RealSymMatrix::new(w).expect("soft-thresholded matrix is symmetric and finite")
}

/// ADMM loop for the Omega subproblem; same stopping and adaptive-penalty
/// policy as [`crate::admm_gamma::solve_gamma`].
pub fn solve_omega(
    theta_check: &RealSymMatrix,
    lambda_p: f64,
    config: &AdmmConfig,
    warm: Option<&OmegaEstimate>,
) -> Result<OmegaSolution> {
    config.validate()?;
    if !(lambda_p >= 0.0) {
        return Err(Error::InvalidArgument {
            context: "solve_omega",
            message: format!("need lambda_p >= 0, got {lambda_p}"),
        });
    }
    let p = theta_check.dim();
    if let Some(o) = warm {
        if o.dim() != p {
            return Err(Error::DimensionMismatch {
                context: "solve_omega warm start",
                expected: p,
                got: o.dim(),
            });
        }
    }

    let mut omega = match warm {
        Some(o) => o.clone(),
        None => OmegaEstimate::identity(p),
    };
    let mut w: Mat = omega.as_matrix().clone();
    let mut u: Mat = Mat::zeros(p, p);

    let mut rho = config.rho0;
    let dim_term = p as f64 * config.tau_abs;
    let mut diag = AdmmDiagnostics {
        final_rho: rho,
        ..AdmmDiagnostics::default()
    };

    for it in 0..config.i_max {
        let (next, resid) = omega_eigen_update(theta_check, &w, &u, rho, p)?;
        diag.max_stationarity_residual = diag.max_stationarity_residual.max(resid);
        omega = OmegaEstimate::new(next);

        let w_new = omega_w_update(omega.sym(), &u, lambda_p, rho);
        let primal = (omega.as_matrix() - w_new.as_matrix()).norm();
        let dual = (w_new.as_matrix() - &w).norm() * rho;
        u += omega.as_matrix() - w_new.as_matrix();
        w = w_new.as_matrix().clone();

        diag.iterations = it + 1;
        diag.primal_residual = primal;
        diag.dual_residual = dual;
        diag.final_rho = rho;

        let tau_pri = dim_term + config.tau_rel * omega.as_matrix().norm().max(w.norm());
        let tau_dual = dim_term + config.tau_rel * u.norm() / rho;
        if primal <= tau_pri && dual <= tau_dual {
            diag.converged = true;
            break;
        }
        match rho_update(primal, dual, config.mu_bar) {
            RhoChange::Double if rho < crate::admm::RHO_MAX => {
                rho *= 2.0;
                u *= 0.5;
            }
            RhoChange::Halve if rho > crate::admm::RHO_MIN => {
                rho *= 0.5;
                u *= 2.0;
            }
            _ => {}
        }
    }

    Ok(OmegaSolution {
        estimate: omega,
        support: RealSymMatrix::new(w).expect("split variable stays symmetric"),
        diagnostics: diag,
    })
}

/// Lasso penalty over ordered off-diagonal pairs.
pub fn penalty_p(omega: &OmegaEstimate, lambda_p: f64) -> f64 {
    let p = omega.dim();
    let m = omega.as_matrix();
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                acc += fmath::abs(m[(i, j)]);
            }
        }
    }
    lambda_p * acc
}

/// Full objective `L1` at `omega` for the given statistic and penalty.
pub fn l1_objective(theta_check: &RealSymMatrix, omega: &OmegaEstimate, lambda_p: f64) -> Result<f64> {
    let p = omega.dim() as f64;
    Ok((-log_det_pd_sym(omega.sym())? + trace_product(omega.as_matrix(), theta_check.as_matrix())) / p
        + penalty_p(omega, lambda_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_sym_psd(p: usize, seed: u64) -> RealSymMatrix {
        let mut rng = crate::rng::rng_from_seed(seed);
        let b = Mat::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        RealSymMatrix::new(&b * b.transpose() + Mat::identity(p, p) * 0.1).unwrap()
    }

    #[test]
    fn eigen_update_zero_inputs() {
        let theta = RealSymMatrix::new(Mat::zeros(2, 2)).unwrap();
        let (omega, resid) = omega_eigen_update(&theta, &Mat::zeros(2, 2), &Mat::zeros(2, 2), 1.0, 2).unwrap();
        let expect = 1.0 / (2f64).sqrt();
        assert_relative_eq!(omega.as_matrix()[(0, 0)], expect, epsilon = 1e-12);
        assert!(resid < 1e-13);
    }

    #[test]
    fn eigen_update_scalar_golden_ratio() {
        let theta = RealSymMatrix::new(Mat::from_element(1, 1, 1.0)).unwrap();
        let (omega, _) = omega_eigen_update(&theta, &Mat::zeros(1, 1), &Mat::zeros(1, 1), 1.0, 1).unwrap();
        assert_relative_eq!(omega.as_matrix()[(0, 0)], (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_update_minimizes_step_objective() {
        let p = 3;
        let rho = 2.0;
        let theta = random_sym_psd(p, 41);
        let wbar = random_sym_psd(p, 42).into_matrix();
        let ubar = random_sym_psd(p, 43).into_matrix() * 0.05;
        let (omega, _) = omega_eigen_update(&theta, &wbar, &ubar, rho, p).unwrap();
        let objective = |cand: &RealSymMatrix| -> f64 {
            trace_product(theta.as_matrix(), cand.as_matrix()) - log_det_pd_sym(cand).unwrap()
                + p as f64 * rho / 2.0 * (cand.as_matrix() - &wbar + &ubar).norm_squared()
        };
        let best = objective(&omega);
        let mut rng = crate::rng::rng_from_seed(44);
        for trial in 0..100 {
            let scale = 10f64.powf(rng.random_range(-2.0..0.0));
            let cand = RealSymMatrix::new(omega.as_matrix() + random_sym_psd(p, 500 + trial).into_matrix() * scale).unwrap();
            if log_det_pd_sym(&cand).is_err() {
                continue;
            }
            assert!(objective(&cand) + 1e-9 >= best);
        }
    }

    #[test]
    fn w_update_cases() {
        let omega = random_sym_psd(2, 51);
        let ubar = Mat::zeros(2, 2);
        // zero penalty: pass-through of Omega - Ubar
        let w = omega_w_update(&omega, &ubar, 0.0, 1.0);
        assert!((w.as_matrix() - omega.as_matrix()).norm() < 1e-14);
        // saturation for small entries
        let mut m = Mat::identity(2, 2);
        m[(0, 1)] = 0.5;
        m[(1, 0)] = 0.5;
        let om = OmegaEstimate::new(RealSymMatrix::new(m).unwrap());
        let w = omega_w_update(om.sym(), &ubar, 0.2, 1.0);
        assert_relative_eq!(w.as_matrix()[(0, 1)], 0.3, epsilon = 1e-14);
        let w = omega_w_update(om.sym(), &ubar, 0.6, 1.0);
        assert_eq!(w.as_matrix()[(0, 1)], 0.0);
    }

    #[test]
    fn solve_omega_scalar_mle() {
        let s = 4.0;
        let theta = RealSymMatrix::new(Mat::from_element(1, 1, s)).unwrap();
        let sol = solve_omega(&theta, 0.0, &AdmmConfig::tight(), None).unwrap();
        assert!(sol.diagnostics.converged);
        assert_relative_eq!(sol.estimate.as_matrix()[(0, 0)], 1.0 / s, epsilon = 1e-7);
    }

    #[test]
    fn solve_omega_huge_penalty_is_diagonal() {
        let theta = random_sym_psd(3, 61);
        let sol = solve_omega(&theta, 1e4, &AdmmConfig::default(), None).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(sol.support.as_matrix()[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn solve_omega_warm_matches_cold() {
        let theta = random_sym_psd(3, 71);
        let cfg = AdmmConfig {
            i_max: 3000,
            tau_abs: 1e-8,
            tau_rel: 1e-8,
            ..AdmmConfig::default()
        };
        let cold = solve_omega(&theta, 0.15, &cfg, None).unwrap();
        let warm_est = OmegaEstimate::new(RealSymMatrix::new(cold.estimate.as_matrix() * 1.7).unwrap());
        let warm = solve_omega(&theta, 0.15, &cfg, Some(&warm_est)).unwrap();
        let diff = (cold.estimate.as_matrix() - warm.estimate.as_matrix()).norm();
        assert!(diff < 1e-4, "warm/cold mismatch {diff}");
    }

    #[test]
    fn solve_omega_permutation_equivariant() {
        let theta = random_sym_psd(4, 81);
        let perm = [2usize, 0, 3, 1];
        let mut pm = Mat::zeros(4, 4);
        for (i, &j) in perm.iter().enumerate() {
            pm[(i, j)] = 1.0;
        }
        let permuted = RealSymMatrix::new(&pm * theta.as_matrix() * pm.transpose()).unwrap();
        let cfg = AdmmConfig::tight();
        let base = solve_omega(&theta, 0.1, &cfg, None).unwrap();
        let perm_sol = solve_omega(&permuted, 0.1, &cfg, None).unwrap();
        let expect = &pm * base.estimate.as_matrix() * pm.transpose();
        assert!((perm_sol.estimate.as_matrix() - expect).norm() < 1e-6);
    }
}
