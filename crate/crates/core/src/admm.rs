//! Shared ADMM machinery: configuration, diagnostics, the adaptive penalty
//! policy and the closed-form eigenvalue root used by both solvers.

use crate::fmath;

/// ADMM solver parameters. Defaults follow the reference settings
/// (`rho0 = 2`, `tau_abs = tau_rel = 1e-4`, `mu_bar = 10`, `i_max = 100`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    /// Initial penalty parameter.
    pub rho0: f64,
    /// Absolute stopping tolerance.
    pub tau_abs: f64,
    /// Relative stopping tolerance.
    pub tau_rel: f64,
    /// Residual imbalance ratio that triggers a penalty update.
    pub mu_bar: f64,
    /// Maximum number of iterations.
    pub i_max: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho0: 2.0,
            tau_abs: 1e-4,
            tau_rel: 1e-4,
            mu_bar: 10.0,
            i_max: 100,
        }
    }
}

impl AdmmConfig {
    /// Tightened tolerances for oracle-grade solves (population statistics,
    /// convex-equivalence checks).
    pub fn tight() -> Self {
        Self {
            tau_abs: 1e-10,
            tau_rel: 1e-10,
            i_max: 5000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.rho0 > 0.0 && self.tau_abs > 0.0 && self.tau_rel > 0.0 && self.mu_bar > 1.0 && self.i_max > 0;
        if !ok {
            return Err(crate::Error::InvalidArgument {
                context: "AdmmConfig",
                message: alloc::format!("{self:?}"),
            });
        }
        Ok(())
    }
}

/// Convergence record of one ADMM solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdmmDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub final_rho: f64,
    pub converged: bool,
    /// Largest normalized residual of the closed-form stationarity equation
    /// `c x^2 + d x - 1 = 0` over every eigenvalue update of the solve.
    pub max_stationarity_residual: f64,
}

/// Penalty update decision for the adaptive-rho policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoChange {
    Double,
    Halve,
    Keep,
}

/// Clamp range for the adaptive penalty. Once residuals sit at the roundoff
/// floor the imbalance rule can fire every iteration; without a clamp `rho`
/// (and the rescaled dual) overflows. The range is far outside anything the
/// solvers visit at the reference tolerances.
pub const RHO_MIN: f64 = 1e-10;
pub const RHO_MAX: f64 = 1e10;

/// Residual-balancing policy: double `rho` when the primal residual dominates
/// by more than `mu_bar`, halve it when the dual residual dominates. The
/// scaled dual variable must be rescaled in the opposite direction.
pub fn rho_update(primal: f64, dual: f64, mu_bar: f64) -> RhoChange {
    if primal > mu_bar * dual {
        RhoChange::Double
    } else if dual > mu_bar * primal {
        RhoChange::Halve
    } else {
        RhoChange::Keep
    }
}

/// Positive root of `c x^2 + d x - 1 = 0` for `c > 0`, in a
/// cancellation-free form.
pub fn stationary_root(c: f64, d: f64) -> f64 {
    debug_assert!(c > 0.0);
    let disc = fmath::sqrt(d * d + 4.0 * c);
    if d >= 0.0 {
        2.0 / (d + disc)
    } else {
        (disc - d) / (2.0 * c)
    }
}

/// Normalized residual of the stationarity equation at `x`.
pub fn stationarity_residual(c: f64, d: f64, x: f64) -> f64 {
    let quad = c * x * x;
    let lin = d * x;
    fmath::abs(quad + lin - 1.0) / (1.0 + fmath::abs(quad) + fmath::abs(lin))
}
