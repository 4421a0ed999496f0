//! Outer bi-convex loop: alternate the Gamma and Omega ADMM solves against
//! frequency-domain statistics, normalizing `Gamma` to unit Frobenius norm
//! after each Gamma step to resolve the scale ambiguity of the Kronecker
//! factorization.
//!
//! The statistics are abstracted behind [`StatSource`] so the same loop runs
//! on data statistics (the estimator) and on exact population statistics
//! (the population-minimizer oracle).

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::admm::AdmmConfig;
use crate::admm_gamma::{penalty_q, solve_gamma, GammaEstimate};
use crate::admm_omega::{penalty_p, solve_omega, OmegaEstimate};
use crate::error::{Error, Result};
use crate::eval::{kpg_edges, EdgeReport};
use crate::fmath;
use crate::linalg::{log_det_pd_herm, log_det_pd_sym, re_trace_product, trace_product, CMat, HermMatrix, Mat, RealSymMatrix};
use crate::spectral::{theta_check, theta_tilde, DftStack, SpectralPlan, SpectralStats};

/// Parameters of the outer loop; ADMM settings are embedded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipFlopConfig {
    pub admm: AdmmConfig,
    /// Maximum number of outer iterations.
    pub m_max: usize,
    /// Relative-change stopping tolerance for both factors.
    pub tau_ff: f64,
    pub lambda_p: f64,
    pub lambda_q: f64,
    /// Sparse-group mixing weight for the Gamma penalty.
    pub alpha: f64,
}

impl FlipFlopConfig {
    pub fn new(lambda_p: f64, lambda_q: f64) -> Self {
        Self {
            admm: AdmmConfig::default(),
            m_max: 20,
            tau_ff: 1e-5,
            lambda_p,
            lambda_q,
            alpha: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.admm.validate()?;
        let ok = self.m_max > 0
            && self.tau_ff > 0.0
            && self.lambda_p >= 0.0
            && self.lambda_q >= 0.0
            && (0.0..=1.0).contains(&self.alpha);
        if !ok {
            return Err(Error::InvalidArgument {
                context: "FlipFlopConfig",
                message: alloc::format!("{self:?}"),
            });
        }
        Ok(())
    }
}

/// Per-outer-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterTrace {
    /// 1-based outer iteration index.
    pub iteration: usize,
    pub gamma_rel_change: f64,
    pub omega_rel_change: f64,
    /// Unpenalized objective `G` at the end of the iteration.
    pub neg_log_like: f64,
    /// Penalized objective `G + P_p + P_q`.
    pub penalized_objective: f64,
    pub gamma_iterations: usize,
    pub gamma_converged: bool,
    pub omega_iterations: usize,
    pub omega_converged: bool,
}

/// Final state of one flip-flop fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub omega: OmegaEstimate,
    /// Normalized estimate: `|Gamma|_F = 1`.
    pub gamma: GammaEstimate,
    /// Split variable of the final Omega solve; exact zeros define edges.
    pub omega_support: RealSymMatrix,
    /// Split variables of the final Gamma solve, on the normalized scale.
    pub gamma_support: Vec<HermMatrix>,
    pub trace: Vec<OuterTrace>,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Largest eigen-update stationarity residual seen anywhere in the fit.
    pub max_stationarity_residual: f64,
    /// Filled by callers that time the fit; zero when untimed.
    pub wall_secs: f64,
}

/// Source of the two sufficient statistics consumed by the inner solvers.
pub trait StatSource {
    fn p(&self) -> usize;
    fn q(&self) -> usize;
    fn num_windows(&self) -> usize;
    /// Column-side statistics at fixed `omega`.
    fn theta_tilde(&self, omega: &OmegaEstimate) -> Result<Vec<HermMatrix>>;
    /// Row-side statistic at fixed `gamma`.
    fn theta_check(&self, gamma: &GammaEstimate) -> Result<RealSymMatrix>;
}

/// Statistics computed from the DFT of observed data.
pub struct DataStats<'a> {
    pub dfts: &'a DftStack,
    pub plan: &'a SpectralPlan,
}

impl StatSource for DataStats<'_> {
    fn p(&self) -> usize {
        self.dfts.p()
    }

    fn q(&self) -> usize {
        self.dfts.q()
    }

    fn num_windows(&self) -> usize {
        self.plan.num_windows()
    }

    fn theta_tilde(&self, omega: &OmegaEstimate) -> Result<Vec<HermMatrix>> {
        theta_tilde(self.dfts, self.plan, omega)
    }

    fn theta_check(&self, gamma: &GammaEstimate) -> Result<RealSymMatrix> {
        theta_check(self.dfts, self.plan, gamma)
    }
}

impl StatSource for SpectralStats {
    fn p(&self) -> usize {
        SpectralStats::p(self)
    }

    fn q(&self) -> usize {
        SpectralStats::q(self)
    }

    fn num_windows(&self) -> usize {
        self.plan().num_windows()
    }

    fn theta_tilde(&self, omega: &OmegaEstimate) -> Result<Vec<HermMatrix>> {
        SpectralStats::theta_tilde(self, omega.as_matrix())
    }

    fn theta_check(&self, gamma: &GammaEstimate) -> Result<RealSymMatrix> {
        SpectralStats::theta_check(self, gamma.phis())
    }
}

/// Exact expectations of the statistics under a known truth: the
/// population-minimizer oracle. `sigma` is the true row covariance and
/// `sbar[k]` the true column spectral matrix at the window center.
pub struct PopulationStats {
    sigma: RealSymMatrix,
    sbar: Vec<HermMatrix>,
}

impl PopulationStats {
    pub fn new(sigma: RealSymMatrix, sbar: Vec<HermMatrix>) -> Result<Self> {
        if sbar.is_empty() {
            return Err(Error::InvalidArgument {
                context: "PopulationStats",
                message: alloc::format!("need at least one spectral matrix"),
            });
        }
        Ok(Self { sigma, sbar })
    }

    pub fn sigma(&self) -> &RealSymMatrix {
        &self.sigma
    }

    pub fn sbar(&self) -> &[HermMatrix] {
        &self.sbar
    }
}

impl StatSource for PopulationStats {
    fn p(&self) -> usize {
        self.sigma.dim()
    }

    fn q(&self) -> usize {
        self.sbar[0].dim()
    }

    fn num_windows(&self) -> usize {
        self.sbar.len()
    }

    /// `E{theta_tilde_k} = (1/p) tr(Omega Sigma) Sbar_k`.
    fn theta_tilde(&self, omega: &OmegaEstimate) -> Result<Vec<HermMatrix>> {
        let factor = trace_product(omega.as_matrix(), self.sigma.as_matrix()) / self.p() as f64;
        self.sbar
            .iter()
            .map(|s| HermMatrix::new(s.as_matrix() * Complex64::new(factor, 0.0)))
            .collect()
    }

    /// `E{theta_check} = [(1/Mq) sum_k Re tr(Sbar_k Phi_k)] Sigma`.
    fn theta_check(&self, gamma: &GammaEstimate) -> Result<RealSymMatrix> {
        let mq = (self.num_windows() * self.q()) as f64;
        let mut factor = 0.0;
        for (k, s) in self.sbar.iter().enumerate() {
            factor += re_trace_product(s.as_matrix(), gamma.phi(k).as_matrix());
        }
        RealSymMatrix::new(self.sigma.as_matrix() * (factor / mq))
    }
}

fn gamma_distance(a: &GammaEstimate, b: &GammaEstimate) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.num_windows() {
        acc += (a.phi(k).as_matrix() - b.phi(k).as_matrix()).norm_squared();
    }
    fmath::sqrt(acc)
}

/// Runs the flip-flop loop against an arbitrary statistics source.
pub fn fit_with<S: StatSource>(stats: &S, config: &FlipFlopConfig) -> Result<FitResult> {
    config.validate()?;
    let p = stats.p();
    let q = stats.q();
    let m_windows = stats.num_windows();

    let mut omega = OmegaEstimate::identity(p);
    let mut gamma = GammaEstimate::identity(q, m_windows);
    let mut omega_support = RealSymMatrix::identity(p);
    let mut gamma_support: Vec<HermMatrix> = vec![HermMatrix::identity(q); m_windows];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut max_resid = 0.0f64;

    for outer in 1..=config.m_max {
        let thetas = stats.theta_tilde(&omega)?;
        let gsol = solve_gamma(&thetas, config.lambda_q, config.alpha, &config.admm, Some(&gamma))?;
        max_resid = max_resid.max(gsol.diagnostics.max_stationarity_residual);
        let norm = gsol.estimate.frobenius();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonFinite { context: "fit_with gamma normalization" });
        }
        let gamma_new = gsol.estimate.scale(1.0 / norm)?;
        let gamma_rel = gamma_distance(&gamma_new, &gamma) / gamma.frobenius();
        gamma_support = gsol
            .support
            .iter()
            .map(|w| HermMatrix::new(w.as_matrix() * Complex64::new(1.0 / norm, 0.0)))
            .collect::<Result<Vec<_>>>()?;

        let check = stats.theta_check(&gamma_new)?;
        let osol = solve_omega(&check, config.lambda_p, &config.admm, Some(&omega))?;
        max_resid = max_resid.max(osol.diagnostics.max_stationarity_residual);
        let omega_rel = (osol.estimate.as_matrix() - omega.as_matrix()).norm() / omega.as_matrix().norm();

        gamma = gamma_new;
        omega = osol.estimate;
        omega_support = osol.support;

        // unpenalized objective through the pairing identity:
        // data term = (1/p) tr(theta_check(Gamma) Omega)
        let mut g_value = -log_det_pd_sym(omega.sym())? / p as f64;
        for k in 0..m_windows {
            g_value -= log_det_pd_herm(gamma.phi(k))? / (m_windows * q) as f64;
        }
        g_value += trace_product(check.as_matrix(), omega.as_matrix()) / p as f64;
        let penalized = g_value + penalty_p(&omega, config.lambda_p) + penalty_q(&gamma, config.lambda_q, config.alpha);

        trace.push(OuterTrace {
            iteration: outer,
            gamma_rel_change: gamma_rel,
            omega_rel_change: omega_rel,
            neg_log_like: g_value,
            penalized_objective: penalized,
            gamma_iterations: gsol.diagnostics.iterations,
            gamma_converged: gsol.diagnostics.converged,
            omega_iterations: osol.diagnostics.iterations,
            omega_converged: osol.diagnostics.converged,
        });

        if gamma_rel <= config.tau_ff && omega_rel <= config.tau_ff {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        outer_iterations: trace.len(),
        omega,
        gamma,
        omega_support,
        gamma_support,
        trace,
        converged,
        max_stationarity_residual: max_resid,
        wall_secs: 0.0,
    })
}

/// Fits the estimator to data. Builds the per-window statistic cache and
/// runs [`fit_with`]; callers fitting the same dataset many times should
/// build one [`SpectralStats`] and call [`fit_with`] directly.
pub fn fit(dfts: &DftStack, plan: &SpectralPlan, config: &FlipFlopConfig) -> Result<FitResult> {
    if dfts.n() != plan.n() {
        return Err(Error::DimensionMismatch {
            context: "fit",
            expected: plan.n(),
            got: dfts.n(),
        });
    }
    let stats = SpectralStats::new(dfts, plan)?;
    fit_with(&stats, config)
}

/// Reads the estimated edge sets off the split-variable supports.
///
/// The q-node graph uses the group norms `|W^(ij)|` across the `M` windows,
/// the p-node graph uses `|Wbar_ij|`, and the combined `pq`-node graph
/// applies the Kronecker conditional-independence rules to the two supports.
pub fn extract_edges(result: &FitResult) -> EdgeReport {
    let p = result.omega.dim();
    let q = result.gamma.q();
    let mut p_edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let w = result.omega_support.as_matrix()[(i, j)];
            if w != 0.0 {
                p_edges.push((i, j, fmath::abs(w)));
            }
        }
    }
    let mut q_edges = Vec::new();
    for i in 0..q {
        for j in (i + 1)..q {
            let norm_sq: f64 = result
                .gamma_support
                .iter()
                .map(|w| w.as_matrix()[(i, j)].norm_sqr())
                .sum();
            if norm_sq > 0.0 {
                q_edges.push((i, j, fmath::sqrt(norm_sq)));
            }
        }
    }
    let p_support = p_edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let q_support = q_edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let combined = kpg_edges(&p_support, &q_support, p, q);
    EdgeReport {
        p,
        q,
        p_edges,
        q_edges,
        combined,
    }
}

/// Helper for tests and diagnostics: stacked Frobenius distance between the
/// concatenations of two Gamma estimates.
pub fn gamma_frobenius_distance(a: &GammaEstimate, b: &GammaEstimate) -> f64 {
    gamma_distance(a, b)
}

/// Complex view of a real matrix (used by population statistics in tests).
pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}
