//! Normalized DFTs, smoothing-window geometry, and the frequency-domain
//! sufficient statistics consumed by the two ADMM subproblems.
//!
//! For an even-length series the normalized DFT ordinates at frequencies
//! `f_m = m/n`, `m = 1..n/2-1`, are asymptotically independent complex
//! Gaussians; the estimator averages them over `M` disjoint windows of `K`
//! consecutive ordinates centered at equally spaced frequencies in `(0, 0.5)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::admm_gamma::GammaEstimate;
use crate::admm_omega::OmegaEstimate;
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::{log_det_pd_herm, log_det_pd_sym, re_trace_product, CMat, HermMatrix, Mat, RealSymMatrix};

/// A length-`n` sequence of real `p x q` observation matrices, `n` even.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    p: usize,
    q: usize,
    data: Vec<Mat>,
}

impl MatrixSeries {
    /// Wraps a sample sequence. The length must be even and positive and all
    /// entries finite.
    pub fn new(data: Vec<Mat>) -> Result<Self> {
        if data.is_empty() || data.len() % 2 != 0 {
            return Err(Error::InvalidArgument {
                context: "MatrixSeries",
                message: format!("length must be even and positive, got {}", data.len()),
            });
        }
        let (p, q) = (data[0].nrows(), data[0].ncols());
        if p == 0 || q == 0 {
            return Err(Error::InvalidArgument {
                context: "MatrixSeries",
                message: format!("matrices must be nonempty, got {p}x{q}"),
            });
        }
        for m in &data {
            if m.nrows() != p || m.ncols() != q {
                return Err(Error::DimensionMismatch {
                    context: "MatrixSeries",
                    expected: p * q,
                    got: m.nrows() * m.ncols(),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: "MatrixSeries",
                });
            }
        }
        Ok(Self { p, q, data })
    }

    /// Like [`MatrixSeries::new`] but drops the final sample when the length
    /// is odd. Returns whether a sample was dropped.
    pub fn truncating(mut data: Vec<Mat>) -> Result<(Self, bool)> {
        let dropped = data.len() % 2 != 0 && data.len() > 1;
        if dropped {
            data.pop();
        }
        Ok((Self::new(data)?, dropped))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn samples(&self) -> &[Mat] {
        &self.data
    }
}

/// Window geometry over the DFT ordinates.
///
/// `K = 2 * half_window + 1` consecutive ordinates per window, `M` windows,
/// centered 1-based ordinate `c_k = k K + half_window + 1` for `k = 0..M-1`.
/// Every member ordinate lies in `[1, n/2 - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralPlan {
    n: usize,
    num_windows: usize,
    window_len: usize,
    half_window: usize,
}

/// Chooses the largest odd window length `K` such that `M * K <= n/2 - 1`.
pub fn plan_windows(n: usize, m_target: usize) -> Result<SpectralPlan> {
    if n == 0 || n % 2 != 0 || m_target == 0 {
        return Err(Error::InvalidArgument {
            context: "plan_windows",
            message: format!("need even n > 0 and M > 0, got n = {n}, M = {m_target}"),
        });
    }
    let budget = n / 2 - 1;
    let k_raw = budget / m_target;
    let window_len = if k_raw % 2 == 0 { k_raw.saturating_sub(1) } else { k_raw };
    if window_len < 1 {
        return Err(Error::InfeasiblePlan { n, m_target });
    }
    Ok(SpectralPlan {
        n,
        num_windows: m_target,
        window_len,
        half_window: (window_len - 1) / 2,
    })
}

impl SpectralPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `M`, the number of windows.
    pub fn num_windows(&self) -> usize {
        self.num_windows
    }

    /// `K`, the number of ordinates per window (odd).
    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Half-window size `(K - 1) / 2`.
    pub fn half_window(&self) -> usize {
        self.half_window
    }

    /// 1-based center ordinate of window `k` (0-based `k`).
    pub fn center_index(&self, k: usize) -> usize {
        debug_assert!(k < self.num_windows);
        k * self.window_len + self.half_window + 1
    }

    /// Center frequency of window `k`.
    pub fn center_freq(&self, k: usize) -> f64 {
        self.center_index(k) as f64 / self.n as f64
    }

    /// Ordinates belonging to window `k`.
    pub fn member_indices(&self, k: usize) -> impl Iterator<Item = usize> {
        let c = self.center_index(k);
        (c - self.half_window)..=(c + self.half_window)
    }

    fn check_stack(&self, dfts: &DftStack, context: &'static str) -> Result<()> {
        if dfts.n() != self.n {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.n,
                got: dfts.n(),
            });
        }
        Ok(())
    }
}

/// The normalized DFT ordinates `D_z(f_m)`, `f_m = m/n`, for `m = 0..n-1`.
#[derive(Debug, Clone)]
pub struct DftStack {
    p: usize,
    q: usize,
    mats: Vec<CMat>,
}

impl DftStack {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.mats.len()
    }

    /// Ordinate at 0-based frequency index `m`.
    pub fn ordinate(&self, m: usize) -> &CMat {
        &self.mats[m]
    }

    /// The ordinate vectorized column-major, `vec(D_z(f_m))`.
    pub fn ordinate_vec(&self, m: usize) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_iterator(self.p * self.q, self.mats[m].iter().copied())
    }
}

/// Normalized forward DFT of the series, computed cell-wise by a mixed-radix
/// FFT (prime factors fall back to direct summation at the leaves).
pub fn dft(series: &MatrixSeries) -> DftStack {
    let n = series.n();
    let (p, q) = (series.p(), series.q());
    let scale = 1.0 / fmath::sqrt(n as f64);
    let roots = root_table(n);
    let mut mats = vec![CMat::zeros(p, q); n];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..p {
        for j in 0..q {
            for (t, z) in series.samples().iter().enumerate() {
                line[t] = Complex64::new(z[(i, j)], 0.0);
            }
            let out = fft_mixed_radix(&line, &roots, 1);
            for m in 0..n {
                mats[m][(i, j)] = out[m] * scale;
            }
        }
    }
    DftStack { p, q, mats }
}

/// Normalized forward DFT by direct `O(n^2)` summation. This is the
/// independent reference for the FFT path; the two agree to ~1e-10.
pub fn dft_direct(series: &MatrixSeries) -> DftStack {
    let n = series.n();
    let (p, q) = (series.p(), series.q());
    let scale = 1.0 / fmath::sqrt(n as f64);
    let roots = root_table(n);
    let mut mats = vec![CMat::zeros(p, q); n];
    for m in 0..n {
        let mut acc = CMat::zeros(p, q);
        for (t, z) in series.samples().iter().enumerate() {
            let w = roots[(m * t) % n];
            for i in 0..p {
                for j in 0..q {
                    acc[(i, j)] += w * z[(i, j)];
                }
            }
        }
        mats[m] = acc * Complex64::new(scale, 0.0);
    }
    DftStack { p, q, mats }
}

/// `e^{-2 pi i j / n}` for `j = 0..n-1`.
fn root_table(n: usize) -> Vec<Complex64> {
    let step = -2.0 * core::f64::consts::PI / n as f64;
    (0..n)
        .map(|j| {
            let a = step * j as f64;
            Complex64::new(fmath::cos(a), fmath::sin(a))
        })
        .collect()
}

fn smallest_prime_factor(n: usize) -> usize {
    if n % 2 == 0 {
        return 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return d;
        }
        d += 2;
    }
    n
}

/// Recursive mixed-radix Cooley-Tukey transform. `roots` is the full table of
/// `N`-th roots for the original length `N`; at depth the current length is
/// `N / root_stride` and its roots are `roots[j * root_stride]`.
fn fft_mixed_radix(x: &[Complex64], roots: &[Complex64], root_stride: usize) -> Vec<Complex64> {
    let n = x.len();
    if n == 1 {
        return vec![x[0]];
    }
    let r = smallest_prime_factor(n);
    if r == n {
        // prime length: direct summation
        return (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    acc += roots[((k * t) % n) * root_stride] * v;
                }
                acc
            })
            .collect();
    }
    let m = n / r;
    let subs: Vec<Vec<Complex64>> = (0..r)
        .map(|s| {
            let xs: Vec<Complex64> = (0..m).map(|j| x[j * r + s]).collect();
            fft_mixed_radix(&xs, roots, root_stride * r)
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = subs[0][k % m];
        for (s, sub) in subs.iter().enumerate().skip(1) {
            acc += roots[((k * s) % n) * root_stride] * sub[k % m];
        }
        *slot = acc;
    }
    out
}

/// Row-side statistic: `(1/MKq) sum_k sum_l Re{ D Phi_k^* D^H }`, a real
/// symmetric positive-semidefinite `p x p` matrix.
pub fn theta_check(dfts: &DftStack, plan: &SpectralPlan, gamma: &GammaEstimate) -> Result<RealSymMatrix> {
    plan.check_stack(dfts, "theta_check")?;
    if gamma.q() != dfts.q() || gamma.num_windows() != plan.num_windows() {
        return Err(Error::DimensionMismatch {
            context: "theta_check",
            expected: dfts.q() * plan.num_windows(),
            got: gamma.q() * gamma.num_windows(),
        });
    }
    let p = dfts.p();
    let mut acc = Mat::zeros(p, p);
    for k in 0..plan.num_windows() {
        let phi_conj = gamma.phi(k).as_matrix().conjugate();
        for m in plan.member_indices(k) {
            let d = dfts.ordinate(m);
            let t = d * &phi_conj * d.adjoint();
            for i in 0..p {
                for j in 0..p {
                    acc[(i, j)] += t[(i, j)].re;
                }
            }
        }
    }
    let scale = 1.0 / (plan.num_windows() * plan.window_len() * dfts.q()) as f64;
    RealSymMatrix::new(acc * scale)
}

/// Column-side statistics: for each window `k`, `(1/Kp) sum_l D^T Omega D^*`,
/// a Hermitian positive-semidefinite `q x q` matrix.
pub fn theta_tilde(dfts: &DftStack, plan: &SpectralPlan, omega: &OmegaEstimate) -> Result<Vec<HermMatrix>> {
    plan.check_stack(dfts, "theta_tilde")?;
    if omega.dim() != dfts.p() {
        return Err(Error::DimensionMismatch {
            context: "theta_tilde",
            expected: dfts.p(),
            got: omega.dim(),
        });
    }
    let q = dfts.q();
    let omega_c = omega.as_matrix().map(|x| Complex64::new(x, 0.0));
    let scale = 1.0 / (plan.window_len() * dfts.p()) as f64;
    let mut out = Vec::with_capacity(plan.num_windows());
    for k in 0..plan.num_windows() {
        let mut acc = CMat::zeros(q, q);
        for m in plan.member_indices(k) {
            let d = dfts.ordinate(m);
            acc += d.transpose() * &omega_c * d.conjugate();
        }
        out.push(HermMatrix::new(acc * Complex64::new(scale, 0.0))?);
    }
    Ok(out)
}

/// The (scaled) Whittle negative log-likelihood
/// `G = -(1/p) ln|Omega| - (1/Mq) sum_k Re ln|Phi_k| + (1/Mq) sum_k Re tr(A_k)`
/// with `A_k = (1/Kp) sum_l D^H Omega D Phi_k^*`.
pub fn neg_log_like(
    dfts: &DftStack,
    plan: &SpectralPlan,
    omega: &OmegaEstimate,
    gamma: &GammaEstimate,
) -> Result<f64> {
    plan.check_stack(dfts, "neg_log_like")?;
    let p = dfts.p() as f64;
    let mq = (plan.num_windows() * dfts.q()) as f64;
    let mut value = -log_det_pd_sym(omega.sym())? / p;
    let omega_c = omega.as_matrix().map(|x| Complex64::new(x, 0.0));
    let scale = 1.0 / (plan.window_len() * dfts.p()) as f64;
    for k in 0..plan.num_windows() {
        value -= log_det_pd_herm(gamma.phi(k))? / mq;
        let q = dfts.q();
        let mut s = CMat::zeros(q, q);
        for m in plan.member_indices(k) {
            let d = dfts.ordinate(m);
            s += d.adjoint() * &omega_c * d;
        }
        let phi_conj = gamma.phi(k).as_matrix().conjugate();
        value += scale * re_trace_product(&s, &phi_conj) / mq;
    }
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: "neg_log_like",
        });
    }
    Ok(value)
}

/// Smoothed periodogram of the vectorized series over window `k`:
/// `(1/K) sum_l d_z d_z^H`, a `pq x pq` Hermitian PSD matrix. The vectorized
/// index is column-major: cell `(i, j)` sits at `i + j p`.
pub fn smoothed_periodogram(dfts: &DftStack, plan: &SpectralPlan, k: usize) -> CMat {
    let pq = dfts.p() * dfts.q();
    let mut acc = CMat::zeros(pq, pq);
    for m in plan.member_indices(k) {
        let d = dfts.ordinate_vec(m);
        for i in 0..pq {
            for j in 0..pq {
                acc[(i, j)] += d[i] * d[j].conj();
            }
        }
    }
    acc / Complex64::new(plan.window_len() as f64, 0.0)
}

/// Precomputed per-window smoothed periodograms.
///
/// Both sufficient statistics are linear in their weight matrix, with
/// coefficients given by the smoothed periodograms:
/// `[theta_tilde_k]_{jj'} = (1/p) sum_{ii'} Omega_{ii'} [S_k]_{(i,j),(i',j')}`
/// and
/// `[theta_check]_{ii'} = (1/Mq) sum_k sum_{jj'} Re(Phi_k^*_{jj'} [S_k]_{(i,j),(i',j')})`.
/// Building the `S_k` once per dataset turns every flip-flop outer iteration
/// into a cheap contraction; `theta_check`/`theta_tilde` on the raw DFTs
/// remain the reference route the cache is tested against.
#[derive(Debug, Clone)]
pub struct SpectralStats {
    p: usize,
    q: usize,
    plan: SpectralPlan,
    windows: Vec<CMat>,
}

impl SpectralStats {
    pub fn new(dfts: &DftStack, plan: &SpectralPlan) -> Result<Self> {
        plan.check_stack(dfts, "SpectralStats")?;
        let windows = (0..plan.num_windows())
            .map(|k| smoothed_periodogram(dfts, plan, k))
            .collect();
        Ok(Self {
            p: dfts.p(),
            q: dfts.q(),
            plan: *plan,
            windows,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    /// Column-side statistics by contraction against a real symmetric weight.
    pub fn theta_tilde(&self, omega: &Mat) -> Result<Vec<HermMatrix>> {
        let (p, q) = (self.p, self.q);
        let pq = p * q;
        let scale = 1.0 / p as f64;
        let ow = omega.as_slice();
        let mut out = Vec::with_capacity(self.windows.len());
        for s in &self.windows {
            let sd = s.as_slice();
            let mut acc = CMat::zeros(q, q);
            for j in 0..q {
                for jp in j..q {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for ip in 0..p {
                        let col = &sd[(ip + jp * p) * pq + j * p..(ip + jp * p) * pq + j * p + p];
                        let wcol = &ow[ip * p..ip * p + p];
                        for i in 0..p {
                            sum += col[i] * wcol[i];
                        }
                    }
                    let v = sum * scale;
                    acc[(j, jp)] = v;
                    acc[(jp, j)] = v.conj();
                }
            }
            out.push(HermMatrix::new(acc)?);
        }
        Ok(out)
    }

    /// Row-side statistic by contraction against the Hermitian weights.
    pub fn theta_check(&self, phis: &[HermMatrix]) -> Result<RealSymMatrix> {
        let (p, q) = (self.p, self.q);
        let pq = p * q;
        let m = self.windows.len();
        let mut acc = Mat::zeros(p, p);
        for (s, phi) in self.windows.iter().zip(phis.iter()) {
            let sd = s.as_slice();
            let w = phi.as_matrix();
            // accumulate column blocks: for each (j, jp) the p x p block of
            // the periodogram contributes Re(conj(w[j,jp]) block) to acc
            for jp in 0..q {
                for j in 0..q {
                    let x = w[(j, jp)].conj();
                    if x.re == 0.0 && x.im == 0.0 {
                        continue;
                    }
                    for ip in 0..p {
                        let col = &sd[(ip + jp * p) * pq + j * p..(ip + jp * p) * pq + j * p + p];
                        for i in 0..p {
                            let y = col[i];
                            acc[(i, ip)] += x.re * y.re - x.im * y.im;
                        }
                    }
                }
            }
        }
        RealSymMatrix::new(acc / (m * q) as f64)
    }
}
