//! Ground-truth model generation and sampling for the synthetic benchmark.
//!
//! The column factor is driven by independent stable VAR(3) blocks whose
//! impulse responses form block-diagonal moving-average coefficients `B_i`;
//! the row factor is an Erdos-Renyi precision matrix `Omega` shifted to a
//! prescribed minimum eigenvalue. Data follow the finite moving average
//! `z(t) = sum_i (B_i (x) F) e(t - i)` with `F = Omega^{-1/2}`, so the
//! autocovariance is `Psi(tau) (x) Sigma` with `Psi(tau) = sum_i B_i B_{i-tau}^T`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::{herm_eig, sqrt_pd, sym_eig, CMat, HermMatrix, Mat, RealSymMatrix};
use crate::rng::rng_from_seed;
use crate::spectral::MatrixSeries;

/// Recipe parameters for a synthetic truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Row dimension `p`.
    pub p: usize,
    /// Number of independent VAR blocks along the column dimension.
    pub blocks: usize,
    /// Dimension of each VAR block; `q = blocks * block_dim`.
    pub block_dim: usize,
    /// VAR order.
    pub var_order: usize,
    /// Moving-average truncation length `L`.
    pub ma_len: usize,
    /// Probability that a VAR coefficient entry is nonzero.
    pub var_density: f64,
    /// Nonzero VAR entries are uniform on `[-var_scale, var_scale]`.
    pub var_scale: f64,
    /// Companion spectral-radius bound for accepting a VAR draw.
    pub stability_radius: f64,
    /// Erdos-Renyi edge probability for `Omega`.
    pub er_prob: f64,
    /// Diagonal value of the raw `Omega` draw.
    pub omega_diag: f64,
    /// Off-diagonal magnitudes are uniform on `[lo, hi]`, sign-symmetric.
    pub omega_offdiag: (f64, f64),
    /// Target minimum eigenvalue of the shifted `Omega`.
    pub omega_min_eigenvalue: f64,
}

impl Default for SynthParams {
    /// The benchmark recipe: `p = q = 15`, three 5-dimensional VAR(3)
    /// blocks, `L = 40`, 5% densities.
    fn default() -> Self {
        Self {
            p: 15,
            blocks: 3,
            block_dim: 5,
            var_order: 3,
            ma_len: 40,
            var_density: 0.05,
            var_scale: 0.8,
            stability_radius: 0.95,
            er_prob: 0.05,
            omega_diag: 0.5,
            omega_offdiag: (0.1, 0.4),
            omega_min_eigenvalue: 0.5,
        }
    }
}

impl SynthParams {
    pub fn q(&self) -> usize {
        self.blocks * self.block_dim
    }

    /// Scaled-down variant for fast tests.
    pub fn small(p: usize, blocks: usize, block_dim: usize) -> Self {
        Self {
            p,
            blocks,
            block_dim,
            ma_len: 12,
            ..Self::default()
        }
    }
}

/// Noise family for the innovation sequence; all zero-mean, unit-variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseFamily {
    Gaussian,
    /// `Exp(1) - 1`.
    Exponential,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
}

impl NoiseFamily {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::Exponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            NoiseFamily::Uniform => {
                let half = fmath::sqrt(3.0);
                rng.random_range(-half..half)
            }
        }
    }
}

/// Seed and noise family for one data draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSeed {
    pub seed: u64,
    pub family: NoiseFamily,
}

/// A fully specified synthetic model with derived true edge sets.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub params: SynthParams,
    /// Moving-average coefficients `B_0..B_L` (`B_0 = I`).
    pub b: Vec<Mat>,
    /// Row mixing matrix `F = Omega^{-1/2}`.
    pub f_mix: Mat,
    /// `Sigma = F F^T = Omega^{-1}`.
    pub sigma: RealSymMatrix,
    /// True row precision.
    pub omega: RealSymMatrix,
    /// Off-diagonal support of `omega` (unordered pairs `i < j`).
    pub s_p: BTreeSet<(usize, usize)>,
    /// Support of the inverse column spectrum over `f in [0, 0.5]`.
    pub s_q: BTreeSet<(usize, usize)>,
}

/// Draws the VAR coefficient blocks, redrawing until the companion matrix of
/// every block has spectral radius within the stability bound.
pub fn gen_var_blocks(rng: &mut ChaCha8Rng, params: &SynthParams) -> Result<Vec<Vec<Mat>>> {
    let d = params.block_dim;
    let mut blocks = Vec::with_capacity(params.blocks);
    for _ in 0..params.blocks {
        let mut accepted = None;
        for _attempt in 0..1000 {
            let draw: Vec<Mat> = (0..params.var_order)
                .map(|_| {
                    Mat::from_fn(d, d, |_, _| {
                        if rng.random_range(0.0..1.0) < params.var_density {
                            rng.random_range(-params.var_scale..params.var_scale)
                        } else {
                            0.0
                        }
                    })
                })
                .collect();
            if companion_spectral_radius(&draw)? <= params.stability_radius {
                accepted = Some(draw);
                break;
            }
        }
        blocks.push(accepted.ok_or(Error::SearchFailed {
            context: "gen_var_blocks",
            message: format!("1000 consecutive draws unstable"),
        })?);
    }
    Ok(blocks)
}

/// Builds the block companion matrix of a VAR coefficient sequence.
pub fn companion_matrix(coeffs: &[Mat]) -> Mat {
    let order = coeffs.len();
    let d = coeffs[0].nrows();
    let n = order * d;
    let mut companion = Mat::zeros(n, n);
    for (k, a) in coeffs.iter().enumerate() {
        companion.view_mut((0, k * d), (d, d)).copy_from(a);
    }
    for k in 1..order {
        companion
            .view_mut((k * d, (k - 1) * d), (d, d))
            .copy_from(&Mat::identity(d, d));
    }
    companion
}

/// Spectral radius of the VAR companion matrix, via the Gelfand formula
/// `rho = lim |C^k|^(1/k)` evaluated at `k = 2^16` by repeated squaring
/// with per-step renormalization.
///
/// The Frobenius norm makes every finite-`k` value an upper bound on the
/// radius, so the stability check that consumes this never accepts an
/// unstable draw; at `k = 2^16` the overestimate is below 0.3% even for
/// maximally defective matrices of this size.
pub fn companion_spectral_radius(coeffs: &[Mat]) -> Result<f64> {
    let companion = companion_matrix(coeffs);
    Ok(spectral_radius_gelfand(&companion, 16))
}

fn spectral_radius_gelfand(m: &Mat, squarings: u32) -> f64 {
    let mut unit = m.clone();
    let mut log_norm = 0.0f64; // ln |C^(2^j)|_F accumulated in scaled form
    let norm = unit.norm();
    if norm == 0.0 {
        return 0.0;
    }
    unit /= norm;
    log_norm += fmath::ln(norm);
    for _ in 0..squarings {
        let squared = &unit * &unit;
        let sq_norm = squared.norm();
        if sq_norm == 0.0 {
            return 0.0;
        }
        log_norm = 2.0 * log_norm + fmath::ln(sq_norm);
        unit = squared / sq_norm;
    }
    fmath::exp(log_norm / fmath::powi(2.0, squarings as i32))
}

/// Impulse response of one VAR block: `H_i = sum_k A_k H_{i-k} + I delta_i`.
pub fn block_impulse_response(coeffs: &[Mat], len: usize) -> Vec<Mat> {
    let d = coeffs[0].nrows();
    let mut h = vec![Mat::zeros(d, d); len + 1];
    h[0] = Mat::identity(d, d);
    for i in 1..=len {
        let mut acc = Mat::zeros(d, d);
        for (k, a) in coeffs.iter().enumerate() {
            if i > k {
                acc += a * &h[i - 1 - k];
            }
        }
        h[i] = acc;
    }
    h
}

/// Assembles the block-diagonal moving-average coefficients `B_0..B_L` from
/// the per-block impulse responses.
pub fn impulse_response(blocks: &[Vec<Mat>], len: usize) -> Vec<Mat> {
    let d = blocks[0][0].nrows();
    let q = blocks.len() * d;
    let per_block: Vec<Vec<Mat>> = blocks.iter().map(|c| block_impulse_response(c, len)).collect();
    (0..=len)
        .map(|i| {
            let mut b = Mat::zeros(q, q);
            for (r, h) in per_block.iter().enumerate() {
                b.view_mut((r * d, r * d), (d, d)).copy_from(&h[i]);
            }
            b
        })
        .collect()
}

/// Draws the Erdos-Renyi row precision and its mixing factor.
///
/// The raw draw has the prescribed diagonal and sign-symmetric uniform
/// off-diagonal weights on the edge set; the whole matrix is then shifted by
/// `kappa I` so the minimum eigenvalue equals the target.
pub fn gen_omega(rng: &mut ChaCha8Rng, params: &SynthParams) -> Result<(RealSymMatrix, Mat, RealSymMatrix)> {
    let p = params.p;
    let mut raw = Mat::zeros(p, p);
    for i in 0..p {
        raw[(i, i)] = params.omega_diag;
        for j in (i + 1)..p {
            if rng.random_range(0.0..1.0) < params.er_prob {
                let (lo, hi) = params.omega_offdiag;
                let mag = rng.random_range(lo..hi);
                let sign = if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 };
                raw[(i, j)] = sign * mag;
                raw[(j, i)] = raw[(i, j)];
            }
        }
    }
    let eig = sym_eig(&raw)?;
    let kappa = params.omega_min_eigenvalue - eig.values[0];
    let omega = RealSymMatrix::new(raw + Mat::identity(p, p) * kappa)?;
    let root = sqrt_pd(&omega)?;
    let f_mix = root.inv_root;
    let sigma = RealSymMatrix::new(&f_mix * f_mix.transpose())?;
    Ok((omega, f_mix, sigma))
}

impl GroundTruth {
    /// Draws a complete model from one seed.
    pub fn generate(seed: u64, params: &SynthParams) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let var_blocks = gen_var_blocks(&mut rng, params)?;
        let b = impulse_response(&var_blocks, params.ma_len);
        let (omega, f_mix, sigma) = gen_omega(&mut rng, params)?;
        let s_p = omega_support(&omega);
        let mut truth = Self {
            params: *params,
            b,
            f_mix,
            sigma,
            omega,
            s_p,
            s_q: BTreeSet::new(),
        };
        truth.s_q = true_edge_sets(&truth, 256)?.1;
        Ok(truth)
    }

    pub fn p(&self) -> usize {
        self.params.p
    }

    pub fn q(&self) -> usize {
        self.params.q()
    }

    /// `Psi(tau) = sum_i B_i B_{i - tau}^T`, zero outside `|tau| <= L`.
    pub fn psi(&self, tau: i64) -> Mat {
        let q = self.q();
        let l = self.params.ma_len as i64;
        let mut acc = Mat::zeros(q, q);
        for i in 0..=l {
            let j = i - tau;
            if (0..=l).contains(&j) {
                acc += &self.b[i as usize] * self.b[j as usize].transpose();
            }
        }
        acc
    }

    /// Column spectrum `Sbar(f) = B(f) B(f)^H` with
    /// `B(f) = sum_i B_i e^{-2 pi i f i}`.
    pub fn sbar(&self, f: f64) -> CMat {
        let q = self.q();
        let mut bf = CMat::zeros(q, q);
        for (i, b) in self.b.iter().enumerate() {
            let angle = -2.0 * core::f64::consts::PI * f * i as f64;
            let w = Complex64::new(fmath::cos(angle), fmath::sin(angle));
            for r in 0..q {
                for c in 0..q {
                    bf[(r, c)] += w * b[(r, c)];
                }
            }
        }
        &bf * bf.adjoint()
    }

    /// `Sbar(f)` via the autocovariance route; equal to [`GroundTruth::sbar`]
    /// up to roundoff and used as its cross-check.
    pub fn sbar_from_psi(&self, f: f64) -> CMat {
        let q = self.q();
        let l = self.params.ma_len as i64;
        let mut acc = CMat::zeros(q, q);
        for tau in -l..=l {
            let angle = -2.0 * core::f64::consts::PI * f * tau as f64;
            let w = Complex64::new(fmath::cos(angle), fmath::sin(angle));
            let psi = self.psi(tau);
            for r in 0..q {
                for c in 0..q {
                    acc[(r, c)] += w * psi[(r, c)];
                }
            }
        }
        acc
    }
}

fn omega_support(omega: &RealSymMatrix) -> BTreeSet<(usize, usize)> {
    let p = omega.dim();
    let mut s = BTreeSet::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if omega.as_matrix()[(i, j)] != 0.0 {
                s.insert((i, j));
            }
        }
    }
    s
}

/// Numerically derives the true edge sets: `S_p` from the off-diagonal
/// support of `Omega`, and `S_q` by scanning `Sbar(f)^{-1}` on a uniform
/// grid over `[0, 0.5]` with a relative magnitude threshold of `1e-8`.
pub fn true_edge_sets(truth: &GroundTruth, grid_points: usize) -> Result<(BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>)> {
    let q = truth.q();
    let mut max_entry = vec![vec![0.0f64; q]; q];
    let mut global_max = 0.0f64;
    for g in 0..grid_points {
        let f = 0.5 * g as f64 / (grid_points - 1) as f64;
        let sbar = truth.sbar(f);
        let inv = invert_herm(&sbar)?;
        for i in 0..q {
            for j in 0..q {
                let mag = inv[(i, j)].norm();
                if mag > max_entry[i][j] {
                    max_entry[i][j] = mag;
                }
                if mag > global_max {
                    global_max = mag;
                }
            }
        }
    }
    let mut s_q = BTreeSet::new();
    for i in 0..q {
        for j in (i + 1)..q {
            if max_entry[i][j] > 1e-8 * global_max {
                s_q.insert((i, j));
            }
        }
    }
    Ok((omega_support(&truth.omega), s_q))
}

fn invert_herm(m: &CMat) -> Result<CMat> {
    let herm = HermMatrix::new(m.clone())?;
    let eig = herm_eig(herm.as_matrix())?;
    let d = m.nrows();
    let min = eig.values[0];
    let max = eig.values[d - 1];
    if !(max > 0.0) || min <= 1e-14 * max {
        return Err(Error::NotPositiveDefinite {
            context: "true_edge_sets spectral inverse",
            min_eigenvalue: min,
            tolerance: 1e-14 * max,
        });
    }
    let mut out = CMat::zeros(d, d);
    for k in 0..d {
        let v = eig.vectors.column(k);
        let w = 1.0 / eig.values[k];
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += v[i] * v[j].conj() * w;
            }
        }
    }
    Ok(out)
}

/// Draws a data matrix series from the truth: innovations for
/// `t = -L..n-1`, convolved as `Z(t) = sum_i F E(t-i) B_i^T`.
pub fn generate_series(truth: &GroundTruth, n: usize, gen: GenSeed) -> Result<MatrixSeries> {
    let (p, q) = (truth.p(), truth.q());
    let l = truth.params.ma_len;
    let mut rng = rng_from_seed(gen.seed);
    let mut premixed: Vec<Mat> = Vec::with_capacity(n + l);
    for _t in 0..(n + l) {
        let mut e = Mat::zeros(p, q);
        for j in 0..q {
            for i in 0..p {
                e[(i, j)] = gen.family.sample(&mut rng);
            }
        }
        premixed.push(&truth.f_mix * e);
    }
    let mut data = Vec::with_capacity(n);
    for t in 0..n {
        // index into premixed: time t corresponds to slot t + l
        let mut z = Mat::zeros(p, q);
        for i in 0..=l {
            z.gemm(1.0, &premixed[t + l - i], &truth.b[i].transpose(), 1.0);
        }
        data.push(z);
    }
    MatrixSeries::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_params() -> SynthParams {
        SynthParams::small(4, 2, 3)
    }

    #[test]
    fn var_blocks_stable_and_deterministic() {
        let params = small_params();
        let mut rng = rng_from_seed(5);
        let blocks = gen_var_blocks(&mut rng, &params).unwrap();
        assert_eq!(blocks.len(), 2);
        for b in &blocks {
            assert!(companion_spectral_radius(b).unwrap() <= params.stability_radius);
        }
        let mut rng2 = rng_from_seed(5);
        let again = gen_var_blocks(&mut rng2, &params).unwrap();
        assert_eq!(blocks, again);
    }

    #[test]
    fn spectral_radius_estimator_known_cases() {
        // diagonal: radius is the largest |entry|
        let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, -0.9, 0.5]));
        assert_relative_eq!(spectral_radius_gelfand(&m, 16), 0.9, max_relative = 1e-3);
        // nilpotent companion (zero coefficients): radius 0
        let coeffs = vec![Mat::zeros(3, 3); 3];
        assert_eq!(companion_spectral_radius(&coeffs).unwrap(), 0.0);
        // scalar VAR(1): companion is the coefficient itself
        let coeffs = vec![Mat::from_element(1, 1, -0.7)];
        assert_relative_eq!(companion_spectral_radius(&coeffs).unwrap(), 0.7, max_relative = 1e-6);
        // rotation by angle with scaling 0.8: complex pair of modulus 0.8
        let rot = Mat::from_row_slice(2, 2, &[0.8 * 0.6, -0.8 * 0.8, 0.8 * 0.8, 0.8 * 0.6]);
        assert_relative_eq!(spectral_radius_gelfand(&rot, 16), 0.8, max_relative = 1e-4);
    }

    #[test]
    fn impulse_response_zero_var_is_delta() {
        let coeffs = vec![Mat::zeros(3, 3); 3];
        let h = block_impulse_response(&coeffs, 5);
        assert_eq!(h[0], Mat::identity(3, 3));
        for hi in &h[1..] {
            assert_eq!(hi.norm(), 0.0);
        }
    }

    #[test]
    fn impulse_response_scalar_geometric() {
        let coeffs = vec![Mat::from_element(1, 1, 0.5)];
        let h = block_impulse_response(&coeffs, 6);
        for (i, hi) in h.iter().enumerate() {
            assert_relative_eq!(hi[(0, 0)], 0.5f64.powi(i as i32), epsilon = 1e-14);
        }
    }

    #[test]
    fn impulse_response_satisfies_recursion() {
        let params = small_params();
        let mut rng = rng_from_seed(9);
        let blocks = gen_var_blocks(&mut rng, &params).unwrap();
        for coeffs in &blocks {
            let h = block_impulse_response(coeffs, 10);
            for i in 1..=10 {
                let mut acc = Mat::zeros(3, 3);
                for (k, a) in coeffs.iter().enumerate() {
                    if i > k {
                        acc += a * &h[i - 1 - k];
                    }
                }
                assert!((&h[i] - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn omega_has_target_min_eigenvalue_and_inverse() {
        let params = SynthParams::default();
        let mut rng = rng_from_seed(13);
        let (omega, f_mix, sigma) = gen_omega(&mut rng, &params).unwrap();
        let eig = sym_eig(omega.as_matrix()).unwrap();
        assert_relative_eq!(eig.values[0], 0.5, epsilon = 1e-8);
        let prod = &f_mix * f_mix.transpose() * omega.as_matrix();
        assert!((prod - Mat::identity(15, 15)).norm() < 1e-8);
        assert!((sigma.as_matrix() * omega.as_matrix() - Mat::identity(15, 15)).norm() < 1e-8);
    }

    #[test]
    fn no_edge_draw_gives_half_identity() {
        let params = SynthParams {
            er_prob: 0.0,
            p: 6,
            ..SynthParams::default()
        };
        let mut rng = rng_from_seed(17);
        let (omega, _, _) = gen_omega(&mut rng, &params).unwrap();
        assert!((omega.as_matrix() - Mat::identity(6, 6) * 0.5).norm() < 1e-12);
    }

    #[test]
    fn sbar_routes_agree_and_block_structure_forces_exact_zeros() {
        let truth = GroundTruth::generate(23, &small_params()).unwrap();
        for &f in &[0.0, 0.17, 0.33, 0.5] {
            let a = truth.sbar(f);
            let b = truth.sbar_from_psi(f);
            assert!((&a - &b).norm() < 1e-10 * (1.0 + a.norm()));
        }
        // cross-block entries of Sbar (and its inverse) are exactly zero
        let inv = invert_herm(&truth.sbar(0.21)).unwrap();
        let d = truth.params.block_dim;
        for i in 0..d {
            for j in d..2 * d {
                assert_eq!(truth.sbar(0.21)[(i, j)], Complex64::new(0.0, 0.0));
                assert!(inv[(i, j)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn true_edges_white_noise_empty() {
        let params = SynthParams {
            var_density: 0.0,
            ..small_params()
        };
        let truth = GroundTruth::generate(29, &params).unwrap();
        assert!(truth.s_q.is_empty());
    }

    #[test]
    fn true_edges_no_cross_block_pairs_and_grid_refinement_agrees() {
        let truth = GroundTruth::generate(31, &small_params()).unwrap();
        let d = truth.params.block_dim;
        for &(i, j) in &truth.s_q {
            assert_eq!(i / d, j / d, "cross-block edge ({i},{j})");
        }
        let (_, refined) = true_edge_sets(&truth, 1024).unwrap();
        assert_eq!(truth.s_q, refined);
    }

    #[test]
    fn generate_series_deterministic_and_white_case() {
        let params = SynthParams {
            var_density: 0.0,
            er_prob: 0.0,
            ..small_params()
        };
        // with zero VAR coefficients and no edges, B_i = delta_i I and
        // Omega = 0.5 I, so Z(t) are i.i.d. with variance 2 per entry
        let truth = GroundTruth::generate(37, &params).unwrap();
        let gen = GenSeed {
            seed: 101,
            family: NoiseFamily::Gaussian,
        };
        let n = 4096;
        let s1 = generate_series(&truth, n, gen).unwrap();
        let s2 = generate_series(&truth, n, gen).unwrap();
        assert_eq!(s1, s2);
        let mut mean = 0.0;
        let mut var = 0.0;
        for z in s1.samples() {
            mean += z[(0, 0)];
            var += z[(0, 0)] * z[(0, 0)];
        }
        mean /= n as f64;
        var /= n as f64;
        assert!(mean.abs() < 0.15, "mean {mean}");
        assert_relative_eq!(var, 2.0, max_relative = 0.1);
    }

    #[test]
    fn noise_families_zero_mean_unit_variance() {
        for family in [NoiseFamily::Gaussian, NoiseFamily::Exponential, NoiseFamily::Uniform] {
            let mut rng = rng_from_seed(41);
            let n = 200_000;
            let mut mean = 0.0;
            let mut var = 0.0;
            for _ in 0..n {
                let x = family.sample(&mut rng);
                mean += x;
                var += x * x;
            }
            mean /= n as f64;
            var /= n as f64;
            assert!(mean.abs() < 0.01, "{family:?} mean {mean}");
            assert!((var - 1.0).abs() < 0.02, "{family:?} var {var}");
        }
    }
}
