//! Frequency-domain statistics against independent brute-force references.

mod common;

use common::{random_herm_psd, random_sym_psd};
use kronspec_core::admm_gamma::GammaEstimate;
use kronspec_core::admm_omega::OmegaEstimate;
use kronspec_core::linalg::{re_trace_product, trace_product, CMat, HermMatrix, Mat, RealSymMatrix};
use kronspec_core::rng::rng_from_seed;
use kronspec_core::spectral::{
    dft, dft_direct, neg_log_like, plan_windows, theta_check, theta_tilde, MatrixSeries, SpectralStats,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn random_series(p: usize, q: usize, n: usize, seed: u64) -> MatrixSeries {
    let mut rng = rng_from_seed(seed);
    MatrixSeries::new((0..n).map(|_| Mat::from_fn(p, q, |_, _| rng.random_range(-1.0..1.0))).collect()).unwrap()
}

#[test]
fn fft_matches_direct_summation() {
    for (n, seed) in [(8usize, 1u64), (6, 2), (12, 3), (20, 4), (36, 5), (128, 6), (364, 7)] {
        let series = random_series(2, 2, n, seed);
        let fast = dft(&series);
        let slow = dft_direct(&series);
        let mut max_err = 0.0f64;
        for m in 0..n {
            max_err = max_err.max((fast.ordinate(m) - slow.ordinate(m)).norm());
        }
        assert!(max_err <= 1e-10, "n = {n}: FFT vs direct gap {max_err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn parseval_identity(half_n in 1usize..16, p in 1usize..4, q in 1usize..4, seed in 0u64..1000) {
        let n = 2 * half_n;
        let series = random_series(p, q, n, seed);
        let stack = dft(&series);
        let time_energy: f64 = series.samples().iter().map(|z| z.norm_squared()).sum();
        let freq_energy: f64 = (0..n).map(|m| stack.ordinate(m).norm_squared()).sum();
        prop_assert!((time_energy - freq_energy).abs() <= 1e-8 * (1.0 + time_energy));
    }
}

#[test]
fn theta_check_matches_brute_force() {
    let (p, q, n) = (2usize, 2usize, 16usize);
    let series = random_series(p, q, n, 11);
    let stack = dft(&series);
    let plan = plan_windows(n, 1).unwrap();
    let gamma = GammaEstimate::new(vec![random_herm_psd(q, 12)]).unwrap();
    let theta = theta_check(&stack, &plan, &gamma).unwrap();

    // naive double-loop transcription of the definition
    let scale = 1.0 / (plan.num_windows() * plan.window_len() * q) as f64;
    let mut brute = Mat::zeros(p, p);
    for k in 0..plan.num_windows() {
        for m in plan.member_indices(k) {
            let d = stack.ordinate(m);
            for i in 0..p {
                for ip in 0..p {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for j in 0..q {
                        for jp in 0..q {
                            sum += d[(i, j)] * gamma.phi(k).as_matrix()[(j, jp)].conj() * d[(ip, jp)].conj();
                        }
                    }
                    brute[(i, ip)] += sum.re * scale;
                }
            }
        }
    }
    assert!((theta.as_matrix() - &brute).norm() <= 1e-12 * (1.0 + brute.norm()));
}

#[test]
fn theta_tilde_matches_brute_force() {
    let (p, q, n) = (2usize, 2usize, 16usize);
    let series = random_series(p, q, n, 21);
    let stack = dft(&series);
    let plan = plan_windows(n, 1).unwrap();
    let omega = OmegaEstimate::new(random_sym_psd(p, 22));
    let tilde = theta_tilde(&stack, &plan, &omega).unwrap();

    let scale = 1.0 / (plan.window_len() * p) as f64;
    for k in 0..plan.num_windows() {
        let mut brute = CMat::zeros(q, q);
        for m in plan.member_indices(k) {
            let d = stack.ordinate(m);
            for j in 0..q {
                for jp in 0..q {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for i in 0..p {
                        for ip in 0..p {
                            sum += d[(i, j)] * omega.as_matrix()[(i, ip)] * d[(ip, jp)].conj();
                        }
                    }
                    brute[(j, jp)] += sum * scale;
                }
            }
        }
        assert!((tilde[k].as_matrix() - &brute).norm() <= 1e-12 * (1.0 + brute.norm()));
    }
}

#[test]
fn zero_series_gives_zero_statistics() {
    let (p, q, n) = (3usize, 2usize, 32usize);
    let series = MatrixSeries::new(vec![Mat::zeros(p, q); n]).unwrap();
    let stack = dft(&series);
    let plan = plan_windows(n, 2).unwrap();
    let gamma = GammaEstimate::identity(q, 2);
    let omega = OmegaEstimate::identity(p);
    assert_eq!(theta_check(&stack, &plan, &gamma).unwrap().as_matrix().norm(), 0.0);
    for t in theta_tilde(&stack, &plan, &omega).unwrap() {
        assert_eq!(t.as_matrix().norm(), 0.0);
    }
    // identity weights, zero data: all three terms of G vanish
    assert_eq!(neg_log_like(&stack, &plan, &omega, &gamma).unwrap(), 0.0);
}

#[test]
fn statistics_are_psd_for_pd_weights() {
    let (p, q, n) = (3usize, 3usize, 64usize);
    let series = random_series(p, q, n, 31);
    let stack = dft(&series);
    let plan = plan_windows(n, 2).unwrap();
    let gamma = GammaEstimate::new(vec![random_herm_psd(q, 32), random_herm_psd(q, 33)]).unwrap();
    let omega = OmegaEstimate::new(random_sym_psd(p, 34));
    let check = theta_check(&stack, &plan, &gamma).unwrap();
    let eig = kronspec_core::linalg::sym_eig(check.as_matrix()).unwrap();
    assert!(eig.values[0] >= -1e-10);
    for t in theta_tilde(&stack, &plan, &omega).unwrap() {
        let eig = kronspec_core::linalg::herm_eig(t.as_matrix()).unwrap();
        assert!(eig.values[0] >= -1e-10);
    }
}

#[test]
fn cached_statistics_match_direct_route() {
    let (p, q, n) = (4usize, 3usize, 64usize);
    let series = random_series(p, q, n, 41);
    let stack = dft(&series);
    let plan = plan_windows(n, 3).unwrap();
    let stats = SpectralStats::new(&stack, &plan).unwrap();
    let omega = OmegaEstimate::new(random_sym_psd(p, 42));
    let gamma = GammaEstimate::new((0..3).map(|k| random_herm_psd(q, 43 + k)).collect()).unwrap();

    let direct_tilde = theta_tilde(&stack, &plan, &omega).unwrap();
    let cached_tilde = stats.theta_tilde(omega.as_matrix()).unwrap();
    for (a, b) in direct_tilde.iter().zip(cached_tilde.iter()) {
        assert!((a.as_matrix() - b.as_matrix()).norm() <= 1e-10 * (1.0 + a.as_matrix().norm()));
    }
    let direct_check = theta_check(&stack, &plan, &gamma).unwrap();
    let cached_check = stats.theta_check(gamma.phis()).unwrap();
    assert!((direct_check.as_matrix() - cached_check.as_matrix()).norm() <= 1e-10 * (1.0 + direct_check.as_matrix().norm()));
}

#[test]
fn pairing_identity_on_random_instances() {
    // (1/p) tr(theta_check(Gamma) Omega) == (1/Mq) sum_k Re tr(theta_tilde_k(Omega) Phi_k)
    for trial in 0..20u64 {
        let (p, q, n, m) = (3usize, 2usize, 32usize, 2usize);
        let series = random_series(p, q, n, 100 + trial);
        let stack = dft(&series);
        let plan = plan_windows(n, m).unwrap();
        let omega = OmegaEstimate::new(random_sym_psd(p, 200 + trial));
        let gamma = GammaEstimate::new(vec![random_herm_psd(q, 300 + trial), random_herm_psd(q, 400 + trial)]).unwrap();
        let check = theta_check(&stack, &plan, &gamma).unwrap();
        let lhs = trace_product(check.as_matrix(), omega.as_matrix()) / p as f64;
        let tilde = theta_tilde(&stack, &plan, &omega).unwrap();
        let mut rhs = 0.0;
        for k in 0..m {
            rhs += re_trace_product(tilde[k].as_matrix(), gamma.phi(k).as_matrix());
        }
        rhs /= (m * q) as f64;
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "trial {trial}: {lhs} vs {rhs}");
    }
}

#[test]
fn neg_log_like_scale_invariance_and_identity_consistency() {
    let (p, q, n, m) = (3usize, 2usize, 32usize, 2usize);
    let series = random_series(p, q, n, 51);
    let stack = dft(&series);
    let plan = plan_windows(n, m).unwrap();
    let omega = OmegaEstimate::new(random_sym_psd(p, 52));
    let gamma = GammaEstimate::new(vec![random_herm_psd(q, 53), random_herm_psd(q, 54)]).unwrap();

    let g = neg_log_like(&stack, &plan, &omega, &gamma).unwrap();
    for &c in &[0.5, 2.0, 7.3] {
        let omega_scaled = OmegaEstimate::new(RealSymMatrix::new(omega.as_matrix() * c).unwrap());
        let gamma_scaled = gamma.scale(1.0 / c).unwrap();
        let g_scaled = neg_log_like(&stack, &plan, &omega_scaled, &gamma_scaled).unwrap();
        assert!((g - g_scaled).abs() <= 1e-10 * (1.0 + g.abs()), "c = {c}: {g} vs {g_scaled}");
    }

    // identity weights: G reduces to the averaged trace of theta_tilde(I)
    let id_omega = OmegaEstimate::identity(p);
    let id_gamma = GammaEstimate::identity(q, m);
    let g_id = neg_log_like(&stack, &plan, &id_omega, &id_gamma).unwrap();
    let tilde = theta_tilde(&stack, &plan, &id_omega).unwrap();
    let mut data = 0.0;
    for t in &tilde {
        data += t.as_matrix().trace().re;
    }
    data /= (m * q) as f64;
    assert!((g_id - data).abs() <= 1e-10 * (1.0 + data.abs()));
}

#[test]
fn dft_stack_vec_compatibility() {
    // vec(D_z) equals the DFT of vec(Z) by linearity; spot check one ordinate
    let series = random_series(2, 3, 16, 61);
    let stack = dft(&series);
    let v = stack.ordinate_vec(3);
    let d = stack.ordinate(3);
    for j in 0..3 {
        for i in 0..2 {
            assert_eq!(v[i + j * 2], d[(i, j)]);
        }
    }
    let _ = HermMatrix::identity(2);
}
