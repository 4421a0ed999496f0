//! End-to-end properties of the flip-flop estimator: closed-form oracles at
//! degenerate dimensions, determinism, inner-solve decrease, normalization
//! and scale consistency.

mod common;

use kronspec_core::admm::AdmmConfig;
use kronspec_core::admm_gamma::l2_objective;
use kronspec_core::admm_omega::{l1_objective, OmegaEstimate};
use kronspec_core::flipflop::{extract_edges, fit, FlipFlopConfig};
use kronspec_core::linalg::{inv_pd_herm, HermMatrix, Mat, RealSymMatrix};
use kronspec_core::rng::rng_from_seed;
use kronspec_core::spectral::{dft, plan_windows, smoothed_periodogram, theta_check, theta_tilde, MatrixSeries};
use kronspec_core::synth::{generate_series, GenSeed, GroundTruth, NoiseFamily, SynthParams};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn tight_config() -> FlipFlopConfig {
    FlipFlopConfig {
        admm: AdmmConfig::tight(),
        tau_ff: 1e-8,
        m_max: 60,
        ..FlipFlopConfig::new(0.0, 0.0)
    }
}

fn gaussian_series(p: usize, q: usize, n: usize, seed: u64) -> MatrixSeries {
    let mut rng = rng_from_seed(seed);
    MatrixSeries::new((0..n).map(|_| Mat::from_fn(p, q, |_, _| StandardNormal.sample(&mut rng))).collect()).unwrap()
}

#[test]
fn row_vector_series_recovers_inverse_smoothed_periodogram() {
    // p = 1: at zero penalty the product Phi_k (x) Omega equals the inverse
    // smoothed periodogram of the q-variate series exactly at the fixed point
    let (q, n, m) = (3usize, 256usize, 2usize);
    let series = gaussian_series(1, q, n, 7);
    let stack = dft(&series);
    let plan = plan_windows(n, m).unwrap();
    let result = fit(&stack, &plan, &tight_config()).unwrap();
    let omega_scalar = result.omega.as_matrix()[(0, 0)];
    for k in 0..m {
        let sp = HermMatrix::new(smoothed_periodogram(&stack, &plan, k)).unwrap();
        let target = inv_pd_herm(&sp).unwrap();
        let product = result.gamma.phi(k).as_matrix() * num_complex::Complex64::new(omega_scalar, 0.0);
        let rel = (&product - &target).norm() / target.norm();
        assert!(rel <= 1e-3, "window {k}: relative gap {rel:e}");
    }
}

#[test]
fn scalar_series_recovers_inverse_scalar_psd_per_window() {
    let (n, m) = (128usize, 3usize);
    let series = gaussian_series(1, 1, n, 9);
    let stack = dft(&series);
    let plan = plan_windows(n, m).unwrap();
    let result = fit(&stack, &plan, &tight_config()).unwrap();
    let omega = result.omega.as_matrix()[(0, 0)];
    for k in 0..m {
        let psd = smoothed_periodogram(&stack, &plan, k)[(0, 0)].re;
        let product = result.gamma.phi(k).as_matrix()[(0, 0)].re * omega;
        let rel = (product - 1.0 / psd).abs() / (1.0 / psd);
        assert!(rel <= 1e-4, "window {k}: {product} vs {}", 1.0 / psd);
    }
}

#[test]
fn column_vector_series_satisfies_fixed_point_equations() {
    // q = 1: the flip-flop limit solves the two coupled closed forms
    // phi_k = 1 / theta_tilde_k(omega), omega = theta_check(gamma)^{-1}
    let (p, n, m) = (3usize, 256usize, 2usize);
    let series = gaussian_series(p, 1, n, 11);
    let stack = dft(&series);
    let plan = plan_windows(n, m).unwrap();
    let result = fit(&stack, &plan, &tight_config()).unwrap();

    let tilde = theta_tilde(&stack, &plan, &result.omega).unwrap();
    for k in 0..m {
        let phi = result.gamma.phi(k).as_matrix()[(0, 0)].re;
        let expect = 1.0 / tilde[k].as_matrix()[(0, 0)].re;
        assert!((phi - expect).abs() / expect <= 1e-5, "window {k}");
    }
    let check = theta_check(&stack, &plan, &result.gamma).unwrap();
    let inv = kronspec_core::linalg::inv_pd_sym(&check).unwrap();
    let rel = (result.omega.as_matrix() - &inv).norm() / inv.norm();
    assert!(rel <= 1e-5, "omega fixed point gap {rel:e}");
}

#[test]
fn white_identity_data_gives_scaled_identity_and_unit_gamma() {
    let params = SynthParams {
        var_density: 0.0,
        er_prob: 0.0,
        p: 4,
        blocks: 2,
        block_dim: 2,
        ma_len: 8,
        ..SynthParams::default()
    };
    let truth = GroundTruth::generate(13, &params).unwrap();
    let series = generate_series(&truth, 512, GenSeed { seed: 14, family: NoiseFamily::Gaussian }).unwrap();
    let stack = dft(&series);
    let plan = plan_windows(512, 2).unwrap();
    let config = FlipFlopConfig::new(0.02, 0.02);
    let result = fit(&stack, &plan, &config).unwrap();

    assert!((result.gamma.frobenius() - 1.0).abs() <= 1e-12);
    // off-diagonals vanish under the mild penalty
    let edges = extract_edges(&result);
    assert!(edges.p_edges.is_empty(), "spurious row edges {:?}", edges.p_edges);
    assert!(edges.q_edges.is_empty(), "spurious column edges {:?}", edges.q_edges);
    // omega close to a multiple of the identity
    let m = result.omega.as_matrix();
    let mean_diag = m.diagonal().mean();
    let dev = (m - Mat::identity(4, 4) * mean_diag).norm() / m.norm();
    assert!(dev <= 0.05, "omega not near scaled identity: {dev}");
}

#[test]
fn fit_is_bit_deterministic() {
    let (p, q, n, m) = (3usize, 2usize, 64usize, 2usize);
    let series = gaussian_series(p, q, n, 17);
    let stack = dft(&series);
    let plan = plan_windows(n, m).unwrap();
    let config = FlipFlopConfig::new(0.05, 0.02);
    let a = fit(&stack, &plan, &config).unwrap();
    let b = fit(&stack, &plan, &config).unwrap();
    assert_eq!(a.omega.as_matrix(), b.omega.as_matrix());
    for k in 0..m {
        assert_eq!(a.gamma.phi(k).as_matrix(), b.gamma.phi(k).as_matrix());
        assert_eq!(a.gamma_support[k].as_matrix(), b.gamma_support[k].as_matrix());
    }
    assert_eq!(a.omega_support.as_matrix(), b.omega_support.as_matrix());
    assert_eq!(a.outer_iterations, b.outer_iterations);
}

#[test]
fn inner_solves_decrease_their_objectives() {
    let (p, q, n, m) = (3usize, 3usize, 64usize, 2usize);
    let series = gaussian_series(p, q, n, 19);
    let stack = dft(&series);
    let plan = plan_windows(n, m).unwrap();
    let config = FlipFlopConfig::new(0.05, 0.02);
    let result = fit(&stack, &plan, &config).unwrap();

    // L2 at the returned Gamma (pre-normalization scale is what the solver
    // minimized; evaluate against its own warm start, the previous iterate)
    let tilde = theta_tilde(&stack, &plan, &result.omega).unwrap();
    let warm = result.gamma.clone();
    let resolved = kronspec_core::admm_gamma::solve_gamma(&tilde, config.lambda_q, config.alpha, &config.admm, Some(&warm)).unwrap();
    let at_solution = l2_objective(&tilde, &resolved.estimate, config.lambda_q, config.alpha).unwrap();
    let at_warm = l2_objective(&tilde, &warm, config.lambda_q, config.alpha).unwrap();
    assert!(at_solution <= at_warm + 1e-6, "L2 rose: {at_solution} vs {at_warm}");

    let check = theta_check(&stack, &plan, &result.gamma).unwrap();
    let warm_omega = result.omega.clone();
    let resolved = kronspec_core::admm_omega::solve_omega(&check, config.lambda_p, &config.admm, Some(&warm_omega)).unwrap();
    let at_solution = l1_objective(&check, &resolved.estimate, config.lambda_p).unwrap();
    let at_warm = l1_objective(&check, &warm_omega, config.lambda_p).unwrap();
    assert!(at_solution <= at_warm + 1e-6, "L1 rose: {at_solution} vs {at_warm}");
}

#[test]
fn scale_consistency_of_statistics_and_edges() {
    let (p, q, n, m) = (3usize, 2usize, 64usize, 2usize);
    let series = gaussian_series(p, q, n, 23);
    let c = 2.0f64;
    let scaled =
        MatrixSeries::new(series.samples().iter().map(|z| z * c).collect()).unwrap();
    let stack = dft(&series);
    let stack_scaled = dft(&scaled);
    let plan = plan_windows(n, m).unwrap();

    // statistics scale by c^2
    let gamma = kronspec_core::admm_gamma::GammaEstimate::identity(q, m);
    let omega = OmegaEstimate::identity(p);
    let t1 = theta_check(&stack, &plan, &gamma).unwrap();
    let t2 = theta_check(&stack_scaled, &plan, &gamma).unwrap();
    assert!((t1.as_matrix() * c * c - t2.as_matrix()).norm() <= 1e-10 * t2.as_matrix().norm());
    let u1 = theta_tilde(&stack, &plan, &omega).unwrap();
    let u2 = theta_tilde(&stack_scaled, &plan, &omega).unwrap();
    for k in 0..m {
        assert!(
            (u1[k].as_matrix() * num_complex::Complex64::new(c * c, 0.0) - u2[k].as_matrix()).norm()
                <= 1e-10 * u2[k].as_matrix().norm()
        );
    }

    // edge sets match when the row penalty carries the power factor c^2;
    // the column penalty is scale-free because Gamma is re-normalized and
    // Omega absorbs the data scale
    let config = FlipFlopConfig::new(0.05, 0.02);
    let config_scaled = FlipFlopConfig::new(0.05 * c * c, 0.02);
    let e1 = extract_edges(&fit(&stack, &plan, &config).unwrap());
    let e2 = extract_edges(&fit(&stack_scaled, &plan, &config_scaled).unwrap());
    assert_eq!(e1.p_support(), e2.p_support());
    assert_eq!(e1.q_support(), e2.q_support());
}

#[test]
fn extract_edges_dense_and_diagonal_cases() {
    let (p, q, n, m) = (3usize, 2usize, 64usize, 2usize);
    let series = gaussian_series(p, q, n, 29);
    let stack = dft(&series);
    let plan = plan_windows(n, m).unwrap();
    // zero penalties: dense supports, complete graphs
    let dense = fit(&stack, &plan, &FlipFlopConfig::new(0.0, 0.0)).unwrap();
    let edges = extract_edges(&dense);
    assert_eq!(edges.p_edges.len(), p * (p - 1) / 2);
    assert_eq!(edges.q_edges.len(), q * (q - 1) / 2);
    assert_eq!(edges.combined.len(), (p * q) * (p * q - 1) / 2);
    // huge penalties: empty edge sets
    let sparse = fit(&stack, &plan, &FlipFlopConfig::new(1e4, 1e4)).unwrap();
    let edges = extract_edges(&sparse);
    assert!(edges.p_edges.is_empty());
    assert!(edges.q_edges.is_empty());
    assert!(edges.combined.is_empty());
}

#[test]
fn odd_length_input_is_truncated_with_flag() {
    let mut rng = rng_from_seed(31);
    let data: Vec<Mat> = (0..65).map(|_| Mat::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0))).collect();
    let (series, dropped) = MatrixSeries::truncating(data).unwrap();
    assert!(dropped);
    assert_eq!(series.n(), 64);
    let _ = RealSymMatrix::identity(2);
}
