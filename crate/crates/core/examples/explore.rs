// scratch exploration driver (not part of the deliverable surface)
use std::time::Instant;

use kronspec_core::eval::{confusion, EstimatorKind, McScenario, Scope, SelectionRule};
use kronspec_core::flipflop::{extract_edges, fit, FlipFlopConfig};
use kronspec_core::model_select::{find_no_edge_lambda, grid_search, LambdaAxis, LambdaGrid};
use kronspec_core::rng::derive_seed;
use kronspec_core::spectral::{dft, plan_windows};
use kronspec_core::synth::{generate_series, GenSeed, GroundTruth, NoiseFamily, SynthParams};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("single");
    match mode {
        "single" => single(),
        "mc" => mc(),
        "bic" => bic_surface(),
        _ => panic!("unknown mode"),
    }
}

fn bic_surface() {
    let params = SynthParams::default();
    let master = 42u64;
    let truth = GroundTruth::generate(derive_seed(master, 0), &params).unwrap();
    let n = 256usize;
    let series = generate_series(&truth, n, GenSeed { seed: derive_seed(master, 1), family: NoiseFamily::Gaussian }).unwrap();
    let plan = plan_windows(n, 4).unwrap();
    let dfts = dft(&series);
    let config = FlipFlopConfig::new(0.0, 0.0);
    let lpsm = find_no_edge_lambda(&dfts, &plan, LambdaAxis::P, 0.0, &config).unwrap();
    let lqsm = find_no_edge_lambda(&dfts, &plan, LambdaAxis::Q, 0.0, &config).unwrap();
    println!("lambda_psm={lpsm:e} lambda_qsm={lqsm:e}");
    let grid = LambdaGrid::from_no_edge(lpsm, lqsm, 10).unwrap();
    // fix lambda_q at its middle, sweep lambda_p; then vice versa
    let lq = grid.q_values[5];
    println!("--- sweep lambda_p at lambda_q={lq:e}");
    for &lp in &grid.p_values {
        let cfg = FlipFlopConfig { lambda_p: lp, lambda_q: lq, ..config };
        let fitted = fit(&dfts, &plan, &cfg).unwrap();
        let score = kronspec_core::model_select::bic(&fitted, &dfts, &plan).unwrap();
        let edges = extract_edges(&fitted);
        let co = confusion(&edges, &truth, Scope::Combined);
        let om = confusion(&edges, &truth, Scope::Omega);
        println!(
            "lp={lp:9.3e} BIC={:14.3} omega_nz={:3} phi_nz={:4} F1c={:.3} F1o={:.3} (oTPR={:.2} oFPR={:.2})",
            score.value, score.omega_nonzeros, score.phi_nonzeros, co.f1(), om.f1(), om.tpr(), om.fpr()
        );
    }
    let lp = grid.p_values[5];
    println!("--- sweep lambda_q at lambda_p={lp:e}");
    for &lq in &grid.q_values {
        let cfg = FlipFlopConfig { lambda_p: lp, lambda_q: lq, ..config };
        let fitted = fit(&dfts, &plan, &cfg).unwrap();
        let score = kronspec_core::model_select::bic(&fitted, &dfts, &plan).unwrap();
        let edges = extract_edges(&fitted);
        let co = confusion(&edges, &truth, Scope::Combined);
        let ga = confusion(&edges, &truth, Scope::Gamma);
        println!(
            "lq={lq:9.3e} BIC={:14.3} omega_nz={:3} phi_nz={:4} F1c={:.3} F1g={:.3} (gTPR={:.2} gFPR={:.2})",
            score.value, score.omega_nonzeros, score.phi_nonzeros, co.f1(), ga.f1(), ga.tpr(), ga.fpr()
        );
    }
}

fn single() {
    let params = SynthParams::default();
    let master = 42u64;
    let t0 = Instant::now();
    let truth = GroundTruth::generate(derive_seed(master, 0), &params).unwrap();
    println!("truth gen: {:?}; |S_p| = {}, |S_q| = {}", t0.elapsed(), truth.s_p.len(), truth.s_q.len());

    let n = 256usize;
    let t0 = Instant::now();
    let series = generate_series(&truth, n, GenSeed { seed: derive_seed(master, 1), family: NoiseFamily::Gaussian }).unwrap();
    println!("series gen: {:?}", t0.elapsed());

    let plan = plan_windows(n, 4).unwrap();
    println!("plan: M={} K={} m_t={}", plan.num_windows(), plan.window_len(), plan.half_window());
    let t0 = Instant::now();
    let dfts = dft(&series);
    println!("dft: {:?}", t0.elapsed());

    // single fit at hand-picked lambdas
    let t0 = Instant::now();
    let config = FlipFlopConfig::new(0.05, 0.005);
    let fitted = fit(&dfts, &plan, &config).unwrap();
    println!(
        "fit: {:?}; outer={} converged={} resid={:e}",
        t0.elapsed(),
        fitted.outer_iterations,
        fitted.converged,
        fitted.max_stationarity_residual
    );
    for t in &fitted.trace {
        println!(
            "  outer {}: G={:.6} L={:.6} dG={:.2e} dO={:.2e} g_it={} o_it={}",
            t.iteration, t.neg_log_like, t.penalized_objective, t.gamma_rel_change, t.omega_rel_change, t.gamma_iterations, t.omega_iterations
        );
    }

    let t0 = Instant::now();
    let lpsm = find_no_edge_lambda(&dfts, &plan, LambdaAxis::P, 0.0, &config).unwrap();
    let lqsm = find_no_edge_lambda(&dfts, &plan, LambdaAxis::Q, 0.0, &config).unwrap();
    println!("no-edge search: {:?}; lambda_psm={lpsm:e} lambda_qsm={lqsm:e}", t0.elapsed());

    let grid = LambdaGrid::from_no_edge(lpsm, lqsm, 10).unwrap();
    let t0 = Instant::now();
    let gs = grid_search(&dfts, &plan, 0.05, &grid, &config).unwrap();
    println!(
        "grid search: {:?}; best=({:e},{:e}) cells={} skipped={}",
        t0.elapsed(),
        gs.best_lambda_p,
        gs.best_lambda_q,
        gs.scores.len(),
        gs.skipped
    );
    let edges = extract_edges(&gs.best_fit);
    for scope in [Scope::Omega, Scope::Gamma, Scope::Combined] {
        let c = confusion(&edges, &truth, scope);
        println!("  {scope:?}: F1={:.4} TPR={:.4} FPR={:.4}", c.f1(), c.tpr(), c.fpr());
    }
}

fn mc() {
    let runs = 5;
    let scenario = McScenario {
        runs,
        ..McScenario::new(256, 4, runs, 2024)
    };
    let t0 = Instant::now();
    let report = kronspec_core::eval::monte_carlo(&scenario).unwrap();
    println!("{} runs in {:?} ({:?}/run)", runs, t0.elapsed(), t0.elapsed() / runs as u32);
    for r in &report.rows {
        println!(
            "  run {}: F1={:.4} TPR={:.4} FPR={:.4} (omega F1={:.3}, gamma F1={:.3}) at ({:.3e},{:.3e})",
            r.run, r.f1, r.tpr, r.fpr, r.omega_f1, r.gamma_f1, r.lambda_p, r.lambda_q
        );
    }
    println!(
        "mean F1 = {:.4} +- {:.4}",
        report.summary.f1_mean, report.summary.f1_std
    );
    let _ = EstimatorKind::Proposed;
    let _ = SelectionRule::Bic;
}
