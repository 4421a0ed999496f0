//! Shared test helpers: random instances and an independent proximal-gradient
//! reference solver for the two penalized log-det objectives.
//!
//! The reference solver must stay independent of the ADMM implementation it
//! checks: it uses plain gradient steps with backtracking plus the penalty
//! prox, nothing from the `admm_*` modules.

#![allow(dead_code)]

use kronspec_core::linalg::{herm_eig, sym_eig, CMat, HermMatrix, Mat, RealSymMatrix};
use kronspec_core::rng::rng_from_seed;
use num_complex::Complex64;
use rand::Rng;

pub fn random_sym_psd(p: usize, seed: u64) -> RealSymMatrix {
    let mut rng = rng_from_seed(seed);
    let b = Mat::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    RealSymMatrix::new(&b * b.transpose() + Mat::identity(p, p) * 0.2).unwrap()
}

pub fn random_herm_psd(q: usize, seed: u64) -> HermMatrix {
    let mut rng = rng_from_seed(seed);
    let b = CMat::from_fn(q, q, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    HermMatrix::new(&b * b.adjoint() + CMat::identity(q, q) * Complex64::new(0.2, 0.0)).unwrap()
}

fn sym_inverse(x: &Mat) -> Option<Mat> {
    let eig = sym_eig(x).ok()?;
    if eig.values[0] <= 0.0 {
        return None;
    }
    let mut scaled = eig.vectors.clone();
    for l in 0..x.nrows() {
        for r in 0..x.nrows() {
            scaled[(r, l)] /= eig.values[l];
        }
    }
    Some(scaled * eig.vectors.transpose())
}

fn sym_log_det(x: &Mat) -> Option<f64> {
    let eig = sym_eig(x).ok()?;
    if eig.values[0] <= 0.0 {
        return None;
    }
    Some(eig.values.iter().map(|v| v.ln()).sum())
}

fn herm_inverse(x: &CMat) -> Option<CMat> {
    let eig = herm_eig(x).ok()?;
    if eig.values[0] <= 0.0 {
        return None;
    }
    let mut scaled = eig.vectors.clone();
    for l in 0..x.nrows() {
        for r in 0..x.nrows() {
            scaled[(r, l)] *= Complex64::new(1.0 / eig.values[l], 0.0);
        }
    }
    Some(scaled * eig.vectors.adjoint())
}

fn herm_log_det(x: &CMat) -> Option<f64> {
    let eig = herm_eig(x).ok()?;
    if eig.values[0] <= 0.0 {
        return None;
    }
    Some(eig.values.iter().map(|v| v.ln()).sum())
}

fn re_trace_prod(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Objective of the row subproblem at `x`.
pub fn l1_objective_ref(theta: &Mat, x: &Mat, lambda: f64) -> f64 {
    let p = x.nrows() as f64;
    let mut pen = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            if i != j {
                pen += x[(i, j)].abs();
            }
        }
    }
    (-sym_log_det(x).unwrap() + (theta * x).trace()) / p + lambda * pen
}

/// Proximal-gradient reference minimizer of the row objective.
pub fn prox_grad_omega(theta: &Mat, lambda: f64, iters: usize) -> (Mat, f64) {
    let p = theta.nrows();
    let mut x = Mat::identity(p, p);
    let mut step = 1.0f64;
    let mut obj = l1_objective_ref(theta, &x, lambda);
    for _ in 0..iters {
        let inv = sym_inverse(&x).expect("iterate stays PD");
        let grad = (theta - &inv) / p as f64;
        let mut accepted = false;
        for _ in 0..60 {
            let base = &x - &grad * step;
            let mut cand = Mat::zeros(p, p);
            for i in 0..p {
                cand[(i, i)] = base[(i, i)];
                for j in (i + 1)..p {
                    let v = 0.5 * (base[(i, j)] + base[(j, i)]);
                    let thr = step * lambda;
                    let s = if v.abs() <= thr {
                        0.0
                    } else if v > 0.0 {
                        v - thr
                    } else {
                        v + thr
                    };
                    cand[(i, j)] = s;
                    cand[(j, i)] = s;
                }
            }
            if sym_log_det(&cand).is_none() {
                step *= 0.5;
                continue;
            }
            let cand_obj = l1_objective_ref(theta, &cand, lambda);
            // sufficient-decrease bound of the backtracking scheme
            let diff = &cand - &x;
            let lin = (grad.transpose() * &diff).trace();
            let f_x = obj - lambda_pen_p(&x, lambda);
            let f_c = cand_obj - lambda_pen_p(&cand, lambda);
            if f_c <= f_x + lin + diff.norm_squared() / (2.0 * step) + 1e-14 {
                x = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (step * 1.2).min(1e3);
    }
    (x, obj)
}

fn lambda_pen_p(x: &Mat, lambda: f64) -> f64 {
    let mut pen = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            if i != j {
                pen += x[(i, j)].abs();
            }
        }
    }
    lambda * pen
}

/// Objective of the column subproblem at `phis`.
pub fn l2_objective_ref(thetas: &[HermMatrix], phis: &[CMat], lambda: f64, alpha: f64) -> f64 {
    let m = phis.len();
    let q = phis[0].nrows();
    let mut smooth = 0.0;
    for k in 0..m {
        smooth += -herm_log_det(&phis[k]).unwrap() + re_trace_prod(thetas[k].as_matrix(), &phis[k]);
    }
    smooth / (m * q) as f64 + pen_q(phis, lambda, alpha)
}

fn pen_q(phis: &[CMat], lambda: f64, alpha: f64) -> f64 {
    let m = phis.len();
    let q = phis[0].nrows();
    let mut l1 = 0.0;
    let mut group = 0.0;
    for i in 0..q {
        for j in 0..q {
            if i == j {
                continue;
            }
            let mut nsq = 0.0;
            for phi in phis {
                l1 += phi[(i, j)].norm();
                nsq += phi[(i, j)].norm_sqr();
            }
            group += nsq.sqrt();
        }
    }
    alpha * lambda * l1 + (1.0 - alpha) * (m as f64).sqrt() * lambda * group
}

fn prox_q(base: &[CMat], t: f64, lambda: f64, alpha: f64) -> Vec<CMat> {
    let m = base.len();
    let q = base[0].nrows();
    let elem = t * alpha * lambda;
    let group_level = t * (1.0 - alpha) * (m as f64).sqrt() * lambda;
    let mut out = vec![CMat::zeros(q, q); m];
    for k in 0..m {
        for i in 0..q {
            out[k][(i, i)] = Complex64::new(base[k][(i, i)].re, 0.0);
        }
    }
    for i in 0..q {
        for j in (i + 1)..q {
            let shrunk: Vec<Complex64> = (0..m)
                .map(|k| {
                    let v = 0.5 * (base[k][(i, j)] + base[k][(j, i)].conj());
                    let mag = v.norm();
                    if mag <= elem {
                        Complex64::new(0.0, 0.0)
                    } else {
                        v * ((mag - elem) / mag)
                    }
                })
                .collect();
            let norm = shrunk.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let factor = if norm > 0.0 { (1.0 - group_level / norm).max(0.0) } else { 0.0 };
            for k in 0..m {
                out[k][(i, j)] = shrunk[k] * factor;
                out[k][(j, i)] = (shrunk[k] * factor).conj();
            }
        }
    }
    out
}

/// Proximal-gradient reference minimizer of the column objective.
pub fn prox_grad_gamma(thetas: &[HermMatrix], lambda: f64, alpha: f64, iters: usize) -> (Vec<CMat>, f64) {
    let m = thetas.len();
    let q = thetas[0].dim();
    let mq = (m * q) as f64;
    let mut phis: Vec<CMat> = vec![CMat::identity(q, q); m];
    let mut step = 1.0f64;
    let mut obj = l2_objective_ref(thetas, &phis, lambda, alpha);
    for _ in 0..iters {
        let grads: Vec<CMat> = (0..m)
            .map(|k| {
                let inv = herm_inverse(&phis[k]).expect("iterate stays PD");
                (thetas[k].as_matrix() - inv) / Complex64::new(mq, 0.0)
            })
            .collect();
        let mut accepted = false;
        for _ in 0..60 {
            let base: Vec<CMat> = (0..m)
                .map(|k| &phis[k] - &grads[k] * Complex64::new(step, 0.0))
                .collect();
            let cand = prox_q(&base, step, lambda, alpha);
            if cand.iter().any(|c| herm_log_det(c).is_none()) {
                step *= 0.5;
                continue;
            }
            let cand_obj = l2_objective_ref(thetas, &cand, lambda, alpha);
            let mut lin = 0.0;
            let mut dist_sq = 0.0;
            for k in 0..m {
                let diff = &cand[k] - &phis[k];
                lin += re_trace_prod(&grads[k].adjoint(), &diff);
                dist_sq += diff.norm_squared();
            }
            let f_x = obj - pen_q(&phis, lambda, alpha);
            let f_c = cand_obj - pen_q(&cand, lambda, alpha);
            if f_c <= f_x + lin + dist_sq / (2.0 * step) + 1e-14 {
                phis = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (step * 1.2).min(1e3);
    }
    (phis, obj)
}
