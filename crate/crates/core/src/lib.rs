//! Sparse Kronecker-product conditional-independence graphs for matrix-valued
//! stationary time series.
//!
//! A length-`n` sequence of real `p x q` matrices is modeled with a separable
//! spectral structure: the power spectral density of the vectorized series
//! factors as `Sbar(f) ⊗ Sigma`. The inverse factors — a row-precision matrix
//! `Omega = Sigma^-1` and per-frequency column precisions `Phi_k = Sbar(f_k)^-1`
//! — carry the conditional-independence structure of the rows and columns of
//! the observation matrix. This crate estimates both factors from data by
//! minimizing a penalized frequency-domain (Whittle) negative log-likelihood:
//! a lasso penalty on the off-diagonal of `Omega` and a sparse-group lasso
//! across the `M` frequency matrices `Phi_k`.
//!
//! The optimization is bi-convex and solved by flip-flop alternation of two
//! ADMM solvers with closed-form eigenvalue updates ([`admm_gamma`],
//! [`admm_omega`], [`flipflop`]). Tuning parameters are selected by BIC over a
//! data-driven grid ([`model_select`]). The crate also ships a faithful
//! synthetic-data generator ([`synth`]), an i.i.d.-modeling comparator
//! ([`baseline_iid`]) and edge-recovery evaluation tooling ([`eval`]).
//!
//! The crate is `no_std` (with `alloc`); all file formats, CLI and
//! parallel drivers live in the companion `kronspec` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod admm;
pub mod admm_gamma;
pub mod admm_omega;
pub mod baseline_iid;
pub mod error;
pub mod eval;
pub mod flipflop;
mod fmath;
pub mod linalg;
pub mod model_select;
pub mod rng;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
