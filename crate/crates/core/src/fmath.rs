//! Scalar float math routed through `num_traits::Float`.
//!
//! In `no_std` builds the inherent `f64` math methods do not exist; the trait
//! dispatches to `libm`. Calling through this shim keeps every build of the
//! crate on one explicit code path.

#![allow(dead_code)]

use num_traits::Float;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    Float::sqrt(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    Float::ln(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    Float::exp(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    Float::abs(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    Float::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    Float::sin(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    Float::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    Float::round(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    Float::powi(x, n)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    Float::powf(x, y)
}
