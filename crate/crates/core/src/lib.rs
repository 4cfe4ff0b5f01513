//! Digital backpropagation for fiber links carried out in the nonlinear Fourier domain,
//! with split-step and linear baselines, modems, and link diagnostics.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod nfddbp;
pub mod normcoord;
pub mod poly;
pub mod selftest;
pub mod spectral;
pub mod txrx;
pub mod zscatter;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
