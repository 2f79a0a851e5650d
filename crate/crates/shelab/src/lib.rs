//! Numerical laboratory for the GOE-Airy Pfaffian point process: Airy-kernel
//! evaluation, Fredholm Pfaffians, the half-line SHE Laplace transform,
//! fractional moments and their large-t asymptotics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod quadrature;
pub mod special_functions;

pub use error::{Error, Result};
pub mod antisym_linalg;
pub mod goe_kernel;
pub mod fredholm_pfaffian;
pub mod she_moments;
pub mod asymptotics_lab;
pub mod cli_reporting;
