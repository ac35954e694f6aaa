// `!(x > 0.0)` is used throughout so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tabulated constants keep every digit their source printed.
#![allow(clippy::excessive_precision)]

pub mod error;
pub mod fode;
pub mod fracops;
pub mod hum;
pub mod mlf;
pub mod models;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
