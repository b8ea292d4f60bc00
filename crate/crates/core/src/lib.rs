// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod act;
pub mod analysis;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod methods;
pub mod report;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
