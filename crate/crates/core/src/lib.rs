//! Nonparametric de-speckling: local polynomial estimation of a signal
//! observed through multiplicative Gaussian speckle and additive Gaussian
//! noise, the matching additive-noise baseline, lower-bound hypothesis
//! constructions, and a Monte Carlo harness for empirical convergence rates.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod holder;
pub mod linalg;
pub mod lower_bound;
pub mod lpe;
pub mod noise;
pub mod risk;

pub use error::{Error, Result};
