//! Shape-constrained density estimation, stochastic dominance tests and
//! Hellinger distance inference.

pub mod cli;
pub mod density;
pub mod dominance;
pub mod empirical;
pub mod error;
pub mod hellinger;
pub mod kde;
pub mod logconcave;
pub mod quad;
pub mod simulate;
pub mod special;
pub mod unimodal;

pub use error::{Error, Result};
