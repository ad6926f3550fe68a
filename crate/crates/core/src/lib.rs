//! Time-consistent consumption-investment strategies for the Merton problem
//! under non-constant discounting.

// negated float comparisons are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fixed_point;
pub mod grid_pde;
pub mod model;
pub mod montecarlo;
pub mod pipeline;
pub mod strategy;
pub mod verify;

pub use error::{Error, Result};
