#![no_std]
//! Leading-order covariance of stochastic trajectories near limit cycles and
//! quasiperiodic invariant tori.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod collocation;
pub mod cycle;
pub mod error;
pub mod flow;
pub mod fourier;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod sde;
pub mod section;
pub mod stats;
pub mod torus;
pub mod trajectory;

pub use error::{Error, Result};
