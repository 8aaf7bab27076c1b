//! Occupation-measure decay rates for two-dimensional skip-free
//! Markov-modulated random walks (2d-MMRWs) on the quarter plane.
//!
//! The walk moves on `Z^2 x S0` with increments in `{-1,0,1}^2`; its kernel is
//! given by nine `s0 x s0` blocks `A[i,j]`. The crate computes the Perron root
//! `chi(theta)` of the Feynman-Kac operator, the geometry of
//! `Gamma = {chi < 1}`, directional and marginal decay rates, truncated
//! occupation measures (linear solve and Monte Carlo), and the QBD
//! representations with their rate matrices.

pub mod decay;
mod error;
pub mod gamma;
pub mod model;
pub mod occupation;
pub mod qbd;
mod search;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{parse_model, DriftVector, MMRWModel, ValidationReport};

/// Dense real matrix used for all blocks and operators.
pub type Matrix = nalgebra::DMatrix<f64>;
