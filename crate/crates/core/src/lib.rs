//! Exact simulation and training of continuous-variable optical neural
//! networks built from Gaussian layers and photon subtractions.
//!
//! Outputs are evaluated without any Fock-space truncation: every
//! non-Gaussian operator is pushed through the Gaussian layers, and the
//! resulting moments of a single Gaussian state are expanded with the
//! Wick–Isserlis theorem. A small truncated Fock simulator is included for
//! validation and for generating gate-synthesis targets.

// `!(x < y)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod activations;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod ladder;
pub mod matrix;
pub mod model;
pub mod scalar;
pub mod training;
pub mod wick;

pub use error::{QonnError, Result};
pub use gaussian::{GaussianLayerParams, GaussianOp, GaussianState};
pub use ladder::{ExpectationPlan, LadderOp, LadderPolynomial};
pub use scalar::{Dual, Real, C64};
