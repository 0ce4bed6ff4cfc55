//! Quantitative singular stratification of sampled sphere-valued
//! approximate harmonic maps.
//!
//! The pipeline runs from [`map_model`] (sampled maps and quadrature) through
//! [`energy`] (normalized energies and monotonicity), [`symmetry`]
//! (quantitative symmetry and strata), [`jones_beta`] (β₂ numbers of discrete
//! measures) and [`reifenberg`] (Reifenberg hypotheses, Minkowski content) to
//! [`covering`] (the inductive ball coverings of the strata).

// `!(x > 0.0)` deliberately rejects NaN alongside nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod covering;
pub mod energy;
pub mod error;
pub mod jones_beta;
pub mod linalg;
pub mod map_model;
pub mod reifenberg;
pub mod symmetry;
mod textio;
pub mod vecmath;

pub use error::{Error, Result};
