//! Penalized vertex discriminant analysis.
//!
//! Classes are coded as vertices of a regular simplex in `R^(k-1)`, a linear
//! map `x -> A x + b` is fit under a smoothed epsilon-insensitive loss with
//! lasso and Euclidean (grouped) penalties, and new cases are assigned to the
//! nearest vertex. Zero columns of `A` drop predictors from the model.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod consistency;
pub mod datagen;
pub mod descent;
pub mod error;
pub mod io;
pub mod loss;
pub mod model;
pub mod penalty;
pub mod simplex;
pub mod tuning;

pub use error::{Result, VdaError};
