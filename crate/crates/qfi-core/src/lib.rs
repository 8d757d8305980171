//! Construction, verification and exploitation of quadratic first integrals
//! (QFIs) of autonomous conservative systems constrained to a fixed energy
//! level.
//!
//! The toolkit is organized around pointwise differentiable fields:
//!
//! - [`geometry`]: kinetic metrics, Christoffel symbols, covariant
//!   derivatives, 2D curvature;
//! - [`symmetry`]: conformal Killing vectors/tensors, their residual
//!   certificates, catalogs and constructions;
//! - [`qfi`]: the three QFI families with their condition residuals and
//!   evaluators;
//! - [`dynamics`]: constrained integration with energy and first-integral
//!   drift monitoring;
//! - [`scenarios`]: end-to-end reproductions of the worked examples;
//! - [`expr`]: the expression grammar for user-defined fields;
//! - [`io`]: trajectory CSV and report JSON serialization.

// Index loops mirror the tensor-index notation of the formulas; iterator
// rewrites would obscure which index is which.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::type_complexity)]

pub mod catalog;
pub mod dual;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod io;
pub mod qfi;
pub mod sampling;
pub mod scenarios;
pub mod symmetry;

pub use error::{Error, Result};
