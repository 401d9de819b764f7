//! Pseudo almost periodic mild solutions of `u' + Au = G(u)` with
//! `A = -b Laplacian`, measured in Lorentz spaces on uniform grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`]: grids, sampled fields and Lorentz norms.
//! * [`interp`]: interpolation exponents and the exponent pack `(d, m, r)`.
//! * [`pap`]: time grids, trajectories, almost-period search and mean values.
//! * [`semigroup`]: the heat semigroup with complex coefficient, three backends.
//! * [`mild`]: the Duhamel solution operator with graded history quadrature.
//! * [`semilinear`]: the power nonlinearity, Picard iteration and stability runs.
//! * [`io`]: text formats for fields, trajectories and CSV.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
mod fft;
pub mod field;
pub mod fit;
pub mod interp;
pub mod io;
pub mod mild;
pub mod pap;
pub mod quadrature;
pub mod semigroup;
pub mod semilinear;

pub use error::{Error, Result};
