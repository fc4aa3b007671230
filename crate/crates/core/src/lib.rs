//! Semi-infinite linear regression (SILR) on quasimatrices.
//!
//! A tall quasimatrix is a finite list of functions on `[-1, 1]` acting as
//! columns. The crate provides the algebra for these objects, their QR and
//! SVD factorizations, direct solvers for the ridge problems
//!
//! ```text
//! min_x ||A x - b||^2 + lambda ||x||^2        (overdetermined)
//! min_x ||A x - b||^2 + lambda ||x||^2, A: n x inf   (underdetermined)
//! ```
//!
//! iterative solvers (LSMR over Golub-Kahan, SVRG over integrable sums),
//! and sampling reductions to finite least squares.
//!
//! Functions are Chebyshev interpolants ([`ChebFun`]). Every function
//! operation takes a [`FunopLedger`] so callers can count the work done in
//! function space.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densela;
pub mod direct;
mod error;
pub mod factor;
pub mod funspace;
pub mod krylov;
pub mod quasimatrix;
pub mod rng;
pub mod sampling;
pub mod svrg;

pub use densela::DenseMatrix;
pub use direct::{OverSilrProblem, UnderSilrProblem};
pub use error::{Result, SilrError};
pub use factor::{QmQR, QmSVD};
pub use funspace::{ChebFun, FunopLedger};
pub use krylov::{LsmrOptions, LsmrReport, Termination};
pub use quasimatrix::{CoordinateRep, TallQuasimatrix, WideQuasimatrix};
pub use sampling::{LeverageTable, SampledProblem};
pub use svrg::{Averaging, SvrgConfig, SvrgReport};

/// Dense column vector used throughout.
pub type Vector = nalgebra::DVector<f64>;

/// The Runge function `1 / (1 + 25 x^2)`.
pub fn runge(x: f64) -> f64 {
    1.0 / (1.0 + 25.0 * x * x)
}
