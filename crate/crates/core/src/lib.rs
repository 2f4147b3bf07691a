//! Numerical laboratory for q-valued functions that minimize Dirichlet energy.
//!
//! Values live in the space of unordered q-tuples of points of R^m with the
//! optimal-matching metric. The crate samples such functions on uniform
//! grids, minimizes a discrete energy, evaluates frequency and Weiss
//! quantities, and fits homogeneous cylindrical tangents to blow-ups.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the array formulas in the numerics.
#![allow(clippy::needless_range_loop)]

pub mod aq;
pub mod blowup;
pub mod cylindrical;
pub mod error;
pub mod eval;
pub mod field;
pub mod frequency;
pub mod minimizer;
pub mod reduce;
pub mod testfield;

pub use aq::AqPoint;
pub use cylindrical::CylindricalFunction;
pub use error::{Error, Result};
pub use eval::QEvaluator;
pub use field::{Grid, QField};
