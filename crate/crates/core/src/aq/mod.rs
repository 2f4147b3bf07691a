//! The space of unordered q-tuples and its matching metric.

pub mod assignment;
mod point;

pub use assignment::{match_cost, match_tuples_into, Assignment};
pub use point::{canonicalize_flat, min_gap_flat, AqPoint};
