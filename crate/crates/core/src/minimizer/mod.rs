//! Discrete Dirichlet-energy minimization for q-valued boundary data.
//!
//! The discrete energy is `sum over forward edges G(u_i, u_j)^2 h^{n-2}`.
//! A node update matches every neighbor tuple to the node tuple and moves
//! each sheet toward the mean of its matched neighbor values, which for
//! fixed matchings minimizes the local edge sum. Sweeps are therefore
//! block-coordinate descent and the energy never increases.

mod residual;
mod solve;

pub use residual::{matched_gradient, squash_residual, squeeze_residual};
pub use solve::{
    ball_mask, box_mask, discrete_energy, log_csv, minimize, LogEntry, SolveParams, Solution, SweepOrder,
};
