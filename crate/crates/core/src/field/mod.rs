//! q-valued fields sampled on uniform grids.

mod branch;
mod grid;
mod interp;
mod io;
mod qfield;
mod quadrature;
mod shell;

pub use branch::{default_threshold, detect_branch_points, ring_monodromy, BranchCluster};
pub use grid::Grid;
pub use interp::{interpolate, interpolate_into};
pub use io::{read_qfld, write_density_csv, write_qfld};
pub use qfield::{sample_field, QField};
pub use quadrature::{
    dist_sq_ball, energy_ball, grad_energy_density, l2_sq_ball, Ball, EdgeQuadrature, NodeQuadrature,
};
pub use shell::{
    resolution_floor, shell_integral, ShellIntegrand, ShellRule, DEFAULT_SHELL_SAMPLES_2D, DEFAULT_SHELL_SAMPLES_3D,
};
