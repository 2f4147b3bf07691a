//! Homogeneous cylindrical q-valued functions built from branches of
//! `Re(c (x1 + i x2)^{k0/q0})`.

mod families;
mod function;
mod gauge;
mod record;
mod stationarity;

pub use families::{BranchSum, BranchTerm, ExampleUk};
pub use function::{circle_distance_sq, Component, CylindricalFunction, Rotation, Slot, DEFAULT_N_THETA};
pub use gauge::{canonical_gauge, normal_form, phase_normal, GaugeAlignment, GAUGE_LIMIT};
pub use record::{ComponentRecord, CylindricalRecord, GeneratorRecord, RotationRecord, TermRecord};
pub use stationarity::{
    inner_variation_closed, inner_variation_numeric, isotropy_defect, InnerVariationEstimate, InnerVariationOptions,
};
