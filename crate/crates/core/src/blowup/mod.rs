//! Blow-up analysis near a point: normalized rescaling, L^2 excess against
//! cylindrical functions, tangent fitting, sheet decomposition, axis tilt
//! extraction and excess-decay reports.

mod decay;
mod fit;
mod rescale;
mod sheets;
mod tilt;

pub use decay::{decay_report, DecayFit, DecayOptions, ExcessReport, ScaleRecord, EXACT_EXCESS};
pub use fit::{
    admissible_structures, fit_tangent, fit_tangent_from, FitOptions, FitTarget, TangentFit, TangentStructure,
    STRUCTURE_LIMIT_Q, STRUCTURE_LIMIT_Q0,
};
pub use rescale::{excess, excess_in_ball, nonconcentration, rescale, weighted_excess, Nonconcentration, Rescaled};
pub use sheets::{decompose_sheets, SheetDecomposition};
pub use tilt::{fourier_tilt, FieldOffsets, FnOffsets, OffsetSource, TiltFit, TiltOptions};
