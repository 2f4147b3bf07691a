use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a point needs at least one value")]
    EmptyPoint,
    #[error("inconsistent dimension: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("gauge search limited to N <= 4 and q0 <= 4 (got N = {components}, q0 = {q0})")]
    GaugeBoundExceeded { components: usize, q0: usize },
    #[error("ball (center {center:?}, radius {radius}) is not contained in the grid box")]
    BallOutsideBox { center: Vec<f64>, radius: f64 },
    #[error("radius {radius} is below the resolution floor {floor}")]
    ResolutionFloor { radius: f64, floor: f64 },
    #[error("zero boundary trace: H = {height:e} is below the stability floor {floor:e}")]
    ZeroBoundaryTrace { height: f64, floor: f64 },
    #[error("degenerate normalization: the field has zero L2 norm on the ball")]
    ZeroNorm,
    #[error("evaluator failed at node {node}: {reason}")]
    Evaluator { node: usize, reason: String },
    #[error("ambiguous sheet assignment at node {node} (separation {separation:e}, required above {required:e})")]
    AmbiguousAssignment {
        node: usize,
        separation: f64,
        required: f64,
    },
    #[error("no admissible tangent structure for q = {q}, q0 = {q0}")]
    NoAdmissibleStructure { q: usize, q0: usize },
    #[error("the reference tangent has no nonzero component")]
    NoTiltSignal,
    #[error("extrapolation did not converge: spread {spread:e} exceeds {tolerance:e}")]
    NonConvergent { spread: f64, tolerance: f64 },
    #[error("non-finite energy during relaxation")]
    NonFiniteEnergy,
    #[error("initial field disagrees with the boundary data at node {0}")]
    BoundaryMismatch(usize),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
