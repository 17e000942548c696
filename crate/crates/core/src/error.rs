use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("lattice mismatch: ({0}) vs ({1})")]
    LatticeMismatch(String, String),

    #[error("truncation of {rows} rows exceeds the cap of {cap}")]
    SizeCap { rows: usize, cap: usize },

    #[error("incompatible asymptotics: {0}")]
    VariantMismatch(String),

    #[error("asymptotic certificate violated: {0}")]
    Certificate(String),

    #[error("operator has no terms")]
    EmptyOperator,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("non-finite eigenvalue in {0}")]
    NonFinite(String),

    #[error("recursion depth exceeded while resolving face-fibered bulk systems")]
    RecursionDepth,

    #[error("{point} lies inside the spectral hull")]
    NoGap { point: String },

    #[error("symbol not invertible: min |det| = {min_abs_det:e} at theta = {theta}")]
    NotInvertible { min_abs_det: f64, theta: f64 },

    #[error("winding rounding residual {0} too large")]
    WindingResidual(f64),

    #[error("operator is not {0}")]
    Symmetry(String),

    #[error("gap condition fails: {0}")]
    GapClosed(String),

    #[error("index unstable under box growth: {0}")]
    Unstable(String),

    #[error("ambiguous sector assignment: {0}")]
    AmbiguousSector(String),

    #[error("spectral flow step too coarse: {0}")]
    StepTooCoarse(String),

    #[error("filter budget {budget:e} unreachable at degree {max_degree}")]
    BudgetUnreachable { budget: f64, max_degree: usize },

    #[error("evolved support reaches the box boundary margin: {0}")]
    BoundaryReached(String),

    #[error("non-propagation hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("invalid model parameters: {0}")]
    ModelParameters(String),
}
