use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square")]
    NotSquare,

    #[error("subsystem index {index} out of range for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("operator is not Hermitian (max |M - M†| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("parameter `{name}` = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("{what} is not normalized (norm² = {norm_sqr})")]
    NotNormalized { what: &'static str, norm_sqr: f64 },

    #[error("environment overlaps are infeasible (slack = {slack:e})")]
    Infeasible { slack: f64 },

    #[error("negative discriminant {0:e} in quadratic for q")]
    NegativeDiscriminant(f64),

    #[error("fringe needs at least {required} phase points, got {found}")]
    TooFewPoints { found: usize, required: usize },

    #[error("dark port: mean level {mean:e} is not positive")]
    DarkPort { mean: f64 },

    #[error("singular fit design (degenerate phase grid)")]
    SingularDesign,

    #[error("record has zero max + min")]
    ZeroFringe,

    #[error("sum-rule spread {spread:e} exceeds tolerance {tolerance:e}")]
    SumRuleInconsistent { spread: f64, tolerance: f64 },

    #[error("visibility {value} outside [0, 1]")]
    VisibilityOutOfRange { value: f64 },

    #[error("zeroth visibility Stokes parameter is zero; normalized quantities are undefined")]
    ZeroCoherence,

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("data infeasible for scenario: {0}")]
    InfeasibleData(String),

    #[error("malformed fringe record: {0}")]
    Record(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
