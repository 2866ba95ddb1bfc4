use thiserror::Error;

/// Errors raised by the solvers.
///
/// Variants are grouped by the module that raises them; the CLI maps them to
/// exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    // fourier_core
    #[error("numeric corruption: non-finite values in {context}")]
    NumericCorruption { context: String },
    #[error("cohomology obstruction: nonzero average {average:?}")]
    Obstruction { average: Vec<f64> },
    #[error("small divisor |1 - exp(2 pi i k.omega)| = {divisor:e} at k = {k:?}")]
    SmallDivisor { k: Vec<i64>, divisor: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),

    // geometry
    #[error("invalid model parameter: {0}")]
    Parameter(String),
    #[error("model evaluation left its domain: {0}")]
    ModelDomain(String),
    #[error("winding error: angle residual jumps by {jump} between adjacent grid points")]
    Winding { jump: f64 },

    // torus_solver
    #[error("degenerate embedding: DK^T DK is singular (min singular value {min_sv:e})")]
    DegenerateEmbedding { min_sv: f64 },
    #[error("twist degeneracy: |avg(A)| = {twist:e} below floor; retry with the counterterm enabled")]
    TwistDegeneracy { twist: f64 },
    #[error("no convergence after {} steps ({reason}); residual trace {trace:?}", trace.len().saturating_sub(1))]
    NoConvergence { reason: String, trace: Vec<f64> },
    #[error("counterterm did not vanish: |lambda| = {lambda:e} > {tol:e}")]
    CountertermNonvanishing { lambda: f64, tol: f64 },
    #[error("continuation stalled at parameter {last_good} (attempted {attempted})")]
    ContinuationStall { last_good: f64, attempted: f64 },

    // hyperbolic_splitting / cohomology_noncst
    #[error("insufficient hyperbolicity: contraction factor kappa = {kappa} >= 1")]
    InsufficientHyperbolicity { kappa: f64 },
    #[error("ambiguous rank: singular value {singular_value} is neither near 0 nor near 1")]
    AmbiguousRank { singular_value: f64 },
    #[error("regime violation: {0}")]
    RegimeViolation(String),
    #[error("overflow in cocycle products; try the expansive formulation")]
    Scaling,
    #[error("unit multiplier: |nu| = {nu} too close to 1 (small divisors)")]
    UnitMultiplier { nu: f64 },
    #[error("sign change of A/B on the grid")]
    SignChange,
    #[error("log domain: |A/B| = {value:e} below 1e-12")]
    LogDomain { value: f64 },

    // whisker_solver
    #[error("unsupported bundle rank {rank}; only rank-1 whiskers are implemented")]
    UnsupportedRank { rank: usize },
    #[error("resonance at order {order}: divisor margin {margin:e}")]
    Resonance { order: usize, margin: f64 },
    #[error("degenerate pairing: order-1 solvability denominator {denominator:e}")]
    DegeneratePairing { denominator: f64 },
    #[error("order contract violated: residual order {order} has size {size:e}")]
    OrderContract { order: usize, size: f64 },

    // persistence
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
