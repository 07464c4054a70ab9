//! Error types shared across the crate.

/// Errors raised by model construction, sampling, reduction, and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Matrix dimensions are mutually inconsistent for the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A system required to be stable has spectral radius at or above one.
    #[error("unstable system: spectral radius {rho}")]
    UnstableSystem { rho: f64 },

    /// Random system generation produced a numerically nilpotent matrix
    /// repeatedly and gave up.
    #[error("degenerate random draw: spectral radius numerically zero after {attempts} attempts")]
    DegenerateDraw { attempts: usize },

    /// An output projector does not match the output dimension it is applied to.
    #[error("projector dimension mismatch: projector has {projector_rows} rows, outputs have dimension {outputs}")]
    ProjectorDimensionMismatch { projector_rows: usize, outputs: usize },

    /// Fewer nonzero singular values than requested modes.
    #[error("rank deficient: requested {requested} modes but only {available} significant singular values")]
    RankDeficient { requested: usize, available: usize },

    /// Primal and adjoint snapshot matrices were sampled with different periods.
    #[error("sampling period mismatch: primal P={primal}, adjoint P={adjoint}")]
    PeriodMismatch { primal: usize, adjoint: usize },

    /// A Markov block required by the Hankel builder is absent.
    #[error("missing Markov block at exponent {exponent}")]
    MissingExponent { exponent: usize },

    /// SVD of an identically zero matrix was requested with a positive order.
    #[error("zero matrix has no nonzero singular values")]
    ZeroMatrix,

    /// Requested order exceeds the numerical rank.
    #[error("rank exceeded: requested order {requested} but numerical rank is {rank}")]
    RankExceeded { requested: usize, rank: usize },

    /// Primal/adjoint mode sets fail the biorthogonality identity.
    #[error("biorthogonality failure: max |psi^T phi - I| = {deviation}")]
    BiorthogonalityFailure { deviation: f64 },

    /// A normal-equations matrix is too ill-conditioned to invert reliably.
    #[error("ill-conditioned mode set: condition number {condition:.3e}")]
    IllConditioned { condition: f64 },

    /// The assembled full transformation is numerically singular.
    #[error("singular transformation")]
    SingularTransformation,

    /// Two traces or matrices that must have equal shapes do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The resolvent (e^{i w} I - A) is singular at the requested frequency.
    #[error("singular resolvent at frequency {frequency}")]
    SingularResolvent { frequency: f64 },

    /// An iterative solve (SVD, Lyapunov doubling, power iteration) failed to
    /// converge within its iteration budget.
    #[error("no convergence in {what}")]
    NoConvergence { what: &'static str },

    /// Invalid argument outside any of the more specific classes above.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// File I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON sidecar serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed matrix file.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
