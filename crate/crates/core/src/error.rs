use thiserror::Error;

/// Broad failure category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data.
    Input,
    /// A numerical precondition did not hold or a computation broke down.
    Numerical,
    /// A mathematical check ran to completion and came out negative.
    Check,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("basis columns are linearly dependent")]
    DependentColumns,
    #[error("subspace is not regular (restricted Gram is singular)")]
    NotRegular,
    #[error("resolvent I - zA is singular at z = {re}{im:+}i")]
    ResolventSingular { re: f64, im: f64 },
    #[error("operator is not a contraction (defect form min eigenvalue {min_eig:e})")]
    NotContraction { min_eig: f64 },
    #[error("unitary completion failed: {0}")]
    CompletionFailed(String),
    #[error("system is not passive")]
    NotPassive,
    #[error("system is not conservative")]
    NotConservative,
    #[error("system is not simple")]
    NotSimple,
    #[error("system is not minimal")]
    NotMinimal,
    #[error("added channel spaces must be Hilbert spaces")]
    NonHilbertChannel,
    #[error("orthogonal complement of the {0} subspace is not a Hilbert subspace")]
    ComplementNotHilbert(String),
    #[error("sample points coincide")]
    CoincidentPoints,
    #[error("transfer function evaluation failed: {0}")]
    EvaluationFailure(String),
    #[error("estimate did not stabilize: {0}")]
    Inconclusive(String),
    #[error("negative squares estimate {kappa_hat} exceeds state negative index {neg_index}")]
    BoundViolated { kappa_hat: usize, neg_index: usize },
    #[error("transfer function has a pole on the unit circle near angle {angle}")]
    PoleOnCircle { angle: f64 },
    #[error("transfer functions differ at Markov index {index} (residual {residual:e})")]
    TransferMismatch { index: usize, residual: f64 },
    #[error("Hankel rank is ambiguous (singular value gap too small)")]
    RankAmbiguous,
    #[error("not enough sample points: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidSpace(_) => "invalid_space",
            Error::BadParameter(_) => "bad_parameter",
            Error::DependentColumns => "dependent_columns",
            Error::NotRegular => "not_regular",
            Error::ResolventSingular { .. } => "resolvent_singular",
            Error::NotContraction { .. } => "not_contraction",
            Error::CompletionFailed(_) => "completion_failed",
            Error::NotPassive => "not_passive",
            Error::NotConservative => "not_conservative",
            Error::NotSimple => "not_simple",
            Error::NotMinimal => "not_minimal",
            Error::NonHilbertChannel => "non_hilbert_channel",
            Error::ComplementNotHilbert(_) => "complement_not_hilbert",
            Error::CoincidentPoints => "coincident_points",
            Error::EvaluationFailure(_) => "evaluation_failure",
            Error::Inconclusive(_) => "inconclusive",
            Error::BoundViolated { .. } => "bound_violated",
            Error::PoleOnCircle { .. } => "pole_on_circle",
            Error::TransferMismatch { .. } => "transfer_mismatch",
            Error::RankAmbiguous => "rank_ambiguous",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::NotConverged(_) => "not_converged",
            Error::Parse(_) => "parse_error",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::ShapeMismatch(_)
            | Error::InvalidSpace(_)
            | Error::BadParameter(_)
            | Error::DependentColumns
            | Error::NonHilbertChannel
            | Error::CoincidentPoints
            | Error::InsufficientSamples { .. }
            | Error::Parse(_) => ErrorKind::Input,
            Error::NotPassive
            | Error::NotConservative
            | Error::NotSimple
            | Error::NotMinimal
            | Error::ComplementNotHilbert(_)
            | Error::Inconclusive(_)
            | Error::BoundViolated { .. }
            | Error::TransferMismatch { .. } => ErrorKind::Check,
            _ => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
