use thiserror::Error;

/// Errors surfaced by construction and evaluation of surfaces, nets and
/// selections. Numerical routines return `IpsError` instead of panicking so
/// that callers (in particular the CLI) can report bad configurations.
#[derive(Debug, Error)]
pub enum IpsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty time domain: t_min {t_min} >= t_max {t_max}")]
    EmptyDomain { t_min: f64, t_max: f64 },

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("intensity unbounded on the domain and no inversion sampler applies: {0}")]
    UnboundedIntensity(String),

    #[error("cannot normalize a function with zero norm")]
    ZeroNorm,

    #[error("covariate vectors have mismatched dimensions: {0} vs {1}")]
    CovariateDimMismatch(usize, usize),

    #[error("process index {index} out of range for {n} processes")]
    ProcessIndexOutOfRange { index: usize, n: usize },

    #[error("mismatched domains: {0}")]
    MismatchedDomains(String),

    #[error("candidate cap exceeded: {got} candidates, cap {cap}")]
    CandidateCapExceeded { got: usize, cap: usize },

    #[error("net cardinality cap exceeded while building `{label}`: {got} > {cap}")]
    NetCapExceeded { label: String, got: usize, cap: usize },

    #[error("net weights not summable: sum of exp(-weight) = {sum} > 1")]
    WeightSumExceeded { sum: f64 },

    #[error("empty candidate collection")]
    EmptyCollection,

    #[error("candidate does not belong to any net in the collection")]
    OrphanCandidate,

    #[error("solver failed to converge: {0}")]
    NonConvergence(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("partition invalid: {0}")]
    InvalidPartition(String),
}

pub type Result<T> = std::result::Result<T, IpsError>;
