use thiserror::Error;

/// Errors raised across graph handling, spectral analysis, design and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed graph document: {0}")]
    Malformed(String),

    #[error("non-positive weight {weight} on edge {from}->{to}")]
    NonPositiveWeight { from: usize, to: usize, weight: f64 },

    #[error("duplicate edge {from}->{to}")]
    DuplicateEdge { from: usize, to: usize },

    #[error("self-edge on node {0}")]
    SelfEdge(usize),

    #[error("node {node} out of range 1..={count}")]
    NodeOutOfRange { node: usize, count: usize },

    #[error("graph is not rooted at the source; unreachable nodes: {0:?}")]
    NotRooted(Vec<usize>),

    #[error("eigenvalue iteration did not converge within {0} iterations")]
    EigenNonConvergence(usize),

    #[error("eigenvalue {re}{im:+}j failed certification: residual {residual:e}")]
    EigenResidual { re: f64, im: f64, residual: f64 },

    #[error("eigenvalue {re}{im:+}j has non-positive real part")]
    NonPositiveSpectrum { re: f64, im: f64 },

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    #[error("method mismatch: expected one of {expected}, got {got}")]
    MethodMismatch { expected: &'static str, got: String },

    #[error("spectrum is not real; {0}")]
    ComplexSpectrum(&'static str),

    #[error("extremal eigenvalues coincide (λ = {0}); use the no-DSR closed form, which reaches σ = 0")]
    DegenerateSpectrum(f64),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("no stable point in the search box")]
    Infeasible,

    #[error("unstable trajectory at step {step}")]
    Diverged { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
