use thiserror::Error;

/// Errors produced by the pricing and integration stages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid option spec: {0}")]
    InvalidSpec(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("lattice needs at least one step")]
    ZeroSteps,

    /// Risk-neutral probability left [0, 1]: volatility too small for the rate differential.
    #[error(
        "lattice unstable: q = {q:.6} outside [0, 1] (sigma = {sigma}, r1 = {funding_rate}, \
         r2 = {carry_rate}, dt = {dt:.3e}); raise sigma or the step count"
    )]
    UnstableLattice {
        q: f64,
        sigma: f64,
        funding_rate: f64,
        carry_rate: f64,
        dt: f64,
    },

    #[error("stopping distribution has no exercise support")]
    NoExerciseSupport,

    #[error("European rho is zero; omega ratio undefined")]
    ZeroEuropeanRho,

    #[error("rate model calibration failed: {0}")]
    Calibration(String),

    #[error("quadrature order must be at least 1")]
    QuadratureOrder,

    #[error("stopping distribution is empty")]
    EmptyDistribution,

    #[error("correlation {0} outside [-1, 1]")]
    Correlation(f64),

    #[error("pricing failed at rate node {rate}: {source}")]
    Node {
        rate: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Innermost error, skipping stage and node wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Node { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
