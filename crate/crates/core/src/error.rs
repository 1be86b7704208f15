use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("evaluation point {x} coincides with an atom")]
    AtomCollision { x: f64 },

    #[error("quantile specification is unbounded or malformed: {0}")]
    UnboundedQuantile(String),

    #[error("point {x} is not below the support edge {edge}")]
    DomainAboveSupport { x: f64, edge: f64 },

    #[error("point {x} lies above the edge {edge} of the free convolution")]
    AboveEdge { x: f64, edge: f64 },

    #[error("decreasing branch of H does not reach {x}")]
    BelowBranch { x: f64 },

    #[error("outlier {outlier} is above the support edge {edge}")]
    OutlierAboveSupport { outlier: f64, edge: f64 },

    #[error("outlier sits at the support edge; rho is undefined")]
    OutlierAtEdge,

    #[error("rate derivative is not defined at the branch point {x}")]
    AtBranchPoint { x: f64 },

    #[error("theta = {theta} outside the range of the R-transform")]
    ThetaOutOfRange { theta: f64 },

    #[error("direction is degenerate: eigenvector mass {mass} is 0 or 1")]
    DegenerateDirection { mass: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
