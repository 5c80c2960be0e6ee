use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("evaluation point {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("knot vectors are not nested: {0}")]
    NotNested(String),
    #[error("invalid subdomain hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("function {0} is not active in the hierarchical basis")]
    InactiveFunction(String),
    #[error("refinement depth cap of {0} levels exceeded")]
    DepthExceeded(usize),
    #[error("singular or inverted Jacobian at parametric point {0:?}")]
    SingularJacobian(Vec<f64>),
    #[error("point {0:?} lies on a break line of the geometry map")]
    OnBreakLine(Vec<f64>),
    #[error("point {0:?} lies on a cell boundary")]
    OnCellBoundary(Vec<f64>),
    #[error("problem data violates ellipticity: {0}")]
    Ellipticity(String),
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
