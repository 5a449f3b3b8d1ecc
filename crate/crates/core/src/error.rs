use thiserror::Error;

use crate::chart::ExprError;

pub type Point = [f64; 3];

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the chart on axis {axis}")]
    OutsideDomain { point: Point, axis: usize },
    #[error("finite differences disagree at {point:?}: |D(h) - D(h/2)| = {estimate:.3e} > {tol:.1e}")]
    FdDisagreement { point: Point, estimate: f64, tol: f64 },
    #[error("derivative order {requested} unavailable (backend supports up to {max})")]
    UnsupportedOrder { requested: usize, max: usize },
    #[error("non-finite {what} at {point:?}")]
    NonFinite { what: &'static str, point: Point },
    #[error("invalid chart domain: {0}")]
    InvalidDomain(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("form is not contact at {point:?} (alpha ^ d alpha = {density:.3e})")]
    NotContact { point: Point, density: f64 },
    #[error("Reeb system singular at {point:?}")]
    SingularSystem { point: Point },
    #[error("complex structure not compatible at {point:?}: {reason}")]
    NotCompatible { point: Point, reason: String },
    #[error("frame degenerates at {point:?}")]
    FrameDegenerate { point: Point },
    #[error("plane is degenerate")]
    DegeneratePlane,
    #[error("vector not in the contact plane (|alpha(v)| = {residual:.3e})")]
    NotInXi { residual: f64 },
    #[error("flowline leaves the chart at {point:?} after time {time}")]
    FlowExit { point: Point, time: f64 },
    #[error("prescribed value {value} exceeds admissible bound {bound} at {point:?}")]
    Admissibility { point: Point, value: f64, bound: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("flowline from seed {seed:?} is stiff at time {time} (eta = {eta:.3e})")]
    Stiff { seed: Point, time: f64, eta: f64 },
    #[error("no constant lambda found within |lambda| <= {limit}; {} blocking points, first {:?}", blocking.len(), blocking.first())]
    NoLambda { limit: f64, blocking: Vec<Point> },
    #[error("quadrature not converged: grid {coarse} vs doubled {fine} (tol {tol:.1e})")]
    QuadratureNotConverged { coarse: f64, fine: f64, tol: f64 },
    #[error("metric not positive definite at {point:?} (min eigenvalue {min_eig:.3e})")]
    NotSpd { point: Point, min_eig: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
