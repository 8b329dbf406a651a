use thiserror::Error;

use crate::flow::FlowCurve;
use crate::surface::SurfaceId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("point belongs to surface {found:?}, expected {expected:?}")]
    SurfaceMismatch { expected: SurfaceId, found: SurfaceId },

    #[error("coordinates {coords:?} lie outside the chart domain of the {surface}")]
    OutsideDomain { surface: &'static str, coords: [f64; 2] },

    #[error("zero tangent vector")]
    ZeroVector,

    #[error("tangent vectors are based at different points")]
    BaseMismatch,

    #[error("geodesic leaves the surface at parameter {t_exit}")]
    DomainExit { t_exit: f64 },

    #[error("geodesic runs into the cone apex at parameter {t_apex}")]
    ApexHit { t_apex: f64 },

    #[error("query point lies in the closed set (d_A = {0:e})")]
    InSet(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("footpoints are not unique at {coords:?} ({count} directions)")]
    ReachViolation { coords: [f64; 2], count: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("arclength reparametrization undefined: interior critical point at node {0}")]
    ReparamUndefined(usize),

    #[error("chart construction failed: best orthogonality defect {best} exceeds {tol}")]
    ChartConstruction { best: f64, tol: f64 },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("gradient flow aborted after {} nodes: {source}", prefix.nodes.len())]
    Flow {
        prefix: Box<FlowCurve>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
