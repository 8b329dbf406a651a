//! Model surfaces: distance, minimizing geodesics, exponential map and
//! initial directions on two-dimensional length spaces.
//!
//! Every model is described in a single chart with an orthogonal metric, so a
//! tangent vector is stored by its chart components together with the diagonal
//! metric at its base point. Internally directions are handled as *frame
//! angles*, i.e. angles in the orthonormal frame of the chart.

pub(crate) mod models;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{ANGULAR_TOL, CONTINUUM_SAMPLES};
use crate::error::{Error, Result};
use models::{wrap_angle, RawDirections, POLE_EPS};

/// Identifier of a surface, derived from its kind and parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SurfaceId(u64);

/// The supported analytic models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfaceKind {
    EuclideanPlane,
    /// Chart `(theta, phi)`: polar angle in `[0, pi]` and azimuth.
    RoundSphere { curvature: f64 },
    /// Poincare disk chart; the sectional curvature is `-curvature`.
    HyperbolicPlane { curvature: f64 },
    /// Chart `(u, h)` with `u` periodic of period `circumference`.
    FlatCylinder { circumference: f64 },
    /// The plane minus the ray `{(0, t) : t >= 0}` with its induced length metric.
    SlitPlane,
    /// Chart `(r, phi)` with `phi` periodic of period `total_angle`.
    FlatCone { total_angle: f64 },
}

impl SurfaceKind {
    fn name(&self) -> &'static str {
        match self {
            SurfaceKind::EuclideanPlane => "euclidean plane",
            SurfaceKind::RoundSphere { .. } => "round sphere",
            SurfaceKind::HyperbolicPlane { .. } => "hyperbolic plane",
            SurfaceKind::FlatCylinder { .. } => "flat cylinder",
            SurfaceKind::SlitPlane => "slit plane",
            SurfaceKind::FlatCone { .. } => "flat cone",
        }
    }

    fn id(&self) -> SurfaceId {
        // FNV-1a over the discriminant and parameter bits.
        let (tag, param) = match *self {
            SurfaceKind::EuclideanPlane => (1u64, 0.0),
            SurfaceKind::RoundSphere { curvature } => (2, curvature),
            SurfaceKind::HyperbolicPlane { curvature } => (3, curvature),
            SurfaceKind::FlatCylinder { circumference } => (4, circumference),
            SurfaceKind::SlitPlane => (5, 0.0),
            SurfaceKind::FlatCone { total_angle } => (6, total_angle),
        };
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in tag.to_le_bytes().into_iter().chain(param.to_bits().to_le_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        SurfaceId(h)
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A point of a model surface in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    surface: SurfaceId,
    coords: [f64; 2],
}

impl SurfacePoint {
    pub fn coords(&self) -> [f64; 2] {
        self.coords
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn surface(&self) -> SurfaceId {
        self.surface
    }
}

/// A tangent vector with its metric norm cached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    base: SurfacePoint,
    components: [f64; 2],
    metric: [f64; 2],
    norm: f64,
}

impl TangentVector {
    pub fn base(&self) -> SurfacePoint {
        self.base
    }

    pub fn components(&self) -> [f64; 2] {
        self.components
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_unit(&self) -> bool {
        (self.norm - 1.0).abs() <= 1e-9
    }

    /// Angle of the vector in the orthonormal frame of the chart.
    pub fn frame_angle(&self) -> f64 {
        (self.metric[1].sqrt() * self.components[1]).atan2(self.metric[0].sqrt() * self.components[0])
    }

    /// Orthonormal-frame components.
    pub fn frame_components(&self) -> [f64; 2] {
        [self.metric[0].sqrt() * self.components[0], self.metric[1].sqrt() * self.components[1]]
    }

    pub fn scaled(&self, k: f64) -> TangentVector {
        TangentVector {
            components: [k * self.components[0], k * self.components[1]],
            norm: k.abs() * self.norm,
            ..*self
        }
    }

    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        Ok(self.metric[0] * self.components[0] * other.components[0]
            + self.metric[1] * self.components[1] * other.components[1])
    }
}

/// Metric angle between two nonzero tangent vectors at the same point.
pub fn angle(u: &TangentVector, v: &TangentVector) -> Result<f64> {
    if u.norm == 0.0 || v.norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let c = u.inner(v)? / (u.norm * v.norm);
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// A minimizing geodesic, or for the slit plane a minimizing sequence's limit
/// through the removed tip (`attained == false`).
#[derive(Clone, Debug)]
pub struct Geodesic {
    pub start: SurfacePoint,
    pub end: SurfacePoint,
    pub direction: TangentVector,
    pub length: f64,
    pub attained: bool,
    /// Arclength-parametrized polyline from `start` to `end`.
    pub polyline: Vec<SurfacePoint>,
}

/// All minimizing geodesics between two points, up to direction clustering.
#[derive(Clone, Debug)]
pub struct GeodesicSet {
    pub paths: Vec<Geodesic>,
    /// Set when the minimizers form a continuum and `paths` is a sample.
    pub continuum: bool,
}

/// Directions of all minimizing geodesics from one point to another.
#[derive(Clone, Debug)]
pub struct InitialDirections {
    pub distance: f64,
    pub angles: Vec<f64>,
    pub continuum: bool,
    pub attained: bool,
}

impl From<RawDirections> for InitialDirections {
    fn from(r: RawDirections) -> Self {
        Self { distance: r.distance, angles: r.angles, continuum: r.continuum, attained: r.attained }
    }
}

const POLYLINE_SEGMENTS: usize = 32;

/// An analytic model surface. Immutable and cheap to copy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSurface {
    kind: SurfaceKind,
    id: SurfaceId,
    angular_tol: f64,
}

impl ModelSurface {
    pub fn new(kind: SurfaceKind) -> Result<Self> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Usage(format!("{what} must be positive and finite, got {v}")))
            }
        };
        match kind {
            SurfaceKind::RoundSphere { curvature } | SurfaceKind::HyperbolicPlane { curvature } => {
                positive(curvature, "curvature")?
            }
            SurfaceKind::FlatCylinder { circumference } => positive(circumference, "circumference")?,
            SurfaceKind::FlatCone { total_angle } => positive(total_angle, "total angle")?,
            SurfaceKind::EuclideanPlane | SurfaceKind::SlitPlane => {}
        }
        Ok(Self { kind, id: kind.id(), angular_tol: ANGULAR_TOL })
    }

    pub fn plane() -> Self {
        Self::new(SurfaceKind::EuclideanPlane).expect("valid")
    }

    pub fn sphere(curvature: f64) -> Result<Self> {
        Self::new(SurfaceKind::RoundSphere { curvature })
    }

    pub fn hyperbolic(curvature: f64) -> Result<Self> {
        Self::new(SurfaceKind::HyperbolicPlane { curvature })
    }

    pub fn cylinder(circumference: f64) -> Result<Self> {
        Self::new(SurfaceKind::FlatCylinder { circumference })
    }

    pub fn slit_plane() -> Self {
        Self::new(SurfaceKind::SlitPlane).expect("valid")
    }

    pub fn cone(total_angle: f64) -> Result<Self> {
        Self::new(SurfaceKind::FlatCone { total_angle })
    }

    pub fn with_angular_tol(mut self, tol: f64) -> Self {
        self.angular_tol = tol;
        self
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn id(&self) -> SurfaceId {
        self.id
    }

    pub fn angular_tol(&self) -> f64 {
        self.angular_tol
    }

    /// False only for the slit plane.
    pub fn is_complete(&self) -> bool {
        !matches!(self.kind, SurfaceKind::SlitPlane)
    }

    /// Scale of the model: sphere radius or curvature radius of the hyperbolic plane.
    pub fn curvature_radius(&self) -> Option<f64> {
        match self.kind {
            SurfaceKind::RoundSphere { curvature } | SurfaceKind::HyperbolicPlane { curvature } => {
                Some(1.0 / curvature.sqrt())
            }
            _ => None,
        }
    }

    /// Factor that rescales distances so that the lower curvature bound becomes `>= -1`.
    pub fn lower_curvature_rescale(&self) -> f64 {
        match self.kind {
            SurfaceKind::HyperbolicPlane { curvature } if curvature > 1.0 => curvature.sqrt(),
            _ => 1.0,
        }
    }

    fn in_domain(&self, c: [f64; 2]) -> bool {
        if !(c[0].is_finite() && c[1].is_finite()) {
            return false;
        }
        match self.kind {
            SurfaceKind::RoundSphere { .. } => (-1e-12..=PI + 1e-12).contains(&c[0]),
            SurfaceKind::HyperbolicPlane { .. } => c[0] * c[0] + c[1] * c[1] < 1.0,
            SurfaceKind::SlitPlane => !models::slit_on_ray(c),
            SurfaceKind::FlatCone { .. } => c[0] >= 0.0,
            SurfaceKind::EuclideanPlane | SurfaceKind::FlatCylinder { .. } => true,
        }
    }

    fn normalize(&self, c: [f64; 2]) -> [f64; 2] {
        match self.kind {
            SurfaceKind::RoundSphere { .. } => [c[0].clamp(0.0, PI), c[1]],
            SurfaceKind::FlatCone { total_angle } => models::cone_normalize(total_angle, c),
            _ => c,
        }
    }

    /// Builds a point, validating the chart domain.
    pub fn point(&self, x: f64, y: f64) -> Result<SurfacePoint> {
        if !self.in_domain([x, y]) {
            return Err(Error::OutsideDomain { surface: self.kind.name(), coords: [x, y] });
        }
        Ok(SurfacePoint { surface: self.id, coords: self.normalize([x, y]) })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.in_domain([x, y])
    }

    fn check(&self, p: &SurfacePoint) -> Result<()> {
        if p.surface != self.id {
            return Err(Error::SurfaceMismatch { expected: self.id, found: p.surface });
        }
        Ok(())
    }

    fn wrap(&self, c: [f64; 2]) -> SurfacePoint {
        SurfacePoint { surface: self.id, coords: c }
    }

    /// Diagonal of the metric tensor at `c`, with the degenerate coordinate
    /// direction at sphere poles and the cone apex replaced by a unit one.
    pub(crate) fn metric_diag(&self, c: [f64; 2]) -> [f64; 2] {
        match self.kind {
            SurfaceKind::EuclideanPlane | SurfaceKind::SlitPlane | SurfaceKind::FlatCylinder { .. } => [1.0, 1.0],
            SurfaceKind::RoundSphere { curvature } => {
                let r2 = 1.0 / curvature;
                let s = c[0].sin();
                [r2, if s.abs() < POLE_EPS { r2 } else { r2 * s * s }]
            }
            SurfaceKind::HyperbolicPlane { curvature } => {
                let l = models::hyperbolic_conformal(1.0 / curvature.sqrt(), c);
                [l * l, l * l]
            }
            SurfaceKind::FlatCone { .. } => [1.0, if c[0] < POLE_EPS { 1.0 } else { c[0] * c[0] }],
        }
    }

    pub fn tangent(&self, base: SurfacePoint, components: [f64; 2]) -> Result<TangentVector> {
        self.check(&base)?;
        let metric = self.metric_diag(base.coords);
        let norm = (metric[0] * components[0] * components[0] + metric[1] * components[1] * components[1]).sqrt();
        Ok(TangentVector { base, components, metric, norm })
    }

    /// Unit tangent vector with the given frame angle.
    pub fn unit_vector(&self, base: SurfacePoint, frame_angle: f64) -> TangentVector {
        let metric = self.metric_diag(base.coords);
        let (s, c) = frame_angle.sin_cos();
        TangentVector { base, components: [c / metric[0].sqrt(), s / metric[1].sqrt()], metric, norm: 1.0 }
    }

    /// Radius below which geodesics from `x` are unique and exp/log invert each other.
    pub fn injectivity_scale(&self, x: &SurfacePoint) -> f64 {
        let c = x.coords;
        match self.kind {
            SurfaceKind::EuclideanPlane | SurfaceKind::HyperbolicPlane { .. } => f64::INFINITY,
            SurfaceKind::RoundSphere { curvature } => PI / curvature.sqrt(),
            SurfaceKind::FlatCylinder { circumference } => 0.5 * circumference,
            SurfaceKind::SlitPlane => models::slit_ray_distance(c),
            SurfaceKind::FlatCone { total_angle } => {
                if total_angle < PI {
                    c[0] * (0.5 * total_angle).sin()
                } else {
                    c[0]
                }
            }
        }
    }

    fn raw_distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self.kind {
            SurfaceKind::EuclideanPlane => models::plane_distance(a, b),
            SurfaceKind::RoundSphere { curvature } => models::sphere_angle(a, b) / curvature.sqrt(),
            SurfaceKind::HyperbolicPlane { curvature } => models::hyperbolic_distance(1.0 / curvature.sqrt(), a, b),
            SurfaceKind::FlatCylinder { circumference } => models::cylinder_distance(circumference, a, b),
            SurfaceKind::SlitPlane => models::slit_distance(a, b).0,
            SurfaceKind::FlatCone { total_angle } => models::cone_directions(total_angle, a, b, 0.0).distance,
        }
    }

    /// Intrinsic distance; exact for every analytic model.
    pub fn distance(&self, x: &SurfacePoint, y: &SurfacePoint) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.raw_distance(x.coords, y.coords))
    }

    /// Unchecked distance for hot loops over points already validated.
    pub(crate) fn dist(&self, x: &SurfacePoint, y: &SurfacePoint) -> f64 {
        self.raw_distance(x.coords, y.coords)
    }

    /// Frame angles of the initial directions of all minimizing geodesics from
    /// `x` to `y`. Geodesics whose length is within `tol` of the minimum count.
    pub fn initial_directions(
        &self,
        x: &SurfacePoint,
        y: &SurfacePoint,
        tol: f64,
        continuum_samples: usize,
    ) -> Result<InitialDirections> {
        self.check(x)?;
        self.check(y)?;
        let (a, b) = (x.coords, y.coords);
        let raw = match self.kind {
            SurfaceKind::EuclideanPlane => models::plane_directions(a, b),
            SurfaceKind::RoundSphere { curvature } => {
                models::sphere_directions(1.0 / curvature.sqrt(), a, b, tol, continuum_samples)
            }
            SurfaceKind::HyperbolicPlane { curvature } => models::hyperbolic_directions(1.0 / curvature.sqrt(), a, b),
            SurfaceKind::FlatCylinder { circumference } => models::cylinder_directions(circumference, a, b, tol),
            SurfaceKind::SlitPlane => models::slit_directions(a, b),
            SurfaceKind::FlatCone { total_angle } => {
                if a[0] < POLE_EPS {
                    return Err(Error::Usage("directions at the cone apex are not defined".into()));
                }
                models::cone_directions(total_angle, a, b, tol)
            }
        };
        if raw.distance == 0.0 {
            return Err(Error::Usage("coincident points have no geodesic direction".into()));
        }
        Ok(raw.into())
    }

    /// All minimizing geodesics from `x` to `y`, with `tol` the length slack.
    pub fn geodesics(&self, x: &SurfacePoint, y: &SurfacePoint, tol: f64) -> Result<GeodesicSet> {
        self.geodesics_sampled(x, y, tol, CONTINUUM_SAMPLES)
    }

    /// As [`ModelSurface::geodesics`] with `samples` representatives for a continuum.
    pub fn geodesics_sampled(
        &self,
        x: &SurfacePoint,
        y: &SurfacePoint,
        tol: f64,
        samples: usize,
    ) -> Result<GeodesicSet> {
        let dirs = self.initial_directions(x, y, tol, samples.max(1))?;
        let mut paths = Vec::with_capacity(dirs.angles.len());
        for &psi in &dirs.angles {
            let polyline = (0..=POLYLINE_SEGMENTS)
                .map(|k| {
                    let s = dirs.distance * k as f64 / POLYLINE_SEGMENTS as f64;
                    if k == POLYLINE_SEGMENTS {
                        Ok(*y)
                    } else {
                        self.point_along(x, y, psi, dirs.attained, s)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            paths.push(Geodesic {
                start: *x,
                end: *y,
                direction: self.unit_vector(*x, psi),
                length: dirs.distance,
                attained: dirs.attained,
                polyline,
            });
        }
        Ok(GeodesicSet { paths, continuum: dirs.continuum })
    }

    /// Point at arclength `s` on the minimizer from `x` to `y` leaving in `psi`.
    fn point_along(&self, x: &SurfacePoint, y: &SurfacePoint, psi: f64, attained: bool, s: f64) -> Result<SurfacePoint> {
        if let SurfaceKind::FlatCone { total_angle } = self.kind {
            // Straight through the apex and out along the ray of y.
            if (wrap_angle(psi) - PI).abs() < 1e-12 && s > x.coords[0] {
                return Ok(self.wrap(models::cone_normalize(total_angle, [s - x.coords[0], y.coords[1]])));
            }
        }
        if attained {
            return self.exp_dir(x, psi, s);
        }
        // Broken path through the slit tip.
        let (a, b) = (x.coords, y.coords);
        let ra = a[0].hypot(a[1]);
        let c = if s <= ra {
            let k = 1.0 - s / ra;
            [a[0] * k, a[1] * k]
        } else {
            let rb = b[0].hypot(b[1]);
            let k = (s - ra) / rb;
            [b[0] * k, b[1] * k]
        };
        if models::slit_on_ray(c) {
            // Only the tip itself; nudge onto the open lower half plane.
            return Ok(self.wrap([0.0, -1e-300]));
        }
        Ok(self.wrap(c))
    }

    /// Exponential map along a unit tangent vector.
    pub fn exp_map(&self, x: &SurfacePoint, v: &TangentVector, t: f64) -> Result<SurfacePoint> {
        self.check(x)?;
        if v.base != *x {
            return Err(Error::BaseMismatch);
        }
        if !v.is_unit() {
            return Err(Error::Usage(format!("exp_map expects a unit vector, got norm {}", v.norm)));
        }
        if t < 0.0 {
            return Err(Error::Usage(format!("exp_map expects t >= 0, got {t}")));
        }
        self.exp_dir(x, v.frame_angle(), t)
    }

    /// Exponential map along the frame angle `psi`.
    pub fn exp_dir(&self, x: &SurfacePoint, psi: f64, t: f64) -> Result<SurfacePoint> {
        let a = x.coords;
        let c = match self.kind {
            SurfaceKind::EuclideanPlane => models::plane_exp(a, psi, t),
            SurfaceKind::RoundSphere { curvature } => models::sphere_exp(1.0 / curvature.sqrt(), a, psi, t),
            SurfaceKind::HyperbolicPlane { curvature } => models::hyperbolic_exp(1.0 / curvature.sqrt(), a, psi, t),
            SurfaceKind::FlatCylinder { circumference } => {
                models::cylinder_normalize(circumference, models::plane_exp(a, psi, t))
            }
            SurfaceKind::SlitPlane => models::slit_exp(a, psi, t)?,
            SurfaceKind::FlatCone { total_angle } => {
                if a[0] < POLE_EPS {
                    return Err(Error::Usage("exp_map at the cone apex is not defined".into()));
                }
                models::cone_exp(total_angle, a, psi, t)?
            }
        };
        Ok(self.wrap(c))
    }

    /// Metric midpoint of `x` and `y`, or `None` when it is not unique.
    pub fn midpoint(&self, x: &SurfacePoint, y: &SurfacePoint) -> Result<Option<SurfacePoint>> {
        if x == y {
            return Ok(Some(*x));
        }
        let dirs = self.initial_directions(x, y, 1e-12, 2)?;
        if dirs.continuum || dirs.angles.len() != 1 {
            return Ok(None);
        }
        let m = self.point_along(x, y, dirs.angles[0], dirs.attained, 0.5 * dirs.distance)?;
        Ok(Some(m))
    }

    /// Point at fraction `s` along the minimizer from `x` to `y` (first one if several).
    pub fn interpolate(&self, x: &SurfacePoint, y: &SurfacePoint, s: f64) -> Result<SurfacePoint> {
        if x == y || s == 0.0 {
            return Ok(*x);
        }
        let dirs = self.initial_directions(x, y, 0.0, 1)?;
        self.point_along(x, y, dirs.angles[0], dirs.attained, s * dirs.distance)
    }

    /// Embedding-space image of the unit direction `psi` at `x`, used to compare
    /// tangent vectors at nearby base points.
    pub fn ambient_direction(&self, x: &SurfacePoint, psi: f64) -> [f64; 3] {
        match self.kind {
            SurfaceKind::RoundSphere { .. } => models::sphere_ambient(x.coords, psi),
            SurfaceKind::FlatCone { .. } => {
                // Development rotates the polar frame by the azimuth.
                let a = psi + x.coords[1];
                [a.cos(), a.sin(), 0.0]
            }
            _ => [psi.cos(), psi.sin(), 0.0],
        }
    }

    /// Length of a cell of a chart grid with spacings `(dx, dy)` at `c`, measured
    /// with the metric (diagonal length).
    pub fn cell_diagonal(&self, c: [f64; 2], dx: f64, dy: f64) -> f64 {
        let g = self.metric_diag(c);
        (g[0] * dx * dx + g[1] * dy * dy).sqrt()
    }
}

/// Normalizes an angle to `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    wrap_angle(a)
}

#[cfg(test)]
mod tests;
