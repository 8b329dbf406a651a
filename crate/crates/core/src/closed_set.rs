//! Closed subsets `A` of a model surface and footpoint queries.
//!
//! Analytic descriptors (points, circles on the plane and sphere, named
//! sublevel sets) are answered in closed form. Curves are handled through
//! their sample cloud: local minimizers of the distance along the curve are
//! refined by golden-section search on the adjacent segments.

use std::f64::consts::{PI, TAU};

use crate::config::{CONTINUUM_SAMPLES, CONTINUUM_THRESHOLD, DIRECTION_MERGE_ANGLE, FOOTPOINT_TOL_FLOOR, FOOTPOINT_TOL_PITCHES};
use crate::error::{Error, Result};
use crate::surface::{normalize_angle, ModelSurface, SurfaceKind, SurfacePoint, TangentVector};

/// Default number of samples for circles and other closed curves.
pub const DEFAULT_CURVE_SAMPLES: usize = 2048;

/// Named functions whose sublevel sets can serve as closed sets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NamedFunction {
    /// Sphere only: `A = {theta >= min_polar}`, the sublevel set of `-theta`.
    PolarCap { min_polar: f64 },
    /// Plane only: `A = {n . x <= offset}` for a unit normal `n`.
    HalfPlane { normal: [f64; 2], offset: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SetDescriptor {
    Point(SurfacePoint),
    Points(Vec<SurfacePoint>),
    /// Metric circle of the given radius around `center`.
    Circle { center: SurfacePoint, radius: f64 },
    /// Piecewise geodesic curve through the vertices.
    Polyline { vertices: Vec<SurfacePoint>, closed: bool },
    Sublevel(NamedFunction),
}

/// Footpoint resolution parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootpointConfig {
    pub tolerance: f64,
    pub merge_angle: f64,
    pub continuum_threshold: usize,
    pub continuum_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Topology {
    Scattered,
    Curve { closed: bool },
}

/// A closed set with its sample cloud. Immutable after construction.
#[derive(Clone, Debug)]
pub struct ClosedSet {
    surface: ModelSurface,
    descriptor: SetDescriptor,
    cloud: Vec<SurfacePoint>,
    topology: Topology,
    /// Leading cloud points lying on the topological boundary of `A`.
    boundary: usize,
    pitch: f64,
    config: FootpointConfig,
}

/// One footpoint with the initial direction of a minimizing geodesic to it.
#[derive(Clone, Debug)]
pub struct Footpoint {
    pub point: SurfacePoint,
    pub direction: TangentVector,
    pub distance: f64,
    /// Raw candidates merged into this cluster.
    pub raw_count: usize,
    /// Angular span of the merged candidates.
    pub span: f64,
}

#[derive(Clone, Debug)]
pub struct FootpointResult {
    pub query: SurfacePoint,
    pub distance: f64,
    /// One representative per direction cluster.
    pub footpoints: Vec<Footpoint>,
    /// Frame angles of all footpoint directions: the cluster representatives
    /// plus the raw sample of any continuum cluster.
    pub directions: Vec<f64>,
    pub continuum: bool,
    /// False when the infimum is not realized by a geodesic (slit plane).
    pub attained: bool,
}

impl FootpointResult {
    pub fn count(&self) -> usize {
        self.footpoints.len()
    }

    pub fn is_unique(&self) -> bool {
        self.footpoints.len() == 1 && !self.continuum
    }
}

/// Raw footpoint candidate: frame angle of the direction, point, distance.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    angle: f64,
    point: SurfacePoint,
    distance: f64,
    attained: bool,
    /// Part of a sampled continuum of minimizers to one point.
    continuum: bool,
}

impl ClosedSet {
    pub fn new(surface: ModelSurface, descriptor: SetDescriptor) -> Result<Self> {
        Self::with_samples(surface, descriptor, DEFAULT_CURVE_SAMPLES)
    }

    /// Builds the set; `samples` controls the cloud density of curves.
    pub fn with_samples(surface: ModelSurface, descriptor: SetDescriptor, samples: usize) -> Result<Self> {
        let samples = samples.max(8);
        let check = |p: &SurfacePoint| {
            if p.surface() != surface.id() {
                Err(Error::SurfaceMismatch { expected: surface.id(), found: p.surface() })
            } else {
                Ok(())
            }
        };
        let (cloud, topology) = match &descriptor {
            SetDescriptor::Point(p) => {
                check(p)?;
                (vec![*p], Topology::Scattered)
            }
            SetDescriptor::Points(ps) => {
                if ps.is_empty() {
                    return Err(Error::Usage("finite point set must not be empty".into()));
                }
                ps.iter().try_for_each(check)?;
                (ps.clone(), Topology::Scattered)
            }
            SetDescriptor::Circle { center, radius } => {
                check(center)?;
                if !(*radius > 0.0) {
                    return Err(Error::Usage(format!("circle radius must be positive, got {radius}")));
                }
                let cloud = (0..samples)
                    .map(|k| surface.exp_dir(center, -PI + TAU * k as f64 / samples as f64, *radius))
                    .collect::<Result<Vec<_>>>()?;
                (cloud, Topology::Curve { closed: true })
            }
            SetDescriptor::Polyline { vertices, closed } => {
                if vertices.len() < 2 {
                    return Err(Error::Usage("polyline needs at least two vertices".into()));
                }
                vertices.iter().try_for_each(check)?;
                (densify(&surface, vertices, *closed, samples)?, Topology::Curve { closed: *closed })
            }
            SetDescriptor::Sublevel(f) => (sublevel_cloud(&surface, f, samples)?, Topology::Scattered),
        };
        let pitch = cloud_pitch(&surface, &cloud, topology);
        let analytic = match (&descriptor, surface.kind()) {
            (SetDescriptor::Circle { .. }, SurfaceKind::EuclideanPlane | SurfaceKind::RoundSphere { .. }) => true,
            (SetDescriptor::Circle { .. } | SetDescriptor::Polyline { .. }, _) => false,
            _ => true,
        };
        let config = FootpointConfig {
            tolerance: if analytic { FOOTPOINT_TOL_FLOOR } else { (FOOTPOINT_TOL_PITCHES * pitch).max(FOOTPOINT_TOL_FLOOR) },
            merge_angle: DIRECTION_MERGE_ANGLE,
            continuum_threshold: CONTINUUM_THRESHOLD,
            continuum_samples: CONTINUUM_SAMPLES,
        };
        let boundary = match &descriptor {
            SetDescriptor::Sublevel(_) => cloud.len() / (SUBLEVEL_RINGS + 1),
            _ => cloud.len(),
        };
        Ok(Self { surface, descriptor, cloud, topology, boundary, pitch, config })
    }

    pub fn point(surface: ModelSurface, p: SurfacePoint) -> Result<Self> {
        Self::new(surface, SetDescriptor::Point(p))
    }

    pub fn points(surface: ModelSurface, ps: Vec<SurfacePoint>) -> Result<Self> {
        Self::new(surface, SetDescriptor::Points(ps))
    }

    pub fn circle(surface: ModelSurface, center: SurfacePoint, radius: f64) -> Result<Self> {
        Self::new(surface, SetDescriptor::Circle { center, radius })
    }

    pub fn polyline(surface: ModelSurface, vertices: Vec<SurfacePoint>, closed: bool) -> Result<Self> {
        Self::new(surface, SetDescriptor::Polyline { vertices, closed })
    }

    /// Closed polyline through `samples` points of the ellipse `x^2/a^2 + y^2/b^2 = 1`
    /// of the plane, centered at `center`.
    pub fn ellipse(surface: ModelSurface, center: [f64; 2], a: f64, b: f64, samples: usize) -> Result<Self> {
        let vertices = (0..samples)
            .map(|k| {
                let t = TAU * k as f64 / samples as f64;
                surface.point(center[0] + a * t.cos(), center[1] + b * t.sin())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_samples(surface, SetDescriptor::Polyline { vertices, closed: true }, samples)
    }

    pub fn with_config(mut self, config: FootpointConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.config.tolerance = tolerance;
        self
    }

    pub fn surface(&self) -> &ModelSurface {
        &self.surface
    }

    pub fn descriptor(&self) -> &SetDescriptor {
        &self.descriptor
    }

    pub fn cloud(&self) -> &[SurfacePoint] {
        &self.cloud
    }

    /// Cloud points on the boundary of `A`; all of them unless `A` has interior.
    pub fn boundary(&self) -> &[SurfacePoint] {
        &self.cloud[..self.boundary]
    }

    /// Sampling pitch of the cloud, zero for finite point sets.
    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn config(&self) -> FootpointConfig {
        self.config
    }

    pub fn footpoint_tolerance(&self) -> f64 {
        self.config.tolerance
    }

    pub fn is_curve(&self) -> bool {
        matches!(self.topology, Topology::Curve { .. })
    }

    /// Distance from `x` to the set.
    pub fn eval_da(&self, x: &SurfacePoint) -> Result<f64> {
        self.check(x)?;
        if let Some(d) = self.analytic_distance(x) {
            return Ok(d);
        }
        Ok(self.candidates(x, self.config.tolerance)?.0)
    }

    /// Whether the infimum defining `d_A(x)` is realized by a geodesic.
    pub fn attained(&self, x: &SurfacePoint) -> Result<bool> {
        self.check(x)?;
        let (_, cands) = self.candidates(x, self.config.tolerance)?;
        Ok(cands.iter().any(|c| c.attained))
    }

    /// Footpoints with the set's own configuration.
    pub fn footpoints(&self, x: &SurfacePoint) -> Result<FootpointResult> {
        self.footpoints_with(x, &self.config)
    }

    /// Footpoints of `x`: all near-minimizers within `config.tolerance` of
    /// `d_A(x)`, clustered by initial direction.
    pub fn footpoints_with(&self, x: &SurfacePoint, config: &FootpointConfig) -> Result<FootpointResult> {
        self.check(x)?;
        let (distance, cands) = self.candidates(x, config.tolerance)?;
        if distance <= config.tolerance.min(self.config.tolerance) {
            return Err(Error::InSet(distance));
        }
        Ok(self.cluster(*x, distance, cands, config))
    }

    fn check(&self, x: &SurfacePoint) -> Result<()> {
        if x.surface() != self.surface.id() {
            return Err(Error::SurfaceMismatch { expected: self.surface.id(), found: x.surface() });
        }
        Ok(())
    }

    fn analytic_distance(&self, x: &SurfacePoint) -> Option<f64> {
        let s = &self.surface;
        match (&self.descriptor, s.kind()) {
            (SetDescriptor::Point(p), _) => Some(s.dist(x, p)),
            (SetDescriptor::Points(ps), _) => Some(ps.iter().map(|p| s.dist(x, p)).fold(f64::INFINITY, f64::min)),
            (SetDescriptor::Circle { center, radius }, SurfaceKind::EuclideanPlane | SurfaceKind::RoundSphere { .. }) => {
                Some((s.dist(x, center) - radius).abs())
            }
            (SetDescriptor::Sublevel(f), _) => Some(named_distance(s, f, x)),
            _ => None,
        }
    }

    /// Distance and raw candidates within `tol` of the minimum.
    fn candidates(&self, x: &SurfacePoint, tol: f64) -> Result<(f64, Vec<Candidate>)> {
        let s = &self.surface;
        let samples = self.config.continuum_samples;
        let from_points = |ps: &[SurfacePoint]| -> Result<(f64, Vec<Candidate>)> {
            let ds: Vec<f64> = ps.iter().map(|p| s.dist(x, p)).collect();
            let d = ds.iter().copied().fold(f64::INFINITY, f64::min);
            let mut out = Vec::new();
            if d == 0.0 {
                return Ok((0.0, out));
            }
            for (p, &dp) in ps.iter().zip(&ds) {
                if dp <= d + tol {
                    let dirs = s.initial_directions(x, p, tol, samples)?;
                    out.extend(dirs.angles.iter().map(|&a| Candidate { angle: a, point: *p, distance: dp, attained: dirs.attained, continuum: dirs.continuum }));
                }
            }
            Ok((d, out))
        };
        match (&self.descriptor, s.kind()) {
            (SetDescriptor::Point(p), _) => from_points(std::slice::from_ref(p)),
            (SetDescriptor::Points(ps), _) => from_points(ps),
            (SetDescriptor::Circle { center, radius }, SurfaceKind::EuclideanPlane | SurfaceKind::RoundSphere { .. }) => {
                self.circle_candidates(x, center, *radius, tol)
            }
            (SetDescriptor::Sublevel(f), _) => self.named_candidates(x, f, tol),
            _ => self.curve_candidates(x, tol),
        }
    }

    fn circle_candidates(&self, x: &SurfacePoint, center: &SurfacePoint, radius: f64, tol: f64) -> Result<(f64, Vec<Candidate>)> {
        let s = &self.surface;
        let r = s.dist(x, center);
        let d = (r - radius).abs();
        if d == 0.0 {
            return Ok((0.0, Vec::new()));
        }
        let n = self.config.continuum_samples;
        let antipodal = s.curvature_radius().map(|rr| PI * rr - r <= 0.5 * tol).unwrap_or(false)
            && matches!(s.kind(), SurfaceKind::RoundSphere { .. });
        if r <= 0.5 * tol || antipodal {
            // Every point of the circle is a footpoint.
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let psi = -PI + TAU * k as f64 / n as f64;
                let (angle, point) = if r <= 0.5 * tol {
                    (psi, s.exp_dir(x, psi, d)?)
                } else {
                    let cr = s.curvature_radius().unwrap_or(1.0);
                    (psi, s.exp_dir(x, psi, PI * cr - radius)?)
                };
                out.push(Candidate { angle, point, distance: d, attained: true, continuum: true });
            }
            return Ok((d, out));
        }
        let dirs = s.initial_directions(center, x, 0.0, 1)?;
        let foot = s.exp_dir(center, dirs.angles[0], radius)?;
        let to_center = s.initial_directions(x, center, 0.0, 1)?.angles[0];
        let angle = if r > radius { to_center } else { normalize_angle(to_center + PI) };
        Ok((d, vec![Candidate { angle, point: foot, distance: d, attained: true, continuum: false }]))
    }

    fn named_candidates(&self, x: &SurfacePoint, f: &NamedFunction, tol: f64) -> Result<(f64, Vec<Candidate>)> {
        let s = &self.surface;
        let d = named_distance(s, f, x);
        if d == 0.0 {
            return Ok((0.0, Vec::new()));
        }
        match *f {
            NamedFunction::PolarCap { min_polar } => {
                let rr = s.curvature_radius().unwrap_or(1.0);
                if x.x() * rr <= 0.5 * tol {
                    let n = self.config.continuum_samples;
                    let out = (0..n)
                        .map(|k| {
                            let psi = -PI + TAU * k as f64 / n as f64;
                            let p = s.exp_dir(x, psi, d)?;
                            Ok(Candidate { angle: psi, point: p, distance: d, attained: true, continuum: true })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    return Ok((d, out));
                }
                let foot = s.point(min_polar, x.y())?;
                Ok((d, vec![Candidate { angle: 0.0, point: foot, distance: d, attained: true, continuum: false }]))
            }
            NamedFunction::HalfPlane { normal, offset } => {
                let c = x.coords();
                let v = normal[0] * c[0] + normal[1] * c[1] - offset;
                let foot = s.point(c[0] - v * normal[0], c[1] - v * normal[1])?;
                let angle = (-normal[1]).atan2(-normal[0]);
                Ok((d, vec![Candidate { angle, point: foot, distance: d, attained: true, continuum: false }]))
            }
        }
    }

    /// Cloud minimization along a sampled curve with local refinement.
    fn curve_candidates(&self, x: &SurfacePoint, tol: f64) -> Result<(f64, Vec<Candidate>)> {
        let s = &self.surface;
        let n = self.cloud.len();
        let closed = matches!(self.topology, Topology::Curve { closed: true });
        let ds: Vec<f64> = self.cloud.iter().map(|p| s.dist(x, p)).collect();
        let dmin = ds.iter().copied().fold(f64::INFINITY, f64::min);
        // Refinement can lower a local minimum by at most the chord sag, which
        // is far below one pitch.
        let slack = tol + self.pitch;
        let mut refined: Vec<(SurfacePoint, f64)> = Vec::new();
        for i in 0..n {
            if ds[i] > dmin + slack {
                continue;
            }
            let prev = if i > 0 { Some(i - 1) } else if closed { Some(n - 1) } else { None };
            let next = if i + 1 < n { Some(i + 1) } else if closed { Some(0) } else { None };
            let is_local_min = prev.is_none_or(|j| ds[i] <= ds[j]) && next.is_none_or(|j| ds[i] <= ds[j]);
            if !is_local_min {
                continue;
            }
            let mut best = (self.cloud[i], ds[i]);
            for j in [prev, next].into_iter().flatten() {
                let cand = golden_on_segment(s, x, &self.cloud[i], &self.cloud[j])?;
                if cand.1 < best.1 {
                    best = cand;
                }
            }
            refined.push(best);
        }
        let d = refined.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        if d <= 0.0 {
            return Ok((0.0, Vec::new()));
        }
        let mut out = Vec::new();
        for (p, dp) in refined {
            if dp <= d + tol {
                let dirs = s.initial_directions(x, &p, tol, self.config.continuum_samples)?;
                out.extend(dirs.angles.iter().map(|&a| Candidate { angle: a, point: p, distance: dp, attained: dirs.attained, continuum: dirs.continuum }));
            }
        }
        Ok((d, out))
    }

    fn cluster(&self, x: SurfacePoint, distance: f64, cands: Vec<Candidate>, config: &FootpointConfig) -> FootpointResult {
        let s = &self.surface;
        let attained = cands.iter().any(|c| c.attained);
        let mut footpoints = Vec::new();
        let mut directions = Vec::new();
        let mut continuum = false;
        let (sampled, mut cands): (Vec<Candidate>, Vec<Candidate>) = cands.into_iter().partition(|c| c.continuum);
        if !sampled.is_empty() {
            continuum = true;
            directions.extend(sampled.iter().map(|c| normalize_angle(c.angle)));
            footpoints.push(Footpoint {
                point: sampled[0].point,
                direction: s.unit_vector(x, sampled[0].angle),
                distance: sampled[0].distance,
                raw_count: sampled.len(),
                span: TAU,
            });
        }
        for c in &mut cands {
            c.angle = normalize_angle(c.angle);
        }
        cands.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        let m = cands.len();
        // Find cluster boundaries: gaps larger than the merge angle, circularly.
        let gap = |i: usize| {
            let j = (i + 1) % m;
            let g = cands[j].angle - cands[i].angle;
            if j == 0 {
                g + TAU
            } else {
                g
            }
        };
        let breaks: Vec<usize> = (0..m).filter(|&i| m > 1 && gap(i) > config.merge_angle).collect();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        if breaks.is_empty() && m > 0 {
            groups.push((0..m).collect());
        } else {
            for (k, &b) in breaks.iter().enumerate() {
                let end = breaks[(k + 1) % breaks.len()];
                let mut g = Vec::new();
                let mut i = (b + 1) % m;
                loop {
                    g.push(i);
                    if i == end {
                        break;
                    }
                    i = (i + 1) % m;
                }
                groups.push(g);
            }
        }
        for g in groups {
            let span = if breaks.is_empty() && m > 1 {
                TAU - (0..m).map(gap).fold(0.0, f64::max)
            } else {
                g.windows(2).map(|w| gap(w[0])).sum::<f64>()
            };
            let rep = *g
                .iter()
                .min_by(|&&a, &&b| cands[a].distance.total_cmp(&cands[b].distance).then(a.cmp(&b)))
                .expect("nonempty");
            let is_continuum = g.len() > config.continuum_threshold && span > config.merge_angle;
            continuum |= is_continuum;
            if is_continuum {
                directions.extend(g.iter().map(|&i| cands[i].angle));
            } else {
                directions.push(cands[rep].angle);
            }
            footpoints.push(Footpoint {
                point: cands[rep].point,
                direction: s.unit_vector(x, cands[rep].angle),
                distance: cands[rep].distance,
                raw_count: g.len(),
                span,
            });
        }
        FootpointResult { query: x, distance, footpoints, directions, continuum, attained }
    }

    /// Initial directions from `x` to cloud points within `radius`, excluding `x`.
    pub fn directions_to_neighbors(&self, x: &SurfacePoint, radius: f64) -> Vec<f64> {
        let s = &self.surface;
        self.cloud
            .iter()
            .filter_map(|p| {
                let d = s.dist(x, p);
                if d > 1e-12 && d <= radius {
                    s.initial_directions(x, p, 0.0, 1).ok().map(|dirs| dirs.angles[0])
                } else {
                    None
                }
            })
            .collect()
    }
}

fn named_distance(s: &ModelSurface, f: &NamedFunction, x: &SurfacePoint) -> f64 {
    match *f {
        NamedFunction::PolarCap { min_polar } => s.curvature_radius().unwrap_or(1.0) * (min_polar - x.x()).max(0.0),
        NamedFunction::HalfPlane { normal, offset } => (normal[0] * x.x() + normal[1] * x.y() - offset).max(0.0),
    }
}

/// Rings of interior samples behind the boundary of sublevel sets.
const SUBLEVEL_RINGS: usize = 4;

fn sublevel_cloud(s: &ModelSurface, f: &NamedFunction, samples: usize) -> Result<Vec<SurfacePoint>> {
    let samples = (samples / 4).max(8);
    match *f {
        NamedFunction::PolarCap { min_polar } => {
            if !matches!(s.kind(), SurfaceKind::RoundSphere { .. }) {
                return Err(Error::Usage("polar-cap sets live on the round sphere".into()));
            }
            if !(0.0..PI).contains(&min_polar) {
                return Err(Error::Usage(format!("polar cap boundary must lie in [0, pi), got {min_polar}")));
            }
            let pitch = TAU * min_polar.sin().max(1e-3) / samples as f64;
            let mut out = Vec::new();
            for ring in 0..=SUBLEVEL_RINGS {
                let theta = (min_polar + ring as f64 * pitch).min(PI);
                for k in 0..samples {
                    out.push(s.point(theta, -PI + TAU * k as f64 / samples as f64)?);
                }
            }
            Ok(out)
        }
        NamedFunction::HalfPlane { normal, offset } => {
            if !matches!(s.kind(), SurfaceKind::EuclideanPlane) {
                return Err(Error::Usage("half-plane sets live on the euclidean plane".into()));
            }
            let l = normal[0].hypot(normal[1]);
            if (l - 1.0).abs() > 1e-9 {
                return Err(Error::Usage("half-plane normal must be a unit vector".into()));
            }
            let extent = 10.0;
            let pitch = 2.0 * extent / samples as f64;
            let base = [offset * normal[0], offset * normal[1]];
            let tangent = [-normal[1], normal[0]];
            let mut out = Vec::new();
            for ring in 0..=SUBLEVEL_RINGS {
                let back = ring as f64 * pitch;
                for k in 0..=samples {
                    let t = -extent + k as f64 * pitch;
                    out.push(s.point(
                        base[0] + t * tangent[0] - back * normal[0],
                        base[1] + t * tangent[1] - back * normal[1],
                    )?);
                }
            }
            Ok(out)
        }
    }
}

/// Subdivides every segment so that the cloud has roughly `samples` points.
fn densify(s: &ModelSurface, vertices: &[SurfacePoint], closed: bool, samples: usize) -> Result<Vec<SurfacePoint>> {
    let segs: Vec<(SurfacePoint, SurfacePoint)> = vertices
        .windows(2)
        .map(|w| (w[0], w[1]))
        .chain(closed.then(|| (*vertices.last().expect("nonempty"), vertices[0])))
        .collect();
    let total: f64 = segs.iter().map(|(a, b)| s.dist(a, b)).sum();
    if total == 0.0 {
        return Err(Error::Usage("degenerate polyline".into()));
    }
    let target = total / samples as f64;
    let mut out = Vec::new();
    for (a, b) in &segs {
        let k = ((s.dist(a, b) / target).ceil() as usize).max(1);
        for j in 0..k {
            out.push(s.interpolate(a, b, j as f64 / k as f64)?);
        }
    }
    if !closed {
        out.push(*vertices.last().expect("nonempty"));
    }
    Ok(out)
}

fn cloud_pitch(s: &ModelSurface, cloud: &[SurfacePoint], topology: Topology) -> f64 {
    match topology {
        Topology::Scattered if cloud.len() < 2 => 0.0,
        Topology::Scattered => {
            // Largest nearest-neighbour gap, evaluated on a bounded subsample.
            let step = (cloud.len() / 512).max(1);
            cloud
                .iter()
                .step_by(step)
                .map(|p| cloud.iter().map(|q| s.dist(p, q)).filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min))
                .filter(|d| d.is_finite())
                .fold(0.0, f64::max)
        }
        Topology::Curve { closed } => {
            let mut m: f64 = cloud.windows(2).map(|w| s.dist(&w[0], &w[1])).fold(0.0, f64::max);
            if closed {
                m = m.max(s.dist(&cloud[cloud.len() - 1], &cloud[0]));
            }
            m
        }
    }
}

/// Golden-section minimization of the distance from `x` along the segment `a -> b`.
fn golden_on_segment(s: &ModelSurface, x: &SurfacePoint, a: &SurfacePoint, b: &SurfacePoint) -> Result<(SurfacePoint, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let eval = |t: f64| -> Result<(SurfacePoint, f64)> {
        let p = s.interpolate(a, b, t)?;
        Ok((p, s.dist(x, &p)))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    for _ in 0..48 {
        if fc.1 < fd.1 {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = eval(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = eval(d)?;
        }
    }
    let mid = eval(0.5 * (lo + hi))?;
    let start = (*a, s.dist(x, a));
    Ok([mid, fc, fd, start].into_iter().min_by(|p, q| p.1.total_cmp(&q.1)).expect("nonempty"))
}
