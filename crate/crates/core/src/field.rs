//! Gradient of the distance function from footpoint directions and
//! classification of chart grids into regular points and cut-locus candidates.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::closed_set::{ClosedSet, FootpointConfig, FootpointResult};
use crate::config::{GRAD_THRESHOLD, GRAD_TOL, SWEEP_REFINEMENTS, SWEEP_REFINE_SAMPLES, SWEEP_SAMPLES};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::surface::{normalize_angle, SurfacePoint, TangentVector};

/// First-order data of `d_A` at a point.
#[derive(Clone, Debug)]
pub struct GradientInfo {
    pub point: SurfacePoint,
    pub distance: f64,
    pub grad_norm: f64,
    /// Unit direction of steepest ascent; `None` at critical points.
    pub grad_direction: Option<TangentVector>,
    pub footpoint_count: usize,
    /// Smallest arc of the direction circle containing all footpoint directions.
    pub direction_span: f64,
    pub continuum: bool,
    pub attained: bool,
}

impl GradientInfo {
    /// Frame angle of the gradient direction.
    pub fn grad_angle(&self) -> Option<f64> {
        self.grad_direction.map(|v| v.frame_angle())
    }
}

/// Directional derivative of `d_A` in the frame direction `u` given the
/// footpoint directions.
pub fn directional_derivative(directions: &[f64], u: f64) -> f64 {
    -directions.iter().map(|&v| (u - v).cos()).fold(f64::NEG_INFINITY, f64::max)
}

/// Maximizes the directional derivative over the direction circle by an
/// angular sweep with local refinement. Returns `(value, argmax)`.
pub fn max_directional_derivative(directions: &[f64]) -> (f64, f64) {
    let mut step = TAU / SWEEP_SAMPLES as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..SWEEP_SAMPLES {
        let u = -PI + k as f64 * step;
        let val = directional_derivative(directions, u);
        if val > best.0 {
            best = (val, u);
        }
    }
    for _ in 0..SWEEP_REFINEMENTS {
        let center = best.1;
        let fine = 2.0 * step / SWEEP_REFINE_SAMPLES as f64;
        for k in 0..=SWEEP_REFINE_SAMPLES {
            let u = center - step + k as f64 * fine;
            let val = directional_derivative(directions, u);
            if val > best.0 {
                best = (val, u);
            }
        }
        step = fine;
    }
    // The maximizer sits halfway between the two directions bracketing it.
    if let Some(u) = bracket_midpoint(directions, best.1) {
        let val = directional_derivative(directions, u);
        if val >= best.0 {
            best = (val, u);
        }
    }
    (best.0, normalize_angle(best.1))
}

fn bracket_midpoint(directions: &[f64], u: f64) -> Option<f64> {
    if directions.is_empty() {
        return None;
    }
    // Counterclockwise offsets from u to the nearest direction on each side.
    let ahead = directions.iter().map(|&v| (v - u).rem_euclid(TAU)).fold(f64::INFINITY, f64::min);
    let behind = directions.iter().map(|&v| (u - v).rem_euclid(TAU)).fold(f64::INFINITY, f64::min);
    let (lo, gap) = if directions.len() == 1 { (directions[0], TAU) } else { (u - behind, ahead + behind) };
    Some(lo + 0.5 * gap)
}

/// Length of the smallest arc containing all the given angles.
pub fn direction_span(directions: &[f64]) -> f64 {
    if directions.len() < 2 {
        return 0.0;
    }
    let mut a: Vec<f64> = directions.iter().map(|&d| normalize_angle(d)).collect();
    a.sort_by(f64::total_cmp);
    let mut max_gap = a[0] + TAU - a[a.len() - 1];
    for w in a.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    TAU - max_gap
}

/// Gradient data from a footpoint query.
pub fn gradient_from_footpoints(a: &ClosedSet, fp: &FootpointResult) -> GradientInfo {
    let (value, u) = max_directional_derivative(&fp.directions);
    let grad_norm = value.clamp(0.0, 1.0);
    let grad_direction = (grad_norm > 0.0).then(|| a.surface().unit_vector(fp.query, u));
    GradientInfo {
        point: fp.query,
        distance: fp.distance,
        grad_norm,
        grad_direction,
        footpoint_count: fp.count(),
        direction_span: direction_span(&fp.directions),
        continuum: fp.continuum,
        attained: fp.attained,
    }
}

pub fn gradient_norm(a: &ClosedSet, x: &SurfacePoint) -> Result<GradientInfo> {
    gradient_norm_with(a, x, &a.config())
}

pub fn gradient_norm_with(a: &ClosedSet, x: &SurfacePoint, config: &FootpointConfig) -> Result<GradientInfo> {
    let fp = a.footpoints_with(x, config)?;
    Ok(gradient_from_footpoints(a, &fp))
}

/// Axis-aligned rectangle of chart coordinates sampled at grid nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartRegion {
    pub x: [f64; 2],
    pub y: [f64; 2],
    /// Nodes along `x` and `y`.
    pub resolution: [usize; 2],
}

impl ChartRegion {
    pub fn new(x: [f64; 2], y: [f64; 2], resolution: [usize; 2]) -> Result<Self> {
        let r = Self { x, y, resolution };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x[0] < self.x[1] && self.y[0] < self.y[1]) {
            return Err(Error::Usage(format!("empty region {:?} x {:?}", self.x, self.y)));
        }
        if self.resolution[0] < 2 || self.resolution[1] < 2 {
            return Err(Error::Usage("region resolution must be at least 2 x 2".into()));
        }
        Ok(())
    }

    /// Same rectangle with a different resolution.
    pub fn with_resolution(&self, resolution: [usize; 2]) -> Self {
        Self { resolution, ..*self }
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            (self.x[1] - self.x[0]) / (self.resolution[0] - 1) as f64,
            (self.y[1] - self.y[0]) / (self.resolution[1] - 1) as f64,
        ]
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        let x = if i + 1 == self.resolution[0] { self.x[1] } else { self.x[0] + i as f64 * h[0] };
        let y = if j + 1 == self.resolution[1] { self.y[1] } else { self.y[0] + j as f64 * h[1] };
        [x, y]
    }

    pub fn len(&self) -> usize {
        self.resolution[0] * self.resolution[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: [f64; 2]) -> bool {
        (self.x[0]..=self.x[1]).contains(&c[0]) && (self.y[0]..=self.y[1]).contains(&c[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellLabel {
    Regular,
    CutCandidate,
    InA,
    Unresolved,
}

impl CellLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CellLabel::Regular => "REGULAR",
            CellLabel::CutCandidate => "CUT-CANDIDATE",
            CellLabel::InA => "IN-A",
            CellLabel::Unresolved => "UNRESOLVED",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub coords: [f64; 2],
    /// `None` outside the surface's domain.
    pub point: Option<SurfacePoint>,
    /// `NaN` outside the domain.
    pub distance: f64,
    pub gradient: Option<GradientInfo>,
    pub label: CellLabel,
}

impl Cell {
    pub fn grad_norm(&self) -> f64 {
        self.gradient.as_ref().map_or(f64::NAN, |g| g.grad_norm)
    }
}

/// Classification parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldConfig {
    pub tau: f64,
    pub grad_tol: f64,
    /// Tie tolerance for footpoints; defaults to the larger of the set's
    /// footpoint tolerance and half a cell diagonal.
    pub tie_tol: Option<f64>,
    /// Defaults to the set's footpoint tolerance.
    pub in_set_tol: Option<f64>,
    pub merge_angle: Option<f64>,
    pub parallelism: Parallelism,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            tau: GRAD_THRESHOLD,
            grad_tol: GRAD_TOL,
            tie_tol: None,
            in_set_tol: None,
            merge_angle: None,
            parallelism: Parallelism::default(),
        }
    }
}

/// Classified grid. Cells are stored row by row (`j` major).
#[derive(Clone, Debug)]
pub struct FieldGrid {
    pub region: ChartRegion,
    pub cells: Vec<Cell>,
    pub tau: f64,
    pub tie_tol: f64,
    pub in_set_tol: f64,
}

impl FieldGrid {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[j * self.region.resolution[0] + i]
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.cells.iter().filter(|c| c.label == label).count()
    }

    pub fn with_label(&self, label: CellLabel) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(move |c| c.label == label)
    }
}

/// Classifies every node of the region.
pub fn classify_region(a: &ClosedSet, region: &ChartRegion, config: &FieldConfig) -> Result<FieldGrid> {
    region.validate()?;
    let s = a.surface();
    let h = region.spacing();
    let in_set_tol = config.in_set_tol.unwrap_or(a.footpoint_tolerance());
    let n = region.len();
    let nx = region.resolution[0];
    let cells = par::map_range(config.parallelism, n, |k| -> Result<(Cell, f64)> {
        let (i, j) = (k % nx, k / nx);
        let coords = region.node(i, j);
        let mut cell =
            Cell { i, j, coords, point: None, distance: f64::NAN, gradient: None, label: CellLabel::Unresolved };
        if !s.contains(coords[0], coords[1]) {
            return Ok((cell, 0.0));
        }
        let p = s.point(coords[0], coords[1])?;
        cell.point = Some(p);
        let tie = config.tie_tol.unwrap_or_else(|| a.footpoint_tolerance().max(0.5 * s.cell_diagonal(coords, h[0], h[1])));
        cell.distance = a.eval_da(&p)?;
        if cell.distance <= in_set_tol {
            cell.label = CellLabel::InA;
            return Ok((cell, tie));
        }
        let fc = FootpointConfig {
            tolerance: tie,
            merge_angle: config.merge_angle.unwrap_or(a.config().merge_angle),
            ..a.config()
        };
        let g = match gradient_norm_with(a, &p, &fc) {
            Ok(g) => g,
            Err(Error::InSet(_)) => return Ok((cell, tie)),
            Err(e) => return Err(e),
        };
        cell.label = if g.grad_norm < 1.0 - config.tau {
            CellLabel::CutCandidate
        } else if g.footpoint_count == 1 && !g.continuum {
            CellLabel::Regular
        } else {
            CellLabel::Unresolved
        };
        cell.gradient = Some(g);
        Ok((cell, tie))
    });
    let mut out = Vec::with_capacity(n);
    let mut tie_tol: f64 = 0.0;
    for c in cells {
        let (cell, tie) = c?;
        tie_tol = tie_tol.max(tie);
        out.push(cell);
    }
    Ok(FieldGrid { region: *region, cells: out, tau: config.tau, tie_tol, in_set_tol })
}

/// Measured Lipschitz constant of the gradient field over REGULAR cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientLipschitz {
    pub constant: f64,
    pub pairs: usize,
    /// Chart coordinates of the worst pair.
    pub worst: ([f64; 2], [f64; 2]),
}

/// Offsets of the neighbourhood stencil used to pair cells.
const STENCIL: isize = 2;

/// Compares ambient images of unit gradients at REGULAR cells within two grid
/// steps of each other whose coordinates satisfy `keep`.
pub fn c1_gradient_lipschitz(
    a: &ClosedSet,
    grid: &FieldGrid,
    keep: &(dyn Fn([f64; 2]) -> bool + Sync),
) -> Result<GradientLipschitz> {
    let s = a.surface();
    let [nx, ny] = grid.region.resolution;
    let regular = |i: isize, j: isize| -> Option<&Cell> {
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
            return None;
        }
        let c = grid.cell(i as usize, j as usize);
        (c.label == CellLabel::Regular && keep(c.coords)).then_some(c)
    };
    let ambient = |c: &Cell| {
        let g = c.gradient.as_ref().expect("regular cells carry gradients");
        let psi = g.grad_angle().unwrap_or(0.0);
        let v = s.ambient_direction(&c.point.expect("regular cells lie in the domain"), psi);
        v.map(|t| t * g.grad_norm)
    };
    let mut best = GradientLipschitz { constant: 0.0, pairs: 0, worst: ([0.0; 2], [0.0; 2]) };
    let mut regular_count = 0usize;
    for c in &grid.cells {
        let Some(c) = regular(c.i as isize, c.j as isize) else { continue };
        regular_count += 1;
        let gc = ambient(c);
        for dj in 0..=STENCIL {
            for di in -STENCIL..=STENCIL {
                if dj == 0 && di <= 0 {
                    continue;
                }
                let Some(o) = regular(c.i as isize + di, c.j as isize + dj) else { continue };
                let d = s.distance(c.point.as_ref().expect("in domain"), o.point.as_ref().expect("in domain"))?;
                if d == 0.0 {
                    continue;
                }
                let go = ambient(o);
                let diff = ((gc[0] - go[0]).powi(2) + (gc[1] - go[1]).powi(2) + (gc[2] - go[2]).powi(2)).sqrt();
                let ratio = diff / d;
                best.pairs += 1;
                if ratio > best.constant {
                    best.constant = ratio;
                    best.worst = (c.coords, o.coords);
                }
            }
        }
    }
    if regular_count < 2 || best.pairs == 0 {
        return Err(Error::InsufficientData(format!("{regular_count} regular samples in the region")));
    }
    Ok(best)
}
