//! Gradient curves of the distance function, their arclength
//! parametrization and checks of the flow identities.

use crate::closed_set::{ClosedSet, FootpointConfig};
use crate::config::{CRITICAL_EPS, FLOW_MAX_ROTATION};
use crate::error::{Error, Result};
use crate::field::max_directional_derivative;
use crate::surface::{ModelSurface, SurfacePoint};

/// Source of values and gradients for the flow.
pub trait GradientOracle: Sync {
    fn surface(&self) -> &ModelSurface;

    fn value(&self, x: &SurfacePoint) -> Result<f64>;

    /// Gradient norm and, unless it vanishes, the frame angle of its direction.
    fn gradient(&self, x: &SurfacePoint) -> Result<(f64, Option<f64>)>;
}

/// Gradient of `d_A` with an adjustable footpoint tie tolerance.
#[derive(Clone, Copy, Debug)]
pub struct DistanceOracle<'a> {
    set: &'a ClosedSet,
    footpoints: FootpointConfig,
}

impl<'a> DistanceOracle<'a> {
    pub fn new(set: &'a ClosedSet) -> Self {
        Self { set, footpoints: set.config() }
    }

    pub fn with_tie_tolerance(mut self, tol: f64) -> Self {
        self.footpoints.tolerance = tol;
        self
    }

    pub fn set(&self) -> &ClosedSet {
        self.set
    }
}

impl GradientOracle for DistanceOracle<'_> {
    fn surface(&self) -> &ModelSurface {
        self.set.surface()
    }

    fn value(&self, x: &SurfacePoint) -> Result<f64> {
        self.set.eval_da(x)
    }

    fn gradient(&self, x: &SurfacePoint) -> Result<(f64, Option<f64>)> {
        let fp = self.set.footpoints_with(x, &self.footpoints)?;
        let (v, u) = max_directional_derivative(&fp.directions);
        let g = v.clamp(0.0, 1.0);
        Ok((g, (g > 0.0).then_some(u)))
    }
}

impl GradientOracle for ClosedSet {
    fn surface(&self) -> &ModelSurface {
        ClosedSet::surface(self)
    }

    fn value(&self, x: &SurfacePoint) -> Result<f64> {
        self.eval_da(x)
    }

    fn gradient(&self, x: &SurfacePoint) -> Result<(f64, Option<f64>)> {
        DistanceOracle::new(self).gradient(x)
    }
}

/// Adaptive step control in flow time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    pub initial: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Largest rotation of the gradient direction accepted per step.
    pub max_rotation: f64,
    pub critical_eps: f64,
    pub max_nodes: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            initial: 0.01,
            min_step: 1e-4,
            max_step: 0.05,
            max_rotation: FLOW_MAX_ROTATION,
            critical_eps: CRITICAL_EPS,
            max_nodes: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Horizon,
    CriticalPoint,
    DomainExit,
    RegionExit,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::CriticalPoint => "critical-point",
            Termination::DomainExit => "domain-exit",
            Termination::RegionExit => "region-exit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowNode {
    pub t: f64,
    pub point: SurfacePoint,
    pub value: f64,
    pub grad_norm: f64,
    pub grad_angle: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowCurve {
    pub start: SurfacePoint,
    pub nodes: Vec<FlowNode>,
    pub termination: Termination,
    /// Cumulative chordal arclength at each node.
    pub arclength: Vec<f64>,
}

impl FlowCurve {
    pub fn end(&self) -> &FlowNode {
        self.nodes.last().expect("curves have at least one node")
    }

    pub fn length(&self) -> f64 {
        self.arclength.last().copied().unwrap_or(0.0)
    }

    fn push(&mut self, s: &ModelSurface, node: FlowNode) {
        let prev = self.nodes.last().map_or(0.0, |p| self.length() + s.distance(&p.point, &node.point).unwrap_or(0.0));
        self.arclength.push(prev);
        self.nodes.push(node);
    }
}

fn node_at<O: GradientOracle + ?Sized>(oracle: &O, t: f64, p: SurfacePoint) -> Result<FlowNode> {
    let (g, a) = oracle.gradient(&p)?;
    Ok(FlowNode { t, point: p, value: oracle.value(&p)?, grad_norm: g, grad_angle: a })
}

/// Integrates the gradient curve from `x0` up to flow time `horizon`.
/// Integration stops early at critical points, when the exponential map
/// leaves the surface, or when `region` rejects a node.
pub fn flow<O: GradientOracle + ?Sized>(
    oracle: &O,
    x0: &SurfacePoint,
    horizon: f64,
    policy: &StepPolicy,
    region: Option<&dyn Fn(&SurfacePoint) -> bool>,
) -> Result<FlowCurve> {
    let s = *oracle.surface();
    let mut curve = FlowCurve { start: *x0, nodes: Vec::new(), termination: Termination::Horizon, arclength: Vec::new() };
    let first = node_at(oracle, 0.0, *x0)?;
    curve.push(&s, first);
    let fail = |curve: FlowCurve, e: Error| Error::Flow { prefix: Box::new(curve), source: Box::new(e) };
    let mut dt = policy.initial.clamp(policy.min_step, policy.max_step);
    loop {
        let cur = *curve.end();
        if cur.grad_norm < policy.critical_eps || cur.grad_angle.is_none() {
            curve.termination = Termination::CriticalPoint;
            return Ok(curve);
        }
        if cur.t >= horizon || curve.nodes.len() >= policy.max_nodes {
            curve.termination = Termination::Horizon;
            return Ok(curve);
        }
        let psi = cur.grad_angle.expect("checked above");
        let here = s.ambient_direction(&cur.point, psi);
        loop {
            let h = dt.min(horizon - cur.t);
            let p = match s.exp_dir(&cur.point, psi, h * cur.grad_norm) {
                Ok(p) => p,
                Err(Error::DomainExit { .. } | Error::ApexHit { .. } | Error::OutsideDomain { .. }) => {
                    curve.termination = Termination::DomainExit;
                    return Ok(curve);
                }
                Err(e) => return Err(fail(curve, e)),
            };
            if region.is_some_and(|r| !r(&p)) {
                curve.termination = Termination::RegionExit;
                return Ok(curve);
            }
            let next = match node_at(oracle, cur.t + h, p) {
                Ok(n) => n,
                Err(e) => return Err(fail(curve, e)),
            };
            let rotation = next.grad_angle.map_or(0.0, |a| {
                let there = s.ambient_direction(&p, a);
                let c = here[0] * there[0] + here[1] * there[1] + here[2] * there[2];
                c.clamp(-1.0, 1.0).acos()
            });
            if rotation > policy.max_rotation && dt > policy.min_step {
                dt = (0.5 * dt).max(policy.min_step);
                continue;
            }
            if rotation <= policy.max_rotation {
                dt = (1.25 * dt).min(policy.max_step);
            }
            curve.push(&s, next);
            break;
        }
    }
}

/// Sup of `|(f o eta)'(t) - |grad f|^2|` over interior nodes, with the
/// derivative taken by central differences.
pub fn check_flow_value_identity(curve: &FlowCurve) -> Result<f64> {
    let n = &curve.nodes;
    if n.len() < 3 {
        return Err(Error::Usage(format!("value identity needs three nodes, curve has {}", n.len())));
    }
    let mut worst: f64 = 0.0;
    for w in n.windows(3) {
        let dt = w[2].t - w[0].t;
        if dt <= 0.0 {
            continue;
        }
        let deriv = (w[2].value - w[0].value) / dt;
        worst = worst.max((deriv - w[1].grad_norm * w[1].grad_norm).abs());
    }
    Ok(worst)
}

/// Nodes up to the last non-critical one; fails on an interior critical node.
fn regular_prefix(curve: &FlowCurve, critical_eps: f64) -> Result<usize> {
    let n = curve.nodes.len();
    let mut keep = n;
    while keep > 1 && curve.nodes[keep - 1].grad_norm < critical_eps {
        keep -= 1;
    }
    if keep == 1 && curve.nodes[0].grad_norm < critical_eps {
        return Ok(1);
    }
    if let Some(k) = curve.nodes[..keep].iter().position(|node| node.grad_norm < critical_eps) {
        return Err(Error::ReparamUndefined(k));
    }
    Ok(keep)
}

/// Resamples the curve at `samples` nodes uniformly spaced in arclength.
/// Points follow geodesic interpolation between bracketing nodes; values
/// and gradient norms are interpolated linearly.
pub fn arclength_reparam(curve: &FlowCurve, s: &ModelSurface, samples: usize) -> Result<FlowCurve> {
    resample(curve, s, samples, None::<&ClosedSet>)
}

/// As [`arclength_reparam`] but values and gradients are re-evaluated.
pub fn arclength_reparam_with<O: GradientOracle + ?Sized>(curve: &FlowCurve, oracle: &O, samples: usize) -> Result<FlowCurve> {
    resample(curve, &{ *oracle.surface() }, samples, Some(oracle))
}

fn resample<O: GradientOracle + ?Sized>(curve: &FlowCurve, s: &ModelSurface, samples: usize, oracle: Option<&O>) -> Result<FlowCurve> {
    let keep = regular_prefix(curve, CRITICAL_EPS)?;
    let nodes = &curve.nodes[..keep];
    let arc = &curve.arclength[..keep];
    let total = arc[keep - 1];
    if keep < 2 || total == 0.0 {
        return Ok(FlowCurve {
            start: curve.start,
            nodes: vec![nodes[0]],
            termination: curve.termination,
            arclength: vec![0.0],
        });
    }
    let samples = samples.max(2);
    let mut out = Vec::with_capacity(samples);
    let mut seg = 0;
    for k in 0..samples {
        let target = total * k as f64 / (samples - 1) as f64;
        while seg + 2 < keep && arc[seg + 1] < target {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let frac = if len > 0.0 { ((target - arc[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (&nodes[seg], &nodes[seg + 1]);
        let point = if frac == 0.0 {
            a.point
        } else if frac == 1.0 {
            b.point
        } else {
            s.interpolate(&a.point, &b.point, frac)?
        };
        let t = a.t + frac * (b.t - a.t);
        let node = match oracle {
            Some(o) => node_at(o, t, point)?,
            None => FlowNode {
                t,
                point,
                value: a.value + frac * (b.value - a.value),
                grad_norm: a.grad_norm + frac * (b.grad_norm - a.grad_norm),
                grad_angle: if frac < 0.5 { a.grad_angle } else { b.grad_angle },
            },
        };
        out.push(node);
    }
    let arclength = (0..samples).map(|k| total * k as f64 / (samples - 1) as f64).collect();
    Ok(FlowCurve { start: curve.start, nodes: out, termination: curve.termination, arclength })
}

/// Upper bound on the second derivative for the restriction test.
#[derive(Clone, Debug, PartialEq)]
pub enum ConcavityBound {
    Constant(f64),
    /// One bound per node of the reparametrized curve.
    Trace(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceConcavityReport {
    pub pass: bool,
    /// Largest excess of the second difference over the bound.
    pub worst_margin: f64,
    pub worst_index: usize,
}

/// Second-difference test of `f` along an arclength-parametrized curve.
pub fn check_trace_concavity(curve: &FlowCurve, bound: &ConcavityBound, tol: f64) -> Result<TraceConcavityReport> {
    let n = curve.nodes.len();
    if n < 3 {
        return Err(Error::Usage("restriction test needs three nodes".into()));
    }
    let h = curve.length() / (n - 1) as f64;
    if let ConcavityBound::Trace(b) = bound {
        if b.len() != n {
            return Err(Error::Usage(format!("bound trace has {} entries for {n} nodes", b.len())));
        }
    }
    let mut report = TraceConcavityReport { pass: true, worst_margin: f64::NEG_INFINITY, worst_index: 0 };
    for k in 1..n - 1 {
        let d2 = (curve.nodes[k + 1].value - 2.0 * curve.nodes[k].value + curve.nodes[k - 1].value) / (h * h);
        let c = match bound {
            ConcavityBound::Constant(c) => *c,
            ConcavityBound::Trace(b) => b[k],
        };
        let margin = d2 - c;
        if margin > report.worst_margin {
            report.worst_margin = margin;
            report.worst_index = k;
        }
    }
    report.pass = report.worst_margin <= tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// RK4 for the height `y` of the bisector curve: `y' = y / sqrt(1 + y^2)`.
    pub(crate) fn bisector_oracle(y0: f64, t: f64) -> f64 {
        let f = |y: f64| y / (1.0 + y * y).sqrt();
        let n = 20_000;
        let h = t / n as f64;
        let mut y = y0;
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    fn two_points() -> ClosedSet {
        let s = ModelSurface::plane();
        ClosedSet::points(s, vec![s.point(-1.0, 0.0).unwrap(), s.point(1.0, 0.0).unwrap()]).unwrap()
    }

    #[test]
    fn radial_ray_from_point() {
        let s = ModelSurface::plane();
        let a = ClosedSet::point(s, s.point(0.0, 0.0).unwrap()).unwrap();
        let c = flow(&a, &s.point(1.0, 0.0).unwrap(), 2.0, &StepPolicy::default(), None).unwrap();
        assert_eq!(c.termination, Termination::Horizon);
        let end = c.end();
        assert!((end.point.x() - 3.0).abs() < 1e-12 && end.point.y().abs() < 1e-12);
        for n in &c.nodes {
            assert!((n.value - (n.t + 1.0)).abs() < 1e-12);
        }
        assert!(check_flow_value_identity(&c).unwrap() < 1e-9);
    }

    #[test]
    fn bisector_curve_matches_ode() {
        let a = two_points();
        let s = *a.surface();
        let c = flow(&a, &s.point(0.0, 0.5).unwrap(), 2.0, &StepPolicy::default(), None).unwrap();
        assert!(c.nodes.iter().all(|n| n.point.x().abs() < 1e-12));
        let y = bisector_oracle(0.5, 2.0);
        // First order stepping with steps of at most 0.05.
        assert!((c.end().point.y() - y).abs() < 0.02, "{} vs {y}", c.end().point.y());
        let mut prev = 0.0;
        for n in &c.nodes {
            let y = n.point.y();
            assert!((n.grad_norm - y / (1.0 + y * y).sqrt()).abs() < 1e-9);
            assert!(n.grad_norm < 1.0 && n.grad_norm >= prev);
            prev = n.grad_norm;
        }
        assert!(check_flow_value_identity(&c).unwrap() < 0.05);
        let r = arclength_reparam(&c, &s, 65).unwrap();
        assert!(r.length() < c.end().t);
        assert!(r.arclength.windows(2).all(|w| w[1] > w[0]));
        let rr = arclength_reparam_with(&c, &a, 65).unwrap();
        // f(s) = sqrt(1 + (y0 + s)^2) has f'' = (1 + y^2)^(-3/2) > 0, below the
        // Hessian bound 1 / r of the point distance functions on the curve.
        let c = 1.0 / (1.0f64 + 0.25).sqrt();
        assert!(check_trace_concavity(&rr, &ConcavityBound::Constant(c), 1e-6).unwrap().pass);
        let strict = check_trace_concavity(&rr, &ConcavityBound::Constant(0.0), 1e-6).unwrap();
        assert!(!strict.pass);
        let y1 = 0.5 + rr.length() / 64.0;
        assert!((strict.worst_margin - (1.0 + y1 * y1).powf(-1.5)).abs() < 1e-3);
    }

    #[test]
    fn circle_center_is_stationary() {
        let s = ModelSurface::plane();
        let a = ClosedSet::circle(s, s.point(0.0, 0.0).unwrap(), 1.0).unwrap();
        let c = flow(&a, &s.point(0.0, 0.0).unwrap(), 1.0, &StepPolicy::default(), None).unwrap();
        assert_eq!(c.termination, Termination::CriticalPoint);
        assert_eq!(c.nodes.len(), 1);
        assert_eq!(c.end().t, 0.0);
    }

    #[test]
    fn reparam_of_unit_speed_ray_is_identity() {
        let s = ModelSurface::plane();
        let a = ClosedSet::point(s, s.point(0.0, 0.0).unwrap()).unwrap();
        let c = flow(&a, &s.point(1.0, 0.0).unwrap(), 2.0, &StepPolicy::default(), None).unwrap();
        let r = arclength_reparam(&c, &s, 33).unwrap();
        for (k, n) in r.nodes.iter().enumerate() {
            let sk = 2.0 * k as f64 / 32.0;
            assert!((n.t - sk).abs() < 1e-9 && (n.point.x() - 1.0 - sk).abs() < 1e-9);
        }
        let report = check_trace_concavity(&r, &ConcavityBound::Constant(0.0), 1e-9).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn two_node_curve_is_a_single_segment() {
        let s = ModelSurface::plane();
        let a = ClosedSet::point(s, s.point(0.0, 0.0).unwrap()).unwrap();
        let policy = StepPolicy { initial: 0.05, max_step: 0.05, ..Default::default() };
        let c = flow(&a, &s.point(1.0, 0.0).unwrap(), 0.05, &policy, None).unwrap();
        assert_eq!(c.nodes.len(), 2);
        let r = arclength_reparam(&c, &s, 2).unwrap();
        assert_eq!(r.nodes[1].point, c.nodes[1].point);
        assert_eq!(r.length(), c.length());
    }

    #[test]
    fn interior_critical_node_is_rejected() {
        let s = ModelSurface::plane();
        let node = |t: f64, g: f64| FlowNode { t, point: s.point(t, 0.0).unwrap(), value: t, grad_norm: g, grad_angle: Some(0.0) };
        let c = FlowCurve {
            start: s.point(0.0, 0.0).unwrap(),
            nodes: vec![node(0.0, 1.0), node(1.0, 0.0), node(2.0, 1.0)],
            termination: Termination::Horizon,
            arclength: vec![0.0, 1.0, 2.0],
        };
        assert!(matches!(arclength_reparam(&c, &s, 5), Err(Error::ReparamUndefined(1))));
    }

    #[test]
    fn region_exit_stops_the_curve() {
        let s = ModelSurface::plane();
        let a = ClosedSet::point(s, s.point(0.0, 0.0).unwrap()).unwrap();
        let inside = |p: &SurfacePoint| p.x() <= 1.5;
        let c = flow(&a, &s.point(1.0, 0.0).unwrap(), 5.0, &StepPolicy::default(), Some(&inside)).unwrap();
        assert_eq!(c.termination, Termination::RegionExit);
        assert!(c.end().point.x() <= 1.5);
    }
}
