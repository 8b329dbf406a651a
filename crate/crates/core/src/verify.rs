//! The verification suite: every check runs once per scenario and reports
//! pass, fail, skipped or informational. Errors inside a check turn into a
//! failure with the error message; they never abort the suite.

use std::cell::OnceCell;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::charts::{bilipschitz_constants, build_chart, midpoint_displacement_test, semiconcavity_transfer_test, transfer_functions, DistanceChart};
use crate::closed_set::{ClosedSet, SetDescriptor};
use crate::concavity::{cosh_comparison_check, geodesic_trace, midpoint_concavity, second_difference_profile, ConcavityConfig, SampleDomain};
use crate::config::Tolerances;
use crate::cutlocus::{estimate_cut_locus, flow_invariance_test, nearest_cut_point_test, CutLocusEstimate};
use crate::error::{Error, Result};
use crate::export::fmt_f64;
use crate::field::{c1_gradient_lipschitz, directional_derivative, max_directional_derivative, CellLabel, FieldConfig};
use crate::flow::{arclength_reparam_with, check_flow_value_identity, check_trace_concavity, flow, ConcavityBound, DistanceOracle, FlowCurve, StepPolicy};
use crate::par::Parallelism;
use crate::reach::{normal_cone, normal_geodesic_test, reach, ReachConfig, ReachReport};
use crate::scenario::{Scenario, SurfaceSpec, TaskSpec};
use crate::surface::{normalize_angle, ModelSurface, SurfaceKind, SurfacePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Informational,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
            Status::Informational => "informational",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub id: &'static str,
    pub status: Status,
    pub measured: f64,
    /// Threshold in the form it is compared, e.g. `<= 1e-9` or `[1.8, 2.2]`.
    pub threshold: String,
    pub message: String,
    pub runtime: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub scenario: String,
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn failed(&self) -> bool {
        self.records.iter().any(|r| r.status == Status::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Machine-readable record stream. Runtimes are left out so repeated runs
    /// are byte-identical.
    pub fn records_text(&self) -> String {
        let mut out = format!("# scenario {}\n# check_id status measured threshold message\n", self.scenario);
        for r in &self.records {
            let msg = if r.message.is_empty() { "-".to_string() } else { r.message.replace(['\n', '\r'], " ") };
            let _ = writeln!(out, "{} {} {} {} {}", r.id, r.status.as_str(), fmt_f64(r.measured), r.threshold.replace(' ', ""), msg);
        }
        out
    }

    /// Human-readable summary including runtimes.
    pub fn summary_text(&self) -> String {
        let mut out = format!("scenario {}\n", self.scenario);
        let width = CHECKS.iter().map(|c| c.id.len()).max().unwrap_or(0);
        for r in &self.records {
            let _ = write!(
                out,
                "{:<13} {:<width$}  measured {:<12} threshold {:<12} {:>8.2}s",
                r.status.as_str().to_uppercase(),
                r.id,
                short(r.measured),
                r.threshold,
                r.runtime.as_secs_f64()
            );
            if !r.message.is_empty() {
                let _ = write!(out, "  {}", r.message);
            }
            out.push('\n');
        }
        let count = |s: Status| self.records.iter().filter(|r| r.status == s).count();
        let _ = writeln!(
            out,
            "{} pass, {} fail, {} skipped, {} informational",
            count(Status::Pass),
            count(Status::Fail),
            count(Status::Skipped),
            count(Status::Informational)
        );
        out
    }
}

fn short(x: f64) -> String {
    if x.is_finite() && x != 0.0 && (x.abs() >= 1e4 || x.abs() < 1e-3) {
        format!("{x:.3e}")
    } else if x.is_finite() {
        format!("{x:.6}")
    } else {
        fmt_f64(x)
    }
}

/// One entry of the bundled suite.
pub struct CheckSpec {
    pub id: &'static str,
    pub description: &'static str,
    run: fn(&Context) -> Result<Outcome>,
}

/// The bundled suite in execution order. Check ids are a stable contract.
pub const CHECKS: &[CheckSpec] = &[
    CheckSpec { id: "triangle-inequality", description: "distance satisfies the triangle inequality on 10^4 random triples", run: triangle_inequality },
    CheckSpec { id: "exp-log-roundtrip", description: "initial direction of the geodesic to exp(x, v, t) recovers v", run: exp_log_roundtrip },
    CheckSpec { id: "distance-1-lipschitz", description: "d_A is 1-Lipschitz on random pairs", run: distance_lipschitz },
    CheckSpec { id: "footpoint-certificate", description: "footpoints realize d_A and no cloud point is closer", run: footpoint_certificate },
    CheckSpec { id: "gradnorm-formula", description: "max-min gradient norm agrees with a 10^5-direction sweep", run: gradnorm_formula },
    CheckSpec { id: "regular-unit-descent", description: "on regular cells the gradient has unit norm and matches central differences", run: regular_unit_descent },
    CheckSpec { id: "cutlocus-antipode", description: "cut locus of a sphere point is one cluster at the antipode", run: cutlocus_antipode },
    CheckSpec { id: "flow-invariance", description: "gradient curves from cut-locus samples stay within 1.5 cell diagonals of the estimate", run: flow_invariance },
    CheckSpec { id: "flow-value-identity", description: "(d_A o eta)' equals |grad d_A|^2 along gradient curves", run: flow_value_identity },
    CheckSpec { id: "gradnorm-stays-below-one", description: "curves started with |grad| <= 0.95 keep |grad| <= 1 - 1e-3", run: gradnorm_stays_below_one },
    CheckSpec { id: "cosh-comparison", description: "(cosh f)'' <= cosh f along arclength-parametrized gradient curves", run: cosh_comparison },
    CheckSpec { id: "flow-trace-concavity", description: "d_A along gradient curves is C-concave with the measured C plus 0.05", run: flow_trace_concavity },
    CheckSpec { id: "positive-reach", description: "reach by tube bisection, with semiconvexity and gradient-Lipschitz cross-checks", run: positive_reach },
    CheckSpec { id: "normal-geodesics", description: "d_A(exp(x, h, s)) = s for normal directions up to the certified radius", run: normal_geodesics },
    CheckSpec { id: "slit-plane-regular-everywhere", description: "no cut-locus candidates for a point on the slit plane", run: slit_regular_everywhere },
    CheckSpec { id: "slit-plane-second-derivative-jump", description: "second derivative of d_A jumps across the shadow line while the gradient stays Lipschitz", run: slit_second_derivative_jump },
    CheckSpec { id: "chart-bilipschitz", description: "distance chart has positive finite biLipschitz constants", run: chart_bilipschitz },
    CheckSpec { id: "chart-midpoint-scaling", description: "chart midpoint displacement scales with exponent in [1.8, 2.2]", run: chart_midpoint_scaling },
    CheckSpec { id: "chart-semiconcavity-transfer", description: "semiconcavity through the chart agrees with the image on 3 functions", run: chart_transfer },
    CheckSpec { id: "nearest-cut-point-dominates", description: "d_A at the nearest cut point dominates d_A at the query", run: nearest_cut_point_dominates },
];

#[derive(Clone, Copy, Debug, PartialEq)]
#[derive(Default)]
pub struct VerifyOptions {
    pub parallelism: Parallelism,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
}


struct Outcome {
    status: Status,
    measured: f64,
    threshold: String,
    message: String,
}

impl Outcome {
    fn judged(pass: bool, measured: f64, threshold: impl Into<String>) -> Self {
        Self { status: if pass { Status::Pass } else { Status::Fail }, measured, threshold: threshold.into(), message: String::new() }
    }

    fn skipped(reason: impl Into<String>) -> Self {
        Self { status: Status::Skipped, measured: f64::NAN, threshold: "-".into(), message: reason.into() }
    }

    fn note(mut self, message: impl Into<String>) -> Self {
        self.message = message.into();
        self
    }
}

/// A set of gradient curves with the kind of start they came from.
struct Curves {
    /// Started on cut-locus candidates with |grad| <= 0.95.
    cut: Vec<FlowCurve>,
    /// Started on regular cells.
    regular: Vec<FlowCurve>,
}

const FLOW_HORIZON: f64 = 5.0;
const MAX_STARTS: usize = 16;
const SAMPLED_GRAD_BOUND: f64 = 0.95;

struct Context<'a> {
    scenario: &'a Scenario,
    surface: ModelSurface,
    set: Option<ClosedSet>,
    tol: Tolerances,
    parallelism: Parallelism,
    estimate: OnceCell<std::result::Result<CutLocusEstimate, String>>,
    reach: OnceCell<std::result::Result<ReachReport, String>>,
    curves: OnceCell<std::result::Result<Curves, String>>,
    chart: OnceCell<std::result::Result<DistanceChart, String>>,
}

fn cached<T>(cell: &OnceCell<std::result::Result<T, String>>, f: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(|| f().map_err(|e| e.to_string())).as_ref().map_err(|e| Error::InsufficientData(e.clone()))
}

impl<'a> Context<'a> {
    fn seed(&self, salt: u64) -> u64 {
        self.tol.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt)
    }

    fn set(&self) -> Option<&ClosedSet> {
        self.set.as_ref()
    }

    fn field_config(&self) -> FieldConfig {
        FieldConfig {
            tau: self.tol.tau,
            grad_tol: self.tol.grad_tol,
            merge_angle: Some(self.tol.merge_angle),
            parallelism: self.parallelism,
            ..FieldConfig::default()
        }
    }

    fn estimate(&self, a: &ClosedSet) -> Result<&CutLocusEstimate> {
        cached(&self.estimate, || estimate_cut_locus(a, &self.scenario.region, &self.field_config()))
    }

    fn step_policy(&self) -> StepPolicy {
        StepPolicy { critical_eps: self.tol.critical_eps, ..StepPolicy::default() }
    }

    fn r_max(&self) -> f64 {
        self.scenario
            .tasks
            .iter()
            .find_map(|t| match t {
                TaskSpec::Reach { r_max } => Some(*r_max),
                _ => None,
            })
            .unwrap_or_else(|| {
                let r = &self.scenario.region;
                let c = [0.5 * (r.x[0] + r.x[1]), 0.5 * (r.y[0] + r.y[1])];
                let wx = self.surface.cell_diagonal(c, r.x[1] - r.x[0], 0.0);
                let wy = self.surface.cell_diagonal(c, 0.0, r.y[1] - r.y[0]);
                0.5 * wx.min(wy)
            })
    }

    fn reach(&self, a: &ClosedSet) -> Result<&ReachReport> {
        cached(&self.reach, || {
            let cfg = ReachConfig {
                bisection_tol: self.tol.bisection_tol,
                seed: self.seed(13),
                cross_check_points: 10,
                parallelism: self.parallelism,
            };
            reach(a, self.r_max(), &cfg)
        })
    }

    /// Gradient curves from up to 16 cut-locus starts and 16 regular starts,
    /// integrated with the grid's tie tolerance and stopped at the region
    /// boundary.
    fn curves(&self, a: &ClosedSet) -> Result<&Curves> {
        cached(&self.curves, || {
            let est = self.estimate(a)?;
            let grid = &est.grid;
            let cut: Vec<SurfacePoint> =
                est.samples.iter().filter(|c| c.grad_norm <= SAMPLED_GRAD_BOUND).map(|c| c.point).collect();
            let regular: Vec<SurfacePoint> = grid
                .with_label(CellLabel::Regular)
                .filter(|c| c.distance > 0.25)
                .filter_map(|c| c.point)
                .collect();
            let oracle = DistanceOracle::new(a).with_tie_tolerance(grid.tie_tol);
            let region = self.scenario.region;
            let policy = self.step_policy();
            let run = |starts: &[SurfacePoint]| -> Result<Vec<FlowCurve>> {
                let stride = starts.len().div_ceil(MAX_STARTS).max(1);
                let picked: Vec<SurfacePoint> = starts.iter().step_by(stride).copied().collect();
                crate::par::map(self.parallelism, &picked, |x0| {
                    let inside = |p: &SurfacePoint| region.contains(p.coords());
                    flow(&oracle, x0, FLOW_HORIZON, &policy, Some(&inside))
                })
                .into_iter()
                .collect()
            };
            Ok(Curves { cut: run(&cut)?, regular: run(&regular)? })
        })
    }

    fn chart(&self) -> Result<&DistanceChart> {
        cached(&self.chart, || {
            let r = &self.scenario.region;
            let (center, radius) = self
                .scenario
                .tasks
                .iter()
                .find_map(|t| match t {
                    TaskSpec::Charts { center, radius } => Some((*center, *radius)),
                    _ => None,
                })
                .unwrap_or_else(|| {
                    let c = [0.5 * (r.x[0] + r.x[1]), 0.5 * (r.y[0] + r.y[1])];
                    (c, 0.1 * self.r_max())
                });
            let mut candidates = vec![center];
            for (fx, fy) in [(0.25, 0.5), (0.75, 0.5), (0.5, 0.25), (0.5, 0.75), (0.25, 0.25)] {
                candidates.push([r.x[0] + fx * (r.x[1] - r.x[0]), r.y[0] + fy * (r.y[1] - r.y[0])]);
            }
            let mut last = Error::InsufficientData("no chart center inside the surface".into());
            for c in candidates {
                let Ok(p) = self.surface.point(c[0], c[1]) else { continue };
                if chart_singular(&self.surface, c) {
                    continue;
                }
                match build_chart(&self.surface, &p, radius, Some(self.tol.ortho_tol)) {
                    Ok(chart) => return Ok(chart),
                    Err(e) => last = e,
                }
            }
            Err(last)
        })
    }

    /// Uniform chart samples inside the surface, away from chart singularities.
    fn region_points(&self, n: usize, salt: u64) -> Vec<SurfacePoint> {
        let r = &self.scenario.region;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed(salt));
        let mut out = Vec::with_capacity(n);
        let mut tries = 0;
        while out.len() < n && tries < 100 * n {
            tries += 1;
            let c = [rng.gen_range(r.x[0]..=r.x[1]), rng.gen_range(r.y[0]..=r.y[1])];
            if chart_singular(&self.surface, c) {
                continue;
            }
            if let Ok(p) = self.surface.point(c[0], c[1]) {
                out.push(p);
            }
        }
        out
    }

    /// As [`Context::region_points`], keeping points at distance more than
    /// `margin` from `A`.
    fn points_off_set(&self, a: &ClosedSet, n: usize, salt: u64, margin: f64) -> Vec<SurfacePoint> {
        self.region_points(4 * n, salt).into_iter().filter(|p| a.eval_da(p).is_ok_and(|d| d > margin)).take(n).collect()
    }
}

/// Chart frames degenerate at the sphere poles and the cone apex.
fn chart_singular(s: &ModelSurface, c: [f64; 2]) -> bool {
    match s.kind() {
        SurfaceKind::RoundSphere { .. } => c[0] < 0.05 || c[0] > PI - 0.05,
        SurfaceKind::FlatCone { .. } => c[0] < 0.05,
        _ => false,
    }
}

fn no_set() -> Outcome {
    Outcome::skipped("scenario has no closed set")
}

/// Runs the full suite.
pub fn verify_all(scenario: &Scenario, options: &VerifyOptions) -> Result<VerificationReport> {
    let mut tol = scenario.tolerances;
    if let Some(seed) = options.seed {
        tol.seed = seed;
    }
    let surface = scenario.build_surface()?;
    let set = scenario.build_set(&surface)?;
    let ctx = Context {
        scenario,
        surface,
        set,
        tol,
        parallelism: options.parallelism,
        estimate: OnceCell::new(),
        reach: OnceCell::new(),
        curves: OnceCell::new(),
        chart: OnceCell::new(),
    };
    let mut records = Vec::with_capacity(CHECKS.len());
    for check in CHECKS {
        let start = Instant::now();
        let outcome = (check.run)(&ctx).unwrap_or_else(|e| Outcome {
            status: Status::Fail,
            measured: f64::NAN,
            threshold: "-".into(),
            message: format!("error: {e}"),
        });
        records.push(CheckRecord {
            id: check.id,
            status: outcome.status,
            measured: outcome.measured,
            threshold: outcome.threshold,
            message: outcome.message,
            runtime: start.elapsed(),
        });
    }
    Ok(VerificationReport { scenario: scenario.name.clone(), records })
}

fn triangle_inequality(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.surface;
    let pts = ctx.region_points(30_000, 1);
    let mut worst: f64 = 0.0;
    for t in pts.chunks_exact(3) {
        let (ab, bc, ac) = (s.distance(&t[0], &t[1])?, s.distance(&t[1], &t[2])?, s.distance(&t[0], &t[2])?);
        worst = worst.max(ac - ab - bc);
    }
    Ok(Outcome::judged(worst <= 1e-9, worst, "<= 1e-9").note(format!("{} triples", pts.len() / 3)))
}

fn exp_log_roundtrip(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.surface;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed(2));
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for x in ctx.region_points(1000, 3) {
        let t = rng.gen_range(0.05..0.9) * s.injectivity_scale(&x).min(2.0);
        let psi = rng.gen_range(-PI..PI);
        let y = match s.exp_dir(&x, psi, t) {
            Ok(y) => y,
            Err(Error::DomainExit { .. } | Error::ApexHit { .. } | Error::OutsideDomain { .. }) => continue,
            Err(e) => return Err(e),
        };
        let dirs = s.initial_directions(&x, &y, 0.0, 1)?;
        let err = dirs.angles.iter().map(|a| normalize_angle(a - psi).abs()).fold(f64::INFINITY, f64::min);
        worst = worst.max(err);
        checked += 1;
    }
    let tol = ctx.tol.angular_tol;
    Ok(Outcome::judged(worst <= tol, worst, format!("<= {}", short(tol))).note(format!("{checked} samples")))
}

fn distance_lipschitz(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let s = &ctx.surface;
    let pts = ctx.region_points(4000, 4);
    let mut worst: f64 = 0.0;
    for p in pts.chunks_exact(2) {
        worst = worst.max((a.eval_da(&p[0])? - a.eval_da(&p[1])?).abs() - s.distance(&p[0], &p[1])?);
    }
    Ok(Outcome::judged(worst <= 1e-9, worst.max(0.0), "<= 1e-9"))
}

fn footpoint_certificate(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let s = &ctx.surface;
    let tol = a.footpoint_tolerance();
    let mut worst: f64 = 0.0;
    let pts = ctx.points_off_set(a, 300, 5, 10.0 * tol);
    for x in &pts {
        let fp = a.footpoints(x)?;
        for f in &fp.footpoints {
            worst = worst.max((s.distance(x, &f.point)? - fp.distance).abs());
        }
        let nearest = a.cloud().iter().map(|c| s.dist(x, c)).fold(f64::INFINITY, f64::min);
        worst = worst.max(fp.distance - nearest);
    }
    let threshold = tol.max(1e-9);
    Ok(Outcome::judged(worst <= threshold, worst, format!("<= {}", short(threshold))).note(format!("{} points", pts.len())))
}

fn gradnorm_formula(ctx: &Context) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed(6));
    let sweep = 100_000;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let dirs: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
        let (v, _) = max_directional_derivative(&dirs);
        worst = worst.max((v - brute_force_max(&dirs, sweep)).abs());
    }
    for k in 1..=16 {
        let beta = PI * k as f64 / 16.0;
        let (v, _) = max_directional_derivative(&[0.3, 0.3 + beta]);
        worst = worst.max((v.max(0.0) - (0.5 * beta).cos()).abs());
    }
    Ok(Outcome::judged(worst <= 1e-6, worst, "<= 1e-6"))
}

/// Maximum of the directional derivative by a uniform sweep, followed by a
/// second uniform sweep over the two cells around the best sample.
fn brute_force_max(dirs: &[f64], sweep: usize) -> f64 {
    let step = 2.0 * PI / sweep as f64;
    let (best, _) = (0..sweep)
        .map(|k| (k, directional_derivative(dirs, -PI + step * k as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let center = -PI + step * best as f64;
    (0..=sweep)
        .map(|k| directional_derivative(dirs, center - step + 2.0 * step * k as f64 / sweep as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn regular_unit_descent(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let s = &ctx.surface;
    let grid = &ctx.estimate(a)?.grid;
    let h = 1e-4;
    let cells: Vec<_> = grid.with_label(CellLabel::Regular).filter(|c| c.distance > 10.0 * h).collect();
    if cells.is_empty() {
        return Ok(Outcome::skipped("no regular cells"));
    }
    let stride = cells.len().div_ceil(200).max(1);
    let mut worst: f64 = 0.0;
    for c in cells.iter().step_by(stride) {
        let (Some(p), Some(g)) = (c.point, c.gradient.as_ref()) else { continue };
        if chart_singular(s, c.coords) {
            continue;
        }
        let Some(psi) = g.grad_angle() else { continue };
        let (Ok(fwd), Ok(back)) = (s.exp_dir(&p, psi, h), s.exp_dir(&p, psi + PI, h)) else { continue };
        let slope = (a.eval_da(&fwd)? - a.eval_da(&back)?) / (2.0 * h);
        worst = worst.max((slope - g.grad_norm).abs());
        if g.footpoint_count == 1 && !g.continuum {
            worst = worst.max((g.grad_norm - 1.0).abs());
        }
    }
    let tol = ctx.tol.grad_tol;
    Ok(Outcome::judged(worst <= tol, worst, format!("<= {}", short(tol))))
}

fn cutlocus_antipode(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let SetDescriptor::Point(p) = a.descriptor() else { return Ok(Outcome::skipped("needs a single point")) };
    if !matches!(ctx.surface.kind(), SurfaceKind::RoundSphere { .. }) {
        return Ok(Outcome::skipped("needs a sphere"));
    }
    let s = &ctx.surface;
    let anti = s.point(PI - p.x(), normalize_angle(p.y() + PI))?;
    let est = ctx.estimate(a)?;
    if est.is_empty() {
        return Ok(Outcome::judged(false, f64::NAN, "<= 0.05").note("empty cut-locus estimate"));
    }
    let clusters = est.clusters(a);
    let diameter = clusters.first().map_or(0.0, |c| est.diameter(a, c));
    let cell = est.dilation;
    let grad = crate::field::gradient_norm(a, &anti)?.grad_norm;
    let pass = clusters.len() == 1 && diameter <= 2.0 * cell && est.distance_to(a, &anti) == 0.0 && grad <= 0.05;
    Ok(Outcome::judged(pass, grad, "<= 0.05").note(format!(
        "{} clusters, diameter {} (2 cells = {})",
        clusters.len(),
        short(diameter),
        short(2.0 * cell)
    )))
}

fn flow_invariance(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let est = ctx.estimate(a)?;
    if est.is_empty() {
        return Ok(Outcome::skipped("cut-locus estimate is empty"));
    }
    let r = flow_invariance_test(a, est, FLOW_HORIZON, 64, &ctx.step_policy(), ctx.parallelism)?;
    let bound = 1.5 * est.dilation;
    Ok(Outcome::judged(r.max_drift <= bound, r.max_drift, format!("<= {}", short(bound)))
        .note(format!("{} curves, {} domain exits", r.curves, r.domain_exits.len())))
}

/// Prefix of a curve before it reaches the dilated cut-locus estimate.
fn before_cut_locus(a: &ClosedSet, est: &CutLocusEstimate, curve: &FlowCurve) -> FlowCurve {
    let stop = curve.nodes.iter().position(|n| est.distance_to(a, &n.point) == 0.0).unwrap_or(curve.nodes.len());
    let mut c = curve.clone();
    c.nodes.truncate(stop);
    c.arclength.truncate(stop);
    c
}

fn flow_value_identity(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let est = ctx.estimate(a)?;
    let curves = ctx.curves(a)?;
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for (list, bound) in [(&curves.cut, 0.05), (&curves.regular, 0.02)] {
        for c in list {
            let c = if bound < 0.05 { before_cut_locus(a, est, c) } else { c.clone() };
            if c.nodes.len() < 3 {
                continue;
            }
            let r = check_flow_value_identity(&c)?;
            pass &= r <= bound;
            worst = worst.max(r);
            used += 1;
        }
    }
    if used == 0 {
        return Ok(Outcome::skipped("no gradient curve with three nodes"));
    }
    Ok(Outcome::judged(pass, worst, "<= 0.05 (cut starts), 0.02 (regular starts)").note(format!("{used} curves")))
}

fn gradnorm_stays_below_one(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let curves = ctx.curves(a)?;
    if curves.cut.is_empty() {
        return Ok(Outcome::skipped("no start with |grad| <= 0.95"));
    }
    let worst = curves.cut.iter().flat_map(|c| c.nodes.iter().map(|n| n.grad_norm)).fold(0.0, f64::max);
    Ok(Outcome::judged(worst <= 1.0 - 1e-3, worst, "<= 0.999").note(format!("{} curves", curves.cut.len())))
}

fn cosh_comparison(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let curves = ctx.curves(a)?;
    if curves.cut.is_empty() {
        return Ok(Outcome::skipped("no start with |grad| <= 0.95"));
    }
    let oracle = DistanceOracle::new(a).with_tie_tolerance(ctx.estimate(a)?.grid.tie_tol);
    let scale = ctx.surface.lower_curvature_rescale();
    let mut worst = f64::INFINITY;
    let mut used = 0;
    for c in &curves.cut {
        if c.length() <= 0.0 || c.nodes.len() < 3 {
            continue;
        }
        let samples = c.nodes.len().clamp(16, 400);
        let rp = match arclength_reparam_with(c, &oracle, samples) {
            Ok(rp) => rp,
            Err(Error::ReparamUndefined(_)) => continue,
            Err(e) => return Err(e),
        };
        if rp.nodes.len() < 3 {
            continue;
        }
        let values: Vec<f64> = rp.nodes.iter().map(|n| n.value).collect();
        let r = cosh_comparison_check(&values, rp.length() / (values.len() - 1) as f64, scale)?;
        worst = worst.min(r.worst_margin + r.allowance);
        used += 1;
    }
    if used == 0 {
        return Ok(Outcome::skipped("no curve of positive length"));
    }
    Ok(Outcome::judged(worst >= -1e-3, worst, ">= -1e-3").note(format!("{used} curves, margin net of discretization allowance")))
}

fn flow_trace_concavity(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let est = ctx.estimate(a)?;
    let curves = ctx.curves(a)?;
    let delta = 0.25;
    let r = &ctx.scenario.region;
    let keep = |p: &SurfacePoint| a.eval_da(p).is_ok_and(|d| d >= delta);
    let domain = SampleDomain::rect(ctx.surface, r.x, r.y).filtered(&keep);
    let cfg = ConcavityConfig { seed: ctx.seed(12), parallelism: ctx.parallelism, ..ConcavityConfig::default() };
    let f = |p: &SurfacePoint| a.eval_da(p);
    let measured = midpoint_concavity(&f, &domain, &cfg)?;
    if !measured.concavity.is_finite() {
        return Ok(Outcome {
            status: Status::Informational,
            measured: measured.concavity,
            threshold: "-".into(),
            message: "d_A is not semiconcave on the region".into(),
        });
    }
    let bound = measured.concavity.max(0.0) + 0.05;
    let oracle = DistanceOracle::new(a).with_tie_tolerance(est.grid.tie_tol);
    let mut worst = f64::NEG_INFINITY;
    let mut used = 0;
    for c in curves.cut.iter().chain(&curves.regular) {
        let c = before_cut_locus(a, est, c);
        if c.nodes.len() < 3 || c.length() <= 0.0 || c.nodes[0].value < delta {
            continue;
        }
        let rp = match arclength_reparam_with(&c, &oracle, c.nodes.len().clamp(16, 200)) {
            Ok(rp) => rp,
            Err(Error::ReparamUndefined(_)) => continue,
            Err(e) => return Err(e),
        };
        if rp.nodes.len() < 3 {
            continue;
        }
        let rep = check_trace_concavity(&rp, &ConcavityBound::Constant(bound), 0.0)?;
        worst = worst.max(rep.worst_margin + bound);
        used += 1;
    }
    if used == 0 {
        return Ok(Outcome::skipped("no gradient curve at distance >= 0.25 from A"));
    }
    Ok(Outcome::judged(worst <= bound, worst, format!("<= {}", short(bound)))
        .note(format!("{used} curves, measured C = {}", short(measured.concavity))))
}

fn positive_reach(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    if !a.is_curve() {
        return Ok(Outcome::skipped("needs a curve"));
    }
    let rep = ctx.reach(a)?;
    let half = 0.5 * rep.reach.min(rep.r_max);
    let est = ctx.estimate(a)?;
    let (surface, in_set) = (ctx.surface, est.grid.in_set_tol);
    let in_tube = |c: [f64; 2]| {
        surface.point(c[0], c[1]).ok().and_then(|p| a.eval_da(&p).ok()).is_some_and(|d| d > in_set && d < half)
    };
    let lip = c1_gradient_lipschitz(a, &est.grid, &in_tube)?;
    let cross = rep.semiconvexity_ok && lip.constant.is_finite();
    let note = format!(
        "certified {}, semiconvexity {}, gradient Lipschitz {}",
        short(rep.certified_radius),
        rep.semiconvexity.map_or("-".into(), short),
        short(lip.constant)
    );
    Ok(match ctx.scenario.reach_oracle() {
        Some((expected, tol)) => {
            let ok = (rep.reach - expected).abs() <= tol && cross;
            Outcome::judged(ok, rep.reach, format!("{} +- {}", short(expected), short(tol))).note(note)
        }
        None if !cross => Outcome::judged(false, rep.reach, "cross-checks").note(note),
        None => Outcome { status: Status::Informational, measured: rep.reach, threshold: "-".into(), message: note },
    })
}

fn normal_geodesics(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    if !a.is_curve() {
        return Ok(Outcome::skipped("needs a curve"));
    }
    let rep = ctx.reach(a)?;
    let certified = rep.certified_radius;
    let bases = a.boundary();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut tested = 0;
    for x in bases.iter().step_by(bases.len().div_ceil(8).max(1)) {
        let cone = normal_cone(a, x, None)?;
        for &h in &cone.representatives {
            let r = normal_geodesic_test(a, x, h, 1.0, Some(certified))?;
            worst = worst.max(r.max_residual);
            pass &= r.pass;
            tested += 1;
        }
    }
    let bound = 2.0 * a.footpoint_tolerance();
    Ok(Outcome::judged(pass && tested > 0, worst, format!("<= {}", short(bound)))
        .note(format!("{tested} normal geodesics up to s = {}", short(certified.min(1.0)))))
}

fn slit_regular_everywhere(ctx: &Context) -> Result<Outcome> {
    if !matches!(ctx.scenario.surface, SurfaceSpec::SlitPlane) {
        return Ok(Outcome::skipped("needs the slit plane"));
    }
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let grid = &ctx.estimate(a)?.grid;
    let cut = grid.count(CellLabel::CutCandidate);
    Ok(Outcome::judged(cut == 0, cut as f64, "== 0").note(format!("{} regular cells", grid.count(CellLabel::Regular))))
}

/// Vertical line crossed by the shadow boundary of a point `(p, 0)`, `p > 0`.
const SHADOW_LINE_X: f64 = -0.5;

fn slit_second_derivative_jump(ctx: &Context) -> Result<Outcome> {
    if !matches!(ctx.scenario.surface, SurfaceSpec::SlitPlane) {
        return Ok(Outcome::skipped("needs the slit plane"));
    }
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let SetDescriptor::Point(p) = a.descriptor() else { return Ok(Outcome::skipped("needs a single point")) };
    if !(p.x() > 0.0 && p.y() == 0.0) {
        return Ok(Outcome::skipped("needs a point on the positive x-axis"));
    }
    let s = &ctx.surface;
    let half = 0.3;
    let start = s.point(SHADOW_LINE_X, -half)?;
    let f = |q: &SurfacePoint| a.eval_da(q);
    let trace = geodesic_trace(s, start, FRAC_PI_2, &f);
    let profile = second_difference_profile(&trace, 2.0 * half, 0.01)?;
    let jump = profile.jump_at(half, 0.02, 0.05);
    let grid = &ctx.estimate(a)?.grid;
    let lip = c1_gradient_lipschitz(a, grid, &|_| true)?;
    let pass = jump >= 0.5 && lip.constant.is_finite();
    Ok(Outcome::judged(pass, jump, ">= 0.5").note(format!("gradient Lipschitz {}", short(lip.constant))))
}

fn chart_bilipschitz(ctx: &Context) -> Result<Outcome> {
    let chart = ctx.chart()?;
    let l = bilipschitz_constants(chart, 2000, ctx.seed(17))?;
    let pass = !l.is_degenerate() && l.lambda_max.is_finite();
    Ok(Outcome::judged(pass, l.lambda_min, ">= 0.1")
        .note(format!("lambda in [{}, {}], defect {}", short(l.lambda_min), short(l.lambda_max), short(chart.defect))))
}

fn chart_midpoint_scaling(ctx: &Context) -> Result<Outcome> {
    let chart = ctx.chart()?;
    let r = midpoint_displacement_test(chart, 1200, ctx.seed(18))?;
    Ok(Outcome::judged((1.8..=2.2).contains(&r.exponent), r.exponent, "[1.8, 2.2]")
        .note(format!("C_disp {}", short(r.constant))))
}

fn chart_transfer(ctx: &Context) -> Result<Outcome> {
    let chart = ctx.chart()?;
    let mut agree = 0;
    let mut notes = Vec::new();
    let functions = transfer_functions(chart)?;
    for (name, f) in &functions {
        let r = semiconcavity_transfer_test(chart, f, 3000, ctx.seed(19), ctx.parallelism)?;
        agree += usize::from(r.pass);
        notes.push(format!("{name} {}/{}", short(r.surface.concavity), short(r.image.concavity)));
    }
    Ok(Outcome::judged(agree == functions.len(), agree as f64, format!("== {}", functions.len())).note(notes.join(", ")))
}

fn nearest_cut_point_dominates(ctx: &Context) -> Result<Outcome> {
    let Some(a) = ctx.set() else { return Ok(no_set()) };
    let est = ctx.estimate(a)?;
    if est.is_empty() {
        return Ok(Outcome::skipped("cut-locus estimate is empty"));
    }
    let margin = est.grid.in_set_tol;
    let queries = ctx.points_off_set(a, 1000, 20, margin);
    let r = &ctx.scenario.region;
    let keep = |p: &SurfacePoint| a.eval_da(p).is_ok_and(|d| d > margin);
    let domain = SampleDomain::rect(ctx.surface, r.x, r.y).filtered(&keep);
    let cfg = ConcavityConfig { seed: ctx.seed(21), parallelism: ctx.parallelism, ..ConcavityConfig::default() };
    let rep = nearest_cut_point_test(a, est, &queries, &domain, &cfg, Some(ctx.tol.precheck_tol), 1e-3)?;
    let worst = rep.records.iter().map(|g| g.da_x - g.da_x0).fold(f64::NEG_INFINITY, f64::max);
    let note = format!("{} queries, precheck concavity {}", rep.records.len(), short(rep.precheck.concavity));
    Ok(if rep.precondition_met {
        Outcome::judged(rep.pass, worst, "<= 1e-3").note(note)
    } else {
        Outcome { status: Status::Informational, measured: worst, threshold: "<= 1e-3".into(), message: format!("precondition unmet, {note}") }
    })
}
