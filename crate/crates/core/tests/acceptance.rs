//! End-to-end acceptance criteria. Every test writes one `PASS`/`FAIL` line
//! to stderr (uncaptured) before asserting.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::OnceLock;

use cutlocus::charts::{bilipschitz_constants, build_chart, midpoint_displacement_test, semiconcavity_transfer_test, transfer_functions};
use cutlocus::closed_set::ClosedSet;
use cutlocus::concavity::{geodesic_trace, second_difference_profile};
use cutlocus::cutlocus::{estimate_cut_locus, flow_invariance_test};
use cutlocus::field::{c1_gradient_lipschitz, gradient_norm, max_directional_derivative, CellLabel, ChartRegion, FieldConfig};
use cutlocus::flow::{check_flow_value_identity, flow, DistanceOracle, FlowCurve, StepPolicy};
use cutlocus::par::Parallelism;
use cutlocus::scenario::Scenario;
use cutlocus::surface::{ModelSurface, SurfacePoint};
use cutlocus::verify::{verify_all, Status, VerificationReport, VerifyOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report_line(criterion: &str, pass: bool, detail: &str) {
    let _ = writeln!(std::io::stderr().lock(), "{} {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bundled() -> Vec<(String, Scenario)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), Scenario::load(&p).unwrap()))
        .collect()
}

fn verify_every_scenario() -> Vec<(String, VerificationReport)> {
    let scenarios = bundled();
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|(name, s)| scope.spawn(move || (name.clone(), verify_all(s, &VerifyOptions::default()).unwrap())))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

/// One verification pass over the bundled scenarios, shared between tests.
fn reports() -> &'static [(String, VerificationReport)] {
    static REPORTS: OnceLock<Vec<(String, VerificationReport)>> = OnceLock::new();
    REPORTS.get_or_init(verify_every_scenario)
}

fn report(name: &str) -> &'static VerificationReport {
    &reports().iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no bundled scenario {name}")).1
}

fn scenario(name: &str) -> Scenario {
    Scenario::load(&scenarios_dir().join(format!("{name}.scn"))).unwrap()
}

fn set_of(s: &Scenario) -> ClosedSet {
    let surface = s.build_surface().unwrap();
    s.build_set(&surface).unwrap().unwrap()
}

#[test]
fn sphere_point_cut_locus_is_the_antipode() {
    let s = ModelSurface::sphere(1.0).unwrap();
    let a = ClosedSet::point(s, s.point(0.0, 0.0).unwrap()).unwrap();
    let region = ChartRegion::new([0.0, PI], [-PI, PI], [257, 257]).unwrap();
    let est = estimate_cut_locus(&a, &region, &FieldConfig::default()).unwrap();
    let south = s.point(PI, 0.0).unwrap();
    let clusters = est.clusters(&a);
    let cell = est.dilation;
    let diameter = est
        .samples
        .iter()
        .flat_map(|p| est.samples.iter().map(move |q| s.distance(&p.point, &q.point).unwrap()))
        .fold(0.0, f64::max);
    let farthest = est.samples.iter().map(|c| s.distance(&c.point, &south).unwrap()).fold(0.0, f64::max);
    let grad = gradient_norm(&a, &south).unwrap().grad_norm;
    let pass = clusters.len() == 1 && !est.is_empty() && farthest <= cell && diameter <= 2.0 * cell && grad <= 0.05;
    report_line(
        "sphere cut locus",
        pass,
        &format!("{} samples, {} clusters, diameter {diameter:.3e} <= {:.3e}, |grad| at south pole {grad:.3e}", est.len(), clusters.len(), 2.0 * cell),
    );
    assert!(pass);
}

/// Flows from every cut-locus sample and returns the estimate-based drift
/// and the largest value of `oracle_gap` over all nodes.
fn drift_against(name: &str, oracle_gap: impl Fn(&SurfacePoint) -> f64) -> (f64, f64, f64) {
    let sc = scenario(name);
    let a = set_of(&sc);
    let est = estimate_cut_locus(&a, &sc.region, &FieldConfig::default()).unwrap();
    assert!(!est.is_empty(), "{name}: empty estimate");
    let policy = StepPolicy::default();
    let drift = flow_invariance_test(&a, &est, 5.0, 64, &policy, Parallelism::default()).unwrap();
    let oracle = DistanceOracle::new(&a).with_tie_tolerance(est.grid.tie_tol);
    let region = sc.region;
    let inside = |p: &SurfacePoint| region.contains(p.coords());
    let stride = est.len().div_ceil(64).max(1);
    let mut gap: f64 = 0.0;
    for c in est.samples.iter().step_by(stride) {
        let curve = flow(&oracle, &c.point, 5.0, &policy, Some(&inside)).unwrap();
        gap = curve.nodes.iter().map(|n| oracle_gap(&n.point)).fold(gap, f64::max);
    }
    (drift.max_drift, gap, est.dilation)
}

#[test]
fn cut_locus_is_invariant_under_the_flow() {
    // Plane, A = {(-1, 0), (1, 0)}: the cut locus is the bisector x = 0.
    let (plane_drift, plane_gap, plane_cell) = drift_against("plane-two-points", |p| p.x().abs());
    // Cylinder of circumference 2pi, A = {(0, 0)}: unrolled lifts at x = 0 and
    // x = 2pi put the cut locus on the line x = pi.
    let (cyl_drift, cyl_gap, cyl_cell) = drift_against("cylinder-point", |p| (p.x().rem_euclid(TAU) - PI).abs());
    let ok_plane = plane_drift <= 1.5 * plane_cell && plane_gap <= 1.5 * plane_cell;
    let ok_cyl = cyl_drift <= 1.5 * cyl_cell && cyl_gap <= 1.5 * cyl_cell;
    report_line(
        "flow invariance",
        ok_plane && ok_cyl,
        &format!(
            "plane drift {plane_drift:.3e} bisector gap {plane_gap:.3e}, cylinder drift {cyl_drift:.3e} line gap {cyl_gap:.3e}, bounds {:.3e} / {:.3e}",
            1.5 * plane_cell,
            1.5 * cyl_cell
        ),
    );
    assert!(ok_plane && ok_cyl);
}

/// Directional derivative `-max cos(u - v)` maximized by two nested uniform sweeps.
fn swept_maximum(dirs: &[f64]) -> f64 {
    let n = 100_000;
    let f = |u: f64| -dirs.iter().map(|&v| (u - v).cos()).fold(f64::NEG_INFINITY, f64::max);
    let step = TAU / n as f64;
    let best = (0..n).map(|k| -PI + step * k as f64).max_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap();
    (0..=n).map(|k| f(best - step + 2.0 * step * k as f64 / n as f64)).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn gradient_norm_formula_matches_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=7);
        let dirs: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
        worst = worst.max((max_directional_derivative(&dirs).0 - swept_maximum(&dirs)).abs());
    }
    let mut pair_worst: f64 = 0.0;
    for k in 1..=50 {
        let beta = PI * k as f64 / 50.0;
        let base = rng.gen_range(-PI..PI);
        let v = max_directional_derivative(&[base, base + beta]).0;
        pair_worst = pair_worst.max((v - (0.5 * beta).cos()).abs());
    }
    let pass = worst <= 1e-6 && pair_worst <= 1e-6;
    report_line("gradient-norm formula", pass, &format!("sweep gap {worst:.3e}, cos(beta/2) gap {pair_worst:.3e}, tolerance 1e-6"));
    assert!(pass);
}

/// Relative gap between node values and `oracle(t)`.
fn relative_gap(curve: &FlowCurve, oracle: impl Fn(f64) -> f64) -> f64 {
    curve.nodes.iter().map(|n| (n.value - oracle(n.t)).abs() / oracle(n.t)).fold(0.0, f64::max)
}

#[test]
fn flow_value_identity_matches_ode_oracle() {
    let sc = scenario("plane-two-points");
    let a = set_of(&sc);
    let s = *a.surface();
    let region = sc.region;
    let inside = |p: &SurfacePoint| region.contains(p.coords());
    let oracle = DistanceOracle::new(&a);
    let policy = StepPolicy::default();

    // On the bisector the curve is (0, y(t)) with y' = y / sqrt(1 + y^2) and
    // value sqrt(1 + y^2); the ODE is integrated by RK4 at a fine step.
    let y0 = 0.25;
    let bisector = flow(&oracle, &s.point(0.0, y0).unwrap(), 5.0, &policy, Some(&inside)).unwrap();
    let ode_value = |t: f64| {
        let rhs = |y: f64| y / (1.0 + y * y).sqrt();
        let n = ((t / 1e-3).ceil() as usize).max(1);
        let h = t / n as f64;
        let mut y = y0;
        for _ in 0..n {
            let k1 = rhs(y);
            let k2 = rhs(y + 0.5 * h * k1);
            let k3 = rhs(y + 0.5 * h * k2);
            let k4 = rhs(y + h * k3);
            y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        (1.0 + y * y).sqrt()
    };
    let bis_gap = relative_gap(&bisector, ode_value);
    let bis_identity = check_flow_value_identity(&bisector).unwrap();

    // Unique footpoint (1, 0): the curve is a ray and the value grows at unit rate.
    let x0 = s.point(1.5, 0.5).unwrap();
    let d0 = (0.25f64 + 0.25).sqrt();
    let ray = flow(&oracle, &x0, 5.0, &policy, Some(&inside)).unwrap();
    let ray_gap = relative_gap(&ray, |t| d0 + t);
    let ray_identity = check_flow_value_identity(&ray).unwrap();

    let pass = bis_gap <= 0.05 && bis_identity <= 0.05 && ray_gap <= 0.02 && ray_identity <= 0.02 && bisector.nodes.len() > 3 && ray.nodes.len() > 3;
    report_line(
        "flow value identity",
        pass,
        &format!(
            "bisector: oracle gap {bis_gap:.3e}, identity residual {bis_identity:.3e} (<= 0.05); unique footpoint: oracle gap {ray_gap:.3e}, identity residual {ray_identity:.3e} (<= 0.02)"
        ),
    );
    assert!(pass);
}

#[test]
fn gradient_norm_stays_below_one_on_every_scenario() {
    let mut pass = true;
    let mut ran = [0usize; 2];
    let mut details = Vec::new();
    for (name, r) in reports() {
        for (k, id) in ["gradnorm-stays-below-one", "cosh-comparison"].iter().enumerate() {
            let rec = r.get(id).unwrap();
            match rec.status {
                Status::Pass => ran[k] += 1,
                Status::Skipped => {}
                _ => {
                    pass = false;
                    details.push(format!("{name}/{id} {} {:.3e}", rec.status.as_str(), rec.measured));
                }
            }
        }
    }
    pass &= ran[0] > 0 && ran[1] > 0;
    let detail = format!(
        "{} scenarios, |grad| bound held on {}, cosh comparison held on {}{}",
        reports().len(),
        ran[0],
        ran[1],
        if details.is_empty() { String::new() } else { format!("; {}", details.join(", ")) }
    );
    report_line("gradient norm below one", pass, &detail);
    assert!(pass);
}

#[test]
fn value_trace_concavity_on_sphere_two_points() {
    let rec = report("sphere-two-points").get("flow-trace-concavity").unwrap();
    let pass = rec.status == Status::Pass;
    report_line("flow trace concavity", pass, &format!("worst {:.6} against {}, {}", rec.measured, rec.threshold, rec.message));
    assert!(pass);
}

#[test]
fn reach_of_circle_and_ellipse() {
    let mut pass = true;
    let mut details = Vec::new();
    for (name, expected, tol) in [("plane-circle", 1.0, 1e-2), ("plane-ellipse", 0.5, 2e-2)] {
        let rec = report(name).get("positive-reach").unwrap();
        let ok = rec.status == Status::Pass && (rec.measured - expected).abs() <= tol;
        pass &= ok;
        details.push(format!("{name} {:.6} vs {expected} +- {tol} ({})", rec.measured, rec.message));
    }
    report_line("positive reach", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn normal_geodesics_realize_distance() {
    let mut pass = true;
    let mut details = Vec::new();
    for name in ["plane-circle", "sphere-equator"] {
        let rec = report(name).get("normal-geodesics").unwrap();
        pass &= rec.status == Status::Pass;
        details.push(format!("{name} residual {:.3e} {} ({})", rec.measured, rec.threshold, rec.message));
    }
    // Radial lines of the unit circle: d_A(x + s n) = s for s < 1 inward.
    let a = set_of(&scenario("plane-circle"));
    let s = *a.surface();
    let tol = 2.0 * a.footpoint_tolerance();
    let mut radial: f64 = 0.0;
    for k in 0..16 {
        let th = TAU * k as f64 / 16.0 + 0.1;
        let base = s.point(th.cos(), th.sin()).unwrap();
        for psi in [th, th + PI] {
            for j in 1..=32 {
                let t = 0.99 * j as f64 / 32.0;
                let p = s.exp_dir(&base, psi, t).unwrap();
                radial = radial.max((a.eval_da(&p).unwrap() - t).abs());
            }
        }
    }
    pass &= radial <= tol;
    details.push(format!("analytic radial residual {radial:.3e} <= {tol:.3e}"));
    report_line("normal geodesics", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn slit_plane_is_regular_but_not_twice_differentiable() {
    let s = ModelSurface::slit_plane();
    let a = ClosedSet::point(s, s.point(1.0, 0.0).unwrap()).unwrap();
    let region = ChartRegion::new([-3.0, 3.0], [-3.0, 3.0], [513, 513]).unwrap();
    let est = estimate_cut_locus(&a, &region, &FieldConfig::default()).unwrap();
    let cut = est.grid.count(CellLabel::CutCandidate);

    // Points with x < 0 < y are hidden behind the slit and reached around its
    // tip: d = 1 + |p|. Elsewhere d = |p - (1, 0)|.
    let exact = |x: f64, y: f64| if x < 0.0 && y > 0.0 { 1.0 + x.hypot(y) } else { (x - 1.0).hypot(y) };
    let mut value_gap: f64 = 0.0;
    for c in est.grid.cells.iter().step_by(97) {
        if c.distance.is_finite() {
            value_gap = value_gap.max((c.distance - exact(c.coords[0], c.coords[1])).abs());
        }
    }

    // Across the shadow line y = 0 at x = -0.5 the second y-derivative jumps
    // from 1/1.5 below to 1/0.5 above.
    let x = -0.5f64;
    let expected_jump = 1.0 / x.abs() - 1.0 / (1.0 - x);
    let f = |q: &SurfacePoint| a.eval_da(q);
    let trace = geodesic_trace(&s, s.point(x, -0.3).unwrap(), FRAC_PI_2, &f);
    let jump = second_difference_profile(&trace, 0.6, 0.01).unwrap().jump_at(0.3, 0.02, 0.05);
    let lip = c1_gradient_lipschitz(&a, &est.grid, &|_| true).unwrap();

    let pass = cut == 0 && value_gap <= 1e-9 && jump >= 0.5 && (jump - expected_jump).abs() <= 0.1 && lip.constant.is_finite();
    report_line(
        "slit plane",
        pass,
        &format!(
            "{cut} cut candidates of {} cells, value gap {value_gap:.3e}, jump {jump:.4} (analytic {expected_jump:.4}), gradient Lipschitz {:.3}",
            region.len(),
            lip.constant
        ),
    );
    assert!(pass);
}

#[test]
fn distance_charts_on_plane_and_sphere() {
    let mut pass = true;
    let mut details = Vec::new();
    let sphere = ModelSurface::sphere(1.0).unwrap();
    let cases = [("plane", ModelSurface::plane(), [0.3, -0.2], 0.5), ("sphere", sphere, [1.2, 0.4], 0.3)];
    for (name, s, c, r) in cases {
        let chart = build_chart(&s, &s.point(c[0], c[1]).unwrap(), r, Some(0.1)).unwrap();
        let l = bilipschitz_constants(&chart, 2000, 11).unwrap();
        let d = midpoint_displacement_test(&chart, 1200, 12).unwrap();
        let mut finite = Vec::new();
        let mut agree = true;
        for (_, f) in transfer_functions(&chart).unwrap() {
            let t = semiconcavity_transfer_test(&chart, &f, 3000, 13, Parallelism::default()).unwrap();
            agree &= t.pass;
            finite.push(t.surface.concavity.is_finite());
        }
        // |y| and the concave kink are semiconcave, the convex kink is not.
        let ok = l.lambda_min > 0.0
            && !l.is_degenerate()
            && l.lambda_max.is_finite()
            && (1.8..=2.2).contains(&d.exponent)
            && agree
            && finite == [true, true, false];
        pass &= ok;
        details.push(format!(
            "{name}: lambda [{:.3}, {:.3}], exponent {:.4}, transfer finite {finite:?}",
            l.lambda_min, l.lambda_max, d.exponent
        ));
    }
    report_line("distance charts", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn nearest_cut_point_on_hemisphere() {
    let rec = report("sphere-hemisphere").get("nearest-cut-point-dominates").unwrap();
    let queries: usize = rec.message.split_whitespace().next().and_then(|n| n.parse().ok()).unwrap_or(0);

    // A = southern hemisphere: d_A = pi/2 - polar angle, maximal at the north pole.
    let sc = scenario("sphere-hemisphere");
    let a = set_of(&sc);
    let s = *a.surface();
    let north = a.eval_da(&s.point(0.0, 0.0).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut gap: f64 = 0.0;
    for _ in 0..1000 {
        let (th, ph) = (rng.gen_range(0.0..FRAC_PI_2), rng.gen_range(-PI..PI));
        let d = a.eval_da(&s.point(th, ph).unwrap()).unwrap();
        gap = gap.max((d - (FRAC_PI_2 - th)).abs()).max(d - north);
    }
    let pass = rec.status == Status::Pass && queries == 1000 && rec.measured <= 1e-3 && (north - FRAC_PI_2).abs() <= 1e-9 && gap <= 1e-9;
    report_line(
        "nearest cut point",
        pass,
        &format!("{queries} queries, worst d_A(x) - d_A(x0) {:.3e} <= 1e-3, analytic gap {gap:.3e}", rec.measured),
    );
    assert!(pass);
}

#[test]
fn verify_is_deterministic() {
    let second = verify_every_scenario();
    let mut differing = Vec::new();
    for ((name, first), (_, again)) in reports().iter().zip(&second) {
        if first.records_text() != again.records_text() {
            differing.push(name.clone());
        }
    }
    let pass = differing.is_empty() && second.len() == reports().len();
    report_line(
        "determinism",
        pass,
        &format!("{} scenarios verified twice, {} differing {:?}", second.len(), differing.len(), differing),
    );
    assert!(pass);
}
