use cutlocus::par::Parallelism;
use cutlocus::run::{run_scenario, RunOptions};
use cutlocus::scenario::Scenario;

const SCENARIO: &str = r#"
name = "plane-two-points-small"
[surface]
kind = "plane"
[set]
kind = "points"
at = [[-1.0, 0.0], [1.0, 0.0]]
[region]
x = [-2.0, 2.0]
y = [-2.0, 2.0]
resolution = [33, 33]
[[task]]
kind = "field"
[[task]]
kind = "cutlocus"
[[task]]
kind = "flow"
starts = [[0.0, 0.5]]
[[task]]
kind = "flow"
starts = [[1.5, 1.0], [-1.5, -1.0]]
horizon = 2.0
[[task]]
kind = "charts"
center = [0.0, 1.0]
radius = 0.3
"#;

fn names(dir: &std::path::Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn artifacts_are_written_per_task() {
    let s = Scenario::parse(SCENARIO).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&s, dir.path(), &RunOptions::default()).unwrap();
    assert!(out.success(), "{:?}", out.task_errors);
    assert!(out.report.is_none());
    assert_eq!(
        names(dir.path()),
        ["charts.rec", "cutlocus.pgm", "cutlocus.rec", "field.pgm", "field.rec", "flow_0.rec", "flow_1.rec", "flow_2.rec"]
    );

    let cut = std::fs::read_to_string(dir.path().join("cutlocus.rec")).unwrap();
    let xs: Vec<f64> = cut.lines().skip(1).map(|l| l.split(' ').next().unwrap().parse().unwrap()).collect();
    assert!(!xs.is_empty());
    assert!(xs.iter().all(|x| x.abs() <= 0.2), "cut samples off the bisector: {xs:?}");

    let flow = std::fs::read_to_string(dir.path().join("flow_0.rec")).unwrap();
    let mut lines = flow.lines();
    assert!(lines.next().unwrap().starts_with("# termination "));
    assert_eq!(lines.next(), Some("# t x y value grad_norm grad_angle arclength"));

    let charts = std::fs::read_to_string(dir.path().join("charts.rec")).unwrap();
    for key in ["defect", "lambda_min", "displacement_exponent", "transfer_convex-kink_agree true"] {
        assert!(charts.contains(key), "{key} missing from\n{charts}");
    }
}

#[test]
fn runs_are_reproducible_across_parallelism() {
    let s = Scenario::parse(SCENARIO).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_scenario(&s, a.path(), &RunOptions { parallelism: Parallelism::Sequential, seed: None }).unwrap();
    run_scenario(&s, b.path(), &RunOptions { parallelism: Parallelism::Parallel, seed: None }).unwrap();
    for name in names(a.path()) {
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn failing_task_is_reported_without_aborting_others() {
    // A ball of radius 1.6 on the unit sphere is not uniquely geodesic.
    let text = r#"
name = "sphere-wide-chart"
[surface]
kind = "sphere"
[set]
kind = "point"
at = [0.0, 0.0]
[region]
x = [0.0, 3.141592653589793]
y = [-3.141592653589793, 3.141592653589793]
resolution = [17, 17]
[[task]]
kind = "field"
[[task]]
kind = "charts"
center = [1.5, 0.0]
radius = 1.6
"#;
    let s = Scenario::parse(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&s, dir.path(), &RunOptions::default()).unwrap();
    assert!(!out.success());
    assert_eq!(out.task_errors.len(), 1, "{:?}", out.task_errors);
    assert_eq!(out.task_errors[0].0, "charts");
    assert!(dir.path().join("field.rec").exists());
}
