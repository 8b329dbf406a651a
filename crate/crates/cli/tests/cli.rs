use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cutlocus"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cutlocus")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const FIELD_ONLY: &str = r#"
name = "plane-field"
[surface]
kind = "plane"
[set]
kind = "points"
at = [[-1.0, 0.0], [1.0, 0.0]]
[region]
x = [-2.0, 2.0]
y = [-2.0, 2.0]
resolution = [17, 17]
[[task]]
kind = "field"
"#;

#[test]
fn list_checks_prints_every_check() {
    let o = run(&["list-checks"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let ids: Vec<&str> = out.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(ids.len(), cutlocus::verify::CHECKS.len());
    for id in ["triangle-inequality", "cutlocus-antipode", "positive-reach", "nearest-cut-point-dominates"] {
        assert!(ids.contains(&id), "missing {id}");
    }
}

#[test]
fn field_only_scenario_writes_field_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "field.scn", FIELD_ONLY);
    let out = dir.path().join("out");
    let o = run(&["run", scn.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names, ["field.pgm", "field.rec"]);
    let rec = std::fs::read_to_string(out.join("field.rec")).unwrap();
    assert!(rec.starts_with("# i j x y d_a grad_norm grad_angle footpoints label\n"));
    assert_eq!(rec.lines().count(), 1 + 17 * 17);
    let pgm = std::fs::read(out.join("field.pgm")).unwrap();
    let header = b"P5 17 17 255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 17 * 17);
}

#[test]
fn small_resolution_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "small.scn", &FIELD_ONLY.replace("[17, 17]", "[8, 8]"));
    let o = run(&["verify", scn.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("below the minimum"), "{}", stderr(&o));
}

#[test]
fn unknown_task_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "bad.scn", &FIELD_ONLY.replace("kind = \"field\"", "kind = \"teleport\""));
    let o = run(&["run", scn.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("teleport"));
}

#[test]
fn missing_scenario_file_is_an_error() {
    let o = run(&["verify", "/nonexistent/scenario.scn"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sphere_point_run_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let scn = scenarios().join("sphere-point.scn");
    let o = run(&["run", scn.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    for f in ["field.rec", "field.pgm", "cutlocus.rec", "cutlocus.pgm", "flow_0.rec", "flow_1.rec", "report.rec", "report.txt"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let report = std::fs::read_to_string(dir.path().join("report.rec")).unwrap();
    let antipode = report.lines().find(|l| l.starts_with("cutlocus-antipode ")).unwrap();
    assert_eq!(antipode.split_whitespace().nth(1), Some("pass"), "{antipode}");
    assert!(!report.lines().any(|l| l.split_whitespace().nth(1) == Some("fail")), "{report}");
    let flow = std::fs::read_to_string(dir.path().join("flow_0.rec")).unwrap();
    assert!(flow.starts_with("# termination "));
}

#[test]
fn verify_is_deterministic_and_thread_independent() {
    let scn = scenarios().join("plane-two-points.scn");
    let scn = scn.to_str().unwrap();
    let a = run(&["verify", scn]);
    let b = run(&["verify", scn]);
    let c = run(&["verify", scn, "--threads", "1"]);
    let d = run(&["verify", scn, "--threads", "3"]);
    assert!(a.status.success(), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(a.stdout, d.stdout);
}

#[test]
fn seed_override_is_accepted() {
    let scn = scenarios().join("plane-two-points.scn");
    let o = run(&["verify", scn.to_str().unwrap(), "--seed", "7", "--summary"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stderr(&o).contains("pass,"));
}

#[test]
fn zero_threads_is_a_usage_error() {
    let scn = scenarios().join("plane-two-points.scn");
    let o = run(&["verify", scn.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
