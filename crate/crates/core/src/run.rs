//! Executes the tasks of a scenario and writes their artifacts.

use std::path::{Path, PathBuf};

use crate::charts::{bilipschitz_constants, build_chart, midpoint_displacement_test, semiconcavity_transfer_test, transfer_functions};
use crate::closed_set::ClosedSet;
use crate::cutlocus::estimate_cut_locus;
use crate::error::{Error, Result};
use crate::export::{cutlocus_pgm, cutlocus_records, field_pgm, field_records, flow_records, fmt_f64, records, KeyValues};
use crate::field::{classify_region, FieldConfig};
use crate::flow::{flow, DistanceOracle, StepPolicy};
use crate::par::{self, Parallelism};
use crate::reach::{normal_cone, reach, ReachConfig};
use crate::scenario::{Scenario, TaskSpec};
use crate::surface::ModelSurface;
use crate::verify::{verify_all, VerificationReport, VerifyOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub parallelism: Parallelism,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub report: Option<VerificationReport>,
    /// Task name and error message of every task that failed.
    pub task_errors: Vec<(String, String)>,
}

impl RunOutcome {
    /// False when a task errored or a check failed.
    pub fn success(&self) -> bool {
        self.task_errors.is_empty() && !self.report.as_ref().is_some_and(|r| r.failed())
    }
}

type Artifacts = Vec<(String, Vec<u8>)>;

struct Env<'a> {
    scenario: &'a Scenario,
    surface: ModelSurface,
    set: Option<ClosedSet>,
    options: RunOptions,
}

impl Env<'_> {
    fn set(&self) -> Result<&ClosedSet> {
        self.set.as_ref().ok_or_else(|| Error::Scenario("task needs a [set] section".into()))
    }

    fn field_config(&self) -> FieldConfig {
        let t = &self.scenario.tolerances;
        FieldConfig {
            tau: t.tau,
            grad_tol: t.grad_tol,
            merge_angle: Some(t.merge_angle),
            parallelism: self.options.parallelism,
            ..FieldConfig::default()
        }
    }
}

/// Runs every task and writes artifacts into `out_dir`, creating it if
/// needed. Files are written in task order after all tasks finished.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path, options: &RunOptions) -> Result<RunOutcome> {
    let mut scenario = scenario.clone();
    if let Some(seed) = options.seed {
        scenario.tolerances.seed = seed;
    }
    let surface = scenario.build_surface()?;
    let set = scenario.build_set(&surface)?;
    let env = Env { scenario: &scenario, surface, set, options: *options };
    let mut flow_base = Vec::with_capacity(scenario.tasks.len());
    let mut next = 0;
    for t in &scenario.tasks {
        flow_base.push(next);
        if let TaskSpec::Flow { starts, .. } = t {
            next += starts.len();
        }
    }
    let jobs: Vec<(usize, &TaskSpec)> = flow_base.into_iter().zip(&scenario.tasks).collect();
    let results = par::map(options.parallelism, &jobs, |&(base, task)| run_task(&env, task, base));
    std::fs::create_dir_all(out_dir)?;
    let mut outcome = RunOutcome::default();
    for (task, result) in scenario.tasks.iter().zip(results) {
        match result {
            Ok((files, report)) => {
                for (name, bytes) in files {
                    let path = out_dir.join(name);
                    std::fs::write(&path, bytes)?;
                    outcome.artifacts.push(path);
                }
                if report.is_some() {
                    outcome.report = report;
                }
            }
            Err(e) => outcome.task_errors.push((task.name().to_string(), e.to_string())),
        }
    }
    Ok(outcome)
}

fn run_task(env: &Env, task: &TaskSpec, flow_base: usize) -> Result<(Artifacts, Option<VerificationReport>)> {
    let region = &env.scenario.region;
    let mut files: Artifacts = Vec::new();
    match task {
        TaskSpec::Field => {
            let grid = classify_region(env.set()?, region, &env.field_config())?;
            files.push(("field.rec".into(), field_records(&grid).into_bytes()));
            files.push(("field.pgm".into(), field_pgm(&grid, true)));
        }
        TaskSpec::Cutlocus => {
            let est = estimate_cut_locus(env.set()?, region, &env.field_config())?;
            files.push(("cutlocus.rec".into(), cutlocus_records(&est).into_bytes()));
            files.push(("cutlocus.pgm".into(), cutlocus_pgm(&est, true)));
        }
        TaskSpec::Flow { starts, horizon } => {
            let a = env.set()?;
            let oracle = DistanceOracle::new(a);
            let policy = StepPolicy { critical_eps: env.scenario.tolerances.critical_eps, ..StepPolicy::default() };
            for (k, c) in starts.iter().enumerate() {
                let x0 = env.surface.point(c[0], c[1])?;
                let curve = flow(&oracle, &x0, *horizon, &policy, None)?;
                files.push((format!("flow_{}.rec", flow_base + k), flow_records(&curve).into_bytes()));
            }
        }
        TaskSpec::Reach { r_max } => {
            let a = env.set()?;
            let t = &env.scenario.tolerances;
            let cfg = ReachConfig {
                bisection_tol: t.bisection_tol,
                seed: t.seed,
                parallelism: env.options.parallelism,
                ..ReachConfig::default()
            };
            let r = reach(a, *r_max, &cfg)?;
            let mut kv = KeyValues::new();
            kv.num("reach", r.reach).num("certified_radius", r.certified_radius).num("r_max", r.r_max).int("base_points", r.base_points);
            if let Some(w) = r.failure {
                kv.point("witness", w.point).point("witness_base", w.base).num("witness_radius", w.radius).int("witness_footpoints", w.footpoints);
            }
            kv.num("semiconvexity", r.semiconvexity.unwrap_or(f64::NAN)).text("semiconvexity_ok", r.semiconvexity_ok.to_string());
            files.push(("reach.rec".into(), kv.render().into_bytes()));
            let bases = a.boundary();
            let mut rows = Vec::new();
            for x in bases.iter().step_by(bases.len().div_ceil(16).max(1)) {
                let cone = normal_cone(a, x, None)?;
                for h in &cone.representatives {
                    rows.push(vec![fmt_f64(x.x()), fmt_f64(x.y()), fmt_f64(*h)]);
                }
            }
            files.push(("normal_cones.rec".into(), records(&["base_x", "base_y", "normal_angle"], rows).into_bytes()));
        }
        TaskSpec::Charts { center, radius } => {
            let t = &env.scenario.tolerances;
            let p = env.surface.point(center[0], center[1])?;
            let chart = build_chart(&env.surface, &p, *radius, Some(t.ortho_tol))?;
            let l = bilipschitz_constants(&chart, 2000, t.seed)?;
            let d = midpoint_displacement_test(&chart, 1200, t.seed)?;
            let mut kv = KeyValues::new();
            kv.point("center", chart.center.coords())
                .num("radius", chart.radius)
                .point("base_1", chart.bases[0].coords())
                .point("base_2", chart.bases[1].coords())
                .num("defect", chart.defect)
                .num("lambda_min", l.lambda_min)
                .num("lambda_max", l.lambda_max)
                .text("degenerate", l.is_degenerate().to_string())
                .num("displacement_constant", d.constant)
                .num("displacement_exponent", d.exponent);
            for (name, f) in transfer_functions(&chart)? {
                let r = semiconcavity_transfer_test(&chart, &f, 3000, t.seed, env.options.parallelism)?;
                kv.num(&format!("transfer_{name}_surface"), r.surface.concavity)
                    .num(&format!("transfer_{name}_image"), r.image.concavity)
                    .text(&format!("transfer_{name}_agree"), r.pass.to_string());
            }
            files.push(("charts.rec".into(), kv.render().into_bytes()));
        }
        TaskSpec::VerifyAll => {
            let opts = VerifyOptions { parallelism: env.options.parallelism, seed: None };
            let report = verify_all(env.scenario, &opts)?;
            files.push(("report.rec".into(), report.records_text().into_bytes()));
            files.push(("report.txt".into(), report.summary_text().into_bytes()));
            return Ok((files, Some(report)));
        }
    }
    Ok((files, None))
}
