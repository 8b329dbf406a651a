//! Scenario files: a surface, an optional closed set, a chart region,
//! tolerances and a task list, written in TOML.
//!
//! ```toml
//! name = "sphere-point"
//!
//! [surface]
//! kind = "sphere"
//! curvature = 1.0
//!
//! [set]
//! kind = "point"
//! at = [0.0, 0.0]
//!
//! [region]
//! x = [0.0, 3.141592653589793]
//! y = [-3.141592653589793, 3.141592653589793]
//! resolution = [33, 33]
//!
//! [[task]]
//! kind = "verify-all"
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::Deserialize;

use crate::closed_set::{ClosedSet, NamedFunction, SetDescriptor, DEFAULT_CURVE_SAMPLES};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::field::ChartRegion;
use crate::surface::{ModelSurface, SurfacePoint};

/// Smallest accepted grid resolution along each axis.
pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Plane,
    Sphere {
        #[serde(default = "one")]
        curvature: f64,
    },
    Hyperbolic {
        #[serde(default = "one")]
        curvature: f64,
    },
    Cylinder {
        circumference: f64,
    },
    SlitPlane,
    Cone {
        total_angle: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    Point {
        at: [f64; 2],
    },
    Points {
        at: Vec<[f64; 2]>,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
        samples: Option<usize>,
    },
    Polyline {
        vertices: Vec<[f64; 2]>,
        #[serde(default)]
        closed: bool,
        samples: Option<usize>,
    },
    Ellipse {
        #[serde(default)]
        center: [f64; 2],
        a: f64,
        b: f64,
        samples: Option<usize>,
    },
    /// Sphere only: all points with polar angle at least `min_polar`.
    PolarCap {
        min_polar: f64,
    },
    /// Plane only: `{x : normal . x <= offset}`.
    HalfPlane {
        normal: [f64; 2],
        offset: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    Field,
    Cutlocus,
    Flow {
        starts: Vec<[f64; 2]>,
        #[serde(default = "default_horizon")]
        horizon: f64,
    },
    Reach {
        r_max: f64,
    },
    Charts {
        center: [f64; 2],
        radius: f64,
    },
    VerifyAll,
}

fn default_horizon() -> f64 {
    5.0
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Field => "field",
            TaskSpec::Cutlocus => "cutlocus",
            TaskSpec::Flow { .. } => "flow",
            TaskSpec::Reach { .. } => "reach",
            TaskSpec::Charts { .. } => "charts",
            TaskSpec::VerifyAll => "verify-all",
        }
    }

    fn needs_set(&self) -> bool {
        !matches!(self, TaskSpec::Charts { .. } | TaskSpec::VerifyAll)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub surface: SurfaceSpec,
    pub set: Option<SetSpec>,
    pub region: ChartRegion,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, rename = "task")]
    pub tasks: Vec<TaskSpec>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string().trim_end().to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate().map_err(Error::Scenario)?;
        self.region.validate().map_err(|e| Error::Scenario(e.to_string()))?;
        let [nx, ny] = self.region.resolution;
        if nx < MIN_RESOLUTION || ny < MIN_RESOLUTION {
            return Err(Error::Scenario(format!(
                "region resolution {nx}x{ny} is below the minimum {MIN_RESOLUTION}x{MIN_RESOLUTION}"
            )));
        }
        for t in &self.tasks {
            if t.needs_set() && self.set.is_none() {
                return Err(Error::Scenario(format!("task `{}` needs a [set] section", t.name())));
            }
            match t {
                TaskSpec::Flow { horizon, starts } if !(*horizon > 0.0) || starts.is_empty() => {
                    return Err(Error::Scenario("flow task needs starts and a positive horizon".into()));
                }
                TaskSpec::Reach { r_max } if !(*r_max > 0.0) => {
                    return Err(Error::Scenario(format!("reach task needs a positive r_max, got {r_max}")));
                }
                TaskSpec::Charts { radius, .. } if !(*radius > 0.0) => {
                    return Err(Error::Scenario(format!("charts task needs a positive radius, got {radius}")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn build_surface(&self) -> Result<ModelSurface> {
        let s = match self.surface {
            SurfaceSpec::Plane => ModelSurface::plane(),
            SurfaceSpec::Sphere { curvature } => ModelSurface::sphere(curvature)?,
            SurfaceSpec::Hyperbolic { curvature } => ModelSurface::hyperbolic(curvature)?,
            SurfaceSpec::Cylinder { circumference } => ModelSurface::cylinder(circumference)?,
            SurfaceSpec::SlitPlane => ModelSurface::slit_plane(),
            SurfaceSpec::Cone { total_angle } => ModelSurface::cone(total_angle)?,
        };
        Ok(s.with_angular_tol(self.tolerances.angular_tol))
    }

    /// Builds the closed set on `surface`, applying the footpoint and merge
    /// tolerances of the scenario.
    pub fn build_set(&self, surface: &ModelSurface) -> Result<Option<ClosedSet>> {
        let Some(spec) = &self.set else { return Ok(None) };
        let pt = |c: &[f64; 2]| -> Result<SurfacePoint> { surface.point(c[0], c[1]) };
        let pts = |cs: &[[f64; 2]]| cs.iter().map(pt).collect::<Result<Vec<_>>>();
        let samples = |s: &Option<usize>| s.unwrap_or(DEFAULT_CURVE_SAMPLES);
        let set = match spec {
            SetSpec::Point { at } => ClosedSet::point(*surface, pt(at)?)?,
            SetSpec::Points { at } => ClosedSet::points(*surface, pts(at)?)?,
            SetSpec::Circle { center, radius, samples: n } => ClosedSet::with_samples(
                *surface,
                SetDescriptor::Circle { center: pt(center)?, radius: *radius },
                samples(n),
            )?,
            SetSpec::Polyline { vertices, closed, samples: n } => ClosedSet::with_samples(
                *surface,
                SetDescriptor::Polyline { vertices: pts(vertices)?, closed: *closed },
                samples(n),
            )?,
            SetSpec::Ellipse { center, a, b, samples: n } => ClosedSet::ellipse(*surface, *center, *a, *b, samples(n))?,
            SetSpec::PolarCap { min_polar } => {
                ClosedSet::new(*surface, SetDescriptor::Sublevel(NamedFunction::PolarCap { min_polar: *min_polar }))?
            }
            SetSpec::HalfPlane { normal, offset } => ClosedSet::new(
                *surface,
                SetDescriptor::Sublevel(NamedFunction::HalfPlane { normal: *normal, offset: *offset }),
            )?,
        };
        let mut config = set.config();
        config.merge_angle = self.tolerances.merge_angle;
        if let Some(t) = self.tolerances.footpoint_tol {
            config.tolerance = t;
        }
        Ok(Some(set.with_config(config)))
    }

    /// Analytic reach of the set where one is known.
    pub fn reach_oracle(&self) -> Option<(f64, f64)> {
        match (&self.surface, self.set.as_ref()?) {
            (SurfaceSpec::Plane, SetSpec::Circle { radius, .. }) => Some((*radius, 1e-2)),
            (SurfaceSpec::Plane, SetSpec::Ellipse { a, b, .. }) => {
                let (a, b) = (a.max(*b), a.min(*b));
                Some((b * b / a, 2e-2))
            }
            (SurfaceSpec::Sphere { curvature }, SetSpec::Circle { radius, .. }) => {
                Some((radius.min(PI / curvature.sqrt() - radius), 1e-2))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"
name = "sphere-point"
[surface]
kind = "sphere"
[set]
kind = "point"
at = [0.0, 0.0]
[region]
x = [0.0, 3.141592653589793]
y = [-3.141592653589793, 3.141592653589793]
resolution = [33, 33]
[[task]]
kind = "field"
[[task]]
kind = "flow"
starts = [[1.0, 0.0]]
"#;

    #[test]
    fn parses_sphere_scenario() {
        let s = Scenario::parse(SPHERE).unwrap();
        assert_eq!(s.surface, SurfaceSpec::Sphere { curvature: 1.0 });
        assert_eq!(s.tasks.len(), 2);
        assert_eq!(s.tasks[1], TaskSpec::Flow { starts: vec![[1.0, 0.0]], horizon: 5.0 });
        let surface = s.build_surface().unwrap();
        assert!(s.build_set(&surface).unwrap().is_some());
    }

    #[test]
    fn rejects_small_resolution() {
        let text = SPHERE.replace("[33, 33]", "[8, 8]");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("below the minimum"), "{err}");
    }

    #[test]
    fn unknown_task_reports_location() {
        let text = SPHERE.replace("kind = \"field\"", "kind = \"teleport\"");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("teleport") && err.contains("line"), "{err}");
    }

    #[test]
    fn task_needing_a_set() {
        let text = SPHERE.replace("[set]\nkind = \"point\"\nat = [0.0, 0.0]\n", "");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("needs a [set]"), "{err}");
    }

    #[test]
    fn negative_tolerance_is_rejected() {
        let text = format!("{SPHERE}\n[tolerances]\ntau = -1.0\n");
        assert!(Scenario::parse(&text).unwrap_err().to_string().contains("tau"));
    }

    #[test]
    fn ellipse_reach_oracle() {
        let text = SPHERE
            .replace("kind = \"sphere\"", "kind = \"plane\"")
            .replace("kind = \"point\"\nat = [0.0, 0.0]", "kind = \"ellipse\"\na = 2.0\nb = 1.0");
        let s = Scenario::parse(&text).unwrap();
        assert_eq!(s.reach_oracle(), Some((0.5, 2e-2)));
    }
}
