//! Normal cones, reach estimation by tube bisection and the normal-geodesic
//! property.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closed_set::ClosedSet;
use crate::concavity::{semiconvexity_near_a, ConcavityConfig};
use crate::config::{BISECTION_TOL, NORMAL_CONE_TOL};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::surface::{normalize_angle, SurfacePoint};

/// Candidate directions tested for membership in a normal cone.
const NORMAL_GRID: usize = 720;

/// Angular pitch of tube samples on wide normal arcs.
const ARC_PITCH: f64 = 1.0 / 16.0;

/// Default neighbour radius in units of the sampling pitch.
const NEIGHBOR_PITCHES: f64 = 2.5;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalCone {
    pub base: SurfacePoint,
    /// Clustered tangent directions (frame angles).
    pub tangents: Vec<f64>,
    /// Accepted normal directions (frame angles), sorted.
    pub normals: Vec<f64>,
    /// Directions used for tube sampling: cluster centres of narrow normal
    /// arcs, and evenly spaced samples of wide arcs.
    pub representatives: Vec<f64>,
}

impl NormalCone {
    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

/// Groups angles into circular clusters separated by gaps wider than `gap`.
/// Returns `(start, width)` of each cluster, or a single full circle.
fn circular_arcs(sorted: &[f64], gap: f64) -> Vec<(f64, f64)> {
    let n = sorted.len();
    if n == 0 {
        return Vec::new();
    }
    let next_gap = |i: usize| if i + 1 < n { sorted[i + 1] - sorted[i] } else { sorted[0] + TAU - sorted[n - 1] };
    let breaks: Vec<usize> = (0..n).filter(|&i| next_gap(i) > gap).collect();
    if breaks.is_empty() {
        return vec![(sorted[0], TAU)];
    }
    breaks
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let start = (b + 1) % n;
            let end = breaks[(k + 1) % breaks.len()];
            let width = (sorted[end] - sorted[start]).rem_euclid(TAU);
            (sorted[start], width)
        })
        .collect()
}

/// Sampled normal cone of `A` at `x`. Tangents are the clustered initial
/// directions to set points within `neighbor_radius`; a direction is normal
/// when it makes an angle of at least `pi/2 - NORMAL_CONE_TOL` with each.
pub fn normal_cone(a: &ClosedSet, x: &SurfacePoint, neighbor_radius: Option<f64>) -> Result<NormalCone> {
    let radius = neighbor_radius.unwrap_or(NEIGHBOR_PITCHES * a.pitch()).max(1e-9);
    let merge = a.config().merge_angle;
    let mut raw: Vec<f64> = a.directions_to_neighbors(x, radius).into_iter().map(normalize_angle).collect();
    raw.sort_by(f64::total_cmp);
    let tangents: Vec<f64> = circular_arcs(&raw, merge)
        .into_iter()
        .flat_map(|(start, width)| {
            if width >= TAU {
                raw.clone()
            } else {
                vec![normalize_angle(start + 0.5 * width)]
            }
        })
        .collect();
    let threshold = FRAC_PI_2 - NORMAL_CONE_TOL;
    let is_normal = |u: f64| tangents.iter().all(|&t| normalize_angle(u - t).abs() >= threshold);
    let perpendiculars: Vec<f64> = tangents
        .iter()
        .flat_map(|t| [normalize_angle(t + FRAC_PI_2), normalize_angle(t - FRAC_PI_2)])
        .filter(|&u| is_normal(u))
        .collect();
    let mut candidates: Vec<f64> = (0..NORMAL_GRID).map(|k| -PI + TAU * k as f64 / NORMAL_GRID as f64).collect();
    candidates.extend(&perpendiculars);
    let mut normals: Vec<f64> = candidates
        .into_iter()
        .filter(|&u| is_normal(u))
        .collect();
    normals.sort_by(f64::total_cmp);
    normals.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
    let mut representatives = Vec::new();
    for (start, width) in circular_arcs(&normals, 2.5 * TAU / NORMAL_GRID as f64) {
        if width >= TAU {
            let k = (TAU / ARC_PITCH).ceil() as usize;
            representatives.extend((0..k).map(|j| -PI + TAU * j as f64 / k as f64));
        } else if width <= 4.0 * NORMAL_CONE_TOL {
            // Prefer the exact perpendiculars to the tangents over grid candidates.
            let inside: Vec<f64> = perpendiculars
                .iter()
                .map(|&u| (u - start).rem_euclid(TAU))
                .filter(|&o| o <= width + 1e-12)
                .collect();
            let offset = if inside.is_empty() { 0.5 * width } else { inside.iter().sum::<f64>() / inside.len() as f64 };
            representatives.push(normalize_angle(start + offset));
        } else {
            // Pull the ends inside by the filter tolerance.
            let (lo, span) = (start + NORMAL_CONE_TOL, width - 2.0 * NORMAL_CONE_TOL);
            let k = (span / ARC_PITCH).ceil().max(1.0) as usize;
            representatives.extend((0..=k).map(|j| normalize_angle(lo + span * j as f64 / k as f64)));
        }
    }
    Ok(NormalCone { base: *x, tangents, normals, representatives })
}

/// Point with two or more footpoints found while testing a tube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReachWitness {
    pub point: [f64; 2],
    pub base: [f64; 2],
    pub radius: f64,
    pub footpoints: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachReport {
    /// Estimated reach; `INFINITY` when the largest tube passed.
    pub reach: f64,
    /// Largest tube radius whose samples all had unique footpoints.
    pub certified_radius: f64,
    pub failure: Option<ReachWitness>,
    pub r_max: f64,
    pub base_points: usize,
    /// Largest convexity constant of `d_A` on balls of radius `reach / 2`
    /// around sampled points of `A`; `None` when the check did not run.
    pub semiconvexity: Option<f64>,
    pub semiconvexity_ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReachConfig {
    pub bisection_tol: f64,
    pub seed: u64,
    pub cross_check_points: usize,
    pub parallelism: Parallelism,
}

impl Default for ReachConfig {
    fn default() -> Self {
        Self { bisection_tol: BISECTION_TOL, seed: 0x5eed, cross_check_points: 10, parallelism: Parallelism::default() }
    }
}

/// Tube test at radius `r`: the first failing tube point, if any.
fn tube_failure(a: &ClosedSet, cones: &[NormalCone], r: f64, parallelism: Parallelism) -> Result<Option<ReachWitness>> {
    let s = a.surface();
    let tol = a.footpoint_tolerance();
    let foot_tol = tol.max(1e-6);
    let pitch = a.pitch().max(1e-300);
    let stride = ((r / 16.0) / pitch).floor().max(1.0) as usize;
    let bases: Vec<&NormalCone> = cones.iter().step_by(stride).collect();
    let found = par::map(parallelism, &bases, |cone| -> Result<Option<ReachWitness>> {
        for &h in &cone.representatives {
            let p = match s.exp_dir(&cone.base, h, r) {
                Ok(p) => p,
                Err(Error::DomainExit { .. } | Error::ApexHit { .. } | Error::OutsideDomain { .. }) => continue,
                Err(e) => return Err(e),
            };
            let fp = match a.footpoints(&p) {
                Ok(fp) => fp,
                Err(Error::InSet(_)) => {
                    return Ok(Some(ReachWitness { point: p.coords(), base: cone.base.coords(), radius: r, footpoints: 0 }))
                }
                Err(e) => return Err(e),
            };
            let near_base = fp.footpoints.iter().all(|f| s.distance(&f.point, &cone.base).is_ok_and(|d| d <= foot_tol));
            if !fp.is_unique() || (fp.distance - r).abs() > foot_tol || !near_base {
                return Ok(Some(ReachWitness {
                    point: p.coords(),
                    base: cone.base.coords(),
                    radius: r,
                    footpoints: if fp.is_unique() { 1 } else { fp.count().max(2) },
                }));
            }
        }
        Ok(None)
    });
    for f in found {
        if let Some(w) = f? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// Bisection on the tube radius in `(0, r_max]`.
pub fn reach(a: &ClosedSet, r_max: f64, config: &ReachConfig) -> Result<ReachReport> {
    if !(r_max > 0.0) {
        return Err(Error::Usage(format!("r_max must be positive, got {r_max}")));
    }
    if a.pitch() > 4.0 * config.bisection_tol {
        return Err(Error::Resolution(format!(
            "sampling pitch {} exceeds four bisection tolerances ({})",
            a.pitch(),
            4.0 * config.bisection_tol
        )));
    }
    let cones = par::map(config.parallelism, a.boundary(), |x| normal_cone(a, x, None));
    let cones: Vec<NormalCone> = cones.into_iter().collect::<Result<Vec<_>>>()?.into_iter().filter(|c| !c.is_empty()).collect();
    let mut report = ReachReport {
        reach: f64::INFINITY,
        certified_radius: r_max,
        failure: None,
        r_max,
        base_points: cones.len(),
        semiconvexity: None,
        semiconvexity_ok: false,
    };
    if let Some(w) = tube_failure(a, &cones, r_max, config.parallelism)? {
        let (mut lo, mut hi, mut witness) = (0.0, r_max, w);
        while hi - lo > config.bisection_tol {
            let mid = 0.5 * (lo + hi);
            match tube_failure(a, &cones, mid, config.parallelism)? {
                Some(w) => {
                    hi = mid;
                    witness = w;
                }
                None => lo = mid,
            }
        }
        report.reach = 0.5 * (lo + hi);
        report.certified_radius = lo;
        report.failure = Some(witness);
    }
    let radius = 0.5 * report.reach.min(r_max);
    if radius > 0.0 && config.cross_check_points > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let cc = ConcavityConfig { pair_budget: 600, seed: config.seed, cap: None, parallelism: config.parallelism };
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for _ in 0..config.cross_check_points {
            let x = cones[rng.gen_range(0..cones.len())].base;
            match semiconvexity_near_a(a, &x, radius, &cc) {
                Ok(r) => worst = worst.max(r.convexity),
                Err(Error::ReachViolation { .. }) => ok = false,
                Err(e) => return Err(e),
            }
        }
        report.semiconvexity = Some(worst);
        report.semiconvexity_ok = ok && worst.is_finite();
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalGeodesicReport {
    pub max_residual: f64,
    /// Largest parameter actually tested.
    pub s_tested: f64,
    pub truncated: bool,
    pub pass: bool,
}

/// Sup over `s` of `|d_A(exp(x, h, s)) - s|`, sampled at 64 parameters up to
/// `s_max`, truncated to `certified_radius` when given.
pub fn normal_geodesic_test(
    a: &ClosedSet,
    x: &SurfacePoint,
    h: f64,
    s_max: f64,
    certified_radius: Option<f64>,
) -> Result<NormalGeodesicReport> {
    let s = a.surface();
    let limit = certified_radius.map_or(s_max, |c| s_max.min(c));
    let truncated = limit < s_max;
    let mut worst: f64 = 0.0;
    let mut tested = 0.0;
    for k in 1..=64 {
        let t = limit * k as f64 / 64.0;
        let p = match s.exp_dir(x, h, t) {
            Ok(p) => p,
            Err(Error::DomainExit { .. } | Error::ApexHit { .. }) => break,
            Err(e) => return Err(e),
        };
        worst = worst.max((a.eval_da(&p)? - t).abs());
        tested = t;
    }
    Ok(NormalGeodesicReport {
        max_residual: worst,
        s_tested: tested,
        truncated,
        pass: worst <= 2.0 * a.footpoint_tolerance(),
    })
}
