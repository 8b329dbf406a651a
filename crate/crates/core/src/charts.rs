//! Distance coordinates `x -> (d(x, p1), d(x, p2))` around a point.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::concavity::{reduce_pairs, ConcavityReport, PairEval, DISTANCE_BANDS};
use crate::config::ORTHO_TOL;
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::surface::{angle, ModelSurface, SurfacePoint};

/// Number of base directions tried when building a chart.
const SWEEP: usize = 360;

/// Base points are placed at this multiple of the domain radius.
pub const BASE_RADIUS_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceChart {
    pub surface: ModelSurface,
    pub center: SurfacePoint,
    pub bases: [SurfacePoint; 2],
    /// Radius of the domain ball around the center.
    pub radius: f64,
    /// `|angle(v1, v2) - pi/2|` for the initial directions from the center.
    pub defect: f64,
}

impl DistanceChart {
    /// Chart with prescribed base points.
    pub fn with_bases(surface: ModelSurface, center: SurfacePoint, bases: [SurfacePoint; 2], radius: f64) -> Result<Self> {
        let defect = orthogonality_defect(&surface, &center, &bases)?
            .ok_or_else(|| Error::Usage("base points must be joined to the center by unique geodesics".into()))?;
        for b in &bases {
            if surface.distance(&center, b)? <= radius {
                return Err(Error::Usage("base points must lie outside the domain ball".into()));
            }
        }
        Ok(Self { surface, center, bases, radius, defect })
    }

    pub fn eval(&self, x: &SurfacePoint) -> Result<[f64; 2]> {
        Ok([self.surface.distance(x, &self.bases[0])?, self.surface.distance(x, &self.bases[1])?])
    }

    /// Uniform-in-radius sample of the domain ball.
    fn sample(&self, rng: &mut ChaCha8Rng, max_radius: f64) -> Result<SurfacePoint> {
        let psi = rng.gen_range(-PI..PI);
        let r = max_radius * rng.gen::<f64>().sqrt();
        self.surface.exp_dir(&self.center, psi, r)
    }
}

fn orthogonality_defect(s: &ModelSurface, p: &SurfacePoint, bases: &[SurfacePoint; 2]) -> Result<Option<f64>> {
    let mut v = Vec::with_capacity(2);
    for b in bases {
        let dirs = s.initial_directions(p, b, 0.0, 1)?;
        if dirs.angles.len() != 1 || dirs.continuum || !dirs.attained {
            return Ok(None);
        }
        v.push(s.unit_vector(*p, dirs.angles[0]));
    }
    Ok(Some((angle(&v[0], &v[1])? - FRAC_PI_2).abs()))
}

/// Sweeps base directions `(psi, psi + pi/2)` at three domain radii and keeps
/// the pair with the smallest orthogonality defect.
pub fn build_chart(surface: &ModelSurface, p: &SurfacePoint, radius: f64, ortho_tol: Option<f64>) -> Result<DistanceChart> {
    let tol = ortho_tol.unwrap_or(ORTHO_TOL);
    let scale = surface.injectivity_scale(p);
    if !(radius > 0.0 && 2.0 * radius < scale) {
        return Err(Error::Precondition(format!(
            "chart radius {radius} needs a uniquely geodesic ball; injectivity scale at the center is {scale}"
        )));
    }
    let r = BASE_RADIUS_FACTOR * radius;
    let mut best: Option<DistanceChart> = None;
    for k in 0..SWEEP {
        let psi = -PI + TAU * k as f64 / SWEEP as f64;
        let (Ok(b1), Ok(b2)) = (surface.exp_dir(p, psi, r), surface.exp_dir(p, psi + FRAC_PI_2, r)) else { continue };
        let Some(defect) = orthogonality_defect(surface, p, &[b1, b2])? else { continue };
        if surface.distance(p, &b1)? <= radius || surface.distance(p, &b2)? <= radius {
            continue;
        }
        if best.is_none_or(|b| defect < b.defect) {
            best = Some(DistanceChart { surface: *surface, center: *p, bases: [b1, b2], radius, defect });
        }
    }
    match best {
        Some(c) if c.defect <= tol => Ok(c),
        Some(c) => Err(Error::ChartConstruction { best: c.defect, tol }),
        None => Err(Error::ChartConstruction { best: f64::INFINITY, tol }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiLipschitz {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub pairs: usize,
}

impl BiLipschitz {
    /// Whether the lower constant is too small to trust the chart.
    pub fn is_degenerate(&self) -> bool {
        self.lambda_min < 0.1
    }
}

/// Ratios `|F(x) - F(y)| / d(x, y)` over random pairs in the domain ball.
pub fn bilipschitz_constants(chart: &DistanceChart, samples: usize, seed: u64) -> Result<BiLipschitz> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BiLipschitz { lambda_min: f64::INFINITY, lambda_max: 0.0, pairs: 0 };
    for _ in 0..samples {
        let (x, y) = (chart.sample(&mut rng, chart.radius)?, chart.sample(&mut rng, chart.radius)?);
        let d = chart.surface.distance(&x, &y)?;
        if d < 1e-9 * chart.radius {
            continue;
        }
        let (fx, fy) = (chart.eval(&x)?, chart.eval(&y)?);
        let ratio = (fx[0] - fy[0]).hypot(fx[1] - fy[1]) / d;
        out.lambda_min = out.lambda_min.min(ratio);
        out.lambda_max = out.lambda_max.max(ratio);
        out.pairs += 1;
    }
    if out.pairs == 0 {
        return Err(Error::InsufficientData("no usable pairs in the chart domain".into()));
    }
    Ok(out)
}

/// Number of dyadic pair-distance scales in the displacement test.
pub const DISPLACEMENT_SCALES: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementReport {
    /// `sup |F(m) - (F(q1) + F(q2)) / 2| / d(q1, q2)^2`.
    pub constant: f64,
    /// Slope of `log(mean displacement)` against `log(d)`.
    pub exponent: f64,
    /// `(d, mean displacement)` per scale, coarse to fine.
    pub scales: Vec<(f64, f64)>,
}

/// Midpoint displacement of the chart over pairs `(q1, exp(q1, u, d))` with
/// `d` halved over six scales, reusing the same `(q1, u)` at every scale.
pub fn midpoint_displacement_test(chart: &DistanceChart, pair_budget: usize, seed: u64) -> Result<DisplacementReport> {
    let s = chart.surface;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_scale = (pair_budget / DISPLACEMENT_SCALES).max(1);
    let starts: Vec<(SurfacePoint, f64)> = (0..per_scale)
        .map(|_| Ok((chart.sample(&mut rng, 0.5 * chart.radius)?, rng.gen_range(-PI..PI))))
        .collect::<Result<_>>()?;
    let d0 = 0.5 * chart.radius;
    let mut constant: f64 = 0.0;
    let mut scales = Vec::with_capacity(DISPLACEMENT_SCALES);
    for k in 0..DISPLACEMENT_SCALES {
        let d = d0 / (1u64 << k) as f64;
        let mut total = 0.0;
        let mut count = 0usize;
        for (q1, u) in &starts {
            let q2 = s.exp_dir(q1, *u, d)?;
            let Some(m) = s.midpoint(q1, &q2)? else { continue };
            let disp = displacement(chart, q1, &q2, &m)?;
            let dd = s.distance(q1, &q2)?;
            if dd > 0.0 {
                constant = constant.max(disp / (dd * dd));
            }
            total += disp;
            count += 1;
        }
        if count == 0 {
            return Err(Error::InsufficientData("no pair with a defined midpoint".into()));
        }
        scales.push((d, total / count as f64));
    }
    Ok(DisplacementReport { constant, exponent: fit_slope(&scales), scales })
}

/// Displacement of the image of the midpoint from the Euclidean midpoint.
pub fn displacement(chart: &DistanceChart, q1: &SurfacePoint, q2: &SurfacePoint, m: &SurfacePoint) -> Result<f64> {
    let (f1, f2, fm) = (chart.eval(q1)?, chart.eval(q2)?, chart.eval(m)?);
    Ok((fm[0] - 0.5 * (f1[0] + f2[0])).hypot(fm[1] - 0.5 * (f1[1] + f2[1])))
}

/// Least-squares slope in log-log coordinates.
fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferReport {
    /// Constants of `f o F` with surface midpoints.
    pub surface: ConcavityReport,
    /// Constants of `f` on the image with Euclidean midpoints.
    pub image: ConcavityReport,
    pub pass: bool,
}

/// Semiconcavity of `f o F` on the domain ball against semiconcavity of `f`
/// on the image. Passes when both concavity constants are finite or both are
/// reported infinite.
pub fn semiconcavity_transfer_test<F>(
    chart: &DistanceChart,
    f: &F,
    pair_budget: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<TransferReport>
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    let s = chart.surface;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 0.5 * chart.radius;
    let per_band = pair_budget.div_ceil(DISTANCE_BANDS.len());
    let mut pairs = Vec::with_capacity(pair_budget);
    for (band, &(lo, hi)) in DISTANCE_BANDS.iter().enumerate() {
        for _ in 0..per_band {
            let q1 = chart.sample(&mut rng, chart.radius)?;
            let q2 = s.exp_dir(&q1, rng.gen_range(-PI..PI), cap * rng.gen_range(lo..=hi))?;
            if s.distance(&chart.center, &q2)? <= chart.radius {
                pairs.push((band, q1, q2));
            }
        }
    }
    let evals = par::map(parallelism, &pairs, |&(band, q1, q2)| -> Result<Option<(PairEval, PairEval)>> {
        let Some(m) = s.midpoint(&q1, &q2)? else { return Ok(None) };
        let (y1, y2, ym) = (chart.eval(&q1)?, chart.eval(&q2)?, chart.eval(&m)?);
        let on_surface = PairEval { band, p1: y1, p2: y2, m: ym, d: s.distance(&q1, &q2)?, f1: f(y1), f2: f(y2), fm: f(ym) };
        let mid = [0.5 * (y1[0] + y2[0]), 0.5 * (y1[1] + y2[1])];
        let d = (y1[0] - y2[0]).hypot(y1[1] - y2[1]);
        let on_image = PairEval { band, p1: y1, p2: y2, m: mid, d, f1: f(y1), f2: f(y2), fm: f(mid) };
        Ok((d > 0.0).then_some((on_surface, on_image)))
    });
    let mut surface_pairs = Vec::new();
    let mut image_pairs = Vec::new();
    let mut skipped = 0;
    for e in evals {
        match e? {
            Some((a, b)) => {
                surface_pairs.push(a);
                image_pairs.push(b);
            }
            None => skipped += 1,
        }
    }
    let surface = reduce_pairs(&surface_pairs, skipped);
    let image = reduce_pairs(&image_pairs, skipped);
    let pass = surface.concavity.is_finite() == image.concavity.is_finite();
    Ok(TransferReport { surface, image, pass })
}

/// The three bundled transfer functions, with kinks through `F(center)`.
pub fn transfer_functions(chart: &DistanceChart) -> Result<Vec<(&'static str, Box<dyn Fn([f64; 2]) -> f64 + Sync>)>> {
    let c = chart.eval(&chart.center)?;
    Ok(vec![
        ("euclidean-norm", Box::new(|y: [f64; 2]| y[0].hypot(y[1]))),
        ("concave-kink", Box::new(move |y: [f64; 2]| -(y[0] - c[0]).abs())),
        ("convex-kink", Box::new(move |y: [f64; 2]| (y[0] - c[0]).abs())),
    ])
}
