//! Sampled concavity and convexity constants, second differences along
//! curves and the cosh comparison inequality.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closed_set::ClosedSet;
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::surface::{ModelSurface, SurfacePoint};

/// Pair distances are drawn from these fractions of the cap distance, from
/// coarse to fine.
pub const DISTANCE_BANDS: [(f64, f64); 3] = [(0.5, 1.0), (0.125, 0.25), (1.0 / 32.0, 1.0 / 16.0)];

/// A constant is reported infinite when the fine band exceeds this multiple
/// of the coarse band.
pub const BLOWUP_RATIO: f64 = 4.0;
const BLOWUP_FLOOR: f64 = 1e-6;

/// Region in which pairs are sampled.
#[derive(Clone, Copy)]
pub struct SampleDomain<'a> {
    surface: ModelSurface,
    shape: Shape,
    keep: Option<&'a (dyn Fn(&SurfacePoint) -> bool + Sync)>,
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Rect { x: [f64; 2], y: [f64; 2] },
    Ball { center: SurfacePoint, radius: f64 },
}

impl<'a> SampleDomain<'a> {
    pub fn rect(surface: ModelSurface, x: [f64; 2], y: [f64; 2]) -> Self {
        Self { surface, shape: Shape::Rect { x, y }, keep: None }
    }

    pub fn ball(surface: ModelSurface, center: SurfacePoint, radius: f64) -> Self {
        Self { surface, shape: Shape::Ball { center, radius }, keep: None }
    }

    /// Restricts the domain to points accepted by `keep`.
    pub fn filtered(mut self, keep: &'a (dyn Fn(&SurfacePoint) -> bool + Sync)) -> Self {
        self.keep = Some(keep);
        self
    }

    pub fn surface(&self) -> &ModelSurface {
        &self.surface
    }

    pub fn contains(&self, p: &SurfacePoint) -> bool {
        let inside = match self.shape {
            Shape::Rect { x, y } => (x[0]..=x[1]).contains(&p.x()) && (y[0]..=y[1]).contains(&p.y()),
            Shape::Ball { center, radius } => self.surface.distance(&center, p).is_ok_and(|d| d <= radius),
        };
        inside && self.keep.is_none_or(|k| k(p))
    }

    /// Half of the smaller metric side length, or the ball radius.
    pub fn inradius(&self) -> f64 {
        match self.shape {
            Shape::Rect { x, y } => {
                let c = [0.5 * (x[0] + x[1]), 0.5 * (y[0] + y[1])];
                let wx = self.surface.cell_diagonal(c, x[1] - x[0], 0.0);
                let wy = self.surface.cell_diagonal(c, 0.0, y[1] - y[0]);
                0.5 * wx.min(wy)
            }
            Shape::Ball { radius, .. } => radius,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<SurfacePoint> {
        for _ in 0..64 {
            let p = match self.shape {
                Shape::Rect { x, y } => {
                    let (a, b) = (rng.gen_range(x[0]..=x[1]), rng.gen_range(y[0]..=y[1]));
                    if !self.surface.contains(a, b) {
                        continue;
                    }
                    self.surface.point(a, b).ok()?
                }
                Shape::Ball { center, radius } => {
                    let psi = rng.gen_range(-PI..PI);
                    let r = radius * rng.gen::<f64>().sqrt();
                    match self.surface.exp_dir(&center, psi, r) {
                        Ok(p) => p,
                        Err(_) => continue,
                    }
                }
            };
            if self.contains(&p) {
                return Some(p);
            }
        }
        None
    }
}

/// Sampling parameters for the midpoint tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcavityConfig {
    /// Total number of pairs drawn, split evenly between the distance bands.
    pub pair_budget: usize,
    pub seed: u64,
    /// Largest pair distance; defaults to half the inradius of the domain.
    pub cap: Option<f64>,
    pub parallelism: Parallelism,
}

impl Default for ConcavityConfig {
    fn default() -> Self {
        Self { pair_budget: 6000, seed: 0x5eed, cap: None, parallelism: Parallelism::default() }
    }
}

/// Function values of one pair and its midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEval {
    pub band: usize,
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub m: [f64; 2],
    pub d: f64,
    pub f1: f64,
    pub f2: f64,
    pub fm: f64,
}

impl PairEval {
    /// `8 (avg - f(m)) / d^2`: the concavity constant this pair demands.
    pub fn concavity_demand(&self) -> f64 {
        8.0 * (0.5 * (self.f1 + self.f2) - self.fm) / (self.d * self.d)
    }
}

/// Pair witnessing a constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorstPair {
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub m: [f64; 2],
    /// Constant demanded by this pair.
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcavityReport {
    /// Smallest `C` with `f(m) >= avg - C/8 d^2` on all pairs; `INFINITY`
    /// when the demand blows up as pairs shrink.
    pub concavity: f64,
    /// Smallest `C` with `f(m) <= avg + C/8 d^2` on all pairs, same sentinel.
    pub convexity: f64,
    pub band_concavity: [f64; 3],
    pub band_convexity: [f64; 3],
    pub pairs: usize,
    pub skipped: usize,
    pub worst_concave: Option<WorstPair>,
    pub worst_convex: Option<WorstPair>,
}

/// Reduces pair evaluations into a report. Ties keep the earliest pair, so the
/// result does not depend on evaluation order.
pub fn reduce_pairs(evals: &[PairEval], skipped: usize) -> ConcavityReport {
    let mut band_cc = [0.0f64; 3];
    let mut band_cv = [0.0f64; 3];
    let mut worst_cc: Option<WorstPair> = None;
    let mut worst_cv: Option<WorstPair> = None;
    for e in evals {
        let demand = e.concavity_demand();
        let w = |v: f64| WorstPair { p1: e.p1, p2: e.p2, m: e.m, violation: v };
        if demand > band_cc[e.band] {
            band_cc[e.band] = demand;
        }
        if demand > worst_cc.map_or(0.0, |p| p.violation) {
            worst_cc = Some(w(demand));
        }
        if -demand > band_cv[e.band] {
            band_cv[e.band] = -demand;
        }
        if -demand > worst_cv.map_or(0.0, |p| p.violation) {
            worst_cv = Some(w(-demand));
        }
    }
    let finalize = |b: [f64; 3]| {
        if b[2] > BLOWUP_FLOOR && b[2] > BLOWUP_RATIO * b[0] + BLOWUP_FLOOR {
            f64::INFINITY
        } else {
            b.iter().copied().fold(0.0, f64::max)
        }
    };
    ConcavityReport {
        concavity: finalize(band_cc),
        convexity: finalize(band_cv),
        band_concavity: band_cc,
        band_convexity: band_cv,
        pairs: evals.len(),
        skipped,
        worst_concave: worst_cc,
        worst_convex: worst_cv,
    }
}

/// Seeded pair list: `(band, p1, p2)`. Generated sequentially so that the
/// evaluation can be distributed without affecting the result.
fn sample_pairs(domain: &SampleDomain, config: &ConcavityConfig) -> (Vec<(usize, SurfacePoint, SurfacePoint)>, usize) {
    let s = domain.surface;
    let cap = config.cap.unwrap_or(0.5 * domain.inradius());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let per_band = config.pair_budget.div_ceil(DISTANCE_BANDS.len());
    let mut pairs = Vec::with_capacity(config.pair_budget);
    let mut skipped = 0;
    for (band, &(lo, hi)) in DISTANCE_BANDS.iter().enumerate() {
        for _ in 0..per_band {
            let Some(p1) = domain.sample(&mut rng) else {
                skipped += 1;
                continue;
            };
            let d = cap * rng.gen_range(lo..=hi);
            let psi = rng.gen_range(-PI..PI);
            match s.exp_dir(&p1, psi, d) {
                Ok(p2) if domain.contains(&p2) => pairs.push((band, p1, p2)),
                _ => skipped += 1,
            }
        }
    }
    (pairs, skipped)
}

/// Sampled concavity and convexity constants of `f` on the domain.
pub fn midpoint_concavity<F>(f: &F, domain: &SampleDomain, config: &ConcavityConfig) -> Result<ConcavityReport>
where
    F: Fn(&SurfacePoint) -> Result<f64> + Sync,
{
    midpoint_concavity_with(f, domain, config, |_, v| Ok(v))
}

fn midpoint_concavity_with<F, G>(f: &F, domain: &SampleDomain, config: &ConcavityConfig, at_mid: G) -> Result<ConcavityReport>
where
    F: Fn(&SurfacePoint) -> Result<f64> + Sync,
    G: Fn(&SurfacePoint, f64) -> Result<f64> + Sync,
{
    let s = domain.surface;
    let (pairs, mut skipped) = sample_pairs(domain, config);
    let evals = par::map(config.parallelism, &pairs, |&(band, p1, p2)| -> Result<Option<PairEval>> {
        let Some(m) = s.midpoint(&p1, &p2)? else { return Ok(None) };
        if !domain.contains(&m) {
            return Ok(None);
        }
        let fm = f(&m)?;
        Ok(Some(PairEval {
            band,
            p1: p1.coords(),
            p2: p2.coords(),
            m: m.coords(),
            d: s.distance(&p1, &p2)?,
            f1: f(&p1)?,
            f2: f(&p2)?,
            fm: at_mid(&m, fm)?,
        }))
    });
    let mut kept = Vec::with_capacity(evals.len());
    for e in evals {
        match e? {
            Some(e) => kept.push(e),
            None => skipped += 1,
        }
    }
    Ok(reduce_pairs(&kept, skipped))
}

/// Convexity of `d_A` on a ball around `center`, after checking that
/// footpoints are unique on the ball. Midpoints in `A` take the value zero.
pub fn semiconvexity_near_a(a: &ClosedSet, center: &SurfacePoint, radius: f64, config: &ConcavityConfig) -> Result<ConcavityReport> {
    let s = a.surface();
    let tol = a.footpoint_tolerance();
    let mut probes = vec![*center];
    for ring in 1..=8 {
        for k in 0..32 {
            let psi = -PI + TAU * k as f64 / 32.0;
            if let Ok(p) = s.exp_dir(center, psi, radius * ring as f64 / 8.0) {
                probes.push(p);
            }
        }
    }
    for p in &probes {
        match a.footpoints(p) {
            Ok(fp) if !fp.is_unique() => {
                return Err(Error::ReachViolation { coords: p.coords(), count: fp.count().max(2) });
            }
            Ok(_) | Err(Error::InSet(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let domain = SampleDomain::ball(*s, *center, radius);
    let cfg = ConcavityConfig { cap: Some(config.cap.unwrap_or(radius)), ..*config };
    let f = |p: &SurfacePoint| a.eval_da(p);
    midpoint_concavity_with(&f, &domain, &cfg, |_, v| Ok(if v <= tol { 0.0 } else { v }))
}

/// Scaled central second differences of a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondDifferenceProfile {
    pub step: f64,
    /// `(t, (f(t+h) - 2 f(t) + f(t-h)) / h^2)` at interior nodes.
    pub samples: Vec<(f64, f64)>,
    /// Largest change of the profile when the step is halved, at shared nodes.
    pub richardson_gap: f64,
}

impl SecondDifferenceProfile {
    /// Largest jump between consecutive samples.
    pub fn max_jump(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].1 - w[0].1).abs()).fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min)
    }

    /// Difference of the mean profile on `[t0 + gap, t0 + window]` and on
    /// `[t0 - window, t0 - gap]`, in absolute value.
    pub fn jump_at(&self, t0: f64, gap: f64, window: f64) -> f64 {
        let mean = |lo: f64, hi: f64| {
            let v: Vec<f64> = self.samples.iter().filter(|s| s.0 >= lo && s.0 <= hi).map(|s| s.1).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        (mean(t0 + gap, t0 + window) - mean(t0 - window, t0 - gap)).abs()
    }
}

fn second_differences(values: &[f64], h: f64) -> Vec<(f64, f64)> {
    values
        .windows(3)
        .enumerate()
        .map(|(k, w)| ((k + 1) as f64 * h, (w[2] - 2.0 * w[1] + w[0]) / (h * h)))
        .collect()
}

/// Second-difference profile of `trace` on `[0, length]` at step `h`, with a
/// comparison against step `h / 2`.
pub fn second_difference_profile<F>(trace: &F, length: f64, h: f64) -> Result<SecondDifferenceProfile>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0 && 3.0 * h < length) {
        return Err(Error::Usage(format!("step {h} too large for a curve of length {length}")));
    }
    let n = (length / h + 1e-9).floor() as usize;
    let fine: Vec<f64> = (0..=2 * n).map(|k| trace(k as f64 * 0.5 * h)).collect::<Result<_>>()?;
    let coarse: Vec<f64> = fine.iter().step_by(2).copied().collect();
    let samples = second_differences(&coarse, h);
    let halved = second_differences(&fine, 0.5 * h);
    // Coarse node k sits at fine node 2k, i.e. at halved index 2k - 1.
    let richardson_gap = samples
        .iter()
        .enumerate()
        .map(|(k, &(_, v))| (v - halved[2 * (k + 1) - 1].1).abs())
        .fold(0.0, f64::max);
    Ok(SecondDifferenceProfile { step: h, samples, richardson_gap })
}

/// Trace of `f` along the geodesic leaving `x` in frame direction `psi`.
pub fn geodesic_trace<'a, F>(surface: &'a ModelSurface, x: SurfacePoint, psi: f64, f: &'a F) -> impl Fn(f64) -> Result<f64> + 'a
where
    F: Fn(&SurfacePoint) -> Result<f64>,
{
    move |t| f(&surface.exp_dir(&x, psi, t)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoshReport {
    pub pass: bool,
    /// Smallest `cosh(v) - D^2 cosh(v) / step^2` over interior samples.
    pub worst_margin: f64,
    pub worst_index: usize,
    /// Allowance at the worst sample.
    pub allowance: f64,
}

/// Relative slack of the 1-Lipschitz precondition.
const LIPSCHITZ_SLACK: f64 = 1e-3;

/// Checks `(cosh v)'' <= cosh v` by second differences on a uniformly
/// sampled trace. Values and step are multiplied by `scale` first, which
/// normalizes a lower curvature bound `-scale^2` to `-1`. Each sample is
/// allowed `cosh(v) * step^2 / 6`, twice the defect of the equality case.
pub fn cosh_comparison_check(values: &[f64], step: f64, scale: f64) -> Result<CoshReport> {
    if values.len() < 3 {
        return Err(Error::Usage("cosh comparison needs at least three samples".into()));
    }
    let h = step * scale;
    let v: Vec<f64> = values.iter().map(|x| x * scale).collect();
    for (k, w) in v.windows(2).enumerate() {
        if (w[1] - w[0]).abs() > h * (1.0 + LIPSCHITZ_SLACK) + 1e-12 {
            return Err(Error::Precondition(format!(
                "trace is not 1-Lipschitz between samples {k} and {}: slope {}",
                k + 1,
                (w[1] - w[0]).abs() / h
            )));
        }
    }
    let mut report = CoshReport { pass: true, worst_margin: f64::INFINITY, worst_index: 0, allowance: 0.0 };
    for k in 1..v.len() - 1 {
        let c = v[k].cosh();
        let d2 = (v[k + 1].cosh() - 2.0 * c + v[k - 1].cosh()) / (h * h);
        let margin = c - d2;
        let allowance = c * h * h / 6.0 + 1e-12;
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_index = k;
            report.allowance = allowance;
        }
        if margin < -allowance {
            report.pass = false;
        }
    }
    Ok(report)
}
