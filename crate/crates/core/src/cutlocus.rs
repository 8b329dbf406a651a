//! Grid estimates of the cut locus, its invariance under the gradient flow,
//! and the nearest-cut-point comparison.

use crate::closed_set::ClosedSet;
use crate::concavity::{midpoint_concavity, ConcavityConfig, ConcavityReport, SampleDomain};
use crate::config::PRECHECK_TOL;
use crate::error::{Error, Result};
use crate::field::{classify_region, CellLabel, ChartRegion, FieldConfig, FieldGrid};
use crate::flow::{flow, DistanceOracle, StepPolicy, Termination};
use crate::par::{self, Parallelism};
use crate::surface::SurfacePoint;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutSample {
    pub point: SurfacePoint,
    pub grad_norm: f64,
}

/// Cut-candidate samples of a grid together with their closure dilation.
#[derive(Clone, Debug)]
pub struct CutLocusEstimate {
    pub samples: Vec<CutSample>,
    pub tau: f64,
    pub region: ChartRegion,
    /// Largest metric cell diagonal among the samples.
    pub dilation: f64,
    pub grid: FieldGrid,
}

impl CutLocusEstimate {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Distance from `p` to the dilated estimate; `INFINITY` when empty.
    pub fn distance_to(&self, a: &ClosedSet, p: &SurfacePoint) -> f64 {
        let s = a.surface();
        let d = self
            .samples
            .iter()
            .filter_map(|c| s.distance(&c.point, p).ok())
            .fold(f64::INFINITY, f64::min);
        (d - self.dilation).max(0.0)
    }

    /// Index of the sample nearest to `p`.
    pub fn nearest(&self, a: &ClosedSet, p: &SurfacePoint) -> Option<usize> {
        let s = a.surface();
        self.samples
            .iter()
            .enumerate()
            .filter_map(|(k, c)| s.distance(&c.point, p).ok().map(|d| (k, d)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(k, _)| k)
    }

    /// Single-linkage clusters at one and a half cell diagonals.
    pub fn clusters(&self, a: &ClosedSet) -> Vec<Vec<usize>> {
        let s = a.surface();
        let link = 1.5 * self.dilation;
        let n = self.samples.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for seed in 0..n {
            if label[seed] != usize::MAX {
                continue;
            }
            let id = out.len();
            label[seed] = id;
            let mut members = vec![seed];
            let mut k = 0;
            while k < members.len() {
                let cur = self.samples[members[k]].point;
                for j in 0..n {
                    if label[j] == usize::MAX && s.distance(&cur, &self.samples[j].point).is_ok_and(|d| d <= link) {
                        label[j] = id;
                        members.push(j);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Largest distance between two members of a cluster.
    pub fn diameter(&self, a: &ClosedSet, members: &[usize]) -> f64 {
        let s = a.surface();
        let mut d: f64 = 0.0;
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                d = d.max(s.distance(&self.samples[i].point, &self.samples[j].point).unwrap_or(0.0));
            }
        }
        d
    }
}

/// Classifies the region and keeps the cut candidates.
pub fn estimate_cut_locus(a: &ClosedSet, region: &ChartRegion, config: &FieldConfig) -> Result<CutLocusEstimate> {
    let grid = classify_region(a, region, config)?;
    Ok(estimate_from_grid(a, grid))
}

pub fn estimate_from_grid(a: &ClosedSet, grid: FieldGrid) -> CutLocusEstimate {
    let s = a.surface();
    let h = grid.region.spacing();
    let mut samples = Vec::new();
    let mut dilation: f64 = 0.0;
    for c in grid.with_label(CellLabel::CutCandidate) {
        let p = c.point.expect("classified cells lie in the domain");
        samples.push(CutSample { point: p, grad_norm: c.grad_norm() });
        dilation = dilation.max(s.cell_diagonal(c.coords, h[0], h[1]));
    }
    if samples.is_empty() {
        let mid = [0.5 * (grid.region.x[0] + grid.region.x[1]), 0.5 * (grid.region.y[0] + grid.region.y[1])];
        dilation = s.cell_diagonal(mid, h[0], h[1]);
    }
    CutLocusEstimate { samples, tau: grid.tau, region: grid.region, dilation, grid }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    /// Largest distance from a curve node to the dilated estimate.
    pub max_drift: f64,
    pub worst_start: Option<[f64; 2]>,
    pub curves: usize,
    /// Starts whose curves left the surface; excluded from the maximum.
    pub domain_exits: Vec<[f64; 2]>,
}

/// Follows gradient curves from up to `sample_count` estimate points, evenly
/// strided, inside the estimate's region.
pub fn flow_invariance_test(
    a: &ClosedSet,
    estimate: &CutLocusEstimate,
    horizon: f64,
    sample_count: usize,
    policy: &StepPolicy,
    parallelism: Parallelism,
) -> Result<DriftReport> {
    if estimate.is_empty() {
        return Err(Error::InsufficientData("cut-locus estimate is empty".into()));
    }
    let stride = estimate.len().div_ceil(sample_count.max(1)).max(1);
    let starts: Vec<SurfacePoint> = estimate.samples.iter().step_by(stride).map(|c| c.point).collect();
    let oracle = DistanceOracle::new(a).with_tie_tolerance(estimate.grid.tie_tol);
    let region = estimate.region;
    let results = par::map(parallelism, &starts, |x0| -> Result<(f64, bool)> {
        let inside = |p: &SurfacePoint| region.contains(p.coords());
        let curve = flow(&oracle, x0, horizon, policy, Some(&inside))?;
        let drift = curve.nodes.iter().map(|n| estimate.distance_to(a, &n.point)).fold(0.0, f64::max);
        Ok((drift, curve.termination == Termination::DomainExit))
    });
    let mut report = DriftReport { max_drift: 0.0, worst_start: None, curves: starts.len(), domain_exits: Vec::new() };
    for (x0, r) in starts.iter().zip(results) {
        let (drift, exited) = r?;
        if exited {
            report.domain_exits.push(x0.coords());
        } else if drift > report.max_drift || report.worst_start.is_none() {
            report.max_drift = report.max_drift.max(drift);
            report.worst_start = Some(x0.coords());
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NearestCutRecord {
    pub x: [f64; 2],
    /// Nearest estimate point.
    pub x0: [f64; 2],
    pub da_x: f64,
    pub da_x0: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NearestCutReport {
    pub records: Vec<NearestCutRecord>,
    pub pass: bool,
    /// Whether the concavity pre-check certified concavity of `d_A`.
    pub precondition_met: bool,
    pub precheck: ConcavityReport,
    /// Set when the test could not run.
    pub skipped: Option<String>,
}

/// For every query `x`, compares `d_A` at the nearest cut-locus sample `x0`
/// with `d_A(x)`. The pre-check measures the concavity constant of `d_A` on
/// `domain`; when it exceeds `precheck_tol` the outcome is informational.
pub fn nearest_cut_point_test(
    a: &ClosedSet,
    estimate: &CutLocusEstimate,
    queries: &[SurfacePoint],
    domain: &SampleDomain,
    concavity: &ConcavityConfig,
    precheck_tol: Option<f64>,
    tol: f64,
) -> Result<NearestCutReport> {
    let f = |p: &SurfacePoint| a.eval_da(p);
    let precheck = midpoint_concavity(&f, domain, concavity)?;
    let precondition_met = precheck.concavity <= precheck_tol.unwrap_or(PRECHECK_TOL);
    if estimate.is_empty() {
        return Ok(NearestCutReport {
            records: Vec::new(),
            pass: true,
            precondition_met,
            precheck,
            skipped: Some("cut-locus estimate is empty".into()),
        });
    }
    let mut records = Vec::with_capacity(queries.len());
    for x in queries {
        let k = estimate.nearest(a, x).expect("estimate is nonempty");
        let x0 = estimate.samples[k].point;
        let (da_x, da_x0) = (a.eval_da(x)?, a.eval_da(&x0)?);
        records.push(NearestCutRecord { x: x.coords(), x0: x0.coords(), da_x, da_x0, pass: da_x0 >= da_x - tol });
    }
    let pass = records.iter().all(|r| r.pass);
    Ok(NearestCutReport { records, pass, precondition_met, precheck, skipped: None })
}
