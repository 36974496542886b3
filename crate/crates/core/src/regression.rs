//! Log-log least squares of read counts against visibility, and the sweep
//! over discrimination levels that picks the level explaining reads best.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, TopicId};
use crate::visibility::{DGrid, Discrimination, RankWeights, VisibilityError};

/// Smallest sample a fit is reported for.
pub const MIN_FIT_POINTS: usize = 3;

/// Default category size threshold for per-category reports.
pub const DEFAULT_MIN_TOPICS: usize = 30;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RegressionError {
    #[error("need at least {MIN_FIT_POINTS} points for a fit, got {n}{}", at.map(|d| format!(" at d = {d}")).unwrap_or_default())]
    TooFewPoints { n: usize, at: Option<f64> },
    #[error("degenerate variance: all {axis} values are equal")]
    DegenerateVariance { axis: &'static str },
    #[error("point {index} is not positive (v = {v}, reads = {reads})")]
    NonPositivePoint { index: usize, v: f64, reads: u64 },
    #[error("sweep grid needs at least 2 points, got {0}")]
    GridTooShort(usize),
    #[error("min_topics must be at least {MIN_FIT_POINTS}, got {0}")]
    InvalidMinTopics(usize),
    #[error(transparent)]
    Grid(#[from] VisibilityError),
}

/// Outcome of one log10-log10 least squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Fits `log10(reads) = slope * log10(v) + intercept`.
///
/// R² is the squared sample correlation `Sxy² / (Sxx Syy)`, which equals
/// `1 - SS_res / SS_tot` for a least-squares line with intercept.
pub fn ols_loglog(points: &[(f64, u64)]) -> Result<FitResult, RegressionError> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for (index, &(v, reads)) in points.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() || reads == 0 {
            return Err(RegressionError::NonPositivePoint { index, v, reads });
        }
        xs.push(v.log10());
        ys.push((reads as f64).log10());
    }
    fit_xy(&xs, &ys)
}

fn fit_xy(xs: &[f64], ys: &[f64]) -> Result<FitResult, RegressionError> {
    let n = xs.len();
    if n < MIN_FIT_POINTS {
        return Err(RegressionError::TooFewPoints { n, at: None });
    }
    let inv_n = 1.0 / n as f64;
    let x_mean = xs.iter().sum::<f64>() * inv_n;
    let y_mean = ys.iter().sum::<f64>() * inv_n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(RegressionError::DegenerateVariance { axis: "log10(v)" });
    }
    if syy == 0.0 {
        return Err(RegressionError::DegenerateVariance { axis: "log10(reads)" });
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    // Cauchy-Schwarz bounds this by 1; rounding can overshoot by an ulp on
    // perfectly collinear data
    let r2 = ((sxy / sxx) * (sxy / syy)).min(1.0);
    Ok(FitResult {
        slope,
        intercept,
        r2,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    NoMeta,
    NoTrajectory,
    ZeroReads,
    ZeroVisibility,
}

impl ExclusionReason {
    pub fn code(&self) -> &'static str {
        match self {
            ExclusionReason::NoMeta => "no-meta",
            ExclusionReason::NoTrajectory => "no-trajectory",
            ExclusionReason::ZeroReads => "zero-reads",
            ExclusionReason::ZeroVisibility => "zero-visibility",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub topic: TopicId,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPoint {
    pub topic: TopicId,
    pub v: f64,
    pub reads: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionInput {
    pub points: Vec<RegressionPoint>,
    pub exclusions: Vec<Exclusion>,
}

impl RegressionInput {
    pub fn pairs(&self) -> Vec<(f64, u64)> {
        self.points.iter().map(|p| (p.v, p.reads)).collect()
    }
}

/// Joined topic with positive reads, ready to be evaluated at any `d`.
struct Candidate<'a> {
    hist: &'a [u64],
    log_reads: f64,
}

/// Joins trajectories with metadata. Returns the regressable candidates in
/// topic order plus every exclusion that does not depend on `d`.
fn join<'a>(ds: &'a Dataset) -> (Vec<(&'a TopicId, Candidate<'a>, u64)>, Vec<Exclusion>) {
    let mut candidates = Vec::new();
    let mut exclusions = Vec::new();
    for (id, traj) in &ds.trajectories {
        match ds.meta.get(id) {
            None => exclusions.push(Exclusion {
                topic: id.clone(),
                reason: ExclusionReason::NoMeta,
            }),
            Some(m) if m.n_reads == 0 => exclusions.push(Exclusion {
                topic: id.clone(),
                reason: ExclusionReason::ZeroReads,
            }),
            Some(m) => candidates.push((
                id,
                Candidate {
                    hist: traj.histogram(),
                    log_reads: (m.n_reads as f64).log10(),
                },
                m.n_reads,
            )),
        }
    }
    for id in ds.meta.keys() {
        if !ds.trajectories.contains_key(id) {
            exclusions.push(Exclusion {
                topic: id.clone(),
                reason: ExclusionReason::NoTrajectory,
            });
        }
    }
    (candidates, exclusions)
}

/// The `(v, reads)` points that enter the fit at level `d`, and why every
/// other topic was left out.
pub fn filter_regression_points(ds: &Dataset, d: Discrimination) -> RegressionInput {
    let (candidates, mut exclusions) = join(ds);
    let weights = RankWeights::new(ds.r_cap, d);
    let mut points = Vec::with_capacity(candidates.len());
    for (id, c, reads) in candidates {
        let v = weights.apply(c.hist);
        if v > 0.0 {
            points.push(RegressionPoint {
                topic: id.clone(),
                v,
                reads,
            });
        } else {
            exclusions.push(Exclusion {
                topic: id.clone(),
                reason: ExclusionReason::ZeroVisibility,
            });
        }
    }
    exclusions.sort_by(|a, b| a.topic.cmp(&b.topic).then(a.reason.cmp(&b.reason)));
    RegressionInput { points, exclusions }
}

/// Where the best grid point sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Interior,
    AtLowerEdge,
    AtUpperEdge,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Interior => "interior",
            Boundary::AtLowerEdge => "at_lower_edge",
            Boundary::AtUpperEdge => "at_upper_edge",
        }
    }

    pub fn is_edge(&self) -> bool {
        !matches!(self, Boundary::Interior)
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interior" => Ok(Boundary::Interior),
            "at_lower_edge" => Ok(Boundary::AtLowerEdge),
            "at_upper_edge" => Ok(Boundary::AtUpperEdge),
            other => Err(format!("unknown boundary flag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub d: f64,
    pub r2: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: Vec<SweepPoint>,
    pub d_max: f64,
    pub r2_max: f64,
    pub boundary: Boundary,
    /// Sample size at `d_max`.
    pub n: usize,
}

impl SweepResult {
    /// Picks the smallest `d` attaining the maximum R² and flags edge maxima.
    pub fn from_curve(curve: Vec<SweepPoint>) -> Result<Self, RegressionError> {
        if curve.len() < 2 {
            return Err(RegressionError::GridTooShort(curve.len()));
        }
        let mut best = 0;
        for (i, p) in curve.iter().enumerate().skip(1) {
            if p.r2 > curve[best].r2 {
                best = i;
            }
        }
        let boundary = if best == 0 {
            Boundary::AtLowerEdge
        } else if best == curve.len() - 1 {
            Boundary::AtUpperEdge
        } else {
            Boundary::Interior
        };
        let p = curve[best];
        Ok(SweepResult {
            d_max: p.d,
            r2_max: p.r2,
            n: p.n,
            boundary,
            curve,
        })
    }

    pub fn argmax_index(&self) -> usize {
        self.curve
            .iter()
            .position(|p| p.d == self.d_max)
            .expect("d_max comes from the curve")
    }
}

fn fit_at(candidates: &[Candidate<'_>], weights: &RankWeights) -> Result<SweepPoint, RegressionError> {
    let mut xs = Vec::with_capacity(candidates.len());
    let mut ys = Vec::with_capacity(candidates.len());
    for c in candidates {
        let v = weights.apply(c.hist);
        if v > 0.0 {
            xs.push(v.log10());
            ys.push(c.log_reads);
        }
    }
    let fit = fit_xy(&xs, &ys).map_err(|e| match e {
        RegressionError::TooFewPoints { n, .. } => RegressionError::TooFewPoints {
            n,
            at: Some(weights.d()),
        },
        other => other,
    })?;
    Ok(SweepPoint {
        d: weights.d(),
        r2: fit.r2,
        n: fit.n,
    })
}

/// Fits log reads against log visibility at every grid level and reports the
/// level with the highest R².
///
/// Grid points are evaluated in parallel; each fit accumulates in topic
/// order, so the result does not depend on scheduling.
pub fn sweep_dmax(ds: &Dataset, grid: &DGrid) -> Result<SweepResult, RegressionError> {
    if grid.is_empty() {
        return Err(VisibilityError::EmptyGrid.into());
    }
    if grid.len() < 2 {
        return Err(RegressionError::GridTooShort(grid.len()));
    }
    let (joined, _) = join(ds);
    let candidates: Vec<Candidate<'_>> = joined.into_iter().map(|(_, c, _)| c).collect();
    let curve = grid
        .values()
        .par_iter()
        .map(|&d| {
            let weights = RankWeights::new(ds.r_cap, Discrimination::new(d)?);
            fit_at(&candidates, &weights)
        })
        .collect::<Result<Vec<_>, _>>()?;
    SweepResult::from_curve(curve)
}

/// R² of the fit at a single level.
pub fn r2_at(ds: &Dataset, d: Discrimination) -> Result<FitResult, RegressionError> {
    ols_loglog(&filter_regression_points(ds, d).pairs())
}

/// Golden-section refinement of a grid maximum over the neighbouring cells.
///
/// Returns `(d, r2)`. Assumes R² is unimodal between the neighbours of the
/// grid argmax; with an edge maximum only the inner neighbour is used.
pub fn refine_dmax(ds: &Dataset, sweep: &SweepResult, tol: f64) -> Result<(f64, f64), RegressionError> {
    let i = sweep.argmax_index();
    let lo = sweep.curve[i.saturating_sub(1)].d;
    let hi = sweep.curve[(i + 1).min(sweep.curve.len() - 1)].d;
    let f = |d: f64| -> Result<f64, RegressionError> { Ok(r2_at(ds, Discrimination::new(d)?)?.r2) };

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut e = a + INV_PHI * (b - a);
    let (mut fc, mut fe) = (f(c)?, f(e)?);
    while (b - a).abs() > tol {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + INV_PHI * (b - a);
            fe = f(e)?;
        }
    }
    let mid = 0.5 * (a + b);
    let r2_mid = f(mid)?;
    // never report something worse than the grid answer
    if r2_mid >= sweep.r2_max {
        Ok((mid, r2_mid))
    } else {
        Ok((sweep.d_max, sweep.r2_max))
    }
}

/// One row of the per-category table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub category: String,
    pub r2_max: f64,
    pub d_max: f64,
    pub n_topics: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    BelowThreshold,
    FitFailed(RegressionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCategory {
    pub category: String,
    pub n_topics: usize,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoryAnalysis {
    /// Sorted by `d_max`, then category label.
    pub reports: Vec<CategoryReport>,
    pub skipped: Vec<SkippedCategory>,
}

/// Runs [`sweep_dmax`] separately on every category with at least
/// `min_topics` regressable topics.
pub fn per_category_sweep(ds: &Dataset, grid: &DGrid, min_topics: usize) -> Result<CategoryAnalysis, RegressionError> {
    if min_topics < MIN_FIT_POINTS {
        return Err(RegressionError::InvalidMinTopics(min_topics));
    }
    let input = filter_regression_points(ds, Discrimination::ZERO);
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &input.points {
        let cat = ds.meta[&p.topic].category.as_str();
        *sizes.entry(cat).or_default() += 1;
    }

    let mut analysis = CategoryAnalysis::default();
    for (cat, n_topics) in sizes {
        if n_topics < min_topics {
            analysis.skipped.push(SkippedCategory {
                category: cat.to_owned(),
                n_topics,
                reason: SkipReason::BelowThreshold,
            });
            continue;
        }
        match sweep_dmax(&ds.restrict_to_category(cat), grid) {
            Ok(s) => analysis.reports.push(CategoryReport {
                category: cat.to_owned(),
                r2_max: s.r2_max,
                d_max: s.d_max,
                n_topics,
                boundary: s.boundary,
            }),
            Err(e) => analysis.skipped.push(SkippedCategory {
                category: cat.to_owned(),
                n_topics,
                reason: SkipReason::FitFailed(e),
            }),
        }
    }
    analysis.reports.sort_by(|a, b| {
        a.d_max
            .total_cmp(&b.d_max)
            .then_with(|| a.category.cmp(&b.category))
    });
    Ok(analysis)
}
