//! Visibility of a rank trajectory at a discrimination level `d`.
//!
//! Each recorded minute at rank `r` contributes an importance weight `r^-d`;
//! visibility is the sum of those weights. At `d = 0` every minute counts
//! once (dwell time), and as `d` grows only minutes at rank 1 survive.
//!
//! Evaluation runs over the per-rank dwell histogram, so the cost per `d` is
//! `O(r_cap)` regardless of trajectory length.

use std::fmt;

use thiserror::Error;

use crate::model::Trajectory;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum VisibilityError {
    #[error("discrimination level must be finite and non-negative, got {0}")]
    InvalidDiscrimination(f64),
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error("grid must be strictly ascending")]
    UnsortedGrid,
    #[error("invalid grid range: min {min}, max {max}, step {step}")]
    InvalidRange { min: f64, max: f64, step: f64 },
    #[error("invalid bracket [{lo}, {hi}] with tolerance {tol}")]
    InvalidBracket { lo: f64, hi: f64, tol: f64 },
}

/// Discrimination level: finite and `>= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Discrimination(f64);

impl Discrimination {
    pub const ZERO: Discrimination = Discrimination(0.0);

    pub fn new(d: f64) -> Result<Self, VisibilityError> {
        if !d.is_finite() || d < 0.0 {
            return Err(VisibilityError::InvalidDiscrimination(d));
        }
        Ok(Discrimination(d))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Discrimination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ascending list of discrimination levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DGrid {
    values: Vec<f64>,
    spec: String,
}

impl DGrid {
    /// Default sweep: `[0, 3]` in steps of 0.015 (201 points).
    pub const DEFAULT_MIN: f64 = 0.0;
    pub const DEFAULT_MAX: f64 = 3.0;
    pub const DEFAULT_STEP: f64 = 0.015;

    pub fn default_sweep() -> Self {
        DGrid::range(Self::DEFAULT_MIN, Self::DEFAULT_MAX, Self::DEFAULT_STEP)
            .expect("default grid is valid")
    }

    /// `min, min + step, ...` up to and including `max` (within rounding).
    pub fn range(min: f64, max: f64, step: f64) -> Result<Self, VisibilityError> {
        let bad = || VisibilityError::InvalidRange { min, max, step };
        if !(min.is_finite() && max.is_finite() && step.is_finite()) || min < 0.0 || step <= 0.0 || max < min {
            return Err(bad());
        }
        let span = (max - min) / step;
        // a grid this large is a typo, not a sweep
        if span > 1e7 {
            return Err(bad());
        }
        let intervals = (span + 1e-9).floor() as usize;
        let mut values: Vec<f64> = (0..=intervals).map(|i| min + i as f64 * step).collect();
        if let Some(last) = values.last_mut() {
            if (*last - max).abs() <= step * 1e-9 {
                *last = max;
            }
        }
        Ok(DGrid {
            values,
            spec: format!("{}:{}:{}", min, max, step),
        })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self, VisibilityError> {
        if values.is_empty() {
            return Err(VisibilityError::EmptyGrid);
        }
        for &v in &values {
            Discrimination::new(v)?;
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VisibilityError::UnsortedGrid);
        }
        let spec = values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        Ok(DGrid { values, spec })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step_hint(&self) -> Option<f64> {
        (self.values.len() >= 2).then(|| self.values[1] - self.values[0])
    }

    /// Either `min:max:step` or a comma-separated list.
    pub fn spec(&self) -> &str {
        &self.spec
    }
}

/// Per-rank importance weights `r^-d` for `r = 1..=r_cap` at one `d`.
///
/// Computed as `exp(-d ln r)` so a single code path serves every `d`.
#[derive(Debug, Clone)]
pub struct RankWeights {
    d: f64,
    weights: Vec<f64>,
}

impl RankWeights {
    pub fn new(r_cap: u32, d: Discrimination) -> Self {
        let d = d.value();
        let weights = (1..=r_cap).map(|r| (-d * (r as f64).ln()).exp()).collect();
        RankWeights { d, weights }
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Weight of one minute at `rank` (1-based).
    pub fn weight(&self, rank: u32) -> f64 {
        self.weights[(rank - 1) as usize]
    }

    /// Dot product of a dwell histogram with the weights.
    pub fn apply(&self, hist: &[u64]) -> f64 {
        hist.iter()
            .zip(&self.weights)
            .filter(|(&n, _)| n > 0)
            .map(|(&n, &w)| n as f64 * w)
            .sum()
    }
}

/// Visibility of `traj` at discrimination `d`. Empty trajectories give 0.
pub fn visibility(traj: &Trajectory, d: Discrimination) -> f64 {
    RankWeights::new(traj.r_cap(), d).apply(traj.histogram())
}

/// Visibility summed observation by observation (no histogram).
pub fn visibility_direct(traj: &Trajectory, d: Discrimination) -> f64 {
    traj.observations()
        .iter()
        .map(|o| (-d.value() * (o.rank as f64).ln()).exp())
        .sum()
}

/// `(d, V(d))` at every grid point.
pub fn visibility_profile(traj: &Trajectory, grid: &[f64]) -> Result<Vec<(f64, f64)>, VisibilityError> {
    if grid.is_empty() {
        return Err(VisibilityError::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VisibilityError::UnsortedGrid);
    }
    grid.iter()
        .map(|&d| {
            let d = Discrimination::new(d)?;
            Ok((d.value(), visibility(traj, d)))
        })
        .collect()
}

/// A trajectory redrawn with height `r^-d` at each recorded minute.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceSeries {
    pub d: f64,
    pub points: Vec<(u64, f64)>,
}

impl ImportanceSeries {
    /// Area under the series, i.e. the visibility.
    pub fn total(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum()
    }
}

pub fn importance_transform(traj: &Trajectory, d: Discrimination) -> ImportanceSeries {
    let weights = RankWeights::new(traj.r_cap(), d);
    ImportanceSeries {
        d: d.value(),
        points: traj
            .observations()
            .iter()
            .map(|o| (o.t, weights.weight(o.rank)))
            .collect(),
    }
}

/// Minutes spent at rank 1, the large-`d` limit of visibility.
pub fn rank1_dwell(traj: &Trajectory) -> u64 {
    traj.dwell_at(1)
}

/// Result of a bisection search for `V_a(d) = V_b(d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    /// Midpoint of the final bracket.
    pub d: f64,
    /// Final bracket; the sign of `V_a - V_b` differs at its ends
    /// (or one end is an exact root).
    pub lo: f64,
    pub hi: f64,
}

/// Finds a level `d` in `[d_lo, d_hi]` where the two visibilities cross.
///
/// Returns `None` when `V_a - V_b` has the same sign at both ends. When the
/// difference changes sign more than once inside the bracket, bisection
/// converges to one of the crossings; which one is not specified.
pub fn find_crossover(
    a: &Trajectory,
    b: &Trajectory,
    d_lo: f64,
    d_hi: f64,
    tol: f64,
) -> Result<Option<Crossover>, VisibilityError> {
    let invalid = || VisibilityError::InvalidBracket {
        lo: d_lo,
        hi: d_hi,
        tol,
    };
    if !(d_lo < d_hi) || !(tol > 0.0) || !tol.is_finite() {
        return Err(invalid());
    }
    Discrimination::new(d_lo).map_err(|_| invalid())?;
    Discrimination::new(d_hi).map_err(|_| invalid())?;

    let diff = |d: f64| {
        let d = Discrimination(d);
        visibility(a, d) - visibility(b, d)
    };

    let (mut lo, mut hi) = (d_lo, d_hi);
    let (f_lo, f_hi) = (diff(lo), diff(hi));
    if f_lo == 0.0 && f_hi == 0.0 {
        return Ok(None);
    }
    if f_lo == 0.0 {
        return Ok(Some(Crossover { d: lo, lo, hi: lo }));
    }
    if f_hi == 0.0 {
        return Ok(Some(Crossover { d: hi, lo: hi, hi }));
    }
    if f_lo.signum() == f_hi.signum() {
        return Ok(None);
    }
    let lo_positive = f_lo > 0.0;
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = diff(mid);
        if f_mid == 0.0 {
            return Ok(Some(Crossover { d: mid, lo: mid, hi: mid }));
        }
        if (f_mid > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(Crossover {
        d: lo + 0.5 * (hi - lo),
        lo,
        hi,
    }))
}
