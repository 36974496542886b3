//! A deliberately naive second implementation of the discrimination sweep.
//!
//! Visibility is summed observation by observation with `powf`, and each
//! fit is the textbook two-pass least squares with an explicit residual
//! sum. Nothing here calls into `visibility` or `regression` code paths, so
//! agreement with [`crate::regression::sweep_dmax`] is meaningful.

use crate::model::Dataset;
use crate::regression::{Boundary, RegressionError, SweepPoint, SweepResult};
use crate::visibility::VisibilityError;

fn naive_r2(points: &[(f64, f64)]) -> Result<f64, RegressionError> {
    let n = points.len();
    if n < 3 {
        return Err(RegressionError::TooFewPoints { n, at: None });
    }
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for &(x, y) in points {
        sum_x += x;
        sum_y += y;
    }
    let mean_x = sum_x / n as f64;
    let mean_y = sum_y / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in points {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    if den == 0.0 {
        return Err(RegressionError::DegenerateVariance { axis: "log10(v)" });
    }
    if ss_tot == 0.0 {
        return Err(RegressionError::DegenerateVariance { axis: "log10(reads)" });
    }
    let slope = num / den;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    for &(x, y) in points {
        let e = y - (slope * x + intercept);
        ss_res += e * e;
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Recomputes the R²(d) curve, argmax and boundary flag from scratch.
pub fn oracle_sweep(ds: &Dataset, grid: &[f64]) -> Result<SweepResult, RegressionError> {
    if grid.is_empty() {
        return Err(VisibilityError::EmptyGrid.into());
    }
    if grid.len() < 2 {
        return Err(RegressionError::GridTooShort(grid.len()));
    }
    let mut curve = Vec::with_capacity(grid.len());
    for &d in grid {
        let mut points = Vec::new();
        for (id, traj) in &ds.trajectories {
            let Some(meta) = ds.meta.get(id) else { continue };
            if meta.n_reads == 0 {
                continue;
            }
            let mut v = 0.0;
            for o in traj.observations() {
                v += 1.0 / (o.rank as f64).powf(d);
            }
            if v > 0.0 {
                points.push((v.log10(), (meta.n_reads as f64).log10()));
            }
        }
        let r2 = naive_r2(&points).map_err(|e| match e {
            RegressionError::TooFewPoints { n, .. } => RegressionError::TooFewPoints { n, at: Some(d) },
            other => other,
        })?;
        curve.push(SweepPoint { d, r2, n: points.len() });
    }

    let mut best = 0;
    for i in 1..curve.len() {
        if curve[i].r2 > curve[best].r2 {
            best = i;
        }
    }
    let boundary = match best {
        0 => Boundary::AtLowerEdge,
        i if i + 1 == curve.len() => Boundary::AtUpperEdge,
        _ => Boundary::Interior,
    };
    Ok(SweepResult {
        d_max: curve[best].d,
        r2_max: curve[best].r2,
        n: curve[best].n,
        boundary,
        curve,
    })
}
