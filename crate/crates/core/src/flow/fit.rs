//! Reduced two-parameter plane fit anchored at the new event.
//!
//! With the event at the origin the local surface of active events is
//! `dt = -(px * ox + py * oy)`, so only the two slopes (microseconds per
//! pixel) are estimated, by least squares on the retained neighbours.

use thiserror::Error;

use super::buffer::Sample;

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum FitError {
    #[error("singular normal equations")]
    Singular,
    #[error("plane is flat in time")]
    Stationary,
    #[error("residual error above threshold after {0} removals")]
    Nrmse(usize),
}

/// Plane slopes in microseconds per pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlaneSlopes {
    pub px: f64,
    pub py: f64,
}

impl PlaneSlopes {
    #[inline]
    pub fn residual(&self, s: &Sample) -> f64 {
        s.dt as f64 + self.px * s.ox + self.py * s.oy
    }
}

/// Least-squares slopes through the 2x2 normal equations.
pub fn fit_reduced(samples: &[Sample]) -> Result<PlaneSlopes, FitError> {
    let (mut sxx, mut sxy, mut syy, mut sxt, mut syt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let t = s.dt as f64;
        sxx += s.ox * s.ox;
        sxy += s.ox * s.oy;
        syy += s.oy * s.oy;
        sxt += s.ox * t;
        syt += s.oy * t;
    }
    let det = sxx * syy - sxy * sxy;
    if !(det > 1e-12 * sxx * syy) || !det.is_finite() {
        return Err(FitError::Singular);
    }
    Ok(PlaneSlopes { px: -(syy * sxt - sxy * syt) / det, py: -(sxx * syt - sxy * sxt) / det })
}

/// Root mean square residual normalised by the mean absolute age.
/// `None` when all samples share the event timestamp.
pub fn nrmse(samples: &[Sample], slopes: &PlaneSlopes) -> Option<f64> {
    let sum_dt: f64 = samples.iter().map(|s| s.dt as f64).sum();
    if sum_dt == 0.0 || samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let rss: f64 = samples.iter().map(|s| slopes.residual(s).powi(2)).sum();
    Some(n / sum_dt.abs() * (rss / n).sqrt())
}

/// Refits after dropping the worst sample while the NRMSE exceeds
/// `threshold`, at most `max_removals` times. `samples` is reordered and
/// truncated to the final inlier set.
pub fn reject_outliers_nrmse(samples: &mut Vec<Sample>, threshold: f64, max_removals: usize) -> Result<PlaneSlopes, FitError> {
    let mut slopes = fit_reduced(samples)?;
    let mut removed = 0;
    loop {
        let e = nrmse(samples, &slopes).ok_or(FitError::Stationary)?;
        if e <= threshold {
            return Ok(slopes);
        }
        if removed == max_removals {
            return Err(FitError::Nrmse(removed));
        }
        let worst = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (i, slopes.residual(s).abs()))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        samples.swap_remove(worst);
        removed += 1;
        slopes = fit_reduced(samples)?;
    }
}

/// Lag of a plane fit anchored at the newest event: with the motion changing
/// linearly in time the fitted speed is the one at `sum dt^3 / (2 sum dt^2)`.
pub fn support_lag_us(samples: &[Sample]) -> f64 {
    let (s2, s3) = samples.iter().fold((0.0, 0.0), |(a, b), s| {
        let t = s.dt as f64;
        (a + t * t, b + t * t * t)
    });
    if s2 > 0.0 {
        -0.5 * s3 / s2
    } else {
        0.0
    }
}

/// Normal flow in pixels/s from slopes in microseconds per pixel.
/// `None` for a time-flat plane.
#[inline]
pub fn slopes_to_flow(slopes: &PlaneSlopes) -> Option<(f64, f64)> {
    let (px, py) = (slopes.px * 1e-6, slopes.py * 1e-6);
    let n2 = px * px + py * py;
    if !(n2 > 0.0) || !n2.is_finite() {
        return None;
    }
    Some((-px / n2, -py / n2))
}
