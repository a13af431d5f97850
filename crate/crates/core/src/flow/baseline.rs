//! Homogeneous four-parameter plane fit with distance-based rejection.
//!
//! Points are `(x, y, t)` with `x, y` in undistorted pixels and `t` in
//! seconds, taken from a fixed time window. The plane `a x + b y + c t + d =
//! 0` is the right singular vector of `[x y t 1]` for the smallest singular
//! value; points farther than `d_max` are dropped and the plane refitted
//! until it moves by less than `k_d`.

use nalgebra::{DMatrix, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::UndistortTable;
use crate::event::{Event, RefractoryFilter, RefractoryOutcome};

use super::buffer::{EventBuffer, Sample};
use super::fit::support_lag_us;
use super::pipeline::{FlowEstimator, PipelineStats, RateCap};
use super::{FlowConfig, NormalFlowVector};

const MIN_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub window_us: u64,
    pub d_max: f64,
    pub k_d: f64,
    pub max_iters: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { window_us: 100_000, d_max: 0.01, k_d: 1e-5, max_iters: 10 }
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum BaselineError {
    #[error("fewer than four points")]
    TooFew,
    #[error("points do not determine a unique plane")]
    Degenerate,
}

/// Unit-norm plane coefficients `(a, b, c, d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneousPlane(pub Vector4<f64>);

impl HomogeneousPlane {
    pub fn distance(&self, p: &(f64, f64, f64)) -> f64 {
        let v = &self.0;
        (v[0] * p.0 + v[1] * p.1 + v[2] * p.2 + v[3]).abs() / v.fixed_rows::<3>(0).norm()
    }

    /// Normal flow in pixels/s, `None` when the plane is parallel to the
    /// time axis or flat in time.
    pub fn flow(&self) -> Option<(f64, f64)> {
        let v = &self.0;
        if v[2].abs() < 1e-12 {
            return None;
        }
        let (px, py) = (v[0] / v[2], v[1] / v[2]);
        let n2 = px * px + py * py;
        (n2 > 0.0 && n2.is_finite()).then(|| (-px / n2, -py / n2))
    }
}

fn svd_plane(points: &[(f64, f64, f64)]) -> Result<HomogeneousPlane, BaselineError> {
    if points.len() < MIN_POINTS {
        return Err(BaselineError::TooFew);
    }
    let a = DMatrix::from_fn(points.len(), 4, |i, j| match j {
        0 => points[i].0,
        1 => points[i].1,
        2 => points[i].2,
        _ => 1.0,
    });
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or(BaselineError::Degenerate)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (smallest, second, largest) = (order[0], order[1], order[order.len() - 1]);
    if !(sv[second] > 1e-9 * sv[largest]) {
        return Err(BaselineError::Degenerate);
    }
    let n = Vector4::from_iterator(v_t.row(smallest).iter().copied());
    if n.fixed_rows::<3>(0).norm() < 1e-12 {
        return Err(BaselineError::Degenerate);
    }
    Ok(HomogeneousPlane(n))
}

/// Fit with iterative outlier rejection. Returns the plane and the inlier
/// mask of the final iteration.
pub fn fit_homogeneous_baseline(
    points: &[(f64, f64, f64)],
    cfg: &BaselineConfig,
) -> Result<(HomogeneousPlane, Vec<bool>), BaselineError> {
    let mut plane = svd_plane(points)?;
    let mut inliers = vec![true; points.len()];
    let mut kept = Vec::with_capacity(points.len());
    for _ in 0..cfg.max_iters {
        kept.clear();
        for (flag, p) in inliers.iter_mut().zip(points) {
            *flag = plane.distance(p) <= cfg.d_max;
            if *flag {
                kept.push(*p);
            }
        }
        let mut next = svd_plane(&kept)?;
        if next.0.dot(&plane.0) < 0.0 {
            next.0 = -next.0;
        }
        let moved = (next.0 - plane.0).norm();
        plane = next;
        if moved < cfg.k_d {
            break;
        }
    }
    Ok((plane, inliers))
}

/// Reference estimator: fixed time window and homogeneous fit, sharing the
/// refractory filter, rate cap and speed gate with [`super::FlowPipeline`].
pub struct BaselinePipeline {
    cfg: FlowConfig,
    base: BaselineConfig,
    table: UndistortTable,
    refractory: RefractoryFilter,
    buffer: EventBuffer,
    cap: RateCap,
    stats: PipelineStats,
    scratch: Vec<Sample>,
    points: Vec<(f64, f64, f64)>,
}

impl BaselinePipeline {
    pub fn new(cfg: FlowConfig, base: BaselineConfig, table: UndistortTable) -> Self {
        let (w, h) = (table.width() as u16, table.height() as u16);
        BaselinePipeline {
            refractory: RefractoryFilter::new(w, h, cfg.refractory_us),
            buffer: EventBuffer::new(w, h),
            cap: RateCap::new(cfg.min_emit_interval_us()),
            stats: PipelineStats::default(),
            scratch: Vec::with_capacity(32),
            points: Vec::with_capacity(32),
            cfg,
            base,
            table,
        }
    }
}

impl FlowEstimator for BaselinePipeline {
    fn process(&mut self, e: &Event) -> Option<NormalFlowVector> {
        self.stats.events_in += 1;
        if e.x as usize >= self.table.width() || e.y as usize >= self.table.height() {
            self.stats.out_of_bounds += 1;
            return None;
        }
        if self.refractory.pass(e) == RefractoryOutcome::Suppress {
            self.stats.refractory_suppressed += 1;
            return None;
        }
        self.buffer.store(e);
        if self.cap.blocks(e.t) {
            self.stats.rate_capped += 1;
            return None;
        }
        self.buffer.collect_neighbors(e, self.cfg.half_window(), self.base.window_us, &self.table, &mut self.scratch);
        if self.scratch.len() + 1 < self.cfg.n_min {
            self.stats.too_few_samples += 1;
            return None;
        }
        self.points.clear();
        self.points.push((0.0, 0.0, 0.0));
        self.points.extend(self.scratch.iter().map(|s| (s.ox, s.oy, s.dt as f64 * 1e-6)));
        let (plane, _) = match fit_homogeneous_baseline(&self.points, &self.base) {
            Ok(fit) => fit,
            Err(_) => {
                self.stats.fit_failed += 1;
                return None;
            }
        };
        let Some((u, v)) = plane.flow() else {
            self.stats.stationary += 1;
            return None;
        };
        if u.hypot(v) > self.cfg.v_max {
            self.stats.speed_rejected += 1;
            return None;
        }
        self.cap.emitted(e.t);
        self.stats.emitted += 1;
        let (x_u, y_u) = self.table.get(e.x, e.y);
        Some(NormalFlowVector { t: e.t, x_u, y_u, u, v, p: e.p, lag_us: support_lag_us(&self.scratch) })
    }

    fn stats(&self) -> &PipelineStats {
        &self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ten points exactly on `t = 0.01 x - 0.004 y + 0.2`.
    fn exact_points() -> Vec<(f64, f64, f64)> {
        let xy = [(0., 0.), (1., 0.), (0., 1.), (2., 1.), (-1., 2.), (-2., -1.), (1., -2.), (2., 2.), (-1., -1.), (0., -2.)];
        xy.iter().map(|&(x, y)| (x, y, 0.01 * x - 0.004 * y + 0.2)).collect()
    }

    #[test]
    fn exact_plane_keeps_all_points() {
        let pts = exact_points();
        let (plane, inl) = fit_homogeneous_baseline(&pts, &BaselineConfig::default()).unwrap();
        assert!(inl.iter().all(|&b| b));
        for p in &pts {
            assert!(plane.distance(p) < 1e-9);
        }
    }

    #[test]
    fn gross_outlier_is_excluded() {
        let mut pts = exact_points();
        pts.push((1.0, 1.0, 0.01 - 0.004 + 0.2 + 0.05));
        let cfg = BaselineConfig::default();
        // the first pass is pulled by the outlier, later passes recover
        let first = svd_plane(&pts).unwrap();
        assert!(first.distance(&pts[10]) > cfg.d_max);
        let (plane, inl) = fit_homogeneous_baseline(&pts, &cfg).unwrap();
        assert!(!inl[10] && inl[..10].iter().all(|&b| b));
        let (u, v) = plane.flow().unwrap();
        // gradient (0.01, -0.004) s/px
        let n2 = 0.01f64.powi(2) + 0.004f64.powi(2);
        assert!((u - 0.01 / n2).abs() < 1e-6 && (v + 0.004 / n2).abs() < 1e-6, "{u} {v}");
    }

    #[test]
    fn coincident_points_fail() {
        let pts = vec![(1.0, 2.0, 0.5); 6];
        assert_eq!(fit_homogeneous_baseline(&pts, &BaselineConfig::default()).unwrap_err(), BaselineError::Degenerate);
        assert_eq!(svd_plane(&pts[..3]).unwrap_err(), BaselineError::TooFew);
    }
}
