//! Normal-flow accuracy metrics.

use serde::Serialize;

use crate::camera::CameraIntrinsics;
use crate::error::Result;
use crate::flow::{NormalFlowVector, PipelineStats};
use crate::geometry::{camera_motion, camera_pose, ground_truth_flow_px, CameraMount};
use crate::sim::ScriptedTrajectory;

/// A flow estimate with the exact flow at the same position and time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSample {
    pub estimate: NormalFlowVector,
    /// Pixels/s.
    pub gt: (f64, f64),
}

/// Projection endpoint error `| |V| - V_hat . V_gt |`; `None` for a zero
/// estimate.
#[inline]
pub fn pee(v: (f64, f64), gt: (f64, f64)) -> Option<f64> {
    let n = v.0.hypot(v.1);
    (n > 0.0).then(|| (n - (v.0 * gt.0 + v.1 * gt.1) / n).abs())
}

/// Percentage of events that produced a flow vector.
pub fn density(n_flow: u64, n_events: u64) -> Option<f64> {
    (n_events > 0).then(|| 100.0 * n_flow as f64 / n_events as f64)
}

/// Density from pipeline counters, over events that passed the refractory
/// filter or over all input events.
pub fn pipeline_density(stats: &PipelineStats, post_refractory: bool) -> Option<f64> {
    let n = if post_refractory { stats.accepted() } else { stats.events_in };
    density(stats.emitted, n)
}

/// Pairs every estimate with the exact flow of the scripted motion.
pub fn pair_with_ground_truth(
    flow: &[NormalFlowVector],
    traj: &ScriptedTrajectory,
    intr: &CameraIntrinsics,
    mount: &CameraMount,
) -> Result<Vec<FlowSample>> {
    flow.iter()
        .map(|f| {
            let s = traj.state(f.t as f64 * 1e-6);
            let plane = camera_pose(&s, mount).ground_plane()?;
            let gt = ground_truth_flow_px(f.x_u, f.y_u, intr, &camera_motion(&s, mount), &plane)?;
            Ok(FlowSample { estimate: *f, gt })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PeeSummary {
    pub n: usize,
    pub skipped: usize,
    pub mean: f64,
    pub sd: f64,
    /// Mean magnitude of the full ground-truth flow.
    pub mean_gt_speed: f64,
}

impl PeeSummary {
    /// Mean PEE relative to the mean ground-truth speed.
    pub fn relative(&self) -> f64 {
        self.mean / self.mean_gt_speed
    }
}

pub fn summarize_pee(samples: &[FlowSample]) -> PeeSummary {
    let errs: Vec<f64> = samples.iter().filter_map(|s| pee((s.estimate.u, s.estimate.v), s.gt)).collect();
    let n = errs.len();
    let skipped = samples.len() - n;
    if n == 0 {
        return PeeSummary { skipped, ..Default::default() };
    }
    let (mean, sd) = mean_sd(&errs);
    let mean_gt_speed = samples.iter().map(|s| s.gt.0.hypot(s.gt.1)).sum::<f64>() / samples.len() as f64;
    PeeSummary { n, skipped, mean, sd, mean_gt_speed }
}

/// Mean and sample standard deviation.
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}
