//! Per-event normal optical flow by local plane fitting.
//!
//! Each accepted event is fitted against the most recent events in its
//! spatial neighbourhood. Neighbours are selected by timestamp clustering
//! (no fixed time window), and the local plane is reduced to two slopes by
//! anchoring it at the new event. A homogeneous four-parameter fit with
//! distance-based outlier rejection is kept as [`baseline`], both as a
//! reference estimator and as a test oracle.

pub mod baseline;
pub mod buffer;
pub mod cluster;
pub mod fit;
pub mod io;
pub mod pipeline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Polarity;

pub use baseline::{fit_homogeneous_baseline, BaselineConfig, BaselinePipeline, HomogeneousPlane};
pub use buffer::{EventBuffer, Sample};
pub use cluster::{cluster_by_timestamp, ClusterError};
pub use fit::{fit_reduced, nrmse, reject_outliers_nrmse, slopes_to_flow, PlaneSlopes};
pub use pipeline::{FlowEstimator, FlowPipeline, PipelineStats};

/// Flow estimation parameters. Time quantities are stored in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Full spatial window span per axis, in pixels (odd).
    pub win_xy: u16,
    /// Maximal neighbour age.
    pub dt_max_us: u64,
    /// Cluster gap scale factor.
    pub k_s: f64,
    pub nrmse_max: f64,
    /// Maximal number of samples removed by NRMSE rejection.
    pub n_r: usize,
    /// Speed gate, pixels/s.
    pub v_max: f64,
    /// Minimal cluster size.
    pub n_min: usize,
    /// Output rate cap in vectors/s; infinite disables the cap.
    pub rho_f_max: f64,
    /// Refractory period.
    pub refractory_us: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            win_xy: 5,
            dt_max_us: 2_000_000,
            k_s: 3.0,
            nrmse_max: 0.3,
            n_r: 2,
            v_max: 1000.0,
            n_min: 8,
            rho_f_max: f64::INFINITY,
            refractory_us: 100_000,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.win_xy < 3 || self.win_xy.is_multiple_of(2) {
            return Err(Error::Config(format!("win_xy must be odd and >= 3, got {}", self.win_xy)));
        }
        if self.n_min < 3 {
            return Err(Error::Config(format!("n_min must be >= 3, got {}", self.n_min)));
        }
        let positive = [self.k_s, self.nrmse_max, self.v_max, self.rho_f_max];
        if positive.iter().any(|v| !(*v > 0.0)) || self.dt_max_us == 0 {
            return Err(Error::Config("flow parameters must be positive".into()));
        }
        Ok(())
    }

    /// Half window in pixels.
    #[inline]
    pub fn half_window(&self) -> i32 {
        (self.win_xy / 2) as i32
    }

    /// Minimal spacing between emitted vectors, if a cap is set.
    #[inline]
    pub fn min_emit_interval_us(&self) -> Option<f64> {
        self.rho_f_max.is_finite().then(|| 1e6 / self.rho_f_max)
    }
}

/// One normal-flow estimate at an undistorted event position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalFlowVector {
    pub t: u64,
    pub x_u: f64,
    pub y_u: f64,
    /// Pixels/s.
    pub u: f64,
    pub v: f64,
    pub p: Polarity,
    /// How far before `t` the estimate is centred, microseconds. Not part of
    /// the CSV format; vectors read from file carry 0.
    pub lag_us: f64,
}

impl NormalFlowVector {
    /// Instant the flow estimate refers to, for sampling rotation rates.
    pub fn reference_time_us(&self) -> u64 {
        (self.t as f64 - self.lag_us).round().max(0.0) as u64
    }

    pub fn speed(&self) -> f64 {
        self.u.hypot(self.v)
    }
}
