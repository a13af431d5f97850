//! Periodic estimation of the scaled velocities from normal flow.
//!
//! Flow vectors are binned into a bank of directions, derotated with the
//! gyro rates and summarised by running sums that decay between periods.
//! Every period the weighted least-squares problem is solved from the
//! sums, a confidence value is derived from detection rate, spread and fit
//! quality, and the output is low-pass filtered with that confidence.

pub mod io;
pub mod solve;
pub mod stats;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::flow::NormalFlowVector;
use crate::geometry::{Rates, VisualObservables};

pub use solve::{confidence, filter_update, solve_observables, variance_weight, Solution};
pub use stats::{decay_factor, DirectionBank, DirectionStats, FlowFieldStatistics};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub m: usize,
    pub rate_hz: f64,
    /// Minimal position variance for full weight, px^2.
    pub var_s_min: f64,
    /// Statistics decay time constant, s.
    pub k_f: f64,
    pub r2_min: f64,
    pub rho_f_min: f64,
    /// Output filter time constant, s.
    pub k_t: f64,
    pub dtheta_max: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            m: 6,
            rate_hz: 100.0,
            var_s_min: 600.0,
            k_f: 0.02,
            r2_min: 1.0,
            rho_f_min: 500.0,
            k_t: 0.02,
            dtheta_max: 0.3,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.rate_hz, self.var_s_min, self.k_f, self.r2_min, self.rho_f_min, self.k_t, self.dtheta_max];
        if self.m == 0 || vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("estimator parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.rate_hz
    }
}

/// Output of one estimator period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub t_s: f64,
    /// Filtered observables; `k` is this period's confidence.
    pub obs: VisualObservables,
    /// Unfiltered least-squares solution, if the system was solvable.
    pub raw: Option<Vector3<f64>>,
    pub rho_f: f64,
    pub r2: f64,
}

#[derive(Clone, Debug)]
pub struct ObservablesEstimator {
    cfg: EstimatorConfig,
    focal_px: f64,
    xp: f64,
    yp: f64,
    bank: DirectionBank,
    stats: FlowFieldStatistics,
    pending: Vec<(usize, f64, f64)>,
    last_tick: Option<f64>,
    theta_hat: Vector3<f64>,
}

impl ObservablesEstimator {
    pub fn new(cfg: EstimatorConfig, intr: &CameraIntrinsics) -> Result<Self> {
        cfg.validate()?;
        intr.validate()?;
        Ok(ObservablesEstimator {
            bank: DirectionBank::new(cfg.m),
            stats: FlowFieldStatistics::new(cfg.m),
            pending: Vec::new(),
            last_tick: None,
            theta_hat: Vector3::zeros(),
            focal_px: intr.focal_px,
            xp: intr.xp,
            yp: intr.yp,
            cfg,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn statistics(&self) -> &FlowFieldStatistics {
        &self.stats
    }

    pub fn estimate(&self) -> Vector3<f64> {
        self.theta_hat
    }

    /// Queues a flow vector for the next period. `rates` follow the flow
    /// equation convention (see [`crate::geometry::flow_rates_from_body`]).
    /// Returns `false` for a zero vector.
    pub fn add_flow(&mut self, f: &NormalFlowVector, rates: Rates) -> bool {
        let Some(i) = self.bank.assign(f.u, f.v) else {
            return false;
        };
        let x = (f.x_u - self.xp) / self.focal_px;
        let y = (f.y_u - self.yp) / self.focal_px;
        let (s, v) = self.bank.project(i, x, y, f.u / self.focal_px, f.v / self.focal_px);
        let v_t = self.bank.derotate(i, v, x, y, rates);
        self.pending.push((i, s, v_t));
        true
    }

    /// Closes the period ending at `t_s`.
    pub fn tick(&mut self, t_s: f64) -> Estimate {
        let dt = match self.last_tick {
            Some(prev) => (t_s - prev).max(0.0),
            None => self.cfg.period_s(),
        };
        self.last_tick = Some(t_s);
        self.stats.decay(dt, self.cfg.k_f);
        let n_new = self.pending.len();
        for (i, s, v) in self.pending.drain(..) {
            self.stats.accumulate(i, s, v);
        }
        let rho_f = n_new as f64 * self.cfg.rate_hz;
        let (k, raw, r2) = match solve_observables(&self.stats, &self.bank, self.focal_px, self.cfg.var_s_min) {
            Some(sol) => {
                let k = confidence(rho_f, &sol.weights, sol.r2, self.cfg.rho_f_min, self.cfg.r2_min);
                self.theta_hat = filter_update(&self.theta_hat, &sol.theta, k, dt, self.cfg.k_t, self.cfg.dtheta_max);
                (k, Some(sol.theta), sol.r2)
            }
            None => (0.0, None, 0.0),
        };
        let t = self.theta_hat;
        Estimate { t_s, obs: VisualObservables { vx: t[0], vy: t[1], vz: t[2], k }, raw, rho_f, r2 }
    }
}

/// Runs the estimator over a time-ordered flow stream, ticking at the
/// configured rate from `t_start_s` until `t_end_s`. Each tick drains every
/// vector with a timestamp at or before the tick time; `rates_at` is sampled
/// at each vector's reference time.
pub fn estimate_stream(
    est: &mut ObservablesEstimator,
    flow: &[NormalFlowVector],
    mut rates_at: impl FnMut(u64) -> Rates,
    t_start_s: f64,
    t_end_s: f64,
) -> Vec<Estimate> {
    let period = est.config().period_s();
    let mut out = Vec::new();
    let mut next = 0;
    let mut k = 1u64;
    loop {
        let t = t_start_s + k as f64 * period;
        if t > t_end_s + 1e-9 {
            break;
        }
        let t_us = (t * 1e6).round() as u64;
        while next < flow.len() && flow[next].t <= t_us {
            est.add_flow(&flow[next], rates_at(flow[next].reference_time_us()));
            next += 1;
        }
        out.push(est.tick(t));
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Polarity;
    use crate::geometry::{planar_flow, rotational_flow, GroundPlane};

    /// Normal flow of an exact planar field plus rotation at a spread of
    /// positions, with gradients along the bank directions (alternately
    /// flipped, which must not matter).
    fn synthetic_flow(
        intr: &CameraIntrinsics,
        obs: &VisualObservables,
        rates: Rates,
        t_us: u64,
        n: usize,
    ) -> Vec<NormalFlowVector> {
        let level = GroundPlane::level(1.0);
        (0..n)
            .map(|j| {
                let xu = 4.0 + (j * 37 % 120) as f64;
                let yu = 4.0 + (j * 53 % 120) as f64;
                let (x, y) = intr.to_metric(xu, yu);
                let (ut, vt) = planar_flow(x, y, obs, &level);
                let (ur, vr) = rotational_flow(x, y, rates);
                let (u, v) = ((ut + ur) * intr.focal_px, (vt + vr) * intr.focal_px);
                let a = (j % 12) as f64 * std::f64::consts::PI / 6.0;
                let (c, s) = (a.cos(), a.sin());
                let m = u * c + v * s;
                NormalFlowVector { t: t_us, x_u: xu, y_u: yu, u: m * c, v: m * s, p: Polarity::Pos, lag_us: 0.0 }
            })
            .filter(|f| f.u != 0.0 || f.v != 0.0)
            .collect()
    }

    fn run_exact(truth: VisualObservables, rates: Rates) -> Estimate {
        let intr = CameraIntrinsics { k1: 0.0, k2: 0.0, ..Default::default() };
        let mut est = ObservablesEstimator::new(EstimatorConfig::default(), &intr).unwrap();
        let mut last = None;
        // ten filter time constants
        for k in 1..=20 {
            let t = k as f64 * 0.01;
            for f in synthetic_flow(&intr, &truth, rates, (t * 1e6) as u64, 60) {
                est.add_flow(&f, rates);
            }
            last = Some(est.tick(t));
        }
        last.unwrap()
    }

    #[test]
    fn converges_to_exact_planar_field() {
        let e = run_exact(VisualObservables::new(0.2, -0.1, 0.4), Rates::ZERO);
        assert!((e.obs.vx - 0.2).abs() < 1e-3 && (e.obs.vy + 0.1).abs() < 1e-3 && (e.obs.vz - 0.4).abs() < 1e-3, "{e:?}");
        assert!(e.obs.k > 0.99 && e.r2 > 0.999999, "{e:?}");
    }

    #[test]
    fn rotation_is_removed() {
        let e = run_exact(VisualObservables::new(0.0, 0.0, 0.3), Rates::new(0.8, -0.5, 0.6));
        assert!(e.obs.vx.abs() < 1e-3 && e.obs.vy.abs() < 1e-3 && (e.obs.vz - 0.3).abs() < 1e-3, "{e:?}");
    }

    #[test]
    fn no_flow_holds_estimate_with_zero_confidence() {
        let intr = CameraIntrinsics::default();
        let mut est = ObservablesEstimator::new(EstimatorConfig::default(), &intr).unwrap();
        let e = est.tick(0.01);
        assert_eq!((e.obs.vz, e.obs.k, e.raw), (0.0, 0.0, None));
        assert!(!est.add_flow(
            &NormalFlowVector { t: 0, x_u: 1.0, y_u: 1.0, u: 0.0, v: 0.0, p: Polarity::Pos, lag_us: 0.0 },
            Rates::ZERO
        ));
    }

    #[test]
    fn stream_ticks_drain_by_timestamp() {
        let intr = CameraIntrinsics { k1: 0.0, k2: 0.0, ..Default::default() };
        let truth = VisualObservables::new(0.0, 0.0, 0.5);
        let mut flow = synthetic_flow(&intr, &truth, Rates::ZERO, 5_000, 30);
        flow.extend(synthetic_flow(&intr, &truth, Rates::ZERO, 15_000, 20));
        let mut est = ObservablesEstimator::new(EstimatorConfig::default(), &intr).unwrap();
        let out = estimate_stream(&mut est, &flow, |_| Rates::ZERO, 0.0, 0.03);
        assert_eq!(out.len(), 3);
        assert_eq!(out.iter().map(|e| e.rho_f).collect::<Vec<_>>(), vec![3000.0, 2000.0, 0.0]);
    }
}
