//! Hover trim followed by a constant-divergence descent, with the vision
//! pipeline (renderer, flow, estimator) or ground truth in the loop.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::flow::{FlowConfig, FlowEstimator, FlowPipeline};
use crate::geometry::{camera_pose, flow_rates_from_body, ground_truth_observables, CameraMount, Rates};
use crate::observables::{EstimatorConfig, ObservablesEstimator};

use super::controller::{divergence_controller, ControllerConfig, HoverPid};
use super::renderer::{EventRenderer, RendererConfig};
use super::texture::SceneTexture;
use super::vehicle::{step_dynamics, DynamicsConfig, StepOutcome, VehicleState};

pub const RUN_LOG_HEADER: &str = "t_s,z_m,w_mps,vz_true,vz_hat,K,thrust";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandingConfig {
    pub z0: f64,
    pub hover_s: f64,
    /// Final part of the hover over which the trim thrust is averaged.
    pub trim_window_s: f64,
    /// Descent time limit.
    pub timeout_s: f64,
    /// Stop the descent below this height (0 disables).
    pub abort_height: f64,
    /// Feed ground-truth divergence to the controller instead of vision.
    pub ideal: bool,
    pub starvation_s: f64,
    pub controller: ControllerConfig,
    pub dynamics: DynamicsConfig,
    pub mount: CameraMount,
}

impl Default for LandingConfig {
    fn default() -> Self {
        LandingConfig {
            z0: 3.5,
            hover_s: 3.0,
            trim_window_s: 2.0,
            timeout_s: 20.0,
            abort_height: 0.0,
            ideal: false,
            starvation_s: 1.0,
            controller: ControllerConfig::default(),
            dynamics: DynamicsConfig::default(),
            mount: CameraMount::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LandingLogRow {
    pub t_s: f64,
    pub z_m: f64,
    pub w_mps: f64,
    pub vz_true: f64,
    pub vz_hat: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub thrust: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LandingOutcome {
    Touchdown,
    AbortHeight,
    Timeout,
    Starved,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LandingSummary {
    pub outcome: LandingOutcome,
    pub setpoint: f64,
    pub ideal: bool,
    pub hover_thrust: f64,
    pub final_height_m: f64,
    pub descent_time_s: f64,
    /// RMS of `vz_hat - vz_true` over the descent.
    pub estimate_rmse: f64,
    /// RMS of `vz_true - setpoint` once the setpoint was first reached.
    pub tracking_rmse: f64,
    pub events: u64,
    pub flow_vectors: u64,
    /// Height at which the true divergence first left +-50 % of the
    /// setpoint after having reached it.
    pub oscillation_onset_height_m: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LandingRun {
    pub log: Vec<LandingLogRow>,
    pub summary: LandingSummary,
}

impl LandingRun {
    pub fn write_log<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
        w.write_record(RUN_LOG_HEADER.split(',')).map_err(|e| Error::Io(e.into()))?;
        for row in &self.log {
            w.serialize(row).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Vision components used when the loop is not run in ideal mode.
pub struct VisionSetup<'a> {
    pub scene: &'a SceneTexture,
    pub intr: &'a CameraIntrinsics,
    pub flow: FlowConfig,
    pub estimator: EstimatorConfig,
    pub renderer: RendererConfig,
}

struct Vision<'a> {
    scene: &'a SceneTexture,
    renderer: EventRenderer,
    pipeline: FlowPipeline,
    estimator: ObservablesEstimator,
}

/// PID height hold at `z0`; returns the mean thrust over the trim window.
fn hover_trim(cfg: &LandingConfig, dt: f64) -> Result<f64> {
    let mut s = VehicleState::hover(cfg.z0);
    let mut pid = HoverPid::new(cfg.controller.t_max);
    let steps = (cfg.hover_s / dt).round() as usize;
    let trim_from = steps.saturating_sub((cfg.trim_window_s / dt).round() as usize);
    let (mut sum, mut n) = (0.0, 0usize);
    for k in 0..steps {
        let thrust = pid.update(cfg.z0, s.z, s.w, dt);
        if k >= trim_from {
            sum += thrust;
            n += 1;
        }
        s = step_dynamics(&s, thrust, dt, &cfg.dynamics)?.state();
    }
    Ok(if n > 0 { sum / n as f64 } else { cfg.dynamics.g })
}

pub fn run_closed_loop(cfg: &LandingConfig, vision: Option<VisionSetup<'_>>, dt_sim: f64) -> Result<LandingRun> {
    if !cfg.ideal && vision.is_none() {
        return Err(Error::Config("vision-in-the-loop run needs a scene and pipeline configuration".into()));
    }
    let mut ctrl = cfg.controller;
    ctrl.t0 = hover_trim(cfg, dt_sim)?;
    let period = vision.as_ref().map_or(EstimatorConfig::default().period_s(), |v| v.estimator.period_s());
    let tick_every = ((period / dt_sim).round() as u64).max(1);

    let mut vis = match (&vision, cfg.ideal) {
        (Some(v), false) => Some(Vision {
            scene: v.scene,
            renderer: EventRenderer::new(v.intr, RendererConfig { dt_sim_s: dt_sim, ..v.renderer })?,
            pipeline: FlowPipeline::new(v.flow, v.intr)?,
            estimator: ObservablesEstimator::new(v.estimator, v.intr)?,
        }),
        _ => None,
    };

    let mut s = VehicleState::hover(cfg.z0);
    let dt_us = (dt_sim * 1e6).round() as u64;
    if let Some(v) = vis.as_mut() {
        v.renderer.render_step(&camera_pose(&s, &cfg.mount), 0, v.scene)?;
    }
    let mut vz_hat = 0.0;
    let mut thrust = divergence_controller(vz_hat, &ctrl);
    let mut log = Vec::new();
    let (mut events, mut flows) = (0u64, 0u64);
    let mut last_event_us = 0u64;
    let mut reached = false;
    let mut onset = None;
    let max_steps = (cfg.timeout_s / dt_sim).round() as u64;
    let mut outcome = LandingOutcome::Timeout;
    let mut t_us = 0;

    for step in 1..=max_steps {
        t_us = step * dt_us;
        let next = step_dynamics(&s, thrust, dt_sim, &cfg.dynamics)?;
        s = next.state();
        if let StepOutcome::Touchdown(_) = next {
            outcome = LandingOutcome::Touchdown;
            break;
        }
        if let Some(v) = vis.as_mut() {
            let ev = v.renderer.render_step(&camera_pose(&s, &cfg.mount), t_us, v.scene)?;
            if let Some(e) = ev.last() {
                last_event_us = e.t;
            }
            events += ev.len() as u64;
            let rates = flow_rates_from_body(Rates::new(s.p, s.q, s.r));
            for e in &ev {
                if let Some(f) = v.pipeline.process(e) {
                    flows += 1;
                    v.estimator.add_flow(&f, rates);
                }
            }
            if t_us.saturating_sub(last_event_us) as f64 > cfg.starvation_s * 1e6 {
                outcome = LandingOutcome::Starved;
                break;
            }
        }
        if step % tick_every == 0 {
            let truth = ground_truth_observables(&s, &cfg.mount)?.vz;
            let k_conf = match vis.as_mut() {
                Some(v) => {
                    let est = v.estimator.tick(t_us as f64 * 1e-6);
                    vz_hat = est.obs.vz;
                    est.obs.k
                }
                None => {
                    vz_hat = truth;
                    1.0
                }
            };
            thrust = divergence_controller(vz_hat, &ctrl);
            log.push(LandingLogRow { t_s: t_us as f64 * 1e-6, z_m: s.z, w_mps: s.w, vz_true: truth, vz_hat, k: k_conf, thrust });
            if !reached && truth >= ctrl.setpoint {
                reached = true;
            }
            if reached && onset.is_none() && (truth - ctrl.setpoint).abs() > 0.5 * ctrl.setpoint.abs() {
                onset = Some(s.z);
            }
            if cfg.abort_height > 0.0 && s.z < cfg.abort_height {
                outcome = LandingOutcome::AbortHeight;
                break;
            }
        }
    }

    let rms = |it: &mut dyn Iterator<Item = f64>| {
        let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
        if n > 0 {
            (sum / n as f64).sqrt()
        } else {
            0.0
        }
    };
    let first_reach = log.iter().position(|r| r.vz_true >= ctrl.setpoint).unwrap_or(log.len());
    let summary = LandingSummary {
        outcome,
        setpoint: ctrl.setpoint,
        ideal: cfg.ideal,
        hover_thrust: ctrl.t0,
        final_height_m: s.z,
        descent_time_s: t_us as f64 * 1e-6,
        estimate_rmse: rms(&mut log.iter().map(|r| r.vz_hat - r.vz_true)),
        tracking_rmse: rms(&mut log[first_reach..].iter().map(|r| r.vz_true - ctrl.setpoint)),
        events,
        flow_vectors: flows,
        oscillation_onset_height_m: onset,
    };
    Ok(LandingRun { log, summary })
}

/// Least-squares slope of `ln z` against time over the log rows with
/// `t >= t_from` and `z >= z_min`.
pub fn log_height_slope(log: &[LandingLogRow], t_from: f64, z_min: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = log.iter().filter(|r| r.t_s >= t_from && r.z_m >= z_min).map(|r| (r.t_s, r.z_m.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2)));
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_setpoint_holds_height() {
        let cfg = LandingConfig {
            ideal: true,
            timeout_s: 5.0,
            controller: ControllerConfig { setpoint: 0.0, ..Default::default() },
            ..Default::default()
        };
        let run = run_closed_loop(&cfg, None, 0.001).unwrap();
        assert_eq!(run.summary.outcome, LandingOutcome::Timeout);
        for r in &run.log {
            assert!((r.z_m - 3.5).abs() / 3.5 < 0.02, "{r:?}");
        }
    }

    #[test]
    fn ideal_descent_is_exponential() {
        let cfg = LandingConfig { ideal: true, ..Default::default() };
        let run = run_closed_loop(&cfg, None, 0.001).unwrap();
        assert_eq!(run.summary.outcome, LandingOutcome::Touchdown);
        let slope = log_height_slope(&run.log, 0.5, 1.0).unwrap();
        assert!((slope + 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn vision_mode_needs_setup() {
        assert!(run_closed_loop(&LandingConfig::default(), None, 0.001).is_err());
    }
}
