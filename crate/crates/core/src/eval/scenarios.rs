//! Rendered evaluation scenarios: translation flow accuracy and the
//! divergence sweep used for the error model.

use std::io::Write;

use serde::Serialize;

use crate::camera::{CameraIntrinsics, UndistortTable};
use crate::error::{Error, Result};
use crate::flow::{FlowConfig, FlowEstimator, FlowPipeline, NormalFlowVector, PipelineStats};
use crate::geometry::{flow_rates_from_body, ground_truth_observables, CameraMount, Rates};
use crate::observables::{estimate_stream, EstimatorConfig, ObservablesEstimator};
use crate::sim::{render_scripted, AttitudeWave, RenderedStream, RendererConfig, SceneTexture, ScriptedTrajectory, Vertical};

use super::metrics::{pair_with_ground_truth, pipeline_density, summarize_pee, PeeSummary};
use super::quadratic::{binned_percentiles, fit_quadratic, PercentileBin, QuadraticErrorModel};

/// Shared rendering and estimation setup.
#[derive(Clone, Copy, Debug)]
pub struct ScenarioSetup<'a> {
    pub intr: &'a CameraIntrinsics,
    pub mount: CameraMount,
    pub renderer: RendererConfig,
    pub flow: FlowConfig,
    pub estimator: EstimatorConfig,
    pub scene: &'a SceneTexture,
}

/// Horizontal translation at height `z` producing an image speed of
/// `speed_px_s` at the image centre, heading `heading` rad.
pub fn translation_for_image_speed(z: f64, speed_px_s: f64, heading: f64, focal_px: f64) -> ScriptedTrajectory {
    let v = speed_px_s * z / focal_px;
    ScriptedTrajectory::translation(z, v * heading.cos(), v * heading.sin())
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowEvaluation {
    pub events: usize,
    pub flow_vectors: usize,
    pub density_pct: f64,
    pub pee: PeeSummary,
    pub stats: PipelineStats,
}

/// Runs `estimator` over a rendered stream and scores it against the
/// scripted motion.
pub fn evaluate_flow(
    stream: &RenderedStream,
    estimator: &mut dyn FlowEstimator,
    intr: &CameraIntrinsics,
    mount: &CameraMount,
    post_refractory: bool,
) -> Result<(FlowEvaluation, Vec<NormalFlowVector>)> {
    let flow = estimator.run(&stream.events);
    let samples = pair_with_ground_truth(&flow, &stream.trajectory, intr, mount)?;
    let stats = *estimator.stats();
    let eval = FlowEvaluation {
        events: stream.events.len(),
        flow_vectors: flow.len(),
        density_pct: pipeline_density(&stats, post_refractory).unwrap_or(0.0),
        pee: summarize_pee(&samples),
        stats,
    };
    Ok((eval, flow))
}

/// Renders a translation and evaluates the standard pipeline on it.
pub fn translation_accuracy(setup: &ScenarioSetup<'_>, z: f64, speed_px_s: f64, duration_s: f64) -> Result<FlowEvaluation> {
    let traj = translation_for_image_speed(z, speed_px_s, 0.5, setup.intr.focal_px);
    let stream = render_scripted(&traj, setup.scene, setup.intr, &setup.mount, &setup.renderer, duration_s)?;
    let mut p = FlowPipeline::with_table(setup.flow, UndistortTable::new(setup.intr)?);
    Ok(evaluate_flow(&stream, &mut p, setup.intr, &setup.mount, true)?.0)
}

/// Constant-speed descent from `z0` to `z_end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Descent {
    pub z0: f64,
    pub z_end: f64,
    pub w: f64,
}

impl Descent {
    pub fn trajectory(&self) -> ScriptedTrajectory {
        ScriptedTrajectory::descent(self.z0, Vertical::ConstantSpeed(self.w))
    }

    pub fn duration_s(&self) -> f64 {
        (self.z0 - self.z_end) / self.w
    }
}

/// Descents covering divergences from 0.1 to 1.5 1/s.
pub const DEFAULT_DESCENTS: [Descent; 2] = [Descent { z0: 3.0, z_end: 0.2, w: 0.3 }, Descent { z0: 3.0, z_end: 0.4, w: 0.6 }];

/// One estimator tick compared with the true divergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceSample {
    pub descent: usize,
    pub t_s: f64,
    pub z_m: f64,
    pub vz_true: f64,
    pub vz_hat: f64,
    pub k: f64,
}

impl DivergenceSample {
    pub fn abs_error(&self) -> f64 {
        (self.vz_hat - self.vz_true).abs()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceSweep {
    pub descents: Vec<Descent>,
    /// Flow accuracy along each descent.
    pub flow: Vec<FlowEvaluation>,
    pub samples: Vec<DivergenceSample>,
    pub model: QuadraticErrorModel,
    pub percentiles: Vec<PercentileBin>,
}

/// One row of the per-descent flow accuracy table.
#[derive(Serialize)]
struct PeeRow {
    descent: usize,
    z0: f64,
    z_end: f64,
    w: f64,
    events: usize,
    flow_vectors: usize,
    density_pct: f64,
    pee_mean_pps: f64,
    pee_sd_pps: f64,
    gt_mean_pps: f64,
    pee_relative: f64,
}

impl DivergenceSweep {
    pub fn write_pee_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for (i, (d, f)) in self.descents.iter().zip(&self.flow).enumerate() {
            let row = PeeRow {
                descent: i,
                z0: d.z0,
                z_end: d.z_end,
                w: d.w,
                events: f.events,
                flow_vectors: f.flow_vectors,
                density_pct: f.density_pct,
                pee_mean_pps: f.pee.mean,
                pee_sd_pps: f.pee.sd,
                gt_mean_pps: f.pee.mean_gt_speed,
                pee_relative: f.pee.relative(),
            };
            w.serialize(row).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_samples_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for s in &self.samples {
            w.serialize(s).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_model_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.serialize(self.model).map_err(|e| Error::Io(e.into()))?;
        w.flush()?;
        Ok(())
    }

    pub fn write_percentiles_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for b in &self.percentiles {
            w.serialize(b).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Estimates the divergence along each descent with the full vision
/// pipeline; ticks within `warmup_s` of the start are discarded.
pub fn divergence_sweep(setup: &ScenarioSetup<'_>, descents: &[Descent], warmup_s: f64) -> Result<DivergenceSweep> {
    let mut samples = Vec::new();
    let mut flow = Vec::with_capacity(descents.len());
    for (i, d) in descents.iter().enumerate() {
        let (s, f) = divergence_run(setup, d, i, warmup_s)?;
        samples.extend(s);
        flow.push(f);
    }
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.vz_true.abs(), s.abs_error())).collect();
    let model = fit_quadratic(&pairs)?;
    let percentiles = binned_percentiles(&pairs, 0.1);
    Ok(DivergenceSweep { descents: descents.to_vec(), flow, samples, model, percentiles })
}

/// Divergence samples of one descent, with the flow accuracy along it.
pub fn divergence_run(
    setup: &ScenarioSetup<'_>,
    d: &Descent,
    index: usize,
    warmup_s: f64,
) -> Result<(Vec<DivergenceSample>, FlowEvaluation)> {
    let traj = d.trajectory();
    let stream = render_scripted(&traj, setup.scene, setup.intr, &setup.mount, &setup.renderer, d.duration_s())?;
    let mut p = FlowPipeline::with_table(setup.flow, UndistortTable::new(setup.intr)?);
    let (eval, flow) = evaluate_flow(&stream, &mut p, setup.intr, &setup.mount, true)?;
    let mut est = ObservablesEstimator::new(setup.estimator, setup.intr)?;
    let rates = |t_us: u64| {
        let s = traj.state(t_us as f64 * 1e-6);
        flow_rates_from_body(Rates::new(s.p, s.q, s.r))
    };
    let log = estimate_stream(&mut est, &flow, rates, 0.0, stream.duration_s);
    let samples = log
        .iter()
        .filter(|e| e.t_s >= warmup_s)
        .map(|e| {
            let s = traj.state(e.t_s);
            let truth = ground_truth_observables(&s, &setup.mount)?;
            Ok(DivergenceSample { descent: index, t_s: e.t_s, z_m: s.z, vz_true: truth.vz, vz_hat: e.obs.vz, k: e.obs.k })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, eval))
}

/// Mean absolute estimated ventral flows during a pure rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RotationBias {
    pub derotated: bool,
    pub mean_abs_vx: f64,
    pub mean_abs_vy: f64,
    pub mean_abs_vz: f64,
    pub ticks: usize,
}

/// Hovers at `z` while the attitude follows `wave` and reports the mean
/// absolute estimates after `warmup_s`. With `derotate` false the estimator
/// is fed zero rates.
pub fn rotation_bias(
    setup: &ScenarioSetup<'_>,
    z: f64,
    wave: AttitudeWave,
    duration_s: f64,
    warmup_s: f64,
    derotate: bool,
) -> Result<RotationBias> {
    let traj = ScriptedTrajectory::rotation(z, wave);
    let stream = render_scripted(&traj, setup.scene, setup.intr, &setup.mount, &setup.renderer, duration_s)?;
    let mut p = FlowPipeline::with_table(setup.flow, UndistortTable::new(setup.intr)?);
    let flow = p.run(&stream.events);
    let mut est = ObservablesEstimator::new(setup.estimator, setup.intr)?;
    let rates = |t_us: u64| {
        if !derotate {
            return Rates::ZERO;
        }
        let s = traj.state(t_us as f64 * 1e-6);
        flow_rates_from_body(Rates::new(s.p, s.q, s.r))
    };
    let log = estimate_stream(&mut est, &flow, rates, 0.0, stream.duration_s);
    let kept: Vec<_> = log.iter().filter(|e| e.t_s >= warmup_s).collect();
    let n = kept.len().max(1) as f64;
    Ok(RotationBias {
        derotated: derotate,
        mean_abs_vx: kept.iter().map(|e| e.obs.vx.abs()).sum::<f64>() / n,
        mean_abs_vy: kept.iter().map(|e| e.obs.vy.abs()).sum::<f64>() / n,
        mean_abs_vz: kept.iter().map(|e| e.obs.vz.abs()).sum::<f64>() / n,
        ticks: kept.len(),
    })
}
