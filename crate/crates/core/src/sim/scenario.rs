use crate::camera::CameraIntrinsics;
use crate::error::Result;
use crate::event::Event;
use crate::geometry::{camera_pose, CameraMount};

use super::renderer::{EventRenderer, RendererConfig};
use super::texture::SceneTexture;
use super::trajectory::ScriptedTrajectory;

/// Events rendered along a scripted trajectory.
#[derive(Clone, Debug)]
pub struct RenderedStream {
    pub events: Vec<Event>,
    pub trajectory: ScriptedTrajectory,
    pub duration_s: f64,
}

impl RenderedStream {
    pub fn rate_hz(&self) -> f64 {
        self.events.len() as f64 / self.duration_s
    }
}

/// Renders `duration_s` seconds of `traj`; the reference levels are set at
/// `t = 0` so the stream starts with the first change.
pub fn render_scripted(
    traj: &ScriptedTrajectory,
    scene: &SceneTexture,
    intr: &CameraIntrinsics,
    mount: &CameraMount,
    rcfg: &RendererConfig,
    duration_s: f64,
) -> Result<RenderedStream> {
    let mut r = EventRenderer::new(intr, *rcfg)?;
    let dt_us = (rcfg.dt_sim_s * 1e6).round() as u64;
    let steps = (duration_s / rcfg.dt_sim_s).round() as u64;
    let mut events = Vec::new();
    for k in 0..=steps {
        let t_us = k * dt_us;
        let pose = camera_pose(&traj.state(t_us as f64 * 1e-6), mount);
        events.extend(r.render_step(&pose, t_us, scene)?);
    }
    Ok(RenderedStream { events, trajectory: *traj, duration_s: (steps * dt_us) as f64 * 1e-6 })
}
