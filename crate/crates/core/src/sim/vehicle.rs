use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Simulated vehicle state. Heights are positive up, `w` positive down,
/// horizontal velocities in the world north/east axes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub w: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl VehicleState {
    pub fn hover(z: f64) -> Self {
        VehicleState { z, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub g: f64,
    /// Touchdown height.
    pub z_td: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig { g: GRAVITY, z_td: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    Flying(VehicleState),
    Touchdown(VehicleState),
}

impl StepOutcome {
    pub fn state(&self) -> VehicleState {
        match *self {
            StepOutcome::Flying(s) | StepOutcome::Touchdown(s) => s,
        }
    }
}

/// Vertical double integrator with upward specific thrust `thrust`
/// (m/s^2), semi-implicit Euler. Horizontal motion and attitude are left
/// to the caller.
pub fn step_dynamics(s: &VehicleState, thrust: f64, dt: f64, cfg: &DynamicsConfig) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    if s.z <= cfg.z_td {
        return Ok(StepOutcome::Touchdown(*s));
    }
    let mut n = *s;
    n.w += (cfg.g - thrust) * dt;
    n.z -= n.w * dt;
    n.x += n.vx * dt;
    n.y += n.vy * dt;
    Ok(if n.z <= cfg.z_td { StepOutcome::Touchdown(n) } else { StepOutcome::Flying(n) })
}
