use serde::{Deserialize, Serialize};

/// Constant-divergence controller. `thrust_scale` converts the
/// dimensionless command `k_p (setpoint - vz_hat)` into specific thrust:
/// a positive command asks for a faster descent, so it lowers the thrust.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub k_p: f64,
    pub setpoint: f64,
    /// Hover thrust, m/s^2; learnt in the hover phase when run in the loop.
    pub t0: f64,
    pub t_max: f64,
    pub thrust_scale: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig { k_p: 0.2, setpoint: 1.0, t0: super::GRAVITY, t_max: 2.0 * super::GRAVITY, thrust_scale: 250.0 }
    }
}

#[inline]
pub fn delta_thrust(vz_hat: f64, cfg: &ControllerConfig) -> f64 {
    cfg.k_p * (cfg.setpoint - vz_hat)
}

/// Saturated thrust command for the current divergence estimate.
pub fn divergence_controller(vz_hat: f64, cfg: &ControllerConfig) -> f64 {
    (cfg.t0 - cfg.thrust_scale * delta_thrust(vz_hat, cfg)).clamp(0.0, cfg.t_max)
}

/// Height-hold PID used to trim the hover thrust before a landing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoverPid {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral: f64,
    pub t_max: f64,
}

impl HoverPid {
    pub fn new(t_max: f64) -> Self {
        HoverPid { kp: 6.0, ki: 3.0, kd: 4.0, integral: super::GRAVITY / 3.0, t_max }
    }

    /// Thrust for height error `z_ref - z` and downward speed `w`.
    pub fn update(&mut self, z_ref: f64, z: f64, w: f64, dt: f64) -> f64 {
        let e = z_ref - z;
        self.integral += e * dt;
        (self.kp * e + self.ki * self.integral + self.kd * w).clamp(0.0, self.t_max)
    }
}
