//! Scripted trajectories for open-loop rendering and evaluation.

use serde::{Deserialize, Serialize};

use super::VehicleState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Vertical {
    Hold,
    /// Constant downward speed, m/s.
    ConstantSpeed(f64),
    /// Constant divergence `w / z`, 1/s.
    Exponential(f64),
}

/// Sinusoidal Euler angles `a sin(2 pi f t + phase)` per axis
/// (roll, pitch, yaw).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttitudeWave {
    pub amplitude: [f64; 3],
    pub freq_hz: [f64; 3],
    pub phase: [f64; 3],
}

impl AttitudeWave {
    /// Wave whose angle rates peak at `rate_amplitude` rad/s.
    pub fn with_rate_amplitude(rate_amplitude: [f64; 3], freq_hz: [f64; 3]) -> Self {
        let mut amplitude = [0.0; 3];
        for i in 0..3 {
            if freq_hz[i] > 0.0 {
                amplitude[i] = rate_amplitude[i] / (2.0 * std::f64::consts::PI * freq_hz[i]);
            }
        }
        AttitudeWave { amplitude, freq_hz, phase: [0.0, 0.7, 1.9] }
    }

    /// Angles and their time derivatives.
    pub fn eval(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        let mut a = [0.0; 3];
        let mut da = [0.0; 3];
        for i in 0..3 {
            let w = 2.0 * std::f64::consts::PI * self.freq_hz[i];
            let arg = w * t + self.phase[i];
            a[i] = self.amplitude[i] * arg.sin();
            da[i] = self.amplitude[i] * w * arg.cos();
        }
        (a, da)
    }
}

/// Body rates from ZYX Euler angles and their derivatives.
pub fn body_rates_from_euler(phi: f64, theta: f64, dphi: f64, dtheta: f64, dpsi: f64) -> (f64, f64, f64) {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    (dphi - dpsi * st, dtheta * cp + dpsi * sp * ct, -dtheta * sp + dpsi * cp * ct)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTrajectory {
    pub z0: f64,
    pub vertical: Vertical,
    /// Horizontal world velocity, m/s.
    pub vx: f64,
    pub vy: f64,
    pub attitude: AttitudeWave,
}

impl ScriptedTrajectory {
    pub fn hover(z0: f64) -> Self {
        ScriptedTrajectory { z0, vertical: Vertical::Hold, vx: 0.0, vy: 0.0, attitude: AttitudeWave::default() }
    }

    pub fn translation(z0: f64, vx: f64, vy: f64) -> Self {
        ScriptedTrajectory { vx, vy, ..Self::hover(z0) }
    }

    pub fn descent(z0: f64, vertical: Vertical) -> Self {
        ScriptedTrajectory { vertical, ..Self::hover(z0) }
    }

    pub fn rotation(z0: f64, attitude: AttitudeWave) -> Self {
        ScriptedTrajectory { attitude, ..Self::hover(z0) }
    }

    pub fn state(&self, t: f64) -> VehicleState {
        let (z, w) = match self.vertical {
            Vertical::Hold => (self.z0, 0.0),
            Vertical::ConstantSpeed(w) => (self.z0 - w * t, w),
            Vertical::Exponential(d) => {
                let z = self.z0 * (-d * t).exp();
                (z, d * z)
            }
        };
        let ([phi, theta, psi], [dphi, dtheta, dpsi]) = self.attitude.eval(t);
        let (p, q, r) = body_rates_from_euler(phi, theta, dphi, dtheta, dpsi);
        VehicleState { x: self.vx * t, y: self.vy * t, z, vx: self.vx, vy: self.vy, w, phi, theta, psi, p, q, r }
    }

    /// Time at which the height reaches `z`, if it ever does.
    pub fn time_at_height(&self, z: f64) -> Option<f64> {
        match self.vertical {
            Vertical::Hold => None,
            Vertical::ConstantSpeed(w) if w > 0.0 => Some((self.z0 - z) / w),
            Vertical::Exponential(d) if d > 0.0 && z > 0.0 => Some((self.z0 / z).ln() / d),
            _ => None,
        }
    }
}
