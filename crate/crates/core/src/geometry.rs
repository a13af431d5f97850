//! Ego-motion to optical-flow relations for a downward-facing camera.
//!
//! Frames: world is NED with the ground at `Z_W = 0`; body is
//! forward-right-down; the camera frame has `X_C = Y_B`, `Y_C = -X_B`,
//! `Z_C = Z_B`. All sign bookkeeping between body and camera quantities is
//! done by [`body_to_camera`] and [`flow_rates_from_body`]; no other module
//! should hard-code those signs.
//!
//! Rates in [`EgoMotion`] and [`Rates`] passed to the flow functions follow
//! the flow-equation convention: `p` multiplies the `-p` / `-p x^2` terms of
//! the horizontal flow, `q` the `+q` / `+q y^2` terms of the vertical flow,
//! `r` the in-plane rotation terms.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::VehicleState;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Rates {
    pub const ZERO: Rates = Rates { p: 0.0, q: 0.0, r: 0.0 };

    pub fn new(p: f64, q: f64, r: f64) -> Self {
        Rates { p, q, r }
    }
}

/// Camera-frame translational velocity and rotation rates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EgoMotion {
    pub u_c: f64,
    pub v_c: f64,
    pub w_c: f64,
    pub rates: Rates,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EgoMotion {
    pub fn translation(u_c: f64, v_c: f64, w_c: f64) -> Self {
        EgoMotion { u_c, v_c, w_c, ..Default::default() }
    }

    pub fn without_translation(&self) -> Self {
        EgoMotion { u_c: 0.0, v_c: 0.0, w_c: 0.0, ..*self }
    }

    pub fn without_rotation(&self) -> Self {
        EgoMotion { rates: Rates::ZERO, ..*self }
    }
}

/// Ground plane in the camera frame: `Z_C = Z0 + Z_X X_C + Z_Y Y_C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub z0: f64,
    pub z_x: f64,
    pub z_y: f64,
}

impl GroundPlane {
    pub fn level(z0: f64) -> Self {
        GroundPlane { z0, z_x: 0.0, z_y: 0.0 }
    }

    /// Plane of a flat floor seen from a camera `height` metres above it with
    /// body attitude `phi` (roll) and `theta` (pitch).
    pub fn from_attitude(height: f64, phi: f64, theta: f64) -> Result<Self> {
        let r_wc = rotation_world_from_body(phi, theta, 0.0) * rotation_body_from_camera();
        Self::from_camera_rotation(height, &r_wc)
    }

    pub(crate) fn from_camera_rotation(height: f64, r_wc: &Matrix3<f64>) -> Result<Self> {
        let n = r_wc.transpose() * Vector3::z();
        if height <= 0.0 || n.z <= 0.0 {
            return Err(Error::Domain(format!("camera not above the ground plane (height {height})")));
        }
        Ok(GroundPlane { z0: height / n.z, z_x: -n.x / n.z, z_y: -n.y / n.z })
    }

    /// Depth `Z_C` of the plane point imaged at metric coordinates `(x, y)`.
    pub fn depth_at(&self, x: f64, y: f64) -> Result<f64> {
        let denom = 1.0 - self.z_x * x - self.z_y * y;
        if denom <= 0.0 {
            return Err(Error::Domain(format!("ray ({x}, {y}) does not hit the plane")));
        }
        Ok(self.z0 / denom)
    }
}

/// Scaled velocities `(vx, vy, vz)` in 1/s with confidence `k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VisualObservables {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub k: f64,
}

impl VisualObservables {
    pub fn new(vx: f64, vy: f64, vz: f64) -> Self {
        VisualObservables { vx, vy, vz, k: 1.0 }
    }

    pub fn divergence(&self) -> f64 {
        2.0 * self.vz
    }

    pub fn time_to_contact(&self) -> Option<f64> {
        (self.vz != 0.0).then(|| 1.0 / self.vz)
    }
}

/// Camera placement on the vehicle: `dz` metres below the body origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraMount {
    pub dz: f64,
}

/// Maps a body-frame vector to camera-frame components.
#[inline]
pub fn body_to_camera(v: Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v.y, -v.x, v.z)
}

/// Body roll/pitch/yaw rates to the rates used by the flow equations.
#[inline]
pub fn flow_rates_from_body(body: Rates) -> Rates {
    let w = body_to_camera(Vector3::new(body.p, body.q, body.r));
    Rates { p: w.y, q: w.x, r: w.z }
}

pub fn rotation_body_from_camera() -> Matrix3<f64> {
    // columns are the camera axes expressed in the body frame
    Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
}

/// ZYX Euler rotation taking body vectors into the world frame.
pub fn rotation_world_from_body(phi: f64, theta: f64, psi: f64) -> Matrix3<f64> {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (ss, cs) = psi.sin_cos();
    Matrix3::new(
        ct * cs,
        sp * st * cs - cp * ss,
        cp * st * cs + sp * ss,
        ct * ss,
        sp * st * ss + cp * cs,
        cp * st * ss - sp * cs,
        -st,
        sp * ct,
        cp * ct,
    )
}

/// Camera position in the world frame and camera-to-world rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    pub r_wc: Matrix3<f64>,
}

impl CameraPose {
    pub fn height(&self) -> f64 {
        -self.position.z
    }

    pub fn ground_plane(&self) -> Result<GroundPlane> {
        GroundPlane::from_camera_rotation(self.height(), &self.r_wc)
    }

    /// Metric image coordinates of a world point, if it is in front of the camera.
    pub fn project(&self, world: Vector3<f64>) -> Option<(f64, f64)> {
        let c = self.r_wc.transpose() * (world - self.position);
        (c.z > 0.0).then(|| (c.x / c.z, c.y / c.z))
    }
}

pub fn camera_pose(state: &VehicleState, mount: &CameraMount) -> CameraPose {
    let r_wb = rotation_world_from_body(state.phi, state.theta, state.psi);
    let body_pos = Vector3::new(state.x, state.y, -state.z);
    CameraPose { position: body_pos + r_wb * Vector3::new(0.0, 0.0, mount.dz), r_wc: r_wb * rotation_body_from_camera() }
}

/// Camera-frame ego-motion of a vehicle state, including the velocity the
/// body rates induce at the offset camera.
pub fn camera_motion(state: &VehicleState, mount: &CameraMount) -> EgoMotion {
    let r_wb = rotation_world_from_body(state.phi, state.theta, state.psi);
    let omega = Vector3::new(state.p, state.q, state.r);
    let v_body = r_wb.transpose() * Vector3::new(state.vx, state.vy, state.w) + omega.cross(&Vector3::new(0.0, 0.0, mount.dz));
    let v_cam = body_to_camera(v_body);
    EgoMotion {
        u_c: v_cam.x,
        v_c: v_cam.y,
        w_c: v_cam.z,
        rates: flow_rates_from_body(Rates::new(state.p, state.q, state.r)),
        phi: state.phi,
        theta: state.theta,
        psi: state.psi,
    }
}

/// Rotational part of the metric flow at `(x, y)`.
#[inline]
pub fn rotational_flow(x: f64, y: f64, rates: Rates) -> (f64, f64) {
    let Rates { p, q, r } = rates;
    (-p + r * y + q * x * y - p * x * x, q - r * x + q * y * y - p * x * y)
}

/// Metric optical flow of a static point at depth `depth` seen at `(x, y)`.
pub fn flow_full(x: f64, y: f64, motion: &EgoMotion, depth: f64) -> Result<(f64, f64)> {
    if !(depth > 0.0) {
        return Err(Error::Domain(format!("depth must be positive, got {depth}")));
    }
    let (ur, vr) = rotational_flow(x, y, motion.rates);
    let u = -motion.u_c / depth + x * motion.w_c / depth + ur;
    let v = -motion.v_c / depth + y * motion.w_c / depth + vr;
    Ok((u, v))
}

/// Translational metric flow over a planar scene, parametrised by the
/// scaled velocities.
#[inline]
pub fn planar_flow(x: f64, y: f64, obs: &VisualObservables, plane: &GroundPlane) -> (f64, f64) {
    let slope = 1.0 - plane.z_x * x - plane.z_y * y;
    ((-obs.vx + x * obs.vz) * slope, (-obs.vy + y * obs.vz) * slope)
}

/// Scaled velocities of the camera, `(U_C, V_C, W_C) / Z0`, with `k = 1`.
pub fn ground_truth_observables(state: &VehicleState, mount: &CameraMount) -> Result<VisualObservables> {
    let plane = camera_pose(state, mount).ground_plane()?;
    let m = camera_motion(state, mount);
    Ok(VisualObservables { vx: m.u_c / plane.z0, vy: m.v_c / plane.z0, vz: m.w_c / plane.z0, k: 1.0 })
}

/// Ground-truth flow in undistorted pixels/s at an undistorted pixel.
pub fn ground_truth_flow_px(
    xu: f64,
    yu: f64,
    intr: &crate::camera::CameraIntrinsics,
    motion: &EgoMotion,
    plane: &GroundPlane,
) -> Result<(f64, f64)> {
    let (x, y) = intr.to_metric(xu, yu);
    let depth = plane.depth_at(x, y)?;
    let (u, v) = flow_full(x, y, motion, depth)?;
    Ok((u * intr.focal_px, v * intr.focal_px))
}
