//! Pinhole intrinsics with two-parameter radial distortion.
//!
//! The forward model maps an undistorted pixel to its distorted location:
//!
//! ```text
//! [x - xp, y - yp] = [xu - xp, yu - yp] * (1 + k1 r^2 + k2 r^4)
//! ```
//!
//! with `r` the undistorted radius normalised by the focal length, so that
//! `k1`, `k2` are dimensionless. Inversion is by fixed-point iteration and is
//! precomputed into a per-pixel [`UndistortTable`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNDISTORT_MAX_ITERS: usize = 200;
/// Forward residual at which the iteration stops early.
const UNDISTORT_STOP_PX: f64 = 1e-11;
pub const UNDISTORT_TOL_PX: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub focal_px: f64,
    pub xp: f64,
    pub yp: f64,
    pub k1: f64,
    pub k2: f64,
    pub width: u16,
    pub height: u16,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics { focal_px: 115.0, xp: 63.5, yp: 63.5, k1: -0.08, k2: 0.01, width: 128, height: 128 }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return Err(Error::Config(format!("focal_px must be positive, got {}", self.focal_px)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("sensor width and height must be positive".into()));
        }
        if ![self.xp, self.yp, self.k1, self.k2].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("intrinsics must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    fn radial_factor(&self, dx: f64, dy: f64) -> f64 {
        let r2 = (dx * dx + dy * dy) / (self.focal_px * self.focal_px);
        1.0 + self.k1 * r2 + self.k2 * r2 * r2
    }

    /// Forward distortion of an undistorted pixel.
    pub fn distort(&self, xu: f64, yu: f64) -> (f64, f64) {
        let (dx, dy) = (xu - self.xp, yu - self.yp);
        let s = self.radial_factor(dx, dy);
        (self.xp + dx * s, self.yp + dy * s)
    }

    /// Inverts [`distort`](Self::distort) by fixed-point iteration. Iterates
    /// well past the acceptance tolerance so the inverse itself, not only the
    /// forward residual, is accurate where the radial map is flat.
    pub fn undistort(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let (dx, dy) = (x - self.xp, y - self.yp);
        let (mut xu, mut yu) = (x, y);
        let mut residual = f64::INFINITY;
        for _ in 0..UNDISTORT_MAX_ITERS {
            let (xd, yd) = self.distort(xu, yu);
            residual = (xd - x).hypot(yd - y);
            if residual <= UNDISTORT_STOP_PX {
                break;
            }
            let s = self.radial_factor(xu - self.xp, yu - self.yp);
            if !(s.is_finite() && s > 0.0) {
                break;
            }
            xu = self.xp + dx / s;
            yu = self.yp + dy / s;
        }
        if residual <= UNDISTORT_TOL_PX {
            Ok((xu, yu))
        } else {
            Err(Error::Numeric(format!("undistortion of ({x}, {y}) did not converge")))
        }
    }

    /// Undistorted pixel to dimensionless metric image coordinates.
    #[inline]
    pub fn to_metric(&self, xu: f64, yu: f64) -> (f64, f64) {
        ((xu - self.xp) / self.focal_px, (yu - self.yp) / self.focal_px)
    }

    #[inline]
    pub fn from_metric(&self, xm: f64, ym: f64) -> (f64, f64) {
        (self.xp + xm * self.focal_px, self.yp + ym * self.focal_px)
    }
}

/// Per-pixel undistorted coordinates, computed once at pipeline start.
#[derive(Clone, Debug)]
pub struct UndistortTable {
    width: usize,
    height: usize,
    coords: Vec<(f64, f64)>,
}

impl UndistortTable {
    pub fn new(intr: &CameraIntrinsics) -> Result<Self> {
        intr.validate()?;
        let (width, height) = (intr.width as usize, intr.height as usize);
        let mut coords = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                coords.push(intr.undistort(x as f64, y as f64)?);
            }
        }
        Ok(UndistortTable { width, height, coords })
    }

    /// Table for a distortion-free camera of the given size.
    pub fn identity(width: u16, height: u16) -> Self {
        let (width, height) = (width as usize, height as usize);
        let coords = (0..height).flat_map(|y| (0..width).map(move |x| (x as f64, y as f64))).collect();
        UndistortTable { width, height, coords }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> (f64, f64) {
        self.coords[y as usize * self.width + x as usize]
    }
}
