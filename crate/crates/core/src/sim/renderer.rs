//! Synthetic event camera over a textured ground plane.
//!
//! Each step every pixel ray is intersected with the ground, the texture is
//! box-filtered over the pixel footprint and the log intensity is compared
//! with the pixel's reference level. One event is emitted per threshold
//! multiple crossed, timestamped by linear interpolation inside the step,
//! and the reference moves to the crossed level.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, UndistortTable};
use crate::error::{Error, Result};
use crate::event::{Event, Polarity};
use crate::geometry::CameraPose;

use super::texture::SceneTexture;

/// Log intensity assigned to rays that miss the ground.
const SKY_LOG_INTENSITY: f64 = 0.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RendererConfig {
    /// Contrast threshold in log-intensity units.
    pub contrast: f64,
    /// Relative per-pixel threshold spread (uniform, e.g. 0.1 for +-10 %).
    pub mismatch: f64,
    /// Timestamp jitter standard deviation.
    pub jitter_us: f64,
    /// Spurious event rate per pixel, 1/s.
    pub noise_hz: f64,
    pub dt_sim_s: f64,
    pub seed: u64,
}

impl Default for RendererConfig {
    fn default() -> Self {
        RendererConfig { contrast: 0.15, mismatch: 0.0, jitter_us: 0.0, noise_hz: 0.0, dt_sim_s: 0.001, seed: 0 }
    }
}

impl RendererConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contrast > 0.0) || !(self.dt_sim_s > 0.0 && self.dt_sim_s <= 0.001 + 1e-12) {
            return Err(Error::Config("contrast must be positive and dt_sim in (0, 1 ms]".into()));
        }
        if !(0.0..1.0).contains(&self.mismatch) || self.jitter_us < 0.0 || self.noise_hz < 0.0 {
            return Err(Error::Config("renderer noise parameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct PixelState {
    reference: f64,
    prev: f64,
    threshold: f64,
}

fn mix_seed(seed: u64, step: u64, row: u64) -> u64 {
    let mut z = seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ row.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct EventRenderer {
    cfg: RendererConfig,
    width: usize,
    focal_px: f64,
    /// Camera-frame ray `(x, y, 1)` of every pixel.
    rays: Vec<Vector3<f64>>,
    pixels: Vec<PixelState>,
    last_t_us: Option<u64>,
    step: u64,
}

impl EventRenderer {
    pub fn new(intr: &CameraIntrinsics, cfg: RendererConfig) -> Result<Self> {
        cfg.validate()?;
        let table = UndistortTable::new(intr)?;
        let (w, h) = (intr.width as usize, intr.height as usize);
        let mut rays = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (xu, yu) = table.get(x as u16, y as u16);
                let (xm, ym) = intr.to_metric(xu, yu);
                rays.push(Vector3::new(xm, ym, 1.0));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pixels = (0..w * h)
            .map(|_| {
                let spread = if cfg.mismatch > 0.0 { rng.random_range(-cfg.mismatch..cfg.mismatch) } else { 0.0 };
                PixelState { threshold: cfg.contrast * (1.0 + spread), ..Default::default() }
            })
            .collect();
        Ok(EventRenderer { cfg, width: w, focal_px: intr.focal_px, rays, pixels, last_t_us: None, step: 0 })
    }

    pub fn config(&self) -> &RendererConfig {
        &self.cfg
    }

    pub fn is_initialized(&self) -> bool {
        self.last_t_us.is_some()
    }

    /// Log intensity every pixel sees from `pose`.
    fn log_intensity(&self, pose: &CameraPose, scene: &SceneTexture, out: &mut [f64]) {
        let h = pose.height();
        let r = pose.r_wc;
        let (px, py) = (pose.position.x, pose.position.y);
        let f = self.focal_px;
        out.par_chunks_mut(self.width).zip(self.rays.par_chunks(self.width)).for_each(|(row, rays)| {
            for (o, ray) in row.iter_mut().zip(rays) {
                let d = r * ray;
                *o = if d.z > 1e-9 {
                    let lambda = h / d.z;
                    let foot = lambda * ray.norm() / f;
                    scene.sample(px + lambda * d.x, py + lambda * d.y, foot).ln()
                } else {
                    SKY_LOG_INTENSITY
                };
            }
        });
    }

    /// Advances to time `t_us` with the camera at `pose`. The first call
    /// only initialises the reference levels and returns no events.
    pub fn render_step(&mut self, pose: &CameraPose, t_us: u64, scene: &SceneTexture) -> Result<Vec<Event>> {
        if !(pose.height() > 0.0) {
            return Err(Error::Domain(format!("camera below the ground plane (height {})", pose.height())));
        }
        let mut current = vec![0.0; self.pixels.len()];
        self.log_intensity(pose, scene, &mut current);
        let Some(t_prev) = self.last_t_us else {
            for (p, &l) in self.pixels.iter_mut().zip(&current) {
                p.reference = l;
                p.prev = l;
            }
            self.last_t_us = Some(t_us);
            return Ok(Vec::new());
        };
        if t_us < t_prev {
            return Err(Error::Domain(format!("render time {t_us} before previous step {t_prev}")));
        }
        self.last_t_us = Some(t_us);
        self.step += 1;
        let (cfg, step, width) = (self.cfg, self.step, self.width);
        let span = (t_us - t_prev) as f64;
        let jitter = (cfg.jitter_us > 0.0).then(|| Normal::new(0.0, cfg.jitter_us).expect("finite jitter"));
        let p_noise = cfg.noise_hz * span * 1e-6;

        let rows: Vec<Vec<Event>> = self
            .pixels
            .par_chunks_mut(width)
            .zip(current.par_chunks(width))
            .enumerate()
            .map(|(y, (pix, cur))| {
                let mut rng =
                    (jitter.is_some() || p_noise > 0.0).then(|| ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, step, y as u64)));
                let mut out = Vec::new();
                for (x, (p, &l)) in pix.iter_mut().zip(cur).enumerate() {
                    let start = p.prev;
                    let slope = l - start;
                    let mut emit = |level: f64, pol: Polarity, rng: &mut Option<ChaCha8Rng>| {
                        let frac = if slope != 0.0 { ((level - start) / slope).clamp(0.0, 1.0) } else { 1.0 };
                        let mut t = t_prev as f64 + frac * span;
                        if let (Some(j), Some(r)) = (&jitter, rng.as_mut()) {
                            t += j.sample(r);
                        }
                        let t = (t.round() as u64).clamp(t_prev, t_us);
                        out.push(Event::new(t, x as u16, y as u16, pol));
                    };
                    while l - p.reference >= p.threshold {
                        p.reference += p.threshold;
                        emit(p.reference, Polarity::Pos, &mut rng);
                    }
                    while p.reference - l >= p.threshold {
                        p.reference -= p.threshold;
                        emit(p.reference, Polarity::Neg, &mut rng);
                    }
                    p.prev = l;
                    if p_noise > 0.0 {
                        let r = rng.as_mut().expect("noise rng");
                        if r.random::<f64>() < p_noise {
                            let t = t_prev + (r.random::<f64>() * span).round() as u64;
                            let pol = if r.random::<bool>() { Polarity::Pos } else { Polarity::Neg };
                            out.push(Event::new(t.min(t_us), x as u16, y as u16, pol));
                        }
                    }
                }
                out
            })
            .collect();
        let mut events: Vec<Event> = rows.into_iter().flatten().collect();
        events.sort_by_key(|e| (e.t, e.y, e.x));
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{camera_pose, CameraMount};
    use crate::sim::texture::Checkerboard;
    use crate::sim::VehicleState;

    fn small_intr() -> CameraIntrinsics {
        CameraIntrinsics { focal_px: 30.0, xp: 15.5, yp: 15.5, k1: 0.0, k2: 0.0, width: 32, height: 32 }
    }

    #[test]
    fn static_scene_is_silent() {
        let scene = SceneTexture::Checkerboard(Checkerboard::default());
        let mut r = EventRenderer::new(&small_intr(), RendererConfig::default()).unwrap();
        let pose = camera_pose(&VehicleState::hover(1.0), &CameraMount::default());
        assert!(r.render_step(&pose, 0, &scene).unwrap().is_empty());
        for k in 1..20 {
            assert!(r.render_step(&pose, k * 1000, &scene).unwrap().is_empty());
        }
    }

    #[test]
    fn below_ground_is_an_error() {
        let scene = SceneTexture::Checkerboard(Checkerboard::default());
        let mut r = EventRenderer::new(&small_intr(), RendererConfig::default()).unwrap();
        let pose = camera_pose(&VehicleState::hover(-0.1), &CameraMount::default());
        assert!(r.render_step(&pose, 0, &scene).is_err());
    }

    #[test]
    fn ramp_of_two_and_a_half_thresholds_gives_two_events() {
        let mut r = EventRenderer::new(&small_intr(), RendererConfig::default()).unwrap();
        let pose = camera_pose(&VehicleState::hover(1.0), &CameraMount::default());
        let dark = SceneTexture::Checkerboard(Checkerboard { cell_m: 1e3, dark: 0.2, light: 0.2 });
        let c = r.config().contrast;
        let bright = 0.2 * (2.5 * c).exp();
        let lit = SceneTexture::Checkerboard(Checkerboard { cell_m: 1e3, dark: bright, light: bright });
        r.render_step(&pose, 0, &dark).unwrap();
        let ev = r.render_step(&pose, 1000, &lit).unwrap();
        assert_eq!(ev.len(), 2 * 32 * 32);
        let px: Vec<_> = ev.iter().filter(|e| e.x == 3 && e.y == 7).collect();
        assert_eq!(px.len(), 2);
        assert!(px.iter().all(|e| e.p == Polarity::Pos));
        // crossings at 1/2.5 and 2/2.5 of the step
        assert_eq!((px[0].t, px[1].t), (400, 800));
        assert!(ev.windows(2).all(|w| (w[0].t, w[0].y, w[0].x) <= (w[1].t, w[1].y, w[1].x)));
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let scene = SceneTexture::Checkerboard(Checkerboard::default());
        let cfg = RendererConfig { noise_hz: 5.0, jitter_us: 30.0, mismatch: 0.1, seed: 11, ..Default::default() };
        let run = || {
            let mut r = EventRenderer::new(&small_intr(), cfg).unwrap();
            let mut all = Vec::new();
            for k in 0..200u64 {
                let s = VehicleState { x: 0.001 * k as f64, ..VehicleState::hover(1.0) };
                all.extend(r.render_step(&camera_pose(&s, &CameraMount::default()), k * 1000, &scene).unwrap());
            }
            all
        };
        let a = run();
        assert!(!a.is_empty());
        assert_eq!(a, run());
    }
}
