//! Ground reflectance patterns with footprint-aware sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub enum SceneTexture {
    Checkerboard(Checkerboard),
    Roadmap(Roadmap),
}

impl SceneTexture {
    /// Mean reflectance over a square footprint of side `size` metres
    /// centred on `(x, y)`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64, size: f64) -> f64 {
        match self {
            SceneTexture::Checkerboard(c) => c.sample(x, y, size),
            SceneTexture::Roadmap(r) => r.sample(x, y, size),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SceneTexture::Checkerboard(_) => "checkerboard",
            SceneTexture::Roadmap(_) => "roadmap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checkerboard {
    pub cell_m: f64,
    pub dark: f64,
    pub light: f64,
}

impl Default for Checkerboard {
    fn default() -> Self {
        Checkerboard { cell_m: 0.15, dark: 0.25, light: 0.75 }
    }
}

impl Checkerboard {
    /// Antiderivative of the unit square wave of half-period `c`.
    #[inline]
    fn square_integral(u: f64, c: f64) -> f64 {
        c - (u.rem_euclid(2.0 * c) - c).abs()
    }

    #[inline]
    fn square_mean(u: f64, half: f64, c: f64) -> f64 {
        if half <= 0.0 {
            return if u.rem_euclid(2.0 * c) < c { 1.0 } else { -1.0 };
        }
        (Self::square_integral(u + half, c) - Self::square_integral(u - half, c)) / (2.0 * half)
    }

    /// Exact box-filtered value; the square waves are separable.
    pub fn sample(&self, x: f64, y: f64, size: f64) -> f64 {
        let h = 0.5 * size;
        let s = Self::square_mean(x, h, self.cell_m) * Self::square_mean(y, h, self.cell_m);
        let mid = 0.5 * (self.light + self.dark);
        let amp = 0.5 * (self.light - self.dark);
        mid + amp * s
    }
}

/// Procedural periodic road-map-like texture stored as a mip pyramid.
#[derive(Clone, Debug, PartialEq)]
pub struct Roadmap {
    /// Metres per texel at level 0.
    pub res_m: f64,
    levels: Vec<Level>,
}

#[derive(Clone, Debug, PartialEq)]
struct Level {
    n: usize,
    data: Vec<f32>,
}

impl Level {
    #[inline]
    fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.n as isize;
        self.data[(j.rem_euclid(n) as usize) * self.n + i.rem_euclid(n) as usize] as f64
    }

    /// Bilinear sample at texel coordinates with wraparound.
    #[inline]
    fn bilinear(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u - 0.5, v - 0.5);
        let (i, j) = (u.floor(), v.floor());
        let (fu, fv) = (u - i, v - j);
        let (i, j) = (i as isize, j as isize);
        let a = self.at(i, j) * (1.0 - fu) + self.at(i + 1, j) * fu;
        let b = self.at(i, j + 1) * (1.0 - fu) + self.at(i + 1, j + 1) * fu;
        a * (1.0 - fv) + b * fv
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadmapParams {
    /// Texels per side at level 0 (power of two).
    pub size: usize,
    pub res_m: f64,
    pub roads: usize,
    pub seed: u64,
}

impl Default for RoadmapParams {
    fn default() -> Self {
        RoadmapParams { size: 1024, res_m: 0.005, roads: 40, seed: 1 }
    }
}

/// Periodic value noise: random lattice of `cells` per side, smooth
/// interpolation, evaluated on an `n`-texel grid.
fn value_noise(n: usize, cells: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lattice: Vec<f64> = (0..cells * cells).map(|_| rng.random::<f64>()).collect();
    let at = |i: usize, j: usize| lattice[(j % cells) * cells + (i % cells)];
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let scale = cells as f64 / n as f64;
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        let fy = y as f64 * scale;
        let (j, ty) = (fy.floor() as usize, smooth(fy.fract()));
        for x in 0..n {
            let fx = x as f64 * scale;
            let (i, tx) = (fx.floor() as usize, smooth(fx.fract()));
            let a = at(i, j) * (1.0 - tx) + at(i + 1, j) * tx;
            let b = at(i, j + 1) * (1.0 - tx) + at(i + 1, j + 1) * tx;
            out[y * n + x] = a * (1.0 - ty) + b * ty;
        }
    }
    out
}

impl Roadmap {
    pub fn generate(params: &RoadmapParams) -> Self {
        let n = params.size.next_power_of_two();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut field = vec![0.0; n * n];
        let mut weight = 0.0;
        for (cells, w) in [(8, 1.0), (24, 0.6), (64, 0.35), (160, 0.2)] {
            let layer = value_noise(n, cells, &mut rng);
            field.iter_mut().zip(&layer).for_each(|(f, l)| *f += w * l);
            weight += w;
        }
        // flat-shaded blocks of land use, like a rendered map; smooth shading
        // would make the first-crossing time of neighbouring pixels depend on
        // their reference levels
        let mut tex: Vec<f64> = field.iter().map(|f| if f / weight > 0.5 { 0.8 } else { 0.3 }).collect();

        // straight periodic roads, dark with a light centre line
        for _ in 0..params.roads {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let (ca, sa) = (angle.cos(), angle.sin());
            let offset = rng.random_range(0.0..n as f64);
            let width = rng.random_range(3.0..12.0);
            let shade = rng.random_range(0.0..0.15);
            for y in 0..n {
                for x in 0..n {
                    // distance to the line in the periodic domain
                    let d = (x as f64 * -sa + y as f64 * ca - offset).rem_euclid(n as f64);
                    let d = d.min(n as f64 - d);
                    if d < width {
                        let t = &mut tex[y * n + x];
                        let edge = (width - d).min(1.0);
                        *t = *t * (1.0 - edge) + shade * edge;
                        if d < 0.15 * width {
                            *t = 0.9;
                        }
                    }
                }
            }
        }

        let base = Level { n, data: tex.iter().map(|t| (0.08 + 0.84 * t) as f32).collect() };
        let mut levels = vec![base];
        while levels.last().unwrap().n > 1 {
            let prev = levels.last().unwrap();
            let m = prev.n / 2;
            let mut data = Vec::with_capacity(m * m);
            for j in 0..m {
                for i in 0..m {
                    let s = prev.data[2 * j * prev.n + 2 * i]
                        + prev.data[2 * j * prev.n + 2 * i + 1]
                        + prev.data[(2 * j + 1) * prev.n + 2 * i]
                        + prev.data[(2 * j + 1) * prev.n + 2 * i + 1];
                    data.push(0.25 * s);
                }
            }
            levels.push(Level { n: m, data });
        }
        Roadmap { res_m: params.res_m, levels }
    }

    pub fn period_m(&self) -> f64 {
        self.levels[0].n as f64 * self.res_m
    }

    /// Trilinear mip sample matching the footprint size.
    pub fn sample(&self, x: f64, y: f64, size: f64) -> f64 {
        let lod = (size / self.res_m).max(1.0).log2().min((self.levels.len() - 1) as f64);
        let l0 = lod.floor() as usize;
        let t = lod - l0 as f64;
        let at = |l: usize| {
            let scale = (1usize << l) as f64 * self.res_m;
            self.levels[l].bilinear(x / scale, y / scale)
        };
        let a = at(l0);
        if t > 0.0 && l0 + 1 < self.levels.len() {
            a * (1.0 - t) + at(l0 + 1) * t
        } else {
            a
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force box average by midpoint quadrature.
    fn box_mean(c: &Checkerboard, x: f64, y: f64, size: f64) -> f64 {
        let n = 400;
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                let px = x - 0.5 * size + (i as f64 + 0.5) * size / n as f64;
                let py = y - 0.5 * size + (j as f64 + 0.5) * size / n as f64;
                s += c.sample(px, py, 0.0);
            }
        }
        s / (n * n) as f64
    }

    #[test]
    fn checkerboard_point_values() {
        let c = Checkerboard::default();
        assert_eq!(c.sample(0.01, 0.01, 0.0), 0.75);
        assert_eq!(c.sample(0.16, 0.01, 0.0), 0.25);
        assert_eq!(c.sample(-0.01, 0.01, 0.0), 0.25);
        // straddling a vertical edge half-half
        assert!((c.sample(0.15, 0.05, 0.02) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_box_filter_matches_quadrature() {
        let c = Checkerboard::default();
        for &(x, y, s) in &[(0.14, 0.02, 0.03), (0.149, 0.151, 0.01), (-0.3, 0.7, 0.2), (1.0, -0.01, 0.05)] {
            let exact = c.sample(x, y, s);
            let brute = box_mean(&c, x, y, s);
            assert!((exact - brute).abs() < 2e-3, "{x},{y},{s}: {exact} vs {brute}");
        }
    }

    #[test]
    fn roadmap_is_positive_periodic_and_deterministic() {
        let p = RoadmapParams { size: 128, res_m: 0.01, roads: 5, seed: 3 };
        let a = Roadmap::generate(&p);
        assert_eq!(a, Roadmap::generate(&p));
        let period = a.period_m();
        for &(x, y) in &[(0.1, 0.2), (0.55, 0.9), (-0.3, 0.01)] {
            let v = a.sample(x, y, 0.01);
            assert!(v > 0.0 && v < 1.0);
            assert!((v - a.sample(x + period, y - period, 0.01)).abs() < 1e-9);
        }
        // large footprints reduce to the global mean
        let mean: f64 = a.levels[0].data.iter().map(|&v| v as f64).sum::<f64>() / (128 * 128) as f64;
        assert!((a.sample(0.3, 0.3, 10.0) - mean).abs() < 1e-6);
    }
}
