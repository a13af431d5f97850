use std::f64::consts::PI;

use crate::geometry::{rotational_flow, Rates};

/// `m` directions evenly spaced over `[0, pi)`, the first at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionBank {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl DirectionBank {
    pub fn new(m: usize) -> Self {
        assert!(m > 0, "direction bank needs at least one direction");
        let alphas = (0..m).map(|i| i as f64 * PI / m as f64);
        let (cos, sin) = alphas.map(|a| (a.cos(), a.sin())).unzip();
        DirectionBank { cos, sin }
    }

    pub fn len(&self) -> usize {
        self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }

    pub fn alpha(&self, i: usize) -> f64 {
        i as f64 * PI / self.len() as f64
    }

    #[inline]
    pub fn cos(&self, i: usize) -> f64 {
        self.cos[i]
    }

    #[inline]
    pub fn sin(&self, i: usize) -> f64 {
        self.sin[i]
    }

    /// Closest direction to the flow angle, opposite flows sharing a
    /// direction. Boundary ties go to the lower index. `None` for zero flow.
    pub fn assign(&self, u: f64, v: f64) -> Option<usize> {
        if !(u != 0.0 || v != 0.0) || !u.is_finite() || !v.is_finite() {
            return None;
        }
        Some(self.assign_angle(v.atan2(u)))
    }

    pub fn assign_angle(&self, angle: f64) -> usize {
        let a = if angle < 0.0 { angle + PI } else { angle };
        let k = a / (PI / self.len() as f64);
        // round half down
        let i = (k - 0.5).ceil().max(0.0) as usize;
        i % self.len()
    }

    /// Position and flow magnitude along direction `i`.
    #[inline]
    pub fn project(&self, i: usize, x: f64, y: f64, u: f64, v: f64) -> (f64, f64) {
        let (c, s) = (self.cos[i], self.sin[i]);
        (x * c + y * s, u * c + v * s)
    }

    /// Removes the rotational flow component along direction `i`.
    #[inline]
    pub fn derotate(&self, i: usize, v: f64, x: f64, y: f64, rates: Rates) -> f64 {
        let (ur, vr) = rotational_flow(x, y, rates);
        v - (self.cos[i] * ur + self.sin[i] * vr)
    }
}

/// Running sums of one direction. `n` is real-valued after decay.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DirectionStats {
    pub n: f64,
    pub s: f64,
    pub s2: f64,
    pub v: f64,
    pub sv: f64,
    pub v2: f64,
}

impl DirectionStats {
    #[inline]
    pub fn accumulate(&mut self, s: f64, v: f64) {
        self.n += 1.0;
        self.s += s;
        self.s2 += s * s;
        self.v += v;
        self.sv += s * v;
        self.v2 += v * v;
    }

    #[inline]
    pub fn scale(&mut self, f: f64) {
        self.n *= f;
        self.s *= f;
        self.s2 *= f;
        self.v *= f;
        self.sv *= f;
        self.v2 *= f;
    }

    /// Variance of the stored positions, clamped at zero.
    pub fn variance(&self) -> f64 {
        if self.n <= 0.0 {
            return 0.0;
        }
        let mean = self.s / self.n;
        (self.s2 / self.n - mean * mean).max(0.0)
    }
}

/// Statistics of the whole direction bank.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowFieldStatistics {
    pub dirs: Vec<DirectionStats>,
}

impl FlowFieldStatistics {
    pub fn new(m: usize) -> Self {
        FlowFieldStatistics { dirs: vec![DirectionStats::default(); m] }
    }

    /// Keeps the fraction `max(0, 1 - dt / k_f)` of every statistic.
    pub fn decay(&mut self, dt_s: f64, k_f: f64) {
        let f = decay_factor(dt_s, k_f);
        self.dirs.iter_mut().for_each(|d| d.scale(f));
    }

    pub fn accumulate(&mut self, i: usize, s: f64, v: f64) {
        self.dirs[i].accumulate(s, v);
    }
}

#[inline]
pub fn decay_factor(dt_s: f64, k_f: f64) -> f64 {
    (1.0 - dt_s / k_f).max(0.0)
}
