//! Weighted least squares over the directional flow fields.
//!
//! Every flow vector contributes a row `[-cos a, -sin a, S]` with target
//! `V`, so the normal equations only need the per-direction sums.

use nalgebra::{Matrix3, Vector3};

use super::stats::{DirectionBank, FlowFieldStatistics};

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub theta: Vector3<f64>,
    pub r2: f64,
    pub weights: Vec<f64>,
}

/// Piecewise-linear reliability weight from the position variance (px^2).
#[inline]
pub fn variance_weight(var_px2: f64, var_min: f64) -> f64 {
    if var_px2 <= 1e-9 {
        0.0
    } else if var_px2 <= var_min {
        var_px2 / var_min
    } else {
        1.0
    }
}

/// Weights for all directions; positions are metric, `focal_px` converts
/// the variance to pixels^2.
pub fn direction_weights(stats: &FlowFieldStatistics, focal_px: f64, var_min: f64) -> Vec<f64> {
    stats.dirs.iter().map(|d| variance_weight(d.variance() * focal_px * focal_px, var_min)).collect()
}

/// Normal matrices `B = A^T W A` and `C = A^T W y`.
pub fn normal_equations(stats: &FlowFieldStatistics, bank: &DirectionBank, weights: &[f64]) -> (Matrix3<f64>, Vector3<f64>) {
    let mut b = Matrix3::zeros();
    let mut c = Vector3::zeros();
    for (i, (d, &w)) in stats.dirs.iter().zip(weights).enumerate() {
        if w == 0.0 {
            continue;
        }
        let (ca, sa) = (bank.cos(i), bank.sin(i));
        b[(0, 0)] += w * d.n * ca * ca;
        b[(1, 0)] += w * d.n * ca * sa;
        b[(1, 1)] += w * d.n * sa * sa;
        b[(2, 0)] -= w * ca * d.s;
        b[(2, 1)] -= w * sa * d.s;
        b[(2, 2)] += w * d.s2;
        c[0] -= w * ca * d.v;
        c[1] -= w * sa * d.v;
        c[2] += w * d.sv;
    }
    b[(0, 1)] = b[(1, 0)];
    b[(0, 2)] = b[(2, 0)];
    b[(1, 2)] = b[(2, 1)];
    (b, c)
}

/// Determinant of `B` after scaling to unit diagonal; scale free.
fn normalized_determinant(b: &Matrix3<f64>) -> f64 {
    let d = b.diagonal();
    if d.iter().any(|&v| !(v > 0.0)) {
        return 0.0;
    }
    let s = Matrix3::from_diagonal(&d.map(|v| 1.0 / v.sqrt()));
    (s * b * s).determinant()
}

/// Solves for the scaled velocities. `None` when the weighted system is
/// singular (including all weights zero).
pub fn solve_observables(stats: &FlowFieldStatistics, bank: &DirectionBank, focal_px: f64, var_min: f64) -> Option<Solution> {
    let weights = direction_weights(stats, focal_px, var_min);
    let (b, c) = normal_equations(stats, bank, &weights);
    if normalized_determinant(&b) < 1e-10 {
        return None;
    }
    let theta = b.lu().solve(&c)?;
    if !theta.iter().all(|v| v.is_finite()) {
        return None;
    }
    let (mut ywy, mut wv, mut wn) = (0.0, 0.0, 0.0);
    for (d, &w) in stats.dirs.iter().zip(&weights) {
        ywy += w * d.v2;
        wv += w * d.v;
        wn += w * d.n;
    }
    let rss = ywy - theta.dot(&c);
    let tss = ywy - wv * wv / wn;
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    Some(Solution { theta, r2, weights })
}

/// Product of the detection-rate, spread and fit-quality confidences.
pub fn confidence(rho_f: f64, weights: &[f64], r2: f64, rho_f_min: f64, r2_min: f64) -> f64 {
    let k_rho = (rho_f / rho_f_min).clamp(0.0, 1.0);
    let k_var = weights.iter().copied().fold(0.0, f64::max);
    let k_r2 = (r2 / r2_min).clamp(0.0, 1.0);
    k_rho * k_var * k_r2
}

/// Confidence-weighted low-pass step with per-component saturation.
pub fn filter_update(prev: &Vector3<f64>, theta: &Vector3<f64>, k: f64, dt_s: f64, k_t: f64, max_step: f64) -> Vector3<f64> {
    prev + (theta - prev).map(|d| (d * k * dt_s / k_t).clamp(-max_step, max_step))
}
