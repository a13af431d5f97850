//! Quadratic error-versus-divergence model `e = p0 + p1 d + p2 d^2`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticErrorModel {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl QuadraticErrorModel {
    #[inline]
    pub fn predict(&self, d: f64) -> f64 {
        self.p0 + self.p1 * d + self.p2 * d * d
    }
}

/// Error percentiles of the samples whose `|d|` falls in `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PercentileBin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

/// Ordinary least squares over `(|d|, e)` samples.
pub fn fit_quadratic(samples: &[(f64, f64)]) -> Result<QuadraticErrorModel> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0.abs()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Numeric(format!("quadratic fit needs 3 distinct abscissae, got {}", distinct.len())));
    }
    let n = samples.len();
    // centre and scale the abscissa for conditioning
    let mid = distinct.iter().sum::<f64>() / distinct.len() as f64;
    let scale = (distinct[distinct.len() - 1] - distinct[0]).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(n, 3, |i, j| ((samples[i].0.abs() - mid) / scale).powi(j as i32));
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let svd = a.svd(true, true);
    let c = svd.solve(&y, 1e-12).map_err(|e| Error::Numeric(e.to_string()))?;
    // expand (c0 + c1 s + c2 s^2) with s = (d - mid) / scale
    let (c0, c1, c2) = (c[0], c[1] / scale, c[2] / (scale * scale));
    Ok(QuadraticErrorModel { p0: c0 - c1 * mid + c2 * mid * mid, p1: c1 - 2.0 * c2 * mid, p2: c2 })
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// 25/50/75 % error percentiles in bins of `|d|` of width `width`.
pub fn binned_percentiles(samples: &[(f64, f64)], width: f64) -> Vec<PercentileBin> {
    let mut bins: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for &(d, e) in samples {
        bins.entry((d.abs() / width).floor() as i64).or_default().push(e);
    }
    bins.into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            PercentileBin {
                lo: k as f64 * width,
                hi: (k + 1) as f64 * width,
                n: v.len(),
                p25: percentile(&v, 0.25),
                p50: percentile(&v, 0.5),
                p75: percentile(&v, 0.75),
            }
        })
        .collect()
}

/// Residuals of the model on the samples.
pub fn residuals(model: &QuadraticErrorModel, samples: &[(f64, f64)]) -> Vec<f64> {
    samples.iter().map(|&(d, e)| e - model.predict(d.abs())).collect()
}
