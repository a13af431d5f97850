use serde::Serialize;

use crate::camera::{CameraIntrinsics, UndistortTable};
use crate::error::Result;
use crate::event::{Event, RefractoryFilter, RefractoryOutcome};

use super::buffer::{EventBuffer, Sample};
use super::cluster::cluster_by_timestamp;
use super::fit::{reject_outliers_nrmse, slopes_to_flow, support_lag_us, FitError};
use super::{FlowConfig, NormalFlowVector};

/// Per-stage drop counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PipelineStats {
    pub events_in: u64,
    pub out_of_bounds: u64,
    pub refractory_suppressed: u64,
    pub rate_capped: u64,
    pub cluster_failed: u64,
    pub too_few_samples: u64,
    pub fit_failed: u64,
    pub nrmse_rejected: u64,
    pub stationary: u64,
    pub speed_rejected: u64,
    pub emitted: u64,
}

impl PipelineStats {
    /// Events that passed the refractory filter.
    pub fn accepted(&self) -> u64 {
        self.events_in - self.out_of_bounds - self.refractory_suppressed
    }
}

/// Global output rate limiter: skips fitting while the last emission is
/// more recent than the minimal interval.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RateCap {
    interval_us: Option<f64>,
    last: Option<u64>,
}

impl RateCap {
    pub(crate) fn new(interval_us: Option<f64>) -> Self {
        RateCap { interval_us, last: None }
    }

    #[inline]
    pub(crate) fn blocks(&self, t: u64) -> bool {
        match (self.interval_us, self.last) {
            (Some(dt), Some(last)) => ((t - last) as f64) <= dt,
            _ => false,
        }
    }

    #[inline]
    pub(crate) fn emitted(&mut self, t: u64) {
        self.last = Some(t);
    }
}

/// Streaming normal-flow estimator.
pub trait FlowEstimator {
    fn process(&mut self, e: &Event) -> Option<NormalFlowVector>;

    fn stats(&self) -> &PipelineStats;

    fn run(&mut self, events: &[Event]) -> Vec<NormalFlowVector> {
        events.iter().filter_map(|e| self.process(e)).collect()
    }
}

/// Refractory filter, timestamp clustering, reduced plane fit with NRMSE
/// rejection and speed gate.
pub struct FlowPipeline {
    cfg: FlowConfig,
    table: UndistortTable,
    refractory: RefractoryFilter,
    buffer: EventBuffer,
    cap: RateCap,
    stats: PipelineStats,
    scratch: Vec<Sample>,
}

impl FlowPipeline {
    pub fn new(cfg: FlowConfig, intr: &CameraIntrinsics) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::with_table(cfg, UndistortTable::new(intr)?))
    }

    pub fn with_table(cfg: FlowConfig, table: UndistortTable) -> Self {
        let (w, h) = (table.width() as u16, table.height() as u16);
        let win = cfg.win_xy as usize;
        FlowPipeline {
            refractory: RefractoryFilter::new(w, h, cfg.refractory_us),
            buffer: EventBuffer::new(w, h),
            cap: RateCap::new(cfg.min_emit_interval_us()),
            stats: PipelineStats::default(),
            scratch: Vec::with_capacity(win * win),
            cfg,
            table,
        }
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    pub fn table(&self) -> &UndistortTable {
        &self.table
    }
}

impl FlowEstimator for FlowPipeline {
    fn process(&mut self, e: &Event) -> Option<NormalFlowVector> {
        let stats = &mut self.stats;
        stats.events_in += 1;
        if e.x as usize >= self.table.width() || e.y as usize >= self.table.height() {
            stats.out_of_bounds += 1;
            return None;
        }
        if self.refractory.pass(e) == RefractoryOutcome::Suppress {
            stats.refractory_suppressed += 1;
            return None;
        }
        self.buffer.store(e);
        if self.cap.blocks(e.t) {
            stats.rate_capped += 1;
            return None;
        }

        let samples = &mut self.scratch;
        self.buffer.collect_neighbors(e, self.cfg.half_window(), self.cfg.dt_max_us, &self.table, samples);
        match cluster_by_timestamp(samples, self.cfg.k_s) {
            Ok(n) => samples.truncate(n),
            Err(_) => {
                stats.cluster_failed += 1;
                return None;
            }
        }
        if samples.len() < self.cfg.n_min {
            stats.too_few_samples += 1;
            return None;
        }
        let slopes = match reject_outliers_nrmse(samples, self.cfg.nrmse_max, self.cfg.n_r) {
            Ok(s) => s,
            Err(FitError::Singular) => {
                stats.fit_failed += 1;
                return None;
            }
            Err(FitError::Stationary) => {
                stats.stationary += 1;
                return None;
            }
            Err(FitError::Nrmse(_)) => {
                stats.nrmse_rejected += 1;
                return None;
            }
        };
        let Some((u, v)) = slopes_to_flow(&slopes) else {
            stats.stationary += 1;
            return None;
        };
        if u.hypot(v) > self.cfg.v_max {
            stats.speed_rejected += 1;
            return None;
        }
        self.cap.emitted(e.t);
        stats.emitted += 1;
        let (x_u, y_u) = self.table.get(e.x, e.y);
        Some(NormalFlowVector { t: e.t, x_u, y_u, u, v, p: e.p, lag_us: support_lag_us(samples) })
    }

    fn stats(&self) -> &PipelineStats {
        &self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Polarity;

    /// Vertical edge sweeping +x at `speed` px/s over a 32x32 sensor.
    fn edge_stream(speed: f64, rows: std::ops::Range<u16>) -> Vec<Event> {
        let mut ev = Vec::new();
        for x in 0..32u16 {
            let t = (1e6 * x as f64 / speed).round() as u64 + 1000;
            for y in rows.clone() {
                ev.push(Event::new(t, x, y, Polarity::Pos));
            }
        }
        ev
    }

    fn pipeline(cfg: FlowConfig) -> FlowPipeline {
        FlowPipeline::with_table(cfg, UndistortTable::identity(32, 32))
    }

    #[test]
    fn translating_edge_gives_its_speed() {
        let mut p = pipeline(FlowConfig::default());
        let out = p.run(&edge_stream(50.0, 0..32));
        assert!(out.len() > 500, "{:?}", p.stats());
        for f in &out {
            assert!((f.u - 50.0).abs() < 1e-6 && f.v.abs() < 1e-6, "{f:?}");
        }
    }

    #[test]
    fn refractory_duplicates_only_counted() {
        let mut ev = edge_stream(50.0, 0..32);
        let dup: Vec<_> = ev.iter().map(|e| Event { t: e.t + 10, ..*e }).collect();
        ev.extend(dup);
        ev.sort_by_key(|e| (e.t, e.y, e.x));
        let mut p = pipeline(FlowConfig::default());
        let n = p.run(&ev).len();
        let mut q = pipeline(FlowConfig::default());
        assert_eq!(n, q.run(&edge_stream(50.0, 0..32)).len());
        assert_eq!(p.stats().refractory_suppressed, 32 * 32);
    }

    #[test]
    fn fast_edge_fails_speed_gate() {
        let cfg = FlowConfig { refractory_us: 0, ..FlowConfig::default() };
        let mut p = pipeline(cfg);
        let out = p.run(&edge_stream(2000.0, 0..32));
        assert!(out.is_empty());
        assert!(p.stats().speed_rejected > 0);
    }

    #[test]
    fn rate_cap_spaces_outputs() {
        let cfg = FlowConfig { rho_f_max: 20.0, ..FlowConfig::default() };
        let mut p = pipeline(cfg);
        let out = p.run(&edge_stream(50.0, 0..32));
        assert!(!out.is_empty());
        for w in out.windows(2) {
            assert!(w[1].t - w[0].t > 50_000);
        }
    }

    #[test]
    fn single_row_edge_is_rank_deficient() {
        let mut p = pipeline(FlowConfig::default());
        assert!(p.run(&edge_stream(50.0, 5..6)).is_empty());
        assert!(p.stats().cluster_failed > 0);
        assert_eq!(p.stats().emitted, 0);
    }
}
