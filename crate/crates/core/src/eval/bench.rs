//! Per-event processing time of the flow pipeline.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::camera::UndistortTable;
use crate::error::{Error, Result};
use crate::event::Event;
use crate::flow::{FlowConfig, FlowEstimator, FlowPipeline};

use super::metrics::mean_sd;

pub const DEFAULT_REPETITIONS: usize = 10;
pub const SWEEP_CSV_HEADER: &str = "rho_f_max,us_per_event_mean,us_per_event_sd";
pub const SWEEP_CAPS: [f64; 5] = [1e3, 3e3, 1e4, 3e4, f64::INFINITY];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThroughputStats {
    pub events: usize,
    pub repetitions: usize,
    pub flow_vectors: u64,
    pub us_per_event_mean: f64,
    pub us_per_event_sd: f64,
}

impl ThroughputStats {
    pub fn events_per_s(&self) -> f64 {
        1e6 / self.us_per_event_mean
    }

    pub fn coefficient_of_variation(&self) -> f64 {
        self.us_per_event_sd / self.us_per_event_mean
    }
}

/// Runs a fresh pipeline over `events` `repetitions` times on the calling
/// thread. The undistortion table is built once outside the timed region.
pub fn bench_throughput(events: &[Event], cfg: FlowConfig, table: &UndistortTable, repetitions: usize) -> ThroughputStats {
    let reps = repetitions.max(1);
    let mut per_event = Vec::with_capacity(reps);
    let mut flow_vectors = 0;
    for _ in 0..reps {
        let mut p = FlowPipeline::with_table(cfg, table.clone());
        let start = Instant::now();
        for e in events {
            std::hint::black_box(p.process(e));
        }
        let us = start.elapsed().as_secs_f64() * 1e6;
        per_event.push(us / events.len().max(1) as f64);
        flow_vectors = p.stats().emitted;
    }
    let (mean, sd) = mean_sd(&per_event);
    ThroughputStats { events: events.len(), repetitions: reps, flow_vectors, us_per_event_mean: mean, us_per_event_sd: sd }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub rho_f_max: f64,
    pub stats: ThroughputStats,
}

pub fn cap_sweep(events: &[Event], cfg: FlowConfig, table: &UndistortTable, caps: &[f64], repetitions: usize) -> Vec<SweepRow> {
    caps.iter()
        .map(|&rho_f_max| SweepRow {
            rho_f_max,
            stats: bench_throughput(events, FlowConfig { rho_f_max, ..cfg }, table, repetitions),
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(sink: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(SWEEP_CSV_HEADER.split(',')).map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        let cap = if r.rho_f_max.is_finite() { r.rho_f_max.to_string() } else { "inf".to_string() };
        w.write_record([cap, r.stats.us_per_event_mean.to_string(), r.stats.us_per_event_sd.to_string()])
            .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// True when every step to a tighter cap is no slower than `1 + band` times
/// the previous (looser) one. `rows` are ordered from tightest to loosest.
pub fn is_non_increasing_with_cap(rows: &[SweepRow], band: f64) -> bool {
    rows.windows(2).all(|w| w[0].stats.us_per_event_mean <= w[1].stats.us_per_event_mean * (1.0 + band))
}
