use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{flow_rates_from_body, Rates};

use super::Estimate;

pub const LOG_CSV_HEADER: &str = "t_s,vx,vy,vz,K,rho_f,r2";
pub const RATES_CSV_HEADER: &str = "t_us,p,q,r";

#[derive(Serialize)]
struct LogRow {
    t_s: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    #[serde(rename = "K")]
    k: f64,
    rho_f: f64,
    r2: f64,
}

pub fn write_observables_csv<W: Write>(sink: W, log: &[Estimate]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(LOG_CSV_HEADER.split(',')).map_err(|e| Error::Io(e.into()))?;
    for e in log {
        let row = LogRow { t_s: e.t_s, vx: e.obs.vx, vy: e.obs.vy, vz: e.obs.vz, k: e.obs.k, rho_f: e.rho_f, r2: e.r2 };
        w.serialize(row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct RateRow {
    t_us: u64,
    p: f64,
    q: f64,
    r: f64,
}

/// Body-rate samples held constant until the next sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateTrack {
    samples: Vec<(u64, Rates)>,
}

impl RateTrack {
    /// `samples` must be sorted by time.
    pub fn new(samples: Vec<(u64, Rates)>) -> Self {
        debug_assert!(samples.windows(2).all(|w| w[0].0 <= w[1].0));
        RateTrack { samples }
    }

    /// Reads `t_us,p,q,r` rows of body rates in rad/s.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let mut samples: Vec<(u64, Rates)> = Vec::new();
        for (i, row) in r.deserialize::<RateRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
            if let Some(&(prev, _)) = samples.last() {
                if row.t_us < prev {
                    return Err(Error::Ordering { record: line - 1, t_us: row.t_us, prev_us: prev });
                }
            }
            samples.push((row.t_us, Rates::new(row.p, row.q, row.r)));
        }
        Ok(RateTrack { samples })
    }

    /// First and last sample times, `None` when empty.
    pub fn span_us(&self) -> Option<(u64, u64)> {
        Some((self.samples.first()?.0, self.samples.last()?.0))
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Body rates at `t_us`; zero before the first sample.
    pub fn body_rates(&self, t_us: u64) -> Rates {
        let i = self.samples.partition_point(|&(t, _)| t <= t_us);
        if i == 0 {
            Rates::ZERO
        } else {
            self.samples[i - 1].1
        }
    }

    /// Rates in the flow-equation convention at `t_us`.
    pub fn flow_rates(&self, t_us: u64) -> Rates {
        flow_rates_from_body(self.body_rates(t_us))
    }
}
