use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Polarity;

use super::NormalFlowVector;

pub const FLOW_CSV_HEADER: &str = "t_us,x_u,y_u,u_pps,v_pps,p";

#[derive(Serialize, Deserialize)]
struct Row {
    t_us: u64,
    x_u: f64,
    y_u: f64,
    u_pps: f64,
    v_pps: f64,
    p: i8,
}

pub fn write_flow_csv<W: Write>(sink: W, flow: &[NormalFlowVector]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(FLOW_CSV_HEADER.split(',')).map_err(|e| Error::Io(e.into()))?;
    for f in flow {
        w.serialize(Row { t_us: f.t, x_u: f.x_u, y_u: f.y_u, u_pps: f.u, v_pps: f.v, p: f.p.sign() })
            .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_flow_csv<R: Read>(source: R) -> Result<Vec<NormalFlowVector>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
        let p = Polarity::from_sign(row.p)
            .ok_or_else(|| Error::parse(format!("line {line}"), format!("polarity {} not in {{-1, 1}}", row.p)))?;
        if let Some(prev) = out.last().map(|f: &NormalFlowVector| f.t) {
            if row.t_us < prev {
                return Err(Error::Ordering { record: line - 1, t_us: row.t_us, prev_us: prev });
            }
        }
        out.push(NormalFlowVector { t: row.t_us, x_u: row.x_u, y_u: row.y_u, u: row.u_pps, v: row.v_pps, p, lag_us: 0.0 });
    }
    Ok(out)
}
