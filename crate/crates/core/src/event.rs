//! Event data model, stream IO and refractory filtering.
//!
//! Two on-disk formats are supported:
//!
//! * CSV with header `t_us,x,y,p`, one event per line, `p` in `{-1, 1}`.
//! * `.evb` binary: packed little-endian records of
//!   `(u64 t_us, u16 x, u16 y, i8 p)`, 13 bytes each, no header.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "t_us,x,y,p";
pub const BINARY_RECORD_LEN: usize = 13;

/// Default sensor size of the DVS128.
pub const DEFAULT_WIDTH: u16 = 128;
pub const DEFAULT_HEIGHT: u16 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Neg,
    Pos,
}

impl Polarity {
    pub fn from_sign(p: i8) -> Option<Self> {
        match p {
            1 => Some(Polarity::Pos),
            -1 => Some(Polarity::Neg),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Polarity::Pos => 1,
            Polarity::Neg => -1,
        }
    }

    /// Index into per-polarity state arrays.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Polarity::Neg => 0,
            Polarity::Pos => 1,
        }
    }
}

/// One DVS measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Event { t, x, y, p }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Binary,
}

impl EventFormat {
    /// Picks the format from a file extension; `.evb` is binary, anything
    /// else is treated as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("evb") => EventFormat::Binary,
            _ => EventFormat::Csv,
        }
    }
}

/// Reads a whole event stream, validating timestamp monotonicity.
pub fn read_events<R: Read>(source: R, format: EventFormat) -> Result<Vec<Event>> {
    let events = match format {
        EventFormat::Csv => read_csv(source)?,
        EventFormat::Binary => read_binary(source)?,
    };
    check_monotonic(&events)?;
    Ok(events)
}

pub fn read_events_file(path: &Path) -> Result<Vec<Event>> {
    let file = std::fs::File::open(path)?;
    read_events(std::io::BufReader::new(file), EventFormat::from_path(path))
}

/// Rejects events outside a `width` x `height` sensor.
pub fn check_bounds(events: &[Event], width: u16, height: u16) -> Result<()> {
    match events.iter().find(|e| e.x >= width || e.y >= height) {
        Some(e) => Err(Error::OutOfBounds { x: e.x, y: e.y, width, height }),
        None => Ok(()),
    }
}

fn check_monotonic(events: &[Event]) -> Result<()> {
    for (i, pair) in events.windows(2).enumerate() {
        if pair[1].t < pair[0].t {
            return Err(Error::Ordering { record: i + 2, t_us: pair[1].t, prev_us: pair[0].t });
        }
    }
    Ok(())
}

fn read_csv<R: Read>(source: R) -> Result<Vec<Event>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(source);
    let mut events = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(format!("line {line}"), e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if first {
            first = false;
            if record.get(0).is_some_and(|f| f.parse::<u64>().is_err()) {
                let header: Vec<&str> = record.iter().collect();
                if header.join(",") != CSV_HEADER {
                    return Err(Error::parse(format!("line {line}"), format!("expected header `{CSV_HEADER}`")));
                }
                continue;
            }
        }
        events.push(parse_csv_record(&record, line)?);
    }
    Ok(events)
}

fn parse_csv_record(record: &csv::StringRecord, line: u64) -> Result<Event> {
    let loc = || format!("line {line}");
    if record.len() != 4 {
        return Err(Error::parse(loc(), format!("expected 4 fields, found {}", record.len())));
    }
    let t = record[0].parse::<u64>().map_err(|e| Error::parse(loc(), format!("t_us: {e}")))?;
    let x = record[1].parse::<u16>().map_err(|e| Error::parse(loc(), format!("x: {e}")))?;
    let y = record[2].parse::<u16>().map_err(|e| Error::parse(loc(), format!("y: {e}")))?;
    let p = record[3]
        .parse::<i8>()
        .ok()
        .and_then(Polarity::from_sign)
        .ok_or_else(|| Error::parse(loc(), format!("polarity must be -1 or 1, got `{}`", &record[3])))?;
    Ok(Event { t, x, y, p })
}

fn read_binary<R: Read>(mut source: R) -> Result<Vec<Event>> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() % BINARY_RECORD_LEN != 0 {
        let offset = bytes.len() - bytes.len() % BINARY_RECORD_LEN;
        return Err(Error::parse(format!("byte offset {offset}"), "truncated record"));
    }
    bytes
        .chunks_exact(BINARY_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
            let x = u16::from_le_bytes([rec[8], rec[9]]);
            let y = u16::from_le_bytes([rec[10], rec[11]]);
            let p = Polarity::from_sign(rec[12] as i8).ok_or_else(|| {
                Error::parse(
                    format!("byte offset {}", i * BINARY_RECORD_LEN + 12),
                    format!("polarity byte {} is not -1 or 1", rec[12] as i8),
                )
            })?;
            Ok(Event { t, x, y, p })
        })
        .collect()
}

pub fn write_events<W: Write>(mut sink: W, events: &[Event], format: EventFormat) -> Result<()> {
    match format {
        EventFormat::Csv => {
            writeln!(sink, "{CSV_HEADER}")?;
            for e in events {
                writeln!(sink, "{},{},{},{}", e.t, e.x, e.y, e.p.sign())?;
            }
        }
        EventFormat::Binary => {
            let mut rec = [0u8; BINARY_RECORD_LEN];
            for e in events {
                rec[0..8].copy_from_slice(&e.t.to_le_bytes());
                rec[8..10].copy_from_slice(&e.x.to_le_bytes());
                rec[10..12].copy_from_slice(&e.y.to_le_bytes());
                rec[12] = e.p.sign() as u8;
                sink.write_all(&rec)?;
            }
        }
    }
    sink.flush()?;
    Ok(())
}

pub fn write_events_file(path: &Path, events: &[Event]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_events(std::io::BufWriter::new(file), events, EventFormat::from_path(path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefractoryOutcome {
    Accept,
    Suppress,
}

/// Per-pixel refractory filter. Events within `dt_r` of the last accepted
/// event at the same pixel are dropped entirely.
#[derive(Clone, Debug)]
pub struct RefractoryFilter {
    width: usize,
    height: usize,
    dt_r_us: u64,
    last_emit: Vec<Option<u64>>,
}

impl RefractoryFilter {
    pub fn new(width: u16, height: u16, dt_r_us: u64) -> Self {
        let (width, height) = (width as usize, height as usize);
        RefractoryFilter { width, height, dt_r_us, last_emit: vec![None; width * height] }
    }

    pub fn dt_r_us(&self) -> u64 {
        self.dt_r_us
    }

    pub fn last_emit(&self, x: u16, y: u16) -> Option<u64> {
        self.last_emit[y as usize * self.width + x as usize]
    }

    pub fn pass(&mut self, e: &Event) -> RefractoryOutcome {
        debug_assert!((e.x as usize) < self.width && (e.y as usize) < self.height);
        let slot = &mut self.last_emit[e.y as usize * self.width + e.x as usize];
        match *slot {
            Some(last) if e.t.saturating_sub(last) <= self.dt_r_us => RefractoryOutcome::Suppress,
            _ => {
                *slot = Some(e.t);
                RefractoryOutcome::Accept
            }
        }
    }

    pub fn reset(&mut self) {
        self.last_emit.fill(None);
    }

    /// Filters a whole stream, keeping accepted events.
    pub fn filter_stream(&mut self, events: &[Event]) -> Vec<Event> {
        events.iter().copied().filter(|e| self.pass(e) == RefractoryOutcome::Accept).collect()
    }
}
