use crate::camera::UndistortTable;
use crate::event::{Event, Polarity};

use super::FlowConfig;

const ABSENT: i64 = i64::MIN;

/// Neighbour relative to the event being processed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sample {
    /// Raw pixel offsets, used for the linear-independence test.
    pub dx: i32,
    pub dy: i32,
    /// Undistorted pixel offsets, used for fitting.
    pub ox: f64,
    pub oy: f64,
    /// Relative timestamp in microseconds (`<= 0`).
    pub dt: i64,
}

impl Sample {
    /// Sample with undistorted offsets equal to the raw ones.
    pub fn raw(dx: i32, dy: i32, dt: i64) -> Self {
        Sample { dx, dy, ox: dx as f64, oy: dy as f64, dt }
    }
}

/// Most recent accepted timestamp per pixel and polarity.
#[derive(Clone, Debug)]
pub struct EventBuffer {
    width: usize,
    height: usize,
    stamps: Vec<i64>,
}

impl EventBuffer {
    pub fn new(width: u16, height: u16) -> Self {
        let (width, height) = (width as usize, height as usize);
        EventBuffer { width, height, stamps: vec![ABSENT; 2 * width * height] }
    }

    #[inline]
    fn slot(&self, x: usize, y: usize, p: Polarity) -> usize {
        (p.index() * self.height + y) * self.width + x
    }

    #[inline]
    pub fn store(&mut self, e: &Event) {
        let i = self.slot(e.x as usize, e.y as usize, e.p);
        debug_assert!(self.stamps[i] == ABSENT || self.stamps[i] <= e.t as i64);
        self.stamps[i] = e.t as i64;
    }

    pub fn get(&self, x: u16, y: u16, p: Polarity) -> Option<u64> {
        let t = self.stamps[self.slot(x as usize, y as usize, p)];
        (t != ABSENT).then_some(t as u64)
    }

    pub fn clear(&mut self) {
        self.stamps.fill(ABSENT);
    }

    /// Appends every same-polarity neighbour in the centred window with a
    /// timestamp in `[t - max_age, t]`, scanning row-major, and then orders
    /// them most recent first (stable, so ties keep scan order).
    pub fn collect_neighbors(&self, e: &Event, half: i32, max_age_us: u64, table: &UndistortTable, out: &mut Vec<Sample>) {
        out.clear();
        let t = e.t as i64;
        let oldest = t - max_age_us as i64;
        let (ex, ey) = (e.x as i32, e.y as i32);
        let (xu0, yu0) = table.get(e.x, e.y);
        let plane = e.p.index() * self.height;
        for dy in -half..=half {
            let y = ey + dy;
            if y < 0 || y >= self.height as i32 {
                continue;
            }
            let row = (plane + y as usize) * self.width;
            for dx in -half..=half {
                let x = ex + dx;
                if (dx == 0 && dy == 0) || x < 0 || x >= self.width as i32 {
                    continue;
                }
                let ti = self.stamps[row + x as usize];
                if ti == ABSENT || ti < oldest || ti > t {
                    continue;
                }
                let (xu, yu) = table.get(x as u16, y as u16);
                out.push(Sample { dx, dy, ox: xu - xu0, oy: yu - yu0, dt: ti - t });
            }
        }
        sort_most_recent_first(out);
    }
}

/// Stable insertion sort by decreasing `dt`; neighbour sets are at most a
/// few dozen samples.
pub(crate) fn sort_most_recent_first(samples: &mut [Sample]) {
    for i in 1..samples.len() {
        let s = samples[i];
        let mut j = i;
        while j > 0 && samples[j - 1].dt < s.dt {
            samples[j] = samples[j - 1];
            j -= 1;
        }
        samples[j] = s;
    }
}

/// Collects neighbours with the window and age limit from `cfg`.
pub fn collect_neighbors(e: &Event, buf: &EventBuffer, cfg: &FlowConfig, table: &UndistortTable, out: &mut Vec<Sample>) {
    buf.collect_neighbors(e, cfg.half_window(), cfg.dt_max_us, table, out);
}
