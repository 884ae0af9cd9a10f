//! Bucket selection policies.
//!
//! Every policy observes data packets (to track which buckets changed) and,
//! on each telemetry packet, decides which buckets ride in the next
//! sketchlet. The hardware policies inspect a window of `2^r` consecutive
//! columns per row starting at a random `addr`; the software policy scans
//! the whole structure ahead of time and queues complete address tuples.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sketch::Sketch;
use crate::sketchlet::Sketchlet;
use crate::{Error, FlowKey, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Bitmap,
    Cookie,
    Software,
    Kchance,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::Bitmap,
        Policy::Cookie,
        Policy::Software,
        Policy::Kchance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Bitmap => "bitmap",
            Policy::Cookie => "cookie",
            Policy::Software => "software",
            Policy::Kchance => "kchance",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown policy {s:?}")))
    }
}

/// How a window start is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AddrMode {
    /// Multiples of `2^r`, so a window never wraps; matches a row split
    /// into `2^r` registers.
    Aligned,
    /// Any column; windows wrap modulo `w`.
    Wrapping,
}

pub fn draw_addr<R: Rng + ?Sized>(
    rng: &mut R,
    width: usize,
    offset_bits: u32,
    mode: AddrMode,
) -> usize {
    match mode {
        AddrMode::Aligned => rng.gen_range(0..width >> offset_bits) << offset_bits,
        AddrMode::Wrapping => rng.gen_range(0..width),
    }
}

/// One bit per sketch bucket: set on update, cleared when sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    rows: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(rows: usize, width: usize) -> Self {
        Bitmap {
            rows,
            width,
            bits: vec![false; rows * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.bits[row * self.width + col] = v;
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn on_data(&mut self, sketch: &mut Sketch, key: FlowKey) {
        for row in 0..self.rows {
            let col = sketch.hasher().index(row, key);
            sketch.add_at(row, col, 1);
            self.bits[row * self.width + col] = true;
        }
    }

    /// Per row, takes the first set bit in `[addr, addr + 2^r)`; if none is
    /// set the last position of the window is taken. The chosen bit is
    /// cleared either way.
    pub fn select_at(&mut self, sketch: &Sketch, addr: usize, offset_bits: u32) -> Sketchlet {
        let span = 1usize << offset_bits;
        let mask = self.width - 1;
        let offsets: Vec<u32> = (0..self.rows)
            .map(|row| {
                let j = (0..span)
                    .find(|&j| self.get(row, (addr + j) & mask))
                    .unwrap_or(span - 1);
                self.set(row, (addr + j) & mask, false);
                j as u32
            })
            .collect();
        sketch.read_sketchlet(addr, &offsets)
    }

    pub fn on_int<R: Rng + ?Sized>(
        &mut self,
        sketch: &Sketch,
        offset_bits: u32,
        mode: AddrMode,
        rng: &mut R,
    ) -> Sketchlet {
        let addr = draw_addr(rng, self.width, offset_bits, mode);
        self.select_at(sketch, addr, offset_bits)
    }
}

/// Threshold adaptation state shared by the cookie policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorState {
    /// Threshold exponent: cells at or above `2^h - 1` qualify.
    pub h: u32,
    /// Right shift applied to a cell when its bucket is sent.
    pub shift: u32,
    pub cell_cnt: u64,
    pub pkt_cnt: u64,
    pub alpha: f64,
    pub beta: f64,
    /// Telemetry packets between two adaptations.
    pub period: u64,
    /// Cookie cell width `b`; upper clamp for `h`.
    pub cell_bits: u32,
}

impl SelectorState {
    pub fn new(cell_bits: u32, h: u32, shift: u32) -> Self {
        SelectorState {
            h: h.clamp(1, cell_bits),
            shift,
            cell_cnt: 0,
            pkt_cnt: 0,
            alpha: 0.5,
            beta: 1.0,
            period: 100,
            cell_bits,
        }
    }

    pub fn threshold(&self) -> u32 {
        ((1u64 << self.h) - 1) as u32
    }

    /// Lowers `h` when fewer than `alpha` of the selected buckets
    /// qualified, raises it when more than `beta` did, then resets the
    /// counters.
    pub fn adapt_h(&mut self, rows: usize) {
        if self.pkt_cnt > 0 {
            let ratio = self.cell_cnt as f64 / (rows as f64 * self.pkt_cnt as f64);
            if ratio < self.alpha {
                self.h = self.h.saturating_sub(1).max(1);
            } else if ratio > self.beta {
                self.h = (self.h + 1).min(self.cell_bits);
            }
        }
        self.cell_cnt = 0;
        self.pkt_cnt = 0;
    }

    /// Queue-length driven adaptation used by the software policy.
    pub fn software_adapt_h(&mut self, fifo_len: usize, phi: usize, phi_prime: usize) {
        if fifo_len < phi {
            self.h = self.h.saturating_sub(1).max(1);
        } else if fifo_len > phi_prime {
            self.h = (self.h + 1).min(self.cell_bits);
        }
    }
}

/// Saturating `b`-bit counter per sketch bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cookie {
    rows: usize,
    width: usize,
    cell_bits: u32,
    cells: Vec<u32>,
}

impl Cookie {
    pub fn new(rows: usize, width: usize, cell_bits: u32) -> Result<Self> {
        if !(1..=32).contains(&cell_bits) {
            return Err(Error::InvalidParams(format!(
                "cookie cell bits must be in [1, 32], got {cell_bits}"
            )));
        }
        Ok(Cookie {
            rows,
            width,
            cell_bits,
            cells: vec![0; rows * width],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cell_max(&self) -> u32 {
        ((1u64 << self.cell_bits) - 1) as u32
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u32) {
        self.cells[row * self.width + col] = v.min(self.cell_max());
    }

    #[inline]
    pub fn increment_at(&mut self, row: usize, col: usize) {
        let max = self.cell_max();
        let c = &mut self.cells[row * self.width + col];
        if *c < max {
            *c += 1;
        }
    }

    #[inline]
    fn shift_at(&mut self, row: usize, col: usize, shift: u32) {
        let c = &mut self.cells[row * self.width + col];
        *c = c.checked_shr(shift).unwrap_or(0);
    }

    pub fn on_data(&mut self, sketch: &mut Sketch, key: FlowKey) {
        for row in 0..self.rows {
            let col = sketch.hasher().index(row, key);
            sketch.add_at(row, col, 1);
            self.increment_at(row, col);
        }
    }

    /// Per row, takes the first cell in `[addr, addr + 2^r)` that reaches the
    /// threshold (counting it in `cell_cnt`), else the last position of the
    /// window. The chosen cell is right-shifted by `st.shift`.
    pub fn select_at(
        &mut self,
        st: &mut SelectorState,
        sketch: &Sketch,
        addr: usize,
        offset_bits: u32,
    ) -> Sketchlet {
        let span = 1usize << offset_bits;
        let mask = self.width - 1;
        let thr = st.threshold();
        st.pkt_cnt += 1;
        let offsets: Vec<u32> = (0..self.rows)
            .map(|row| {
                let j = match (0..span).find(|&j| self.get(row, (addr + j) & mask) >= thr) {
                    Some(j) => {
                        st.cell_cnt += 1;
                        j
                    }
                    None => span - 1,
                };
                self.shift_at(row, (addr + j) & mask, st.shift);
                j as u32
            })
            .collect();
        sketch.read_sketchlet(addr, &offsets)
    }

    /// Draws a window, selects, and runs [`SelectorState::adapt_h`] once every
    /// `st.period` packets.
    pub fn on_int<R: Rng + ?Sized>(
        &mut self,
        st: &mut SelectorState,
        sketch: &Sketch,
        offset_bits: u32,
        mode: AddrMode,
        rng: &mut R,
    ) -> Sketchlet {
        let addr = draw_addr(rng, self.width, offset_bits, mode);
        let s = self.select_at(st, sketch, addr, offset_bits);
        if st.pkt_cnt >= st.period {
            st.adapt_h(self.rows);
        }
        s
    }
}

/// A complete scatter address queued by the software policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressTuple {
    pub addr: u32,
    pub offsets: Vec<u32>,
}

/// Partially built tuple; `None` marks an unfilled row.
struct PendingTuple {
    addr: Option<usize>,
    offsets: Vec<Option<usize>>,
}

impl PendingTuple {
    fn new(rows: usize) -> Self {
        PendingTuple {
            addr: None,
            offsets: vec![None; rows],
        }
    }

    fn clear(&mut self) {
        self.addr = None;
        self.offsets.iter_mut().for_each(|o| *o = None);
    }

    fn complete(&self) -> Option<AddressTuple> {
        let addr = self.addr?;
        let offsets = self
            .offsets
            .iter()
            .map(|o| o.map(|o| o as u32))
            .collect::<Option<Vec<_>>>()?;
        Some(AddressTuple {
            addr: addr as u32,
            offsets,
        })
    }

    /// Moves `addr` forward to the nearest recorded position past it and
    /// drops rows that fall behind. With nothing recorded past `addr` the
    /// tuple is discarded.
    fn slide(&mut self) {
        let step = self
            .offsets
            .iter()
            .flatten()
            .copied()
            .filter(|&o| o > 0)
            .min();
        match step {
            Some(o) => {
                self.addr = self.addr.map(|a| a + o);
                for off in self.offsets.iter_mut() {
                    *off = off.and_then(|x| x.checked_sub(o));
                }
            }
            None => self.clear(),
        }
    }
}

/// One left-to-right pass over the cookie, queueing every complete tuple
/// of qualifying cells whose offsets fit in `r` bits. Cells of a queued
/// tuple are right-shifted by `st.shift`.
pub fn software_scan(
    cookie: &mut Cookie,
    st: &SelectorState,
    offset_bits: u32,
    fifo: &mut VecDeque<AddressTuple>,
) {
    let rows = cookie.rows;
    let span = 1usize << offset_bits;
    let thr = st.threshold();
    let mut t = PendingTuple::new(rows);

    let mut emit = |t: &mut PendingTuple, cookie: &mut Cookie| {
        if let Some(done) = t.complete() {
            for (row, &o) in done.offsets.iter().enumerate() {
                cookie.shift_at(row, (done.addr + o) as usize, st.shift);
            }
            fifo.push_back(done);
            t.clear();
            true
        } else {
            false
        }
    };

    for i in 0..cookie.width {
        if !emit(&mut t, cookie) {
            if let Some(a) = t.addr {
                if i - a >= span {
                    t.slide();
                }
            }
        }
        for row in 0..rows {
            if cookie.get(row, i) >= thr {
                match t.addr {
                    None => {
                        t.addr = Some(i);
                        t.offsets[row] = Some(0);
                    }
                    Some(a) if i < a + span && t.offsets[row].is_none() => {
                        t.offsets[row] = Some(i - a);
                    }
                    _ => {}
                }
            }
        }
    }
    // a tuple completed in the last column
    emit(&mut t, cookie);
}

/// Pops the oldest queued tuple and reads its buckets.
pub fn software_on_int(fifo: &mut VecDeque<AddressTuple>, sketch: &Sketch) -> Option<Sketchlet> {
    let t = fifo.pop_front()?;
    Some(sketch.read_sketchlet(t.addr as usize, &t.offsets))
}

/// The column-sketchlet baseline: `k` bit arrays give every column up to `k`
/// sends before a drawn column is rejected and another one drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KChance {
    k: usize,
    width: usize,
    arrays: Vec<bool>,
    pub retry_limit: usize,
    exhausted: u64,
}

impl KChance {
    pub fn new(k: usize, width: usize, retry_limit: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be >= 1".into()));
        }
        Ok(KChance {
            k,
            width,
            arrays: vec![false; k * width],
            retry_limit,
            exhausted: 0,
        })
    }

    /// Number of arrays with their bit set at `col`.
    pub fn sends(&self, col: usize) -> usize {
        (0..self.k)
            .filter(|&a| self.arrays[a * self.width + col])
            .count()
    }

    /// Telemetry packets that gave up after `retry_limit` redraws.
    pub fn exhausted(&self) -> u64 {
        self.exhausted
    }

    /// Claims the first clear bit at `col`; false if all `k` are set.
    pub fn try_claim(&mut self, col: usize) -> bool {
        match (0..self.k).find(|&a| !self.arrays[a * self.width + col]) {
            Some(a) => {
                self.arrays[a * self.width + col] = true;
                true
            }
            None => false,
        }
    }

    pub fn on_int<R: Rng + ?Sized>(&mut self, sketch: &Sketch, rng: &mut R) -> Sketchlet {
        let mut addr = rng.gen_range(0..self.width);
        let mut claimed = self.try_claim(addr);
        let mut retries = 0;
        while !claimed && retries < self.retry_limit {
            addr = rng.gen_range(0..self.width);
            claimed = self.try_claim(addr);
            retries += 1;
        }
        if !claimed {
            self.exhausted += 1;
        }
        sketch.read_sketchlet(addr, &[])
    }
}
