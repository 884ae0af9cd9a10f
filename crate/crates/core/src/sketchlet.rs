//! Sketchlet wire format and bit-efficiency analysis.
//!
//! Wire layout, most significant bit first:
//!
//! ```text
//! addr (log2 w bits) | offset[0..d] (r bits each) | value[0..d] (c bits each) | zero pad
//! ```
//!
//! A column sketchlet is the `r = 0` case: no offset fields at all.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sketch::{RowHasher, SketchParams};
use crate::{Error, FlowKey, Result};

/// An addressed bundle of one bucket per sketch row.
///
/// Row `i`'s bucket sits at column `(addr + offsets[i]) mod w`. An empty
/// `offsets` vector means a column sketchlet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sketchlet {
    pub addr: u32,
    pub offsets: Vec<u32>,
    pub values: Vec<u64>,
}

impl Sketchlet {
    pub fn column(addr: u32, values: Vec<u64>) -> Self {
        Sketchlet {
            addr,
            offsets: Vec::new(),
            values,
        }
    }

    pub fn is_column(&self) -> bool {
        self.offsets.iter().all(|&o| o == 0)
    }

    /// Column of the bucket carried for `row` in a sketch of width `w`.
    #[inline]
    pub fn column_of(&self, row: usize, width: usize) -> usize {
        let off = self.offsets.get(row).copied().unwrap_or(0) as usize;
        (self.addr as usize + off) & (width - 1)
    }
}

/// Field widths of an encoded sketchlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchletLayout {
    pub rows: usize,
    pub width: usize,
    pub counter_bits: u32,
    pub offset_bits: u32,
}

impl SketchletLayout {
    pub fn new(rows: usize, width: usize, counter_bits: u32, offset_bits: u32) -> Result<Self> {
        SketchParams::new(rows, width, counter_bits, 0)?;
        let layout = SketchletLayout {
            rows,
            width,
            counter_bits,
            offset_bits,
        };
        if offset_bits > layout.width_bits() {
            return Err(Error::InvalidParams(format!(
                "offset_bits {offset_bits} exceeds log2(width) {}",
                layout.width_bits()
            )));
        }
        Ok(layout)
    }

    pub fn for_sketch(params: &SketchParams, offset_bits: u32) -> Result<Self> {
        Self::new(params.rows, params.width, params.counter_bits, offset_bits)
    }

    pub fn width_bits(&self) -> u32 {
        self.width.trailing_zeros()
    }

    /// `d*c + log2(w) + d*r`.
    pub fn encoded_bits(&self) -> usize {
        self.rows * self.counter_bits as usize
            + self.width_bits() as usize
            + self.rows * self.offset_bits as usize
    }

    pub fn encoded_len(&self) -> usize {
        self.encoded_bits().div_ceil(8)
    }

    pub fn encode(&self, s: &Sketchlet) -> Result<Vec<u8>> {
        if s.addr as usize >= self.width {
            return Err(Error::AddressOutOfRange {
                addr: s.addr as u64,
                width: self.width,
            });
        }
        if s.values.len() != self.rows {
            return Err(Error::InvalidParams(format!(
                "expected {} values, got {}",
                self.rows,
                s.values.len()
            )));
        }
        let offsets_ok = if self.offset_bits == 0 {
            s.offsets.is_empty() || (s.offsets.len() == self.rows && s.is_column())
        } else {
            s.offsets.len() == self.rows
                && s.offsets
                    .iter()
                    .all(|&o| (o as u64) < (1u64 << self.offset_bits))
        };
        if !offsets_ok {
            return Err(Error::InvalidParams(format!(
                "offsets {:?} do not fit {} rows of {} bits",
                s.offsets, self.rows, self.offset_bits
            )));
        }
        if self.counter_bits < 64 {
            if let Some(v) = s.values.iter().find(|&&v| v >> self.counter_bits != 0) {
                return Err(Error::InvalidParams(format!(
                    "value {v} exceeds {} bits",
                    self.counter_bits
                )));
            }
        }

        let mut w = BitWriter::with_capacity(self.encoded_len());
        w.put(s.addr as u64, self.width_bits());
        if self.offset_bits > 0 {
            for &o in &s.offsets {
                w.put(o as u64, self.offset_bits);
            }
        }
        for &v in &s.values {
            w.put(v, self.counter_bits);
        }
        Ok(w.finish())
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<Sketchlet> {
        let want = self.encoded_len();
        if bytes.len() < want {
            return Err(Error::Decode(format!(
                "truncated sketchlet: {} bytes, need {want}",
                bytes.len()
            )));
        }
        if bytes.len() > want {
            return Err(Error::Decode(format!(
                "trailing bytes: {} bytes, expected {want}",
                bytes.len()
            )));
        }
        let mut r = BitReader::new(bytes);
        let addr = r.take(self.width_bits()) as u32;
        let offsets = if self.offset_bits > 0 {
            (0..self.rows)
                .map(|_| r.take(self.offset_bits) as u32)
                .collect()
        } else {
            Vec::new()
        };
        let values = (0..self.rows).map(|_| r.take(self.counter_bits)).collect();
        let pad = (want * 8 - self.encoded_bits()) as u32;
        if r.take(pad) != 0 {
            return Err(Error::Decode("nonzero padding bits".into()));
        }
        Ok(Sketchlet {
            addr,
            offsets,
            values,
        })
    }
}

struct BitWriter {
    buf: Vec<u8>,
    acc: u8,
    used: u32,
}

impl BitWriter {
    fn with_capacity(n: usize) -> Self {
        BitWriter {
            buf: Vec::with_capacity(n),
            acc: 0,
            used: 0,
        }
    }

    fn put(&mut self, value: u64, bits: u32) {
        for i in (0..bits).rev() {
            self.acc = (self.acc << 1) | ((value >> i) & 1) as u8;
            self.used += 1;
            if self.used == 8 {
                self.buf.push(self.acc);
                self.acc = 0;
                self.used = 0;
            }
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.buf.push(self.acc << (8 - self.used));
        }
        self.buf
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    // Callers check the length up front.
    fn take(&mut self, bits: u32) -> u64 {
        let mut v = 0u64;
        for _ in 0..bits {
            let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        v
    }
}

/// Inputs to the bit-efficiency formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyParams {
    /// Number of flows traced by the sketch.
    pub flows: f64,
    pub width: usize,
    pub rows: usize,
    pub counter_bits: u32,
    pub offset_bits: u32,
}

/// Fraction of a sketchlet's bits that carry valid measurement data:
///
/// `E = (1 - exp(-N/w * 2^r)) * d*c / (d*c + log2 w + d*r)`
pub fn bit_efficiency(p: &EfficiencyParams) -> f64 {
    let w = p.width as f64;
    let d = p.rows as f64;
    let c = p.counter_bits as f64;
    let r = p.offset_bits as f64;
    let span = 2f64.powi(p.offset_bits as i32);
    let valid = 1.0 - (-(p.flows / w) * span).exp();
    valid * d * c / (d * c + w.log2() + d * r)
}

/// Largest flow count below which an `r`-bit scatter sketchlet is strictly
/// more bit-efficient than a column sketchlet: `w * ln((d*c + log2 w) / (d*r))`.
pub fn scatter_breakeven_flows(
    width: usize,
    rows: usize,
    counter_bits: u32,
    offset_bits: u32,
) -> Result<f64> {
    if offset_bits == 0 {
        return Err(Error::Usage(
            "the scatter bound needs offset_bits >= 1".into(),
        ));
    }
    let w = width as f64;
    let d = rows as f64;
    let num = d * counter_bits as f64 + w.log2();
    Ok(w * (num / (d * offset_bits as f64)).ln())
}

/// Monte Carlo estimate of the probability that a window of `2^r`
/// consecutive buckets in a row holds at least one bucket hit by one of
/// `flows` random flows.
///
/// Each population hashes fresh random keys into a `rows x width` sketch;
/// windows start at uniformly random columns and wrap around the row.
pub fn valid_fraction_oracle(
    flows: usize,
    width: usize,
    offset_bits: u32,
    rows: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = 1usize << offset_bits;
    if span > width {
        return Err(Error::InvalidParams("2^r exceeds width".into()));
    }
    let probes_per_row = (width / span / 4).max(1);
    let mut hits = 0usize;
    let mut done = 0usize;
    let mut occupied = vec![false; width];
    while done < trials {
        let params = SketchParams::new(rows, width, 64, rng.gen())?;
        let hasher = RowHasher::new(&params);
        let keys: Vec<FlowKey> = (0..flows).map(|_| FlowKey(rng.gen())).collect();
        for row in 0..rows {
            occupied.iter_mut().for_each(|b| *b = false);
            for &k in &keys {
                occupied[hasher.index(row, k)] = true;
            }
            for _ in 0..probes_per_row {
                if done == trials {
                    break;
                }
                let addr = rng.gen_range(0..width);
                if (0..span).any(|j| occupied[(addr + j) & (width - 1)]) {
                    hits += 1;
                }
                done += 1;
            }
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Probability that a flow shares every one of its `d` buckets with at least
/// one of the other `N - 1` flows: `(1 - (1 - 1/w)^(N-1))^d`.
pub fn collision_probability(flows: f64, width: usize, rows: usize) -> f64 {
    if flows <= 1.0 {
        return 0.0;
    }
    let per_row = 1.0 - (1.0 - 1.0 / width as f64).powf(flows - 1.0);
    per_row.powi(rows as i32)
}
