//! Switch-side count-min sketch and the end-host reconstruction.

use serde::{Deserialize, Serialize};

use crate::sketchlet::Sketchlet;
use crate::{Error, Result};

/// Opaque 64-bit flow identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowKey(pub u64);

impl From<u64> for FlowKey {
    fn from(v: u64) -> Self {
        FlowKey(v)
    }
}

/// Geometry and hashing seed shared by a sketch, its reconstruction and the
/// freshness structures laid over it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchParams {
    /// Row count `d`.
    pub rows: usize,
    /// Column count `w`, a power of two.
    pub width: usize,
    /// Bucket width `c` in bits.
    pub counter_bits: u32,
    pub seed: u64,
}

impl SketchParams {
    pub fn new(rows: usize, width: usize, counter_bits: u32, seed: u64) -> Result<Self> {
        let p = SketchParams {
            rows,
            width,
            counter_bits,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(Error::InvalidParams("rows must be >= 1".into()));
        }
        if self.width < 2 || !self.width.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "width must be a power of two >= 2, got {}",
                self.width
            )));
        }
        if !(1..=64).contains(&self.counter_bits) {
            return Err(Error::InvalidParams(format!(
                "counter_bits must be in [1, 64], got {}",
                self.counter_bits
            )));
        }
        Ok(())
    }

    pub fn width_bits(&self) -> u32 {
        self.width.trailing_zeros()
    }

    /// Largest value a bucket can hold, `2^c - 1`.
    pub fn counter_max(&self) -> u64 {
        if self.counter_bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.counter_bits) - 1
        }
    }
}

/// Finalizer from MurmurHash3; a bijection on `u64` with full avalanche.
#[inline]
pub(crate) fn fmix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^= x >> 33;
    x
}

#[inline]
fn row_key(seed: u64, row: usize) -> u64 {
    fmix64(
        seed ^ fmix64(
            (row as u64)
                .wrapping_add(1)
                .wrapping_mul(0x9e37_79b9_7f4a_7c15),
        ),
    )
}

#[inline]
fn keyed_index(row_key: u64, key: FlowKey, mask: u64) -> usize {
    let x = fmix64(key.0 ^ row_key);
    (fmix64(x.wrapping_add(row_key.rotate_left(29))) & mask) as usize
}

/// Column of `key` in `row`.
pub fn hash_index(params: &SketchParams, row: usize, key: FlowKey) -> Result<usize> {
    if row >= params.rows {
        return Err(Error::RowOutOfRange {
            row,
            rows: params.rows,
        });
    }
    Ok(keyed_index(
        row_key(params.seed, row),
        key,
        params.width as u64 - 1,
    ))
}

/// Per-row hash keys precomputed from a [`SketchParams`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowHasher {
    keys: Vec<u64>,
    mask: u64,
}

impl RowHasher {
    pub fn new(params: &SketchParams) -> Self {
        RowHasher {
            keys: (0..params.rows).map(|r| row_key(params.seed, r)).collect(),
            mask: params.width as u64 - 1,
        }
    }

    /// Same as [`hash_index`] without the range check.
    #[inline]
    pub fn index(&self, row: usize, key: FlowKey) -> usize {
        keyed_index(self.keys[row], key, self.mask)
    }

    pub fn indices(&self, key: FlowKey) -> impl Iterator<Item = usize> + '_ {
        self.keys
            .iter()
            .map(move |&k| keyed_index(k, key, self.mask))
    }
}

/// The switch sketch: `d x w` saturating counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sketch {
    params: SketchParams,
    hasher: RowHasher,
    buckets: Vec<u64>,
}

impl Sketch {
    pub fn new(params: SketchParams) -> Result<Self> {
        params.validate()?;
        Ok(Sketch {
            hasher: RowHasher::new(&params),
            buckets: vec![0; params.rows * params.width],
            params,
        })
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    pub fn hasher(&self) -> &RowHasher {
        &self.hasher
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.buckets[row * self.params.width + col]
    }

    /// Adds `inc` to one bucket, saturating at `2^c - 1`.
    #[inline]
    pub fn add_at(&mut self, row: usize, col: usize, inc: u64) {
        let max = self.params.counter_max();
        let b = &mut self.buckets[row * self.params.width + col];
        *b = b.saturating_add(inc).min(max);
    }

    pub fn update(&mut self, key: FlowKey, inc: u64) {
        for row in 0..self.params.rows {
            let col = self.hasher.index(row, key);
            self.add_at(row, col, inc);
        }
    }

    /// Minimum over the `d` mapped buckets.
    pub fn query(&self, key: FlowKey) -> u64 {
        self.hasher
            .indices(key)
            .enumerate()
            .map(|(row, col)| self.get(row, col))
            .min()
            .unwrap_or(0)
    }

    pub fn row(&self, row: usize) -> &[u64] {
        let w = self.params.width;
        &self.buckets[row * w..(row + 1) * w]
    }

    /// Reads the buckets a sketchlet address points at, one per row.
    pub fn read_sketchlet(&self, addr: usize, offsets: &[u32]) -> Sketchlet {
        let w = self.params.width;
        let values = (0..self.params.rows)
            .map(|row| {
                let off = offsets.get(row).copied().unwrap_or(0) as usize;
                self.get(row, (addr + off) & (w - 1))
            })
            .collect();
        Sketchlet {
            addr: addr as u32,
            offsets: offsets.to_vec(),
            values,
        }
    }
}

/// How many of a flow's mapped buckets in a reconstruction were valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confidence {
    AllValid,
    Partial,
    NoValid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconEstimate {
    pub estimate: u64,
    pub confidence: Confidence,
}

/// End-host mirror of a [`Sketch`] built from delivered sketchlets.
///
/// A bucket is valid once any sketchlet carried it. Queries skip invalid
/// buckets; a flow whose buckets are all invalid reports
/// [`Confidence::NoValid`] with estimate 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconSketch {
    params: SketchParams,
    hasher: RowHasher,
    buckets: Vec<u64>,
    valid: Vec<bool>,
}

impl ReconSketch {
    pub fn new(params: SketchParams) -> Result<Self> {
        params.validate()?;
        let n = params.rows * params.width;
        Ok(ReconSketch {
            hasher: RowHasher::new(&params),
            buckets: vec![0; n],
            valid: vec![false; n],
            params,
        })
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.buckets[row * self.params.width + col]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.params.width + col]
    }

    /// Overwrites one bucket and marks it valid.
    pub fn set(&mut self, row: usize, col: usize, value: u64) {
        let i = row * self.params.width + col;
        self.buckets[i] = value;
        self.valid[i] = true;
    }

    pub fn valid_count(&self, row: usize) -> usize {
        let w = self.params.width;
        self.valid[row * w..(row + 1) * w]
            .iter()
            .filter(|&&v| v)
            .count()
    }

    /// Writes every bucket carried by `sketchlet`.
    pub fn apply(&mut self, sketchlet: &Sketchlet) -> Result<()> {
        let w = self.params.width;
        if sketchlet.addr as usize >= w {
            return Err(Error::AddressOutOfRange {
                addr: sketchlet.addr as u64,
                width: w,
            });
        }
        if sketchlet.values.len() != self.params.rows {
            return Err(Error::Decode(format!(
                "sketchlet carries {} values, sketch has {} rows",
                sketchlet.values.len(),
                self.params.rows
            )));
        }
        for (row, &value) in sketchlet.values.iter().enumerate() {
            self.set(row, sketchlet.column_of(row, w), value);
        }
        Ok(())
    }

    pub fn query(&self, key: FlowKey) -> ReconEstimate {
        let mut min: Option<u64> = None;
        let mut valid = 0;
        for (row, col) in self.hasher.indices(key).enumerate() {
            if self.is_valid(row, col) {
                valid += 1;
                let v = self.get(row, col);
                min = Some(min.map_or(v, |m| m.min(v)));
            }
        }
        let confidence = match valid {
            0 => Confidence::NoValid,
            v if v == self.params.rows => Confidence::AllValid,
            _ => Confidence::Partial,
        };
        ReconEstimate {
            estimate: min.unwrap_or(0),
            confidence,
        }
    }

    /// True when every bucket is valid and equals the switch's value.
    pub fn matches(&self, sketch: &Sketch) -> bool {
        self.params == *sketch.params()
            && self.valid.iter().all(|&v| v)
            && self.buckets == sketch.buckets
    }
}
