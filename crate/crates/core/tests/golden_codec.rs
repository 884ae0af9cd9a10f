//! Hand-packed wire vectors: every field is laid out most significant bit
//! first in the order address, offsets, values, then zero padding.

use serde::Deserialize;
use sketchint::{Sketchlet, SketchletLayout};

#[derive(Deserialize)]
struct Vector {
    rows: usize,
    width: usize,
    counter_bits: u32,
    offset_bits: u32,
    addr: u32,
    offsets: Vec<u32>,
    values: Vec<u64>,
    hex: String,
}

fn vectors() -> Vec<Vector> {
    serde_json::from_str(include_str!("data/sketchlets.json")).unwrap()
}

#[test]
fn encode_matches_golden_bytes() {
    for v in vectors() {
        let layout = SketchletLayout::new(v.rows, v.width, v.counter_bits, v.offset_bits).unwrap();
        let s = Sketchlet {
            addr: v.addr,
            offsets: v.offsets.clone(),
            values: v.values.clone(),
        };
        assert_eq!(hex::encode(layout.encode(&s).unwrap()), v.hex);
    }
}

#[test]
fn decode_matches_golden_fields() {
    for v in vectors() {
        let layout = SketchletLayout::new(v.rows, v.width, v.counter_bits, v.offset_bits).unwrap();
        let s = layout.decode(&hex::decode(&v.hex).unwrap()).unwrap();
        assert_eq!((s.addr, s.values), (v.addr, v.values));
        assert_eq!(s.offsets, v.offsets);
    }
}

#[test]
fn flipping_a_padding_bit_is_rejected() {
    let v = &vectors()[3];
    let layout = SketchletLayout::new(v.rows, v.width, v.counter_bits, v.offset_bits).unwrap();
    let mut bytes = hex::decode(&v.hex).unwrap();
    *bytes.last_mut().unwrap() |= 1;
    assert!(layout.decode(&bytes).is_err());
}
