//! Packet traces: CSV ingestion and synthetic Zipf workloads.
//!
//! CSV schema is `timestamp,flow_key` with the timestamp in seconds and the
//! key as a decimal `u64`. A non-numeric first line is treated as a header.
//! Files ending in `.gz` are decompressed on the fly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, FlowKey, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Data,
    /// A telemetry packet that should carry a sketchlet.
    Int,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub timestamp: f64,
    pub key: FlowKey,
    pub kind: EventKind,
}

impl TraceEvent {
    pub fn data(timestamp: f64, key: u64) -> Self {
        TraceEvent {
            timestamp,
            key: FlowKey(key),
            kind: EventKind::Data,
        }
    }
}

/// Fails on the first timestamp that goes backwards.
pub fn check_sorted(events: &[TraceEvent]) -> Result<()> {
    for (i, pair) in events.windows(2).enumerate() {
        if pair[1].timestamp < pair[0].timestamp || pair[1].timestamp.is_nan() {
            return Err(Error::Input(format!(
                "timestamp decreases at event {}: {} after {}",
                i + 1,
                pair[1].timestamp,
                pair[0].timestamp
            )));
        }
    }
    Ok(())
}

fn is_gz(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<TraceEvent>> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    if is_gz(path) {
        read_csv(GzDecoder::new(file), path)
    } else {
        read_csv(file, path)
    }
}

/// Parses a trace from any reader; `path` is only used in error messages.
pub fn read_csv<R: Read>(reader: R, path: &Path) -> Result<Vec<TraceEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut events: Vec<TraceEvent> = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(n as u64 + 1, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(n as u64 + 1, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, got {}", rec.len()),
            ));
        }
        let ts = match rec[0].parse::<f64>() {
            Ok(ts) if ts.is_finite() => ts,
            Ok(_) => return Err(parse_err(line, "non-finite timestamp".into())),
            Err(_) if n == 0 => continue,
            Err(e) => return Err(parse_err(line, format!("bad timestamp {:?}: {e}", &rec[0]))),
        };
        let key = rec[1]
            .parse::<u64>()
            .map_err(|e| parse_err(line, format!("bad flow key {:?}: {e}", &rec[1])))?;
        if let Some(prev) = events.last() {
            if ts < prev.timestamp {
                return Err(Error::Input(format!(
                    "{}:{line}: timestamp {ts} is before {}",
                    path.display(),
                    prev.timestamp
                )));
            }
        }
        events.push(TraceEvent::data(ts, key));
    }
    Ok(events)
}

/// Writes the data events of a trace in the schema [`read_csv`] accepts.
/// Timestamps use the shortest representation that parses back exactly.
pub fn write_csv<W: Write>(events: &[TraceEvent], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for e in events.iter().filter(|e| e.kind == EventKind::Data) {
        writeln!(w, "{:?},{}", e.timestamp, e.key.0)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(events: &[TraceEvent], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path)?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(file, flate2::Compression::default());
        write_csv(events, &mut enc)?;
        enc.finish()?;
        Ok(())
    } else {
        write_csv(events, file)
    }
}

/// Synthetic workload: `packets` packets over `flows` flows, flow of rank
/// `i` (1-based) drawn with weight `i^-skew`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipfSpec {
    pub flows: usize,
    pub packets: usize,
    pub skew: f64,
    /// Trace length in seconds; timestamps are uniform over `[0, duration)`.
    pub duration: f64,
    pub seed: u64,
}

impl ZipfSpec {
    pub fn validate(&self) -> Result<()> {
        if self.flows == 0 {
            return Err(Error::InvalidParams("zipf flows must be >= 1".into()));
        }
        if self.packets < self.flows {
            return Err(Error::InvalidParams("zipf packets must be >= flows".into()));
        }
        if !(self.skew >= 0.0 && self.skew.is_finite()) {
            return Err(Error::InvalidParams(
                "zipf skew must be finite and >= 0".into(),
            ));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParams("zipf duration must be > 0".into()));
        }
        Ok(())
    }
}

/// Flow keys of a Zipf trace in rank order (most popular first).
pub fn zipf_keys(spec: &ZipfSpec) -> Vec<FlowKey> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.flows).map(|_| FlowKey(rng.gen())).collect()
}

pub fn gen_zipf(spec: &ZipfSpec) -> Result<Vec<TraceEvent>> {
    spec.validate()?;
    let keys = zipf_keys(spec);
    let weights = (1..=spec.flows).map(|rank| (rank as f64).powf(-spec.skew));
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidParams(format!("zipf weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_7ace);
    let mut events: Vec<TraceEvent> = (0..spec.packets)
        .map(|_| {
            let t = rng.gen::<f64>() * spec.duration;
            TraceEvent::data(t, keys[dist.sample(&mut rng)].0)
        })
        .collect();
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn parse(s: &str) -> Result<Vec<TraceEvent>> {
        read_csv(s.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn parses_simple_trace() {
        let ev = parse("0.0,17\n0.1,17").unwrap();
        assert_eq!(
            ev,
            vec![TraceEvent::data(0.0, 17), TraceEvent::data(0.1, 17)]
        );
        assert!(parse("").unwrap().is_empty());
        let ev = parse("timestamp,flow_key\n1.5, 3\n").unwrap();
        assert_eq!(ev, vec![TraceEvent::data(1.5, 3)]);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(parse("0.2,5\n0.1,5"), Err(Error::Input(_))));
        match parse("0.0,1\n0.1,abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse("0.0,1\nxyz,2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("0.0,1,2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(parse("0.0,-1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn sortedness_check() {
        let ev = vec![TraceEvent::data(0.5, 1), TraceEvent::data(0.2, 1)];
        assert!(check_sorted(&ev).is_err());
        assert!(check_sorted(&ev[..1]).is_ok());
    }

    #[test]
    fn zipf_is_deterministic_and_sized() {
        let spec = ZipfSpec {
            flows: 50,
            packets: 5000,
            skew: 1.0,
            duration: 2.0,
            seed: 9,
        };
        let a = gen_zipf(&spec).unwrap();
        let b = gen_zipf(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5000);
        check_sorted(&a).unwrap();
        assert!(a.iter().all(|e| (0.0..2.0).contains(&e.timestamp)));
        let c = gen_zipf(&ZipfSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zipf_uniform_when_unskewed() {
        // chi-square against equal expected counts
        let n = 20;
        let p = 100_000;
        let spec = ZipfSpec {
            flows: n,
            packets: p,
            skew: 0.0,
            duration: 1.0,
            seed: 4,
        };
        let mut counts: HashMap<FlowKey, f64> = HashMap::new();
        for e in gen_zipf(&spec).unwrap() {
            *counts.entry(e.key).or_default() += 1.0;
        }
        let exp = p as f64 / n as f64;
        let chi2: f64 = counts.values().map(|c| (c - exp).powi(2) / exp).sum();
        // 19 dof, 99.9th percentile 43.8
        assert!(chi2 < 43.8, "chi2={chi2}");
    }

    #[test]
    fn zipf_top_share_matches_harmonic_number() {
        let n = 1000;
        let p = 200_000;
        let spec = ZipfSpec {
            flows: n,
            packets: p,
            skew: 1.0,
            duration: 1.0,
            seed: 8,
        };
        let top = zipf_keys(&spec)[0];
        let hits = gen_zipf(&spec)
            .unwrap()
            .iter()
            .filter(|e| e.key == top)
            .count() as f64;
        let h_n: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
        let q = 1.0 / h_n;
        assert!((q - 0.1336).abs() < 1e-3);
        let sigma = (p as f64 * q * (1.0 - q)).sqrt();
        assert!((hits - p as f64 * q).abs() < 4.0 * sigma, "hits={hits}");
    }

    #[test]
    fn csv_write_back_round_trips() {
        let spec = ZipfSpec {
            flows: 30,
            packets: 300,
            skew: 1.2,
            duration: 3.0,
            seed: 1,
        };
        let ev = gen_zipf(&spec).unwrap();
        let mut buf = Vec::new();
        write_csv(&ev, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), Path::new("x")).unwrap();
        assert_eq!(back, ev);
        let mut buf2 = Vec::new();
        write_csv(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn gzip_files() {
        let dir = tempfile::tempdir().unwrap();
        let ev = vec![TraceEvent::data(0.25, 1), TraceEvent::data(1.0, 2)];
        let p = dir.path().join("t.csv.gz");
        save_csv(&ev, &p).unwrap();
        assert_eq!(load_csv(&p).unwrap(), ev);
        let p = dir.path().join("t.csv");
        save_csv(&ev, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "0.25,1\n1.0,2\n");
        assert_eq!(load_csv(&p).unwrap(), ev);
    }
}
