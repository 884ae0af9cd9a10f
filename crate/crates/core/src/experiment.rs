//! Parameter sweeps over simulated runs and the plot-ready summaries built
//! from them.
//!
//! An [`ExperimentSpec`] is a JSON document naming a base [`SimConfig`], one
//! sweep axis with its values, the policies to compare, how many seeds to
//! run per point and where the trace comes from. Every (axis value, policy,
//! seed) triple yields one [`ResultRecord`]. Records are always written in
//! canonical order (axis value, policy, seed) whatever order the runs
//! finished in.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{evaluate, MetricsReport};
use crate::selection::Policy;
use crate::switchsim::{run, SimConfig};
use crate::traceio::{gen_zipf, load_csv, TraceEvent, ZipfSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Pps,
    /// Scatter offset length.
    R,
    /// Cookie cell width.
    B,
    Policy,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Pps => "pps",
            Axis::R => "r",
            Axis::B => "b",
            Axis::Policy => "policy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    /// Synthetic trace; seed index `i` uses `seed + i`.
    Zipf(ZipfSpec),
    /// The same recorded trace for every seed.
    Csv { path: PathBuf },
}

fn all_policies() -> Vec<Policy> {
    Policy::ALL.to_vec()
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub base: SimConfig,
    pub axis: Axis,
    /// Axis values; unused when sweeping over `policy`.
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default = "all_policies")]
    pub policies: Vec<Policy>,
    /// Seeds per point; seed index `i` runs with `base.seed + i`.
    #[serde(default = "one")]
    pub seeds: u32,
    pub trace: TraceSource,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Fails with every offending field listed.
    pub fn validate(&self) -> Result<()> {
        let mut p: Vec<String> = Vec::new();
        if self.seeds == 0 {
            p.push("seeds: must be >= 1".into());
        }
        if self.policies.is_empty() {
            p.push("policies: must not be empty".into());
        }
        if self.axis != Axis::Policy && self.values.is_empty() {
            p.push("values: must not be empty".into());
        }
        for &v in &self.values {
            let ok = match self.axis {
                Axis::Pps => v > 0.0 && v.is_finite(),
                Axis::R => v >= 0.0 && v.fract() == 0.0 && v <= 31.0,
                Axis::B => (1.0..=32.0).contains(&v) && v.fract() == 0.0,
                Axis::Policy => true,
            };
            if !ok {
                p.push(format!("values: {v} is not a valid {}", self.axis.name()));
            }
        }
        if let TraceSource::Zipf(z) = &self.trace {
            if let Err(e) = z.validate() {
                p.push(format!("trace.zipf: {e}"));
            }
        }
        let mut points = self.points();
        points.push((None, self.base.policy));
        for (v, policy) in points {
            for problem in self.config_for(v, policy, 0).problems() {
                let msg = format!("base: {problem}");
                if !p.contains(&msg) {
                    p.push(msg);
                }
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }

    /// Sweep points in canonical order.
    fn points(&self) -> Vec<(Option<f64>, Policy)> {
        let mut policies = self.policies.clone();
        policies.sort();
        policies.dedup();
        if self.axis == Axis::Policy {
            return policies.into_iter().map(|p| (None, p)).collect();
        }
        let mut values = self.values.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        values
            .into_iter()
            .flat_map(|v| policies.iter().map(move |&p| (Some(v), p)))
            .collect()
    }

    fn config_for(&self, value: Option<f64>, policy: Policy, seed_index: u32) -> SimConfig {
        let mut cfg = self.base.clone();
        cfg.policy = policy;
        cfg.seed = self.base.seed.wrapping_add(seed_index as u64);
        if let Some(v) = value {
            match self.axis {
                Axis::Pps => cfg.pps = v,
                Axis::R => cfg.offset_bits = v as u32,
                Axis::B => cfg.cookie_bits = v as u32,
                Axis::Policy => {}
            }
        }
        if cfg.horizon.is_none() {
            if let TraceSource::Zipf(z) = &self.trace {
                cfg.horizon = Some(z.duration);
            }
        }
        cfg
    }
}

/// One simulated run, flattened for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub axis: String,
    pub axis_value: String,
    pub policy: Policy,
    pub seed: u64,
    pub re_cardinality: f64,
    pub f1_heavy_hitter: f64,
    pub wmre_fsd: f64,
    pub re_entropy: f64,
    pub rae_switch_vs_truth: f64,
    pub rae_recon_vs_truth: f64,
    pub rae_recon_vs_switch: f64,
    pub data_packets: u64,
    pub int_packets: u64,
    pub sketchlets: u64,
    pub data_register_accesses: u64,
    pub int_register_accesses: u64,
}

impl ResultRecord {
    pub fn metrics(&self) -> MetricsReport {
        MetricsReport {
            re_cardinality: self.re_cardinality,
            f1_heavy_hitter: self.f1_heavy_hitter,
            wmre_fsd: self.wmre_fsd,
            re_entropy: self.re_entropy,
            rae_switch_vs_truth: self.rae_switch_vs_truth,
            rae_recon_vs_truth: self.rae_recon_vs_truth,
            rae_recon_vs_switch: self.rae_recon_vs_switch,
        }
    }
}

fn load_trace(src: &TraceSource, seed_index: u32) -> Result<Vec<TraceEvent>> {
    match src {
        TraceSource::Zipf(z) => gen_zipf(&ZipfSpec {
            seed: z.seed.wrapping_add(seed_index as u64),
            ..z.clone()
        }),
        TraceSource::Csv { path } => load_csv(path),
    }
}

/// Runs every sweep point, in parallel across seeds.
pub fn run_records(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let points = spec.points();
    let per_seed: Vec<Vec<(usize, ResultRecord)>> = (0..spec.seeds)
        .into_par_iter()
        .map(|si| -> Result<Vec<(usize, ResultRecord)>> {
            let trace = load_trace(&spec.trace, si)?;
            points
                .iter()
                .enumerate()
                .map(|(pi, &(value, policy))| {
                    let cfg = spec.config_for(value, policy, si);
                    let res = run(&trace, &cfg)?;
                    let m = evaluate(res.last_snapshot())?;
                    let axis_value = match value {
                        Some(v) => format!("{v}"),
                        None => policy.name().to_string(),
                    };
                    Ok((
                        pi,
                        ResultRecord {
                            axis: spec.axis.name().to_string(),
                            axis_value,
                            policy,
                            seed: cfg.seed,
                            re_cardinality: m.re_cardinality,
                            f1_heavy_hitter: m.f1_heavy_hitter,
                            wmre_fsd: m.wmre_fsd,
                            re_entropy: m.re_entropy,
                            rae_switch_vs_truth: m.rae_switch_vs_truth,
                            rae_recon_vs_truth: m.rae_recon_vs_truth,
                            rae_recon_vs_switch: m.rae_recon_vs_switch,
                            data_packets: res.data_packets,
                            int_packets: res.int_packets,
                            sketchlets: res.sketchlets,
                            data_register_accesses: res.accesses.data_packet_accesses,
                            int_register_accesses: res.accesses.int_packet_accesses,
                        },
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<(usize, ResultRecord)> = per_seed.into_iter().flatten().collect();
    all.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.seed.cmp(&b.1.seed)));
    Ok(all.into_iter().map(|(_, r)| r).collect())
}

pub fn records_to_csv(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `results.csv` and `results.json` into `dir`.
pub fn write_results(records: &[ResultRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), records_to_csv(records)?)?;
    let mut json = serde_json::to_string_pretty(records)?;
    json.push('\n');
    fs::write(dir.join("results.json"), json)?;
    Ok(())
}

/// Runs the sweep and writes its results. `out` overrides the spec's
/// output directory.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<Vec<ResultRecord>> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| spec.output.clone())
        .ok_or_else(|| Error::Validation(vec!["output: no output directory given".into()]))?;
    let records = run_records(spec)?;
    write_results(&records, &dir)?;
    Ok(records)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
    } else {
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Task accuracies against telemetry rate.
    Fig4,
    /// Switch and end-host error against truth, by telemetry rate.
    Fig5a,
    /// End-host error against the switch, by telemetry rate.
    Fig5b,
    /// Reconstruction error against offset length.
    Fig6Offset,
    /// Reconstruction error against cookie cell width.
    Fig6Cookie,
}

impl Figure {
    pub fn axis(self) -> Axis {
        match self {
            Figure::Fig4 | Figure::Fig5a | Figure::Fig5b => Axis::Pps,
            Figure::Fig6Offset => Axis::R,
            Figure::Fig6Cookie => Axis::B,
        }
    }

    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            Figure::Fig4 => &[
                "re_cardinality",
                "f1_heavy_hitter",
                "wmre_fsd",
                "re_entropy",
            ],
            Figure::Fig5a => &["rae_switch_vs_truth", "rae_recon_vs_truth"],
            Figure::Fig5b => &["rae_recon_vs_switch"],
            Figure::Fig6Offset => &["rae_recon_vs_switch", "rae_switch_vs_truth"],
            Figure::Fig6Cookie => &["rae_recon_vs_switch"],
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig4" => Figure::Fig4,
            "fig5a" => Figure::Fig5a,
            "fig5b" => Figure::Fig5b,
            "fig6-offset" => Figure::Fig6Offset,
            "fig6-cookie" => Figure::Fig6Cookie,
            _ => {
                return Err(Error::Usage(format!(
                    "unknown figure {s:?}; expected fig4, fig5a, fig5b, fig6-offset or fig6-cookie"
                )))
            }
        })
    }
}

/// Mean and standard error of the mean; stderr is 0 for a single sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Long-format summary: one `axis,policy,metric,mean,stderr` row per point,
/// averaged over seeds.
pub fn emit_figure_data(records: &[ResultRecord], figure: Figure) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Usage("no results to summarize".into()));
    }
    let axis = figure.axis().name();
    let rows: Vec<&ResultRecord> = records.iter().filter(|r| r.axis == axis).collect();
    if rows.is_empty() {
        return Err(Error::Usage(format!(
            "{figure:?} needs a sweep over {axis}, results sweep {}",
            records[0].axis
        )));
    }
    // (axis value, policy, metric index) -> samples
    let mut groups: BTreeMap<(OrdF64, Policy, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let v: f64 = r
            .axis_value
            .parse()
            .map_err(|_| Error::Usage(format!("non-numeric {axis} value {:?}", r.axis_value)))?;
        let m = r.metrics();
        for (mi, name) in figure.metrics().iter().enumerate() {
            groups
                .entry((OrdF64(v), r.policy, mi))
                .or_default()
                .push(m.get(name).expect("known metric"));
        }
    }
    let mut out = String::from("axis,policy,metric,mean,stderr\n");
    for ((v, policy, mi), xs) in groups {
        let (mean, se) = mean_stderr(&xs);
        writeln!(
            out,
            "{},{},{},{:?},{:?}",
            v.0,
            policy,
            figure.metrics()[mi],
            mean,
            se
        )
        .expect("write to string");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
