//! Measurement tasks on a reconstructed sketch and the accuracy metrics
//! used to score them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::sketch::{Confidence, ReconSketch};
use crate::switchsim::Snapshot;
use crate::{Error, FlowKey, Result};

/// Ground-truth packet count per flow.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowTruth(BTreeMap<FlowKey, u64>);

impl FlowTruth {
    pub fn from_counts(counts: impl IntoIterator<Item = (FlowKey, u64)>) -> Self {
        FlowTruth(counts.into_iter().filter(|&(_, n)| n > 0).collect())
    }

    pub fn get(&self, key: FlowKey) -> u64 {
        self.0.get(&key).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn keys(&self) -> Vec<FlowKey> {
        self.0.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FlowKey, &u64)> {
        self.0.iter()
    }
}

/// Flow-size histogram: size -> number of flows of that size.
pub type SizeHistogram = BTreeMap<u64, u64>;

/// Linear counting on the row with the most valid buckets. Invalid buckets
/// count as empty. Saturates at `w ln w` when no bucket is empty.
pub fn estimate_cardinality(recon: &ReconSketch) -> f64 {
    let p = recon.params();
    let w = p.width;
    let row = (0..p.rows)
        .max_by_key(|&r| (recon.valid_count(r), std::cmp::Reverse(r)))
        .unwrap_or(0);
    let empty = (0..w)
        .filter(|&c| !recon.is_valid(row, c) || recon.get(row, c) == 0)
        .count();
    let wf = w as f64;
    if empty == 0 {
        wf * wf.ln()
    } else {
        -wf * (empty as f64 / wf).ln()
    }
}

/// Keys of the `ceil(fraction * n)` largest values; ties go to the smaller key.
pub fn top_fraction(
    values: impl IntoIterator<Item = (FlowKey, u64)>,
    fraction: f64,
) -> BTreeSet<FlowKey> {
    let mut v: Vec<(FlowKey, u64)> = values.into_iter().collect();
    let take = (fraction * v.len() as f64).ceil() as usize;
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(take).map(|(k, _)| k).collect()
}

pub fn detect_heavy_hitters(
    recon: &ReconSketch,
    candidates: &[FlowKey],
    fraction: f64,
) -> Result<BTreeSet<FlowKey>> {
    if candidates.is_empty() {
        return Err(Error::Usage(
            "heavy hitter detection needs candidate keys".into(),
        ));
    }
    Ok(top_fraction(
        candidates.iter().map(|&k| (k, recon.query(k).estimate)),
        fraction,
    ))
}

/// Histogram of per-candidate estimates, skipping flows with no valid bucket.
pub fn estimate_fsd(recon: &ReconSketch, candidates: &[FlowKey]) -> SizeHistogram {
    let mut h = SizeHistogram::new();
    for &k in candidates {
        let q = recon.query(k);
        if q.confidence != Confidence::NoValid {
            *h.entry(q.estimate).or_default() += 1;
        }
    }
    h
}

pub fn truth_fsd(truth: &FlowTruth) -> SizeHistogram {
    let mut h = SizeHistogram::new();
    for (_, &n) in truth.iter() {
        *h.entry(n).or_default() += 1;
    }
    h
}

/// `sum_i i * (m_i/M) * log2(m_i/M)`.
pub fn estimate_entropy(fsd: &SizeHistogram) -> Result<f64> {
    let total: u64 = fsd.values().sum();
    if total == 0 {
        return Err(Error::Undefined("entropy of an empty histogram".into()));
    }
    let m = total as f64;
    Ok(fsd
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&size, &c)| {
            let p = c as f64 / m;
            size as f64 * p * p.log2()
        })
        .sum())
}

/// `|est - truth| / |truth|`.
pub fn relative_error(est: f64, truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(Error::Undefined(
            "relative error against a zero truth".into(),
        ));
    }
    Ok((est - truth).abs() / truth.abs())
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(detected: &BTreeSet<FlowKey>, truth: &BTreeSet<FlowKey>) -> f64 {
    let tp = detected.intersection(truth).count() as f64;
    let precision = if detected.is_empty() {
        0.0
    } else {
        tp / detected.len() as f64
    };
    let recall = if truth.is_empty() {
        0.0
    } else {
        tp / truth.len() as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// `sum |m_i - m'_i| / sum (m_i + m'_i)/2` over the union of sizes.
pub fn wmre(truth: &SizeHistogram, est: &SizeHistogram) -> Result<f64> {
    let sizes: BTreeSet<u64> = truth.keys().chain(est.keys()).copied().collect();
    let (mut num, mut den) = (0.0, 0.0);
    for s in sizes {
        let a = truth.get(&s).copied().unwrap_or(0) as f64;
        let b = est.get(&s).copied().unwrap_or(0) as f64;
        num += (a - b).abs();
        den += (a + b) / 2.0;
    }
    if den == 0.0 {
        return Err(Error::Undefined("WMRE of two empty histograms".into()));
    }
    Ok(num / den)
}

/// Relative aggregated error of `y` against `x`: `sum |x_f - y_f| / sum x_f`.
/// Inputs are aligned per flow.
pub fn rae(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Usage(format!(
            "RAE inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Undefined("RAE over an empty flow set".into()));
    }
    let den: f64 = x.iter().sum();
    if den == 0.0 {
        return Err(Error::Undefined("RAE with zero reference sum".into()));
    }
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    Ok(num / den)
}

/// Task accuracies and the three-way error decomposition for one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub re_cardinality: f64,
    pub f1_heavy_hitter: f64,
    pub wmre_fsd: f64,
    pub re_entropy: f64,
    pub rae_switch_vs_truth: f64,
    pub rae_recon_vs_truth: f64,
    pub rae_recon_vs_switch: f64,
}

impl MetricsReport {
    pub const FIELDS: [&'static str; 7] = [
        "re_cardinality",
        "f1_heavy_hitter",
        "wmre_fsd",
        "re_entropy",
        "rae_switch_vs_truth",
        "rae_recon_vs_truth",
        "rae_recon_vs_switch",
    ];

    pub fn get(&self, field: &str) -> Option<f64> {
        Some(match field {
            "re_cardinality" => self.re_cardinality,
            "f1_heavy_hitter" => self.f1_heavy_hitter,
            "wmre_fsd" => self.wmre_fsd,
            "re_entropy" => self.re_entropy,
            "rae_switch_vs_truth" => self.rae_switch_vs_truth,
            "rae_recon_vs_truth" => self.rae_recon_vs_truth,
            "rae_recon_vs_switch" => self.rae_recon_vs_switch,
            _ => return None,
        })
    }
}

pub const HEAVY_HITTER_FRACTION: f64 = 0.10;

/// Scores a snapshot against its own ground truth, using every flow seen so
/// far as the candidate set.
pub fn evaluate(snap: &Snapshot) -> Result<MetricsReport> {
    let keys = snap.truth.keys();
    if keys.is_empty() {
        return Err(Error::Undefined("no flows in snapshot".into()));
    }
    let n: Vec<f64> = keys.iter().map(|&k| snap.truth.get(k) as f64).collect();
    let n_switch: Vec<f64> = keys.iter().map(|&k| snap.switch.query(k) as f64).collect();
    let n_recon: Vec<f64> = keys
        .iter()
        .map(|&k| snap.recon.query(k).estimate as f64)
        .collect();

    let hh_truth = top_fraction(
        snap.truth.iter().map(|(&k, &v)| (k, v)),
        HEAVY_HITTER_FRACTION,
    );
    let hh = detect_heavy_hitters(&snap.recon, &keys, HEAVY_HITTER_FRACTION)?;

    let fsd_truth = truth_fsd(&snap.truth);
    let fsd_est = estimate_fsd(&snap.recon, &keys);
    let ent_truth = estimate_entropy(&fsd_truth)?;
    let re_entropy = match estimate_entropy(&fsd_est) {
        // zero truth entropy (all flows of size 1): fall back to absolute error
        Ok(e) => relative_error(e, ent_truth).unwrap_or((e - ent_truth).abs()),
        // nothing delivered yet: the estimate is missing entirely
        Err(_) => 1.0,
    };

    Ok(MetricsReport {
        re_cardinality: relative_error(estimate_cardinality(&snap.recon), keys.len() as f64)?,
        f1_heavy_hitter: f1(&hh, &hh_truth),
        wmre_fsd: wmre(&fsd_truth, &fsd_est)?,
        re_entropy,
        rae_switch_vs_truth: rae(&n, &n_switch)?,
        rae_recon_vs_truth: rae(&n, &n_recon)?,
        rae_recon_vs_switch: rae(&n_switch, &n_recon)?,
    })
}
