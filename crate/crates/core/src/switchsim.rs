//! Trace-driven simulation of a sketching switch, the telemetry channel
//! and the end-host reconstruction.
//!
//! Telemetry packets are injected every `1/pps` seconds of trace time. The
//! channel is in-order, lossless and has zero latency, so the only source
//! of divergence between switch and end-host is what the selection policy
//! chooses to send.

use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::FlowTruth;
use crate::selection::{
    software_on_int, software_scan, AddrMode, AddressTuple, Bitmap, Cookie, KChance, Policy,
    SelectorState,
};
use crate::sketch::{ReconEstimate, ReconSketch, Sketch, SketchParams};
use crate::sketchlet::{Sketchlet, SketchletLayout};
use crate::traceio::{check_sorted, EventKind, TraceEvent};
use crate::{Error, FlowKey, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub rows: usize,
    pub width: usize,
    pub counter_bits: u32,
    pub policy: Policy,
    /// Scatter offset length `r`. Ignored by `kchance`.
    pub offset_bits: u32,
    /// Cookie cell width `b`.
    pub cookie_bits: u32,
    /// Cookie right shift `s` applied on selection.
    pub shift: u32,
    /// Starting threshold exponent; `None` starts at `cookie_bits`.
    pub initial_h: Option<u32>,
    pub alpha: f64,
    pub beta: f64,
    /// Telemetry packets between two cookie threshold adaptations.
    pub adapt_period: u64,
    pub phi: usize,
    pub phi_prime: usize,
    /// Trace seconds between two software scans.
    pub scan_interval: f64,
    pub k: usize,
    pub retry_limit: usize,
    /// Telemetry packets per second of trace time.
    pub pps: f64,
    pub seed: u64,
    /// Draw window starts at multiples of `2^r`.
    pub hardware_faithful: bool,
    /// Trace times at which switch and end-host are snapshotted. Empty means
    /// one snapshot at the end of the trace.
    pub snapshot_times: Vec<f64>,
    /// End of the trace; defaults to the last event's timestamp.
    pub horizon: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rows: 2,
            width: 1 << 15,
            counter_bits: 64,
            policy: Policy::Cookie,
            offset_bits: 6,
            cookie_bits: 8,
            shift: 1,
            initial_h: None,
            alpha: 0.5,
            beta: 1.0,
            adapt_period: 100,
            phi: 50,
            phi_prime: 100,
            scan_interval: 0.01,
            k: 8,
            retry_limit: 32,
            pps: 1200.0,
            seed: 0,
            hardware_faithful: true,
            snapshot_times: Vec::new(),
            horizon: None,
        }
    }
}

impl SimConfig {
    pub fn sketch_params(&self) -> Result<SketchParams> {
        SketchParams::new(self.rows, self.width, self.counter_bits, self.seed)
    }

    pub fn addr_mode(&self) -> AddrMode {
        if self.hardware_faithful {
            AddrMode::Aligned
        } else {
            AddrMode::Wrapping
        }
    }

    /// Offset length actually carried on the wire.
    pub fn wire_offset_bits(&self) -> u32 {
        match self.policy {
            Policy::Kchance => 0,
            _ => self.offset_bits,
        }
    }

    pub fn layout(&self) -> Result<SketchletLayout> {
        SketchletLayout::new(
            self.rows,
            self.width,
            self.counter_bits,
            self.wire_offset_bits(),
        )
    }

    /// Every problem with the configuration, one message per field.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if let Err(e) = self.sketch_params() {
            p.push(e.to_string());
        }
        if !(self.pps > 0.0 && self.pps.is_finite()) {
            p.push(format!("pps must be > 0, got {}", self.pps));
        }
        if self.width.is_power_of_two() && self.offset_bits > self.width.trailing_zeros() {
            p.push(format!(
                "offset_bits {} exceeds log2(width)",
                self.offset_bits
            ));
        }
        match self.policy {
            Policy::Cookie | Policy::Software => {
                if !(1..=32).contains(&self.cookie_bits) {
                    p.push(format!(
                        "cookie_bits must be in [1, 32], got {}",
                        self.cookie_bits
                    ));
                }
                if let Some(h) = self.initial_h {
                    if h == 0 || h > self.cookie_bits {
                        p.push(format!("initial_h must be in [1, cookie_bits], got {h}"));
                    }
                }
            }
            Policy::Kchance if self.k == 0 => p.push("k must be >= 1".into()),
            _ => {}
        }
        if self.policy == Policy::Cookie && self.adapt_period == 0 {
            p.push("adapt_period must be >= 1".into());
        }
        if self.policy == Policy::Software {
            if !self.scan_interval.is_finite() || self.scan_interval <= 0.0 {
                p.push("scan_interval must be > 0".into());
            }
            if self.phi > self.phi_prime {
                p.push("phi must not exceed phi_prime".into());
            }
        }
        if self.snapshot_times.iter().any(|t| !t.is_finite()) {
            p.push("snapshot_times must be finite".into());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(p.join("; ")))
        }
    }
}

/// Register accesses per (data packet, telemetry packet) for a
/// hardware-faithful pipeline: a data packet touches its `d` sketch rows and
/// `d` freshness rows; a telemetry packet reads `d` sketch rows and
/// inspects `2^r` freshness registers in each row.
pub fn register_accesses(cfg: &SimConfig) -> Result<(u64, u64)> {
    if !cfg.hardware_faithful {
        return Err(Error::NotApplicable(
            "register accounting needs the hardware-faithful layout".into(),
        ));
    }
    if cfg.policy == Policy::Software {
        return Err(Error::NotApplicable(
            "the software policy selects buckets proactively, not per packet".into(),
        ));
    }
    Ok(access_costs(cfg))
}

fn access_costs(cfg: &SimConfig) -> (u64, u64) {
    let d = cfg.rows as u64;
    match cfg.policy {
        Policy::Bitmap | Policy::Cookie => (2 * d, d + d * (1u64 << cfg.offset_bits)),
        // one register per bit array
        Policy::Kchance => (d, d + cfg.k as u64),
        // reads of the queued buckets only; scans run off the packet path
        Policy::Software => (2 * d, d),
    }
}

/// Register accesses accumulated over a run, with a per-second breakdown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterAccessCounter {
    pub data_packet_accesses: u64,
    pub int_packet_accesses: u64,
    /// `(data, int)` accesses in second `i` of trace time.
    pub per_second: Vec<(u64, u64)>,
}

impl RegisterAccessCounter {
    fn record(&mut self, t: f64, data: u64, int: u64) {
        self.data_packet_accesses += data;
        self.int_packet_accesses += int;
        let sec = t.max(0.0) as usize;
        if self.per_second.len() <= sec {
            self.per_second.resize(sec + 1, (0, 0));
        }
        self.per_second[sec].0 += data;
        self.per_second[sec].1 += int;
    }

    pub fn total(&self) -> u64 {
        self.data_packet_accesses + self.int_packet_accesses
    }
}

enum Freshness {
    Bitmap(Bitmap),
    Cookie(Cookie, SelectorState),
    Software {
        cookie: Cookie,
        state: SelectorState,
        fifo: VecDeque<AddressTuple>,
    },
    KChance(KChance),
}

/// A switch: sketch plus the freshness structure of its policy.
pub struct Switch {
    sketch: Sketch,
    freshness: Freshness,
    rng: ChaCha8Rng,
    offset_bits: u32,
    mode: AddrMode,
    phi: usize,
    phi_prime: usize,
}

impl Switch {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.sketch_params()?;
        let state = || {
            let mut st = SelectorState::new(
                cfg.cookie_bits,
                cfg.initial_h.unwrap_or(cfg.cookie_bits),
                cfg.shift,
            );
            st.alpha = cfg.alpha;
            st.beta = cfg.beta;
            st.period = cfg.adapt_period;
            st
        };
        let freshness = match cfg.policy {
            Policy::Bitmap => Freshness::Bitmap(Bitmap::new(cfg.rows, cfg.width)),
            Policy::Cookie => {
                Freshness::Cookie(Cookie::new(cfg.rows, cfg.width, cfg.cookie_bits)?, state())
            }
            Policy::Software => Freshness::Software {
                cookie: Cookie::new(cfg.rows, cfg.width, cfg.cookie_bits)?,
                state: state(),
                fifo: VecDeque::new(),
            },
            Policy::Kchance => Freshness::KChance(KChance::new(cfg.k, cfg.width, cfg.retry_limit)?),
        };
        Ok(Switch {
            sketch: Sketch::new(params)?,
            freshness,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1a7e_c0de_5eed_0001),
            offset_bits: cfg.offset_bits,
            mode: cfg.addr_mode(),
            phi: cfg.phi,
            phi_prime: cfg.phi_prime,
        })
    }

    pub fn sketch(&self) -> &Sketch {
        &self.sketch
    }

    pub fn on_data(&mut self, key: FlowKey) {
        match &mut self.freshness {
            Freshness::Bitmap(bm) => bm.on_data(&mut self.sketch, key),
            Freshness::Cookie(ck, _) | Freshness::Software { cookie: ck, .. } => {
                ck.on_data(&mut self.sketch, key)
            }
            Freshness::KChance(_) => self.sketch.update(key, 1),
        }
    }

    /// Sketchlet for the next telemetry packet; `None` when the software
    /// queue is empty.
    pub fn on_int(&mut self) -> Option<Sketchlet> {
        let (r, mode) = (self.offset_bits, self.mode);
        match &mut self.freshness {
            Freshness::Bitmap(bm) => Some(bm.on_int(&self.sketch, r, mode, &mut self.rng)),
            Freshness::Cookie(ck, st) => Some(ck.on_int(st, &self.sketch, r, mode, &mut self.rng)),
            Freshness::Software { fifo, .. } => software_on_int(fifo, &self.sketch),
            Freshness::KChance(kc) => Some(kc.on_int(&self.sketch, &mut self.rng)),
        }
    }

    /// One proactive scan followed by the queue-length adaptation. A no-op
    /// for the per-packet policies.
    pub fn scan(&mut self) {
        if let Freshness::Software {
            cookie,
            state,
            fifo,
        } = &mut self.freshness
        {
            software_scan(cookie, state, self.offset_bits, fifo);
            state.software_adapt_h(fifo.len(), self.phi, self.phi_prime);
        }
    }

    /// Current threshold exponent of the cookie policies.
    pub fn threshold_exponent(&self) -> Option<u32> {
        match &self.freshness {
            Freshness::Cookie(_, st) | Freshness::Software { state: st, .. } => Some(st.h),
            _ => None,
        }
    }

    pub fn queue_len(&self) -> Option<usize> {
        match &self.freshness {
            Freshness::Software { fifo, .. } => Some(fifo.len()),
            _ => None,
        }
    }
}

/// Switch and end-host state captured at one trace time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub switch: Sketch,
    pub recon: ReconSketch,
    pub truth: FlowTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub final_sketch: Sketch,
    pub final_recon: ReconSketch,
    pub snapshots: Vec<Snapshot>,
    pub accesses: RegisterAccessCounter,
    pub data_packets: u64,
    pub int_packets: u64,
    pub sketchlets: u64,
    pub truth: FlowTruth,
}

impl SimResult {
    /// The last snapshot taken.
    pub fn last_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("run always takes a snapshot")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    // tie order at equal timestamps
    Data,
    Scan,
    Int,
    Snapshot,
}

/// Drives `trace` through a switch configured by `cfg`.
pub fn run(trace: &[TraceEvent], cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    check_sorted(trace)?;
    let horizon = cfg
        .horizon
        .unwrap_or_else(|| trace.last().map_or(0.0, |e| e.timestamp));
    let mut snap_times = if cfg.snapshot_times.is_empty() {
        vec![horizon]
    } else {
        cfg.snapshot_times.clone()
    };
    snap_times.sort_by(f64::total_cmp);

    let int_ticks = (horizon * cfg.pps + 1e-9).floor().max(0.0) as u64;
    let scan_ticks = if cfg.policy == Policy::Software {
        (horizon / cfg.scan_interval + 1e-9).floor().max(0.0) as u64
    } else {
        0
    };
    let (data_cost, int_cost) = access_costs(cfg);

    let mut switch = Switch::new(cfg)?;
    let mut recon = ReconSketch::new(cfg.sketch_params()?)?;
    let mut truth: HashMap<FlowKey, u64> = HashMap::new();
    let mut acc = RegisterAccessCounter::default();
    let mut snapshots = Vec::with_capacity(snap_times.len());
    let (mut di, mut ii, mut si, mut pi) = (0usize, 1u64, 1u64, 0usize);
    let (mut data_packets, mut int_packets, mut sketchlets) = (0u64, 0u64, 0u64);

    loop {
        let mut next: Option<(f64, Step)> = None;
        let mut consider = |t: f64, s: Step| {
            if next.is_none_or(|(bt, bs)| t < bt || (t == bt && s < bs)) {
                next = Some((t, s));
            }
        };
        if let Some(e) = trace.get(di) {
            consider(e.timestamp, Step::Data);
        }
        if si <= scan_ticks {
            consider(si as f64 * cfg.scan_interval, Step::Scan);
        }
        if ii <= int_ticks {
            consider(ii as f64 / cfg.pps, Step::Int);
        }
        if let Some(&t) = snap_times.get(pi) {
            consider(t, Step::Snapshot);
        }
        let Some((t, step)) = next else { break };

        let mut deliver_int = |switch: &mut Switch,
                               recon: &mut ReconSketch,
                               acc: &mut RegisterAccessCounter|
         -> Result<()> {
            int_packets += 1;
            match switch.on_int() {
                Some(sk) => {
                    recon.apply(&sk)?;
                    sketchlets += 1;
                    acc.record(t, 0, int_cost);
                }
                None if cfg.policy != Policy::Software => acc.record(t, 0, int_cost),
                None => {}
            }
            Ok(())
        };

        match step {
            Step::Data => {
                let e = &trace[di];
                di += 1;
                match e.kind {
                    EventKind::Data => {
                        switch.on_data(e.key);
                        *truth.entry(e.key).or_default() += 1;
                        data_packets += 1;
                        acc.record(t, data_cost, 0);
                    }
                    EventKind::Int => deliver_int(&mut switch, &mut recon, &mut acc)?,
                }
            }
            Step::Scan => {
                si += 1;
                switch.scan();
            }
            Step::Int => {
                ii += 1;
                deliver_int(&mut switch, &mut recon, &mut acc)?;
            }
            Step::Snapshot => {
                pi += 1;
                snapshots.push(Snapshot {
                    time: t,
                    switch: switch.sketch().clone(),
                    recon: recon.clone(),
                    truth: FlowTruth::from_counts(truth.iter().map(|(&k, &v)| (k, v))),
                });
            }
        }
    }

    Ok(SimResult {
        final_sketch: switch.sketch,
        final_recon: recon,
        snapshots,
        accesses: acc,
        data_packets,
        int_packets,
        sketchlets,
        truth: FlowTruth::from_counts(truth),
    })
}

/// One flow's size as seen by the ground truth, the switch and the end-host.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowComparison {
    pub key: FlowKey,
    pub truth: u64,
    pub switch: u64,
    pub recon: ReconEstimate,
}

/// Lines up truth, switch and end-host estimates for `keys`.
pub fn snapshot_compare(
    switch: &Sketch,
    recon: &ReconSketch,
    truth: &FlowTruth,
    keys: &[FlowKey],
) -> Result<Vec<FlowComparison>> {
    if switch.params() != recon.params() {
        return Err(Error::Usage(
            "switch and reconstructed sketch have different parameters".into(),
        ));
    }
    Ok(keys
        .iter()
        .map(|&key| FlowComparison {
            key,
            truth: truth.get(key),
            switch: switch.query(key),
            recon: recon.query(key),
        })
        .collect())
}
