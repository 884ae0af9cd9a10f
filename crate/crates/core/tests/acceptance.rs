//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Every tolerance is a named constant below.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchint::analytics::{estimate_entropy, f1, rae, relative_error, wmre, FlowTruth};
use sketchint::experiment::{run_experiment, run_records, Axis, ExperimentSpec, TraceSource};
use sketchint::selection::{Cookie, SelectorState};
use sketchint::sketch::hash_index;
use sketchint::sketchlet::{
    bit_efficiency, scatter_breakeven_flows, valid_fraction_oracle, EfficiencyParams,
};
use sketchint::switchsim::{register_accesses, run, snapshot_compare};
use sketchint::{
    FlowKey, Policy, ReconSketch, SimConfig, Sketch, SketchParams, Sketchlet, SketchletLayout,
    TraceEvent, ZipfSpec,
};

const OVERHEAD_LIMIT: f64 = 0.084;
const EFFICIENCY_DRAWS: usize = 2000;
const ORACLE_TRIALS: usize = 100_000;
const ORACLE_SIGMAS: f64 = 3.0;
const PROPORTION_TOLERANCE: f64 = 0.15;
const PROPORTION_SELECTIONS: usize = 10_000;
const SWEEP_SEEDS: u32 = 10;
const MIN_RATE_REDUCTION: f64 = 0.15;
const MIN_COOKIE_GAIN: f64 = 0.30;
const METRIC_TOLERANCE: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t0 = Instant::now();
    let mut o = f();
    let took = t0.elapsed();
    if took > budget {
        o.pass = false;
    }
    o.detail = format!(
        "{} [{:.2}s of {:.0}s]",
        o.detail,
        took.as_secs_f64(),
        budget.as_secs_f64()
    );
    o
}

fn c1_sketchlet_sizes() -> Outcome {
    let col = SketchletLayout::new(2, 1 << 15, 64, 0).unwrap();
    let sc = SketchletLayout::new(2, 1 << 15, 64, 6).unwrap();
    let col_bytes = col.encode(&Sketchlet::column(1, vec![2, 3])).unwrap().len();
    let sc_bytes = sc
        .encode(&Sketchlet {
            addr: 64,
            offsets: vec![5, 63],
            values: vec![2, 3],
        })
        .unwrap()
        .len();
    let overhead = sc.encoded_bits() as f64 / col.encoded_bits() as f64 - 1.0;
    outcome(
        col.encoded_bits() == 143
            && col_bytes == 18
            && sc.encoded_bits() == 155
            && sc_bytes == 20
            && overhead <= OVERHEAD_LIMIT,
        format!(
            "column {} bits/{col_bytes} B, scatter {} bits/{sc_bytes} B, overhead {:.4}",
            col.encoded_bits(),
            sc.encoded_bits(),
            overhead
        ),
    )
}

fn c2_register_accounting() -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    for policy in [Policy::Bitmap, Policy::Cookie] {
        let cfg = SimConfig {
            policy,
            rows: 2,
            width: 1 << 10,
            offset_bits: 3,
            pps: 500.0,
            ..SimConfig::default()
        };
        let per = register_accesses(&cfg).unwrap();
        let trace: Vec<TraceEvent> = (0..1000)
            .map(|i| TraceEvent::data(i as f64 / 1000.0, i % 37))
            .collect();
        let res = run(&trace, &cfg).unwrap();
        let exact = per == (4, 18)
            && res.accesses.data_packet_accesses == 4 * res.data_packets
            && res.accesses.int_packet_accesses == 18 * res.int_packets;
        ok &= exact;
        detail += &format!(
            "{policy}: {per:?} per packet, {} data/{} INT accesses; ",
            res.accesses.data_packet_accesses, res.accesses.int_packet_accesses
        );
    }
    outcome(ok, detail.trim_end_matches("; "))
}

/// Two flows on a 2x16 sketch: `f` owns its row-0 bucket and shares its
/// row-1 bucket with `g`, and `f`'s two columns differ.
fn motivation_keys(params: &SketchParams) -> (FlowKey, FlowKey) {
    let h = |row, k: u64| hash_index(params, row, FlowKey(k)).unwrap();
    for f in 0..10_000u64 {
        if h(0, f) == h(1, f) {
            continue;
        }
        for g in 0..10_000u64 {
            if g != f && h(1, g) == h(1, f) && h(0, g) != h(0, f) && h(0, g) != h(1, f) {
                return (FlowKey(f), FlowKey(g));
            }
        }
    }
    panic!("no key pair found");
}

fn c3_motivation() -> Outcome {
    let params = SketchParams::new(2, 16, 64, 3).unwrap();
    let (f, g) = motivation_keys(&params);
    let mut sw = Sketch::new(params).unwrap();
    let mut recon = ReconSketch::new(params).unwrap();
    let hf: Vec<usize> = sw.hasher().indices(f).collect();
    sw.update(f, 30);
    sw.update(g, 15);
    recon.apply(&sw.read_sketchlet(hf[1], &[])).unwrap();
    let truth = FlowTruth::from_counts([(f, 30), (g, 15)]);
    let first = snapshot_compare(&sw, &recon, &truth, &[f]).unwrap()[0];

    sw.update(f, 20);
    recon.apply(&sw.read_sketchlet(hf[0], &[])).unwrap();
    let truth = FlowTruth::from_counts([(f, 50), (g, 15)]);
    let second = snapshot_compare(&sw, &recon, &truth, &[f]).unwrap()[0];

    let got = [
        (first.truth, first.switch, first.recon.estimate),
        (second.truth, second.switch, second.recon.estimate),
    ];
    outcome(
        got == [(30, 30, 45), (50, 50, 45)],
        format!("(truth, switch, end-host) = {:?} then {:?}", got[0], got[1]),
    )
}

fn c4_scatter_beats_column() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0004);
    let mut wins = 0;
    let mut draws = 0;
    let mut worst = f64::INFINITY;
    while draws < EFFICIENCY_DRAWS {
        let wb = rng.gen_range(4..=20u32);
        let width = 1usize << wb;
        let rows = rng.gen_range(1..=8usize);
        let counter_bits = rng.gen_range(8..=64u32);
        let offset_bits = rng.gen_range(1..=wb);
        let bound = scatter_breakeven_flows(width, rows, counter_bits, offset_bits).unwrap();
        if bound <= 1.0 {
            continue;
        }
        let flows = rng.gen_range(1.0..bound);
        let p = EfficiencyParams {
            flows,
            width,
            rows,
            counter_bits,
            offset_bits,
        };
        let scatter = bit_efficiency(&p);
        let column = bit_efficiency(&EfficiencyParams {
            offset_bits: 0,
            ..p
        });
        if scatter > column {
            wins += 1;
        }
        worst = worst.min(scatter - column);
        draws += 1;
    }
    outcome(
        wins == draws,
        format!("{wins}/{draws} draws below the bound favor scatter, min margin {worst:.3e}"),
    )
}

fn c5_valid_fraction() -> Outcome {
    // (width, offset bits, flows), two rows each
    let points: [(usize, u32, usize); 10] = [
        (1024, 0, 512),
        (1024, 0, 2048),
        (1024, 2, 512),
        (2048, 1, 1024),
        (2048, 3, 512),
        (4096, 0, 4096),
        (4096, 2, 1024),
        (4096, 4, 512),
        (8192, 3, 1024),
        (32768, 6, 600),
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (i, &(w, r, n)) in points.iter().enumerate() {
        let expect = 1.0 - (-(n as f64 / w as f64) * (1u64 << r) as f64).exp();
        let got = valid_fraction_oracle(n, w, r, 2, ORACLE_TRIALS, 500 + i as u64).unwrap();
        let sigma = (expect * (1.0 - expect) / ORACLE_TRIALS as f64).sqrt();
        let z = (got - expect).abs() / sigma;
        worst = worst.max(z);
        ok &= z <= ORACLE_SIGMAS;
    }
    outcome(
        ok,
        format!("10 points at {ORACLE_TRIALS} trials, worst deviation {worst:.2} sigma"),
    )
}

fn c6_cookie_proportionality() -> Outcome {
    let sketch = Sketch::new(SketchParams::new(1, 8, 64, 1).unwrap()).unwrap();
    let mut cookie = Cookie::new(1, 8, 8).unwrap();
    let mut st = SelectorState::new(8, 3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0006);
    let mut selected = [0f64; 3];
    for _ in 0..PROPORTION_SELECTIONS {
        for _ in 0..2 {
            // columns 0, 1, 2 with weights 1:2:4
            let col = match rng.gen_range(0..7) {
                0 => 0,
                1 | 2 => 1,
                _ => 2,
            };
            cookie.increment_at(0, col);
        }
        let before = st.cell_cnt;
        let s = cookie.select_at(&mut st, &sketch, 0, 3);
        if st.cell_cnt > before {
            selected[s.offsets[0] as usize] += 1.0;
        }
    }
    let r1 = selected[1] / selected[0] / 2.0;
    let r2 = selected[2] / selected[0] / 4.0;
    outcome(
        (r1 - 1.0).abs() <= PROPORTION_TOLERANCE && (r2 - 1.0).abs() <= PROPORTION_TOLERANCE,
        format!("selections {selected:?}, ratios relative to 1:2:4 = {r1:.3}, {r2:.3}"),
    )
}

fn sweep_spec() -> ExperimentSpec {
    ExperimentSpec {
        base: SimConfig::default(),
        axis: Axis::Pps,
        values: vec![400.0, 800.0, 1200.0],
        policies: Policy::ALL.to_vec(),
        seeds: SWEEP_SEEDS,
        trace: TraceSource::Zipf(ZipfSpec {
            flows: 6000,
            packets: 20_000,
            skew: 1.0,
            duration: 1.0,
            seed: 7,
        }),
        output: None,
    }
}

/// Mean of a metric per (pps, policy).
type Means = BTreeMap<(u32, Policy), f64>;

fn sweep_means() -> (Means, Means) {
    let recs = run_records(&sweep_spec()).unwrap();
    let mut vs_switch: BTreeMap<(u32, Policy), Vec<f64>> = BTreeMap::new();
    let mut vs_truth: BTreeMap<(u32, Policy), Vec<f64>> = BTreeMap::new();
    for r in &recs {
        let key = (r.axis_value.parse().unwrap(), r.policy);
        vs_switch
            .entry(key)
            .or_default()
            .push(r.rae_recon_vs_switch);
        vs_truth.entry(key).or_default().push(r.rae_recon_vs_truth);
    }
    let mean = |m: BTreeMap<(u32, Policy), Vec<f64>>| {
        m.into_iter()
            .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
            .collect()
    };
    (mean(vs_switch), mean(vs_truth))
}

fn c7_error_ordering(m: &Means) -> Outcome {
    use Policy::*;
    let at = |pps, p| m[&(pps, p)];
    let ordered = at(1200, Software) <= at(1200, Cookie)
        && at(1200, Cookie) < at(1200, Bitmap)
        && at(1200, Bitmap) < at(1200, Kchance);
    let mut ok = ordered;
    let mut detail = format!(
        "at 1200 pps software {:.4}, cookie {:.4}, bitmap {:.4}, kchance {:.4}; reduction 400->1200:",
        at(1200, Software),
        at(1200, Cookie),
        at(1200, Bitmap),
        at(1200, Kchance)
    );
    for p in Policy::ALL {
        let nonincreasing = at(800, p) <= at(400, p) && at(1200, p) <= at(800, p);
        let reduction = 1.0 - at(1200, p) / at(400, p);
        ok &= nonincreasing;
        if p != Kchance {
            ok &= reduction >= MIN_RATE_REDUCTION;
        }
        detail += &format!(" {p} {:.1}%", 100.0 * reduction);
    }
    outcome(ok, detail)
}

fn c8_cookie_gain(m: &Means) -> Outcome {
    let cookie = m[&(1200, Policy::Cookie)];
    let kchance = m[&(1200, Policy::Kchance)];
    let gain = 1.0 - cookie / kchance;
    outcome(
        gain >= MIN_COOKIE_GAIN,
        format!(
            "end-host vs truth at 1200 pps: cookie {cookie:.4}, kchance {kchance:.4}, {:.1}% lower",
            100.0 * gain
        ),
    )
}

fn c9_metrics() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= METRIC_TOLERANCE;
    let hist = |pairs: &[(u64, u64)]| pairs.iter().copied().collect::<BTreeMap<u64, u64>>();
    let set = |ks: &[u64]| ks.iter().map(|&k| FlowKey(k)).collect::<BTreeSet<_>>();
    let checks = [
        (
            "RE 45 vs 30",
            close(relative_error(45.0, 30.0).unwrap(), 0.5),
        ),
        ("RE exact", close(relative_error(30.0, 30.0).unwrap(), 0.0)),
        (
            "F1 identical",
            close(f1(&set(&[1, 2, 3]), &set(&[1, 2, 3])), 1.0),
        ),
        ("F1 disjoint", close(f1(&set(&[1]), &set(&[2])), 0.0)),
        ("F1 half", close(f1(&set(&[1, 2]), &set(&[1, 3])), 0.5)),
        (
            "WMRE",
            close(
                wmre(&hist(&[(1, 10), (2, 20)]), &hist(&[(1, 12), (2, 18)])).unwrap(),
                4.0 / 30.0,
            ),
        ),
        (
            "WMRE identical",
            close(wmre(&hist(&[(3, 5)]), &hist(&[(3, 5)])).unwrap(), 0.0),
        ),
        (
            "RAE",
            close(rae(&[10.0, 20.0], &[12.0, 18.0]).unwrap(), 4.0 / 30.0),
        ),
        (
            "RAE identical",
            close(rae(&[4.0, 9.0], &[4.0, 9.0]).unwrap(), 0.0),
        ),
        (
            "RAE asymmetric",
            !close(
                rae(&[10.0, 20.0], &[15.0, 25.0]).unwrap(),
                rae(&[15.0, 25.0], &[10.0, 20.0]).unwrap(),
            ),
        ),
        (
            "entropy all size 1",
            close(estimate_entropy(&hist(&[(1, 7)])).unwrap(), 0.0),
        ),
        (
            "entropy m1=m2=1",
            close(estimate_entropy(&hist(&[(1, 1), (2, 1)])).unwrap(), -1.5),
        ),
        (
            "entropy scale",
            close(estimate_entropy(&hist(&[(1, 10), (2, 10)])).unwrap(), -1.5),
        ),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} hand-evaluated examples match", checks.len())
        } else {
            format!("mismatched: {}", failed.join(", "))
        },
    )
}

fn c10_determinism() -> Outcome {
    let mut spec = sweep_spec();
    spec.seeds = 3;
    spec.values = vec![400.0, 1200.0];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&spec, Some(a.path())).unwrap();
    run_experiment(&spec, Some(b.path())).unwrap();
    let same = ["results.csv", "results.json"].iter().all(|f| {
        std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap()
    });
    outcome(
        same,
        "two runs of one spec, results.csv and results.json compared bytewise",
    )
}

fn main() {
    let secs = Duration::from_secs;
    let mut sweep = None;
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "sketchlet sizes", timed(secs(1), c1_sketchlet_sizes)),
        (
            2,
            "register accounting",
            timed(secs(1), c2_register_accounting),
        ),
        (
            3,
            "stale and invalid bucket scenario",
            timed(secs(1), c3_motivation),
        ),
        (
            4,
            "scatter beats column below the bound",
            timed(secs(5), c4_scatter_beats_column),
        ),
        (
            5,
            "valid fraction vs Monte Carlo",
            timed(secs(30), c5_valid_fraction),
        ),
        (
            6,
            "cookie selection proportional to update rate",
            timed(secs(10), c6_cookie_proportionality),
        ),
        (
            7,
            "error ordering and rate monotonicity",
            timed(secs(300), || {
                let m = sweep_means();
                let o = c7_error_ordering(&m.0);
                sweep = Some(m);
                o
            }),
        ),
        (8, "cookie improvement over kchance", {
            let m = sweep.as_ref().expect("criterion 7 ran");
            c8_cookie_gain(&m.1)
        }),
        (9, "metric examples", c9_metrics()),
        (10, "determinism", c10_determinism()),
    ];
    let mut failed = 0;
    for (n, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag}: {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
