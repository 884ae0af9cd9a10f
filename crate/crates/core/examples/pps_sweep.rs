//! Sweeps the telemetry rate on a synthetic Zipf trace and prints the error
//! decomposition per policy: switch vs truth, end-host vs truth and
//! end-host vs switch, averaged over seeds.
//!
//! Usage: `cargo run --release --example pps_sweep [packets] [duration] [seeds] [aligned|wrapping]`

use sketchint::experiment::{run_records, Axis, ExperimentSpec, TraceSource};
use sketchint::{Policy, SimConfig, ZipfSpec};

fn main() -> sketchint::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let packets: usize = args.first().map_or(20_000, |s| s.parse().expect("packets"));
    let duration: f64 = args.get(1).map_or(1.0, |s| s.parse().expect("duration"));
    let seeds: u32 = args.get(2).map_or(10, |s| s.parse().expect("seeds"));
    let hardware_faithful = args.get(3).is_none_or(|s| s != "wrapping");

    let spec = ExperimentSpec {
        base: SimConfig {
            hardware_faithful,
            ..SimConfig::default()
        },
        axis: Axis::Pps,
        values: vec![400.0, 800.0, 1200.0],
        policies: Policy::ALL.to_vec(),
        seeds,
        trace: TraceSource::Zipf(ZipfSpec {
            flows: 6000,
            packets,
            skew: 1.0,
            duration,
            seed: 7,
        }),
        output: None,
    };
    let records = run_records(&spec)?;

    println!("pps   policy    switch/truth  recon/truth  recon/switch");
    for chunk in records.chunks(seeds as usize) {
        let n = chunk.len() as f64;
        let avg = |f: fn(&sketchint::experiment::ResultRecord) -> f64| {
            chunk.iter().map(f).sum::<f64>() / n
        };
        println!(
            "{:<5} {:<9} {:>12.4} {:>12.4} {:>13.4}",
            chunk[0].axis_value,
            chunk[0].policy,
            avg(|r| r.rae_switch_vs_truth),
            avg(|r| r.rae_recon_vs_truth),
            avg(|r| r.rae_recon_vs_switch),
        );
    }
    Ok(())
}
