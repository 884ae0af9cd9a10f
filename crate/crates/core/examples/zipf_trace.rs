//! Generates a skewed synthetic trace, writes it as CSV, reads it back and
//! evaluates one simulated run per policy on it.

use sketchint::analytics::evaluate;
use sketchint::switchsim::run;
use sketchint::traceio::{gen_zipf, load_csv, save_csv};
use sketchint::{Policy, SimConfig, ZipfSpec};

fn main() -> sketchint::Result<()> {
    let spec = ZipfSpec {
        flows: 6000,
        packets: 20_000,
        skew: 1.0,
        duration: 1.0,
        seed: 7,
    };
    let trace = gen_zipf(&spec)?;
    let path = std::env::temp_dir().join("sketchint-zipf.csv.gz");
    save_csv(&trace, &path)?;
    let trace = load_csv(&path)?;
    println!("{} packets read back from {}", trace.len(), path.display());

    println!("policy    card-RE  HH-F1   FSD-WMRE entropy-RE");
    for policy in Policy::ALL {
        let cfg = SimConfig {
            policy,
            horizon: Some(spec.duration),
            ..SimConfig::default()
        };
        let res = run(&trace, &cfg)?;
        let m = evaluate(res.last_snapshot())?;
        println!(
            "{:<9} {:.4}  {:.4}  {:.4}   {:.4}",
            policy, m.re_cardinality, m.f1_heavy_hitter, m.wmre_fsd, m.re_entropy
        );
    }
    Ok(())
}
