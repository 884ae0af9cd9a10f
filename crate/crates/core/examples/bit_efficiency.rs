//! Fraction of sketchlet bits that carry valid data, column vs scatter, as
//! the number of flows grows, with a Monte Carlo check of the valid-bucket
//! probability and the flow count where column sketchlets catch up.

use sketchint::sketchlet::{
    bit_efficiency, scatter_breakeven_flows, valid_fraction_oracle, EfficiencyParams,
};

fn main() -> sketchint::Result<()> {
    let (width, rows, counter_bits) = (1usize << 15, 2, 64);
    println!("flows    efficiency: column  r=2     r=4     r=6   | valid r=6: expected  simulated");
    for flows in [500usize, 2000, 6000, 20_000, 100_000] {
        let e = |r| {
            bit_efficiency(&EfficiencyParams {
                flows: flows as f64,
                width,
                rows,
                counter_bits,
                offset_bits: r,
            })
        };
        let expected = 1.0 - (-(flows as f64) * 64.0 / width as f64).exp();
        let sim = valid_fraction_oracle(flows, width, 6, rows, 20_000, flows as u64)?;
        println!(
            "{flows:<8}             {:.4}  {:.4}  {:.4}  {:.4} |            {expected:.4}    {sim:.4}",
            e(0),
            e(2),
            e(4),
            e(6),
        );
    }
    for r in [1, 2, 4, 6] {
        println!(
            "r={r}: scatter is more efficient below {:.0} flows",
            scatter_breakeven_flows(width, rows, counter_bits, r)?
        );
    }
    Ok(())
}
