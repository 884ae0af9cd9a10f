//! How an end-host sketch goes wrong: a bucket it never received makes it
//! overestimate, and a bucket that went stale makes it underestimate.

use sketchint::sketch::hash_index;
use sketchint::{FlowKey, ReconSketch, Sketch, SketchParams};

fn main() -> sketchint::Result<()> {
    let params = SketchParams::new(2, 16, 64, 3)?;
    let h = |row, k: u64| hash_index(&params, row, FlowKey(k)).unwrap();
    // f owns its row-0 bucket and shares its row-1 bucket with g
    let (f, g) = (0..1000u64)
        .filter(|&f| h(0, f) != h(1, f))
        .find_map(|f| {
            (0..1000u64)
                .find(|&g| g != f && h(1, g) == h(1, f) && h(0, g) != h(0, f) && h(0, g) != h(1, f))
                .map(|g| (FlowKey(f), FlowKey(g)))
        })
        .expect("key pair");

    let mut switch = Sketch::new(params)?;
    let mut host = ReconSketch::new(params)?;
    let cols: Vec<usize> = switch.hasher().indices(f).collect();

    switch.update(f, 30);
    switch.update(g, 15);
    host.apply(&switch.read_sketchlet(cols[1], &[]))?;
    let e = host.query(f);
    println!(
        "t:      truth 30, switch {}, end-host {} ({:?}): row 0 never delivered",
        switch.query(f),
        e.estimate,
        e.confidence
    );

    switch.update(f, 20);
    host.apply(&switch.read_sketchlet(cols[0], &[]))?;
    let e = host.query(f);
    println!(
        "t + dt: truth 50, switch {}, end-host {} ({:?}): row 1 is stale",
        switch.query(f),
        e.estimate,
        e.confidence
    );
    Ok(())
}
