//! Encodes column and scatter sketchlets for the default sketch geometry
//! and decodes them back.

use sketchint::{Sketchlet, SketchletLayout};

fn main() -> sketchint::Result<()> {
    let column = SketchletLayout::new(2, 1 << 15, 64, 0)?;
    let scatter = SketchletLayout::new(2, 1 << 15, 64, 6)?;

    let c = Sketchlet::column(1234, vec![17, 40_000]);
    let s = Sketchlet {
        addr: 1216,
        offsets: vec![3, 60],
        values: vec![17, 40_000],
    };
    for (name, layout, sk) in [("column", &column, &c), ("scatter", &scatter, &s)] {
        let bytes = layout.encode(sk)?;
        println!(
            "{name:<8} {} bits -> {} bytes: {}",
            layout.encoded_bits(),
            bytes.len(),
            hex::encode(&bytes)
        );
        assert_eq!(&layout.decode(&bytes)?, sk);
    }
    println!(
        "scatter overhead over column: {:.2}%",
        100.0 * (scatter.encoded_bits() as f64 / column.encoded_bits() as f64 - 1.0)
    );
    Ok(())
}
