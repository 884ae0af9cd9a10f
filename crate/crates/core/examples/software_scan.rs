//! One pass of the software selector over a small cookie: every address
//! tuple it queues covers one hot cell per row within a 2^r window.

use std::collections::VecDeque;

use sketchint::selection::{software_on_int, software_scan, Cookie, SelectorState};
use sketchint::{Sketch, SketchParams};

fn main() -> sketchint::Result<()> {
    let (rows, width, r) = (3, 32, 2);
    let mut sketch = Sketch::new(SketchParams::new(rows, width, 64, 5)?)?;
    let mut cookie = Cookie::new(rows, width, 8)?;
    let hot = [
        (0, 1),
        (1, 2),
        (2, 1),
        (0, 9),
        (1, 8),
        (2, 11),
        (0, 20),
        (1, 29),
    ];
    for &(row, col) in &hot {
        for _ in 0..5 {
            cookie.increment_at(row, col);
            sketch.add_at(row, col, 1);
        }
    }
    let state = SelectorState::new(8, 2, 1);
    let mut fifo = VecDeque::new();
    software_scan(&mut cookie, &state, r, &mut fifo);
    for t in &fifo {
        println!("tuple addr {:>2} offsets {:?}", t.addr, t.offsets);
    }
    while let Some(s) = software_on_int(&mut fifo, &sketch) {
        println!("sketchlet {s:?}");
    }
    Ok(())
}
