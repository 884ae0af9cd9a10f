//! Three buckets updated at rates 1:2:4; the cookie selector picks them in
//! roughly the same proportion once their cells cross the threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchint::selection::{Cookie, SelectorState};
use sketchint::{Sketch, SketchParams};

fn main() -> sketchint::Result<()> {
    let sketch = Sketch::new(SketchParams::new(1, 8, 64, 1)?)?;
    let mut cookie = Cookie::new(1, 8, 8)?;
    let mut state = SelectorState::new(8, 3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut picks = [0u32; 3];
    let mut fallbacks = 0;
    for _ in 0..10_000 {
        for _ in 0..2 {
            let col = match rng.gen_range(0..7) {
                0 => 0,
                1 | 2 => 1,
                _ => 2,
            };
            cookie.increment_at(0, col);
        }
        let before = state.cell_cnt;
        let s = cookie.select_at(&mut state, &sketch, 0, 3);
        if state.cell_cnt > before {
            picks[s.offsets[0] as usize] += 1;
        } else {
            fallbacks += 1;
        }
    }
    println!("selections {picks:?}, fallbacks {fallbacks}");
    println!(
        "ratios {:.2} : {:.2} : {:.2}",
        1.0,
        picks[1] as f64 / picks[0] as f64,
        picks[2] as f64 / picks[0] as f64
    );
    Ok(())
}
