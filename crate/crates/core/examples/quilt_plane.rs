//! Quilts a random smooth feature plane to twice its size and shows the
//! minimum-error seam through one overlap surface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triplane::neural::{AddressMode, FeaturePlane};
use triplane::synthesis::{min_error_seam, quilt_synthesize_with, QuiltParams};

fn main() -> triplane::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let errors: Vec<f64> = (0..8 * 6).map(|_| rng.gen_range(0..10) as f64).collect();
    let (path, cost) = min_error_seam(&errors, 8, 6);
    println!("seam cost {cost}");
    for (r, c) in path.iter().enumerate() {
        let row: Vec<String> = (0..6)
            .map(|k| if k == *c { format!("[{}]", errors[r * 6 + k]) } else { format!(" {} ", errors[r * 6 + k]) })
            .collect();
        println!("  {}", row.join(""));
    }

    let (n, c) = (64, 4);
    let data = (0..n * n * c)
        .map(|i| {
            let (t, k) = (i / c, i % c);
            let (x, y) = ((t % n) as f32, (t / n) as f32);
            (x * 0.21 * (k + 1) as f32).sin() + (y * 0.13 + k as f32).cos()
        })
        .collect();
    let plane = FeaturePlane::from_data(n, n, c, AddressMode::Wrap, AddressMode::Wrap, data)?;
    let out = quilt_synthesize_with(&plane, 2 * n, 2 * n, &QuiltParams::new(16, 4, 9))?;
    println!(
        "quilted {}x{}x{} from {}x{}x{}: {} -> {} bytes",
        out.width(), out.height(), out.channels(), n, n, c, plane.byte_size(), out.byte_size()
    );
    Ok(())
}
