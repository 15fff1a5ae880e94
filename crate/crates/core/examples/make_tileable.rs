//! Blends the borders of a non-periodic plane so that wrap addressing has
//! no visible seam.

use triplane::neural::{AddressMode, FeaturePlane};
use triplane::synthesis::{make_tileable, seam_delta};

fn main() -> triplane::Result<()> {
    let (n, c) = (128, 8);
    let data = (0..n * n * c)
        .map(|i| {
            let (t, k) = (i / c, i % c);
            let (x, y) = ((t % n) as f32 / n as f32, (t / n) as f32 / n as f32);
            (6.0 * x + k as f32).sin() * (4.3 * y).cos() + 0.5 * x
        })
        .collect();
    let plane = FeaturePlane::from_data(n, n, c, AddressMode::Wrap, AddressMode::Wrap, data)?;
    for border in [4, 8, 16, 32] {
        let t = make_tileable(&plane, border)?;
        println!("border {border:>2}: seam {:.4} -> {:.4}", seam_delta(&plane), seam_delta(&t));
    }
    Ok(())
}
