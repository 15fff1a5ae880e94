//! RMSE and DSSIM between two images (`.pfm` or `.png`), or between a
//! generated pattern and a degraded copy when no paths are given.

use triplane::render::{compute_dssim, compute_dssim_per_channel, compute_rmse, ImageBuffer};

fn pattern(noise: f32) -> triplane::Result<ImageBuffer> {
    let (w, h) = (96, 64);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let v = 0.5 + 0.4 * ((x as f32 * 0.3).sin() * (y as f32 * 0.2).cos());
            let n = noise * (((x * 7919 + y * 104729) % 97) as f32 / 97.0 - 0.5);
            data.extend([v + n, 0.8 * v, 0.3 + n]);
        }
    }
    ImageBuffer::from_rgb(w, h, data)
}

fn main() -> triplane::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (a, b) = if args.len() == 2 {
        (ImageBuffer::load(&args[0], 2.2)?, ImageBuffer::load(&args[1], 2.2)?)
    } else {
        (pattern(0.0)?, pattern(0.2)?)
    };
    println!("rmse {:.5e}", compute_rmse(&a, &b)?);
    println!("dssim (luma) {:.5e}", compute_dssim(&a, &b)?);
    println!("dssim (rgb mean) {:.5e}", compute_dssim_per_channel(&a, &b)?);
    Ok(())
}
