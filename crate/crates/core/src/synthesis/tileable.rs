use crate::error::{Error, Result};
use crate::neural::FeaturePlane;

/// Makes a plane wrap seamlessly by cross-fading a band along each edge with
/// the plane shifted by half a period.
///
/// The shifted copy is continuous across the wrap seam (its own seam sits in
/// the middle of the plane, outside the band). The horizontal pass runs
/// first, then the vertical pass on its result, so neither pass brings back
/// the seam the other removed. Blend weight is 1 on the edge texel and falls
/// linearly to 0 at `border` texels in.
pub fn make_tileable(plane: &FeaturePlane<f32>, border: usize) -> Result<FeaturePlane<f32>> {
    let (w, h) = (plane.width(), plane.height());
    if border > 0 && 2 * border >= w.min(h) {
        return Err(Error::Argument(format!(
            "border {border} must be below half the smaller plane side ({})",
            w.min(h)
        )));
    }
    if border == 0 {
        return Ok(plane.clone());
    }
    let weight = |i: usize, n: usize| {
        let d = i.min(n - 1 - i);
        if d >= border {
            0.0
        } else {
            1.0 - d as f32 / border as f32
        }
    };
    let c = plane.channels();

    let mut pass = plane.clone();
    for row in 0..h {
        for col in 0..w {
            let a = weight(col, w);
            if a == 0.0 {
                continue;
            }
            let shifted = plane.texel(row, (col + w / 2) % w);
            let orig = plane.texel(row, col);
            let out = pass.texel_mut(row, col);
            for k in 0..c {
                out[k] = orig[k] + a * (shifted[k] - orig[k]);
            }
        }
    }
    let first = pass.clone();
    for row in 0..h {
        let a = weight(row, h);
        if a == 0.0 {
            continue;
        }
        for col in 0..w {
            let shifted = first.texel((row + h / 2) % h, col);
            let orig = first.texel(row, col);
            let out = pass.texel_mut(row, col);
            for k in 0..c {
                out[k] = orig[k] + a * (shifted[k] - orig[k]);
            }
        }
    }
    Ok(pass)
}

/// Mean absolute feature jump across the wrap seams (last row to first row
/// and last column to first column).
pub fn seam_delta(plane: &FeaturePlane<f32>) -> f64 {
    let (w, h, c) = (plane.width(), plane.height(), plane.channels());
    let mut total = 0.0;
    let mut count = 0usize;
    let mut add = |a: &[f32], b: &[f32]| {
        for k in 0..c {
            total += (a[k] as f64 - b[k] as f64).abs();
        }
        count += c;
    };
    for col in 0..w {
        add(plane.texel(h - 1, col), plane.texel(0, col));
    }
    for row in 0..h {
        add(plane.texel(row, w - 1), plane.texel(row, 0));
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::neural::AddressMode;

    /// Smooth but non-periodic field: a few low-frequency waves per channel.
    fn smooth_plane(seed: u64, n: usize, c: usize) -> FeaturePlane<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves: Vec<[f64; 4]> = (0..c * 4)
            .map(|_| {
                [
                    rng.gen_range(0.2..0.9),
                    rng.gen_range(0.2..0.9),
                    rng.gen_range(0.0..6.3),
                    rng.gen_range(0.3..1.0),
                ]
            })
            .collect();
        let mut data = Vec::with_capacity(n * n * c);
        for row in 0..n {
            for col in 0..n {
                for k in 0..c {
                    let (x, y) = (col as f64 / n as f64, row as f64 / n as f64);
                    let v: f64 = waves[k * 4..k * 4 + 4]
                        .iter()
                        .map(|w| w[3] * (std::f64::consts::TAU * (w[0] * x + w[1] * y) + w[2]).sin())
                        .sum();
                    data.push(v as f32);
                }
            }
        }
        FeaturePlane::from_data(n, n, c, AddressMode::Wrap, AddressMode::Wrap, data).unwrap()
    }

    #[test]
    fn zero_border_is_identity() {
        let p = smooth_plane(1, 16, 2);
        assert_eq!(make_tileable(&p, 0).unwrap(), p);
    }

    #[test]
    fn constant_plane_unchanged() {
        let p = FeaturePlane::from_data(8, 8, 1, AddressMode::Wrap, AddressMode::Wrap, vec![0.25f32; 64]).unwrap();
        assert_eq!(make_tileable(&p, 3).unwrap(), p);
    }

    #[test]
    fn border_too_large() {
        let p = smooth_plane(1, 16, 1);
        assert!(matches!(make_tileable(&p, 8), Err(Error::Argument(_))));
        assert!(make_tileable(&p, 7).is_ok());
    }

    #[test]
    fn seam_is_removed() {
        let p = smooth_plane(2, 256, 4);
        let before = seam_delta(&p);
        let q = make_tileable(&p, 16).unwrap();
        let after = seam_delta(&q);
        assert!(after < 0.05 * before, "before {before} after {after}");
        // interior away from the band is untouched
        assert_eq!(p.texel(100, 100), q.texel(100, 100));
    }
}
