//! Offline image quilting of a feature plane.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neural::FeaturePlane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuiltParams {
    pub block: usize,
    pub overlap: usize,
    /// Candidates within `(1 + tolerance)` of the best overlap error are eligible.
    pub tolerance: f64,
    /// Spacing of candidate source positions; 1 is exhaustive.
    pub stride: usize,
    pub seed: u64,
}

impl QuiltParams {
    pub fn new(block: usize, overlap: usize, seed: u64) -> Self {
        QuiltParams {
            block,
            overlap,
            tolerance: 0.1,
            stride: 1,
            seed,
        }
    }
}

/// Minimum-cost top-to-bottom path through a `rows x cols` error surface
/// (row-major), moving at most one column per row. Ties go to the leftmost
/// column. Returns the column per row and the path cost (summed top to bottom).
pub fn min_error_seam(errors: &[f64], rows: usize, cols: usize) -> (Vec<usize>, f64) {
    assert_eq!(errors.len(), rows * cols);
    assert!(rows > 0 && cols > 0);
    let mut acc = errors[..cols].to_vec();
    let mut back = vec![0usize; rows * cols];
    for r in 1..rows {
        let prev = acc.clone();
        for c in 0..cols {
            let lo = c.saturating_sub(1);
            let hi = (c + 1).min(cols - 1);
            let mut best = lo;
            for k in lo..=hi {
                if prev[k] < prev[best] {
                    best = k;
                }
            }
            back[r * cols + c] = best;
            acc[c] = prev[best] + errors[r * cols + c];
        }
    }
    let mut c = 0;
    for k in 1..cols {
        if acc[k] < acc[c] {
            c = k;
        }
    }
    let mut path = vec![0usize; rows];
    for r in (0..rows).rev() {
        path[r] = c;
        c = back[r * cols + c];
    }
    let cost = path.iter().enumerate().map(|(r, c)| errors[r * cols + c]).sum();
    (path, cost)
}

pub fn quilt_synthesize(
    plane: &FeaturePlane<f32>,
    out_w: usize,
    out_h: usize,
    block: usize,
    overlap: usize,
    seed: u64,
) -> Result<FeaturePlane<f32>> {
    quilt_synthesize_with(plane, out_w, out_h, &QuiltParams::new(block, overlap, seed))
}

fn blocks_needed(out: usize, block: usize, step: usize) -> usize {
    if out <= block {
        1
    } else {
        1 + (out - block).div_ceil(step)
    }
}

pub fn quilt_synthesize_with(
    plane: &FeaturePlane<f32>,
    out_w: usize,
    out_h: usize,
    params: &QuiltParams,
) -> Result<FeaturePlane<f32>> {
    let QuiltParams {
        block,
        overlap,
        tolerance,
        stride,
        seed,
    } = *params;
    let (w, h, c) = (plane.width(), plane.height(), plane.channels());
    if block == 0 || overlap >= block || block > w.min(h) {
        return Err(Error::Argument(format!(
            "need overlap < block <= {}, got block {block} overlap {overlap}",
            w.min(h)
        )));
    }
    if out_w == 0 || out_h == 0 || stride == 0 || !(tolerance >= 0.0) {
        return Err(Error::Argument("output size and stride must be positive, tolerance >= 0".into()));
    }
    let step = block - overlap;
    let (nx, ny) = (blocks_needed(out_w, block, step), blocks_needed(out_h, block, step));
    let (cw, ch) = (step * (nx - 1) + block, step * (ny - 1) + block);
    let mut canvas = vec![0.0f32; cw * ch * c];
    let src = plane.data();

    let candidates: Vec<(usize, usize)> = (0..=h - block)
        .step_by(stride)
        .flat_map(|y| (0..=w - block).step_by(stride).map(move |x| (x, y)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let diff2 = |canvas: &[f32], cx: usize, cy: usize, sx: usize, sy: usize| -> f64 {
        let a = &canvas[(cy * cw + cx) * c..(cy * cw + cx + 1) * c];
        let b = &src[(sy * w + sx) * c..(sy * w + sx + 1) * c];
        a.iter().zip(b).map(|(x, y)| ((*x - *y) as f64).powi(2)).sum()
    };

    for by in 0..ny {
        for bx in 0..nx {
            let (ox, oy) = (bx * step, by * step);
            let left = bx > 0 && overlap > 0;
            let top = by > 0 && overlap > 0;
            let in_overlap = |x: usize, y: usize| (left && x < overlap) || (top && y < overlap);

            let chosen = if !left && !top {
                *candidates.choose(&mut rng).unwrap()
            } else {
                let canvas_ref = &canvas;
                let costs: Vec<f64> = candidates
                    .par_iter()
                    .map(|&(sx, sy)| {
                        let mut e = 0.0;
                        for y in 0..block {
                            for x in 0..block {
                                if in_overlap(x, y) {
                                    e += diff2(canvas_ref, ox + x, oy + y, sx + x, sy + y);
                                }
                            }
                        }
                        e
                    })
                    .collect();
                let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
                let limit = best * (1.0 + tolerance);
                let eligible: Vec<usize> = (0..costs.len()).filter(|k| costs[*k] <= limit).collect();
                candidates[*eligible.choose(&mut rng).unwrap()]
            };
            let (sx, sy) = chosen;

            // seam column per row for the left overlap, seam row per column for the top
            let vseam = left.then(|| {
                let e: Vec<f64> = (0..block)
                    .flat_map(|y| (0..overlap).map(move |x| (x, y)))
                    .map(|(x, y)| diff2(&canvas, ox + x, oy + y, sx + x, sy + y))
                    .collect();
                min_error_seam(&e, block, overlap).0
            });
            let hseam = top.then(|| {
                let e: Vec<f64> = (0..block)
                    .flat_map(|x| (0..overlap).map(move |y| (x, y)))
                    .map(|(x, y)| diff2(&canvas, ox + x, oy + y, sx + x, sy + y))
                    .collect();
                min_error_seam(&e, block, overlap).0
            });
            for y in 0..block {
                for x in 0..block {
                    let keep_old = vseam.as_ref().is_some_and(|s| x < s[y]) || hseam.as_ref().is_some_and(|s| y < s[x]);
                    if keep_old {
                        continue;
                    }
                    let d = ((oy + y) * cw + ox + x) * c;
                    let s = ((sy + y) * w + sx + x) * c;
                    canvas[d..d + c].copy_from_slice(&src[s..s + c]);
                }
            }
        }
    }

    let mut out = Vec::with_capacity(out_w * out_h * c);
    for y in 0..out_h {
        out.extend_from_slice(&canvas[y * cw * c..(y * cw + out_w) * c]);
    }
    FeaturePlane::from_data(out_w, out_h, c, plane.wrap_u, plane.wrap_v, out)
}
