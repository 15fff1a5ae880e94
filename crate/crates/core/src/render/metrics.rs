//! Image comparison metrics on linear buffers.

use super::image::ImageBuffer;
use crate::error::{Error, Result};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Argument(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Root of the mean squared componentwise difference.
pub fn compute_rmse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a, b)?;
    if a.data().is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
        .sum();
    Ok((sq / a.data().len() as f64).sqrt())
}

/// Normalized Gaussian taps of length `size`.
fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size).map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable valid-mode filtering of a `w x h` map.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = taps.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * horiz[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM of two single-channel maps with dynamic range `range`.
///
/// Windows are 11 x 11 Gaussian (sigma 1.5) at every fully contained
/// position; maps smaller than that use the largest odd window that fits.
pub fn ssim_map_mean(a: &[f64], b: &[f64], w: usize, h: usize, range: f64) -> f64 {
    assert_eq!(a.len(), w * h);
    assert_eq!(b.len(), w * h);
    let mut size = SSIM_WINDOW.min(w).min(h);
    if size % 2 == 0 {
        size -= 1;
    }
    let taps = gaussian_taps(size, SSIM_SIGMA);
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let prod = |f: fn(f64, f64) -> f64| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect::<Vec<f64>>();
    let (mu_a, ow, oh) = filter_valid(a, w, h, &taps);
    let (mu_b, ..) = filter_valid(b, w, h, &taps);
    let (aa, ..) = filter_valid(&prod(|x, _| x * x), w, h, &taps);
    let (bb, ..) = filter_valid(&prod(|_, y| y * y), w, h, &taps);
    let (ab, ..) = filter_valid(&prod(|x, y| x * y), w, h, &taps);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / (ow * oh) as f64
}

/// Dynamic range shared by both images, so the metric is symmetric.
fn dynamic_range(a: &[f64], b: &[f64]) -> f64 {
    let m = a.iter().chain(b).fold(0.0f64, |m, v| m.max(*v));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// `(1 - SSIM) / 2` on Rec. 709 luma.
pub fn compute_dssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a, b)?;
    if a.data().is_empty() {
        return Ok(0.0);
    }
    let (la, lb) = (a.luma(), b.luma());
    let range = dynamic_range(&la, &lb);
    Ok((1.0 - ssim_map_mean(&la, &lb, a.width(), a.height(), range)) / 2.0)
}

/// DSSIM averaged over the three color channels.
pub fn compute_dssim_per_channel(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a, b)?;
    if a.data().is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for c in 0..3 {
        let (ca, cb) = (a.channel(c), b.channel(c));
        let range = dynamic_range(&ca, &cb);
        total += (1.0 - ssim_map_mean(&ca, &cb, a.width(), a.height(), range)) / 2.0;
    }
    Ok(total / 3.0)
}

/// Normalized autocorrelation of a `w x h` map at a horizontal and vertical
/// lag of `lag` pixels, averaged over both axes.
pub fn autocorrelation(map: &[f64], w: usize, h: usize, lag: usize) -> Result<f64> {
    if map.len() != w * h || lag == 0 || lag >= w || lag >= h {
        return Err(Error::Argument(format!("lag {lag} invalid for a {w}x{h} map")));
    }
    let mean = map.iter().sum::<f64>() / map.len() as f64;
    let var = map.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / map.len() as f64;
    if var == 0.0 {
        return Ok(1.0);
    }
    let (mut sx, mut nx, mut sy, mut ny) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let v = map[y * w + x] - mean;
            if x + lag < w {
                sx += v * (map[y * w + x + lag] - mean);
                nx += 1;
            }
            if y + lag < h {
                sy += v * (map[(y + lag) * w + x] - mean);
                ny += 1;
            }
        }
    }
    Ok(0.5 * (sx / nx as f64 + sy / ny as f64) / var)
}
