//! Per-channel Gaussianization of a feature plane and its histogram tables.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::neural::FeaturePlane;

pub const DEFAULT_LUT_SIZE: usize = 4096;

/// Monotone value <-> standard-normal tables for one channel.
///
/// `forward[k]` is the Gaussian value of feature `value_min + k * step`, with
/// `step = (value_max - value_min) / (L - 1)`. `inverse[k]` is the feature
/// value at Gaussian `-gauss_bound + 2 * gauss_bound * k / (L - 1)`, where
/// `gauss_bound` is the largest Gaussianized magnitude of the channel, so
/// `inverse[0]` is the channel minimum and `inverse[L - 1]` its maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLut {
    pub value_min: f32,
    pub value_max: f32,
    pub forward: Vec<f32>,
    pub gauss_bound: f32,
    pub inverse: Vec<f32>,
}

#[inline]
fn table_lookup(table: &[f32], t: f64) -> f64 {
    // `t` in [0, 1] maps onto the table ends.
    let last = table.len() - 1;
    let x = (t * last as f64).clamp(0.0, last as f64);
    let i = (x.floor() as usize).min(last.saturating_sub(1));
    if last == 0 {
        return table[0] as f64;
    }
    let f = x - i as f64;
    table[i] as f64 * (1.0 - f) + table[i + 1] as f64 * f
}

impl ChannelLut {
    pub fn is_constant(&self) -> bool {
        self.gauss_bound == 0.0
    }

    /// Feature value to Gaussian.
    pub fn to_gauss(&self, x: f64) -> f64 {
        if self.is_constant() {
            return 0.0;
        }
        let span = (self.value_max - self.value_min) as f64;
        table_lookup(&self.forward, (x - self.value_min as f64) / span)
    }

    /// Gaussian to feature value; inputs beyond the bound clamp to the extremes.
    #[inline]
    pub fn to_value(&self, g: f64) -> f64 {
        if self.is_constant() {
            return self.inverse[0] as f64;
        }
        let b = self.gauss_bound as f64;
        table_lookup(&self.inverse, (g + b) / (2.0 * b))
    }

    /// Width of one forward-table bin in feature units.
    pub fn value_bin_width(&self) -> f64 {
        (self.value_max - self.value_min) as f64 / (self.forward.len() - 1) as f64
    }

    /// Feature-space span of the inverse-table bin that Gaussian `g` falls in.
    pub fn inverse_bin_width(&self, g: f64) -> f64 {
        if self.is_constant() {
            return 0.0;
        }
        let last = self.inverse.len() - 1;
        let b = self.gauss_bound as f64;
        let x = ((g + b) / (2.0 * b) * last as f64).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        (self.inverse[i + 1] - self.inverse[i]) as f64
    }
}

/// Gaussianized copy of a positional plane plus per-channel tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianizedExemplar {
    pub gauss_plane: FeaturePlane<f32>,
    pub luts: Vec<ChannelLut>,
    /// Per-channel correlation of the Gaussian plane at texel lags
    /// `(1,0)`, `(0,1)`, `(1,1)`, `(1,-1)`; see [`lag_correlations`].
    pub lag_corr: Vec<[f64; 4]>,
}

impl GaussianizedExemplar {
    pub fn new(gauss_plane: FeaturePlane<f32>, luts: Vec<ChannelLut>) -> Self {
        let lag_corr = lag_correlations(&gauss_plane);
        GaussianizedExemplar {
            gauss_plane,
            luts,
            lag_corr,
        }
    }

    /// Variance of a bilinear fetch of channel `ch` with the given
    /// [`bilinear_lag_weights`], relative to the texel variance.
    #[inline]
    pub fn fetch_variance(&self, ch: usize, lag_weights: &[f64; 5]) -> f64 {
        let r = &self.lag_corr[ch];
        lag_weights[0] + lag_weights[1] * r[0] + lag_weights[2] * r[1] + lag_weights[3] * r[2] + lag_weights[4] * r[3]
    }
}

/// Circular lag-1 autocorrelations of every channel, normalized by the
/// channel's second moment. Constant channels get zeros.
pub fn lag_correlations(plane: &FeaturePlane<f32>) -> Vec<[f64; 4]> {
    let (w, h, c) = (plane.width(), plane.height(), plane.channels());
    let data = plane.data();
    let at = |x: usize, y: usize, k: usize| data[((y % h) * w + x % w) * c + k] as f64;
    (0..c)
        .map(|k| {
            let mut acc = [0.0f64; 5];
            for y in 0..h {
                for x in 0..w {
                    let v = at(x, y, k);
                    acc[0] += v * v;
                    acc[1] += v * at(x + 1, y, k);
                    acc[2] += v * at(x, y + 1, k);
                    acc[3] += v * at(x + 1, y + 1, k);
                    acc[4] += v * at(x + w - 1, y + 1, k);
                }
            }
            if acc[0] == 0.0 {
                return [0.0; 4];
            }
            [acc[1] / acc[0], acc[2] / acc[0], acc[3] / acc[0], acc[4] / acc[0]]
        })
        .collect()
}

/// Coefficients `[s0, sx, sy, sd, sa]` such that a bilinear fetch at
/// fractional position `(tx, ty)` of a stationary field with lag
/// correlations `r` has variance `s0 + sx r[0] + sy r[1] + sd r[2] + sa r[3]`.
pub fn bilinear_lag_weights(tx: f64, ty: f64) -> [f64; 5] {
    let (ax, bx, ay, by) = (1.0 - tx, tx, 1.0 - ty, ty);
    let (qx, qy) = (ax * ax + bx * bx, ay * ay + by * by);
    [qx * qy, 2.0 * ax * bx * qy, 2.0 * ay * by * qx, 2.0 * ax * ay * bx * by, 2.0 * ax * ay * bx * by]
}

/// Sorted channel values and the empirical quantile function over them.
struct Quantiles {
    sorted: Vec<f64>,
}

impl Quantiles {
    /// Value at probability `p`: rank position `p * N - 0.5`, linearly interpolated.
    fn value_at(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let r = (p * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (r.floor() as usize).min(n - 1);
        if i + 1 >= n {
            return self.sorted[n - 1];
        }
        let f = r - i as f64;
        self.sorted[i] * (1.0 - f) + self.sorted[i + 1] * f
    }

    /// Fractional rank of `x`; ties take the middle of their run.
    fn rank_of(&self, x: f64) -> f64 {
        let n = self.sorted.len();
        let lo = self.sorted.partition_point(|v| *v < x);
        let hi = self.sorted.partition_point(|v| *v <= x);
        if hi > lo {
            return (lo + hi - 1) as f64 / 2.0;
        }
        if lo == 0 {
            return 0.0;
        }
        if lo == n {
            return (n - 1) as f64;
        }
        let (a, b) = (self.sorted[lo - 1], self.sorted[lo]);
        (lo - 1) as f64 + (x - a) / (b - a)
    }
}

pub fn build_gaussianization(plane: &FeaturePlane<f32>) -> GaussianizedExemplar {
    build_gaussianization_with(plane, DEFAULT_LUT_SIZE)
}

pub fn build_gaussianization_with(plane: &FeaturePlane<f32>, lut_size: usize) -> GaussianizedExemplar {
    assert!(lut_size >= 2, "tables need at least two entries");
    let normal = Normal::standard();
    let c = plane.channels();
    let n = plane.width() * plane.height();
    let mut gauss = plane.map(|_| 0.0f32);
    let mut luts = Vec::with_capacity(c);
    let data = plane.data();

    for ch in 0..c {
        let values: Vec<f64> = (0..n).map(|t| data[t * c + ch] as f64).collect();
        let mut order: Vec<usize> = (0..n).collect();
        // stable: ties keep texel order
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        let sorted: Vec<f64> = order.iter().map(|i| values[*i]).collect();
        let (vmin, vmax) = (sorted[0], sorted[n - 1]);

        if vmin == vmax || n == 1 {
            luts.push(ChannelLut {
                value_min: vmin as f32,
                value_max: vmax as f32,
                forward: vec![0.0; lut_size],
                gauss_bound: 0.0,
                inverse: vec![vmin as f32; lut_size],
            });
            continue;
        }

        let g_of_rank = |r: f64| normal.inverse_cdf((r + 0.5) / n as f64);
        let out = gauss.data_mut();
        for (rank, texel) in order.iter().enumerate() {
            out[texel * c + ch] = g_of_rank(rank as f64) as f32;
        }

        let q = Quantiles { sorted };
        let last = (lut_size - 1) as f64;
        let forward = (0..lut_size)
            .map(|k| {
                let x = vmin + (vmax - vmin) * k as f64 / last;
                g_of_rank(q.rank_of(x)) as f32
            })
            .collect();
        let bound = g_of_rank((n - 1) as f64);
        let inverse = (0..lut_size)
            .map(|k| {
                let g = -bound + 2.0 * bound * k as f64 / last;
                q.value_at(normal.cdf(g)) as f32
            })
            .collect();
        luts.push(ChannelLut {
            value_min: vmin as f32,
            value_max: vmax as f32,
            forward,
            gauss_bound: bound as f32,
            inverse,
        });
    }
    GaussianizedExemplar::new(gauss, luts)
}
