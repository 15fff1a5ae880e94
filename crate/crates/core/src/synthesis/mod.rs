//! By-example synthesis of the positional feature plane.
//!
//! Dynamic modes ([`SynthesisMode::HistBlend`], [`SynthesisMode::HexTile`])
//! evaluate a synthesized feature at any `u*` from the Gaussianized exemplar
//! and a seed alone. Quilting is the offline, pre-generated alternative.

mod gaussian;
mod lattice;
mod quilt;
mod tileable;

use std::fmt;
use std::str::FromStr;

pub use gaussian::{
    bilinear_lag_weights, build_gaussianization, build_gaussianization_with, lag_correlations, ChannelLut,
    GaussianizedExemplar, DEFAULT_LUT_SIZE,
};
pub use lattice::{
    hex_grid_lookup, splitmix64, triangle_grid_lookup, triangle_vertices, vertex_offset, vertex_position, PatchLookup,
};
pub use quilt::{min_error_seam, quilt_synthesize, quilt_synthesize_with, QuiltParams};
pub use tileable::{make_tileable, seam_delta};

use crate::error::{Error, Result};
use crate::neural::{FeaturePlane, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthesisMode {
    /// Plain periodic tiling of the exemplar plane.
    Repeat,
    /// Histogram-preserving blend on the triangle lattice.
    HistBlend,
    /// Histogram-preserving blend with hex-tiling weights.
    HexTile,
    /// Fetch from a pre-generated quilted plane.
    Quilted,
}

impl SynthesisMode {
    pub fn is_dynamic(self) -> bool {
        self != SynthesisMode::Quilted
    }
}

impl FromStr for SynthesisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "repeat" => Ok(SynthesisMode::Repeat),
            "hist" | "hist-blend" | "hist_blend" => Ok(SynthesisMode::HistBlend),
            "hex" | "hex-tile" | "hex_tile" => Ok(SynthesisMode::HexTile),
            "quilt" | "quilted" => Ok(SynthesisMode::Quilted),
            other => Err(Error::Argument(format!("unknown synthesis mode {other:?} (repeat|hist|hex|quilt)"))),
        }
    }
}

impl fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisMode::Repeat => "repeat",
            SynthesisMode::HistBlend => "hist",
            SynthesisMode::HexTile => "hex",
            SynthesisMode::Quilted => "quilt",
        })
    }
}

pub const DEFAULT_GRID_SCALE: f64 = 0.25;
pub const DEFAULT_HEX_EXPONENT: f64 = 7.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisParams {
    pub mode: SynthesisMode,
    /// Lattice edge length in exemplar UV units.
    pub grid_scale: f64,
    pub seed: u64,
    /// Sharpening exponent of the hex-tiling weights.
    pub hex_exponent: f64,
    /// Required by [`SynthesisMode::Quilted`]; covers `width / exemplar width`
    /// exemplar periods and wraps.
    pub quilted_plane: Option<FeaturePlane<f32>>,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        SynthesisParams {
            mode: SynthesisMode::Repeat,
            grid_scale: DEFAULT_GRID_SCALE,
            seed: 0,
            hex_exponent: DEFAULT_HEX_EXPONENT,
            quilted_plane: None,
        }
    }
}

impl SynthesisParams {
    pub fn new(mode: SynthesisMode, seed: u64) -> Self {
        SynthesisParams {
            mode,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_scale > 0.0 && self.grid_scale <= 1.0) {
            return Err(Error::Argument(format!("grid scale {} outside (0, 1]", self.grid_scale)));
        }
        if !(self.hex_exponent >= 1.0 && self.hex_exponent.is_finite()) {
            return Err(Error::Argument("hex exponent must be >= 1".into()));
        }
        if self.mode == SynthesisMode::Quilted && self.quilted_plane.is_none() {
            return Err(Error::Configuration("quilted mode needs a quilted plane".into()));
        }
        Ok(())
    }

    /// Lattice lookups for the dynamic modes.
    pub fn lookups(&self, u_star: [f64; 2]) -> Option<[PatchLookup; 3]> {
        match self.mode {
            SynthesisMode::HistBlend => Some(triangle_grid_lookup(u_star, self.grid_scale, self.seed)),
            SynthesisMode::HexTile => Some(hex_grid_lookup(u_star, self.grid_scale, self.seed, self.hex_exponent)),
            _ => None,
        }
    }
}

/// Variance-preserving blend in Gaussian space, one value per channel:
/// `g* = sum(w_i G_i) / sqrt(sum(w_i^2 V_i))`.
///
/// `G_i` is a bilinear fetch of the Gaussianized plane and `V_i` its variance,
/// which drops below 1 between texel centers; `V_i` follows from the plane's
/// lag-1 correlations. At texel centers `V_i = 1`.
pub fn blend_gaussian(gex: &GaussianizedExemplar, lookups: &[PatchLookup; 3], out: &mut [f64]) {
    let plane = &gex.gauss_plane;
    let c = plane.channels();
    let data = plane.data();
    let mut var = [0.0f64; 64];
    let mut heap;
    let var: &mut [f64] = if c <= var.len() {
        &mut var[..c]
    } else {
        heap = vec![0.0; c];
        &mut heap
    };
    var.iter_mut().for_each(|v| *v = 0.0);
    out.iter_mut().for_each(|v| *v = 0.0);
    for l in lookups {
        if l.weight == 0.0 {
            continue;
        }
        let taps = plane.taps(l.offset);
        let tw = taps.weights;
        let lag = bilinear_lag_weights(tw[1] + tw[3], tw[2] + tw[3]);
        let w2 = l.weight * l.weight;
        for (k, v) in var.iter_mut().enumerate() {
            *v += w2 * gex.fetch_variance(k, &lag);
        }
        for (texel, tw) in taps.texels.iter().zip(tw) {
            if tw == 0.0 {
                continue;
            }
            let w = l.weight * tw;
            for (o, v) in out.iter_mut().zip(&data[texel * c..(texel + 1) * c]) {
                *o += w * *v as f64;
            }
        }
    }
    for (o, v) in out.iter_mut().zip(var.iter()) {
        if *v > 0.0 {
            *o /= v.sqrt();
        }
    }
}

/// Histogram-preserving blend of three exemplar patches, mapped back to
/// feature values through the inverse tables.
pub fn blend_features_into(gex: &GaussianizedExemplar, lookups: &[PatchLookup; 3], out: &mut [f32]) {
    let mut g = [0.0f64; 64];
    let c = gex.luts.len();
    let mut heap;
    let g: &mut [f64] = if c <= g.len() {
        &mut g[..c]
    } else {
        heap = vec![0.0; c];
        &mut heap
    };
    blend_gaussian(gex, lookups, g);
    for ((o, gv), lut) in out.iter_mut().zip(g.iter()).zip(&gex.luts) {
        *o = lut.to_value(*gv) as f32;
    }
}

pub fn blend_features(gex: &GaussianizedExemplar, lookups: &[PatchLookup; 3]) -> Vec<f32> {
    let mut out = vec![0.0; gex.luts.len()];
    blend_features_into(gex, lookups, &mut out);
    out
}

/// Bytes needed to represent the positional content at `uv_scale` times the
/// exemplar extent: dynamic modes only need the three trained planes, the
/// quilted mode stores a pre-generated positional plane of
/// `(scale * width) x (scale * height) x channels` f32 values.
pub fn storage_estimate(config: &ModelConfig, mode: SynthesisMode, uv_scale: f64) -> Result<u64> {
    if !(uv_scale >= 1.0 && uv_scale.is_finite()) {
        return Err(Error::Argument(format!("uv scale must be >= 1, got {uv_scale}")));
    }
    let f = std::mem::size_of::<f32>() as u64;
    if mode.is_dynamic() {
        return Ok([config.positional, config.half, config.diff]
            .iter()
            .map(|p| p.values() as u64 * f)
            .sum());
    }
    let w = (uv_scale * config.positional.width as f64).round() as u64;
    let h = (uv_scale * config.positional.height as f64).round() as u64;
    Ok(w * h * config.positional.channels as u64 * f)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::neural::AddressMode;

    fn random_gex(seed: u64, n: usize, c: usize) -> (FeaturePlane<f32>, GaussianizedExemplar) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * n * c).map(|_| rng.gen::<f32>()).collect();
        let p = FeaturePlane::from_data(n, n, c, AddressMode::Wrap, AddressMode::Wrap, data).unwrap();
        let g = build_gaussianization(&p);
        (p, g)
    }

    #[test]
    fn single_weight_returns_exemplar_content() {
        let (_, g) = random_gex(1, 16, 3);
        let center = [(5.0 + 0.5) / 16.0, (9.0 + 0.5) / 16.0];
        let l = [
            PatchLookup {
                offset: center,
                weight: 1.0,
            },
            PatchLookup {
                offset: [0.3, 0.3],
                weight: 0.0,
            },
            PatchLookup {
                offset: [0.7, 0.1],
                weight: 0.0,
            },
        ];
        let mut gs = [0.0; 3];
        blend_gaussian(&g, &l, &mut gs);
        for k in 0..3 {
            assert_eq!(gs[k], g.gauss_plane.texel(9, 5)[k] as f64);
        }
        let f = blend_features(&g, &l);
        for k in 0..3 {
            assert_eq!(f[k], g.luts[k].to_value(gs[k]) as f32);
        }
    }

    #[test]
    fn equal_weights_normalize_by_sqrt_three() {
        let (_, g) = random_gex(2, 8, 2);
        let offs = [[0.0625, 0.0625], [0.3125, 0.5625], [0.8125, 0.1875]];
        let l = offs.map(|o| PatchLookup {
            offset: o,
            weight: 1.0 / 3.0,
        });
        let mut gs = [0.0; 2];
        blend_gaussian(&g, &l, &mut gs);
        for k in 0..2 {
            let sum: f64 = offs.iter().map(|o| g.gauss_plane.fetch(*o)[k] as f64).sum();
            assert!((gs[k] - sum / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_variance_matches_enumeration() {
        // smooth field so the lag correlations are far from zero
        let (n, c) = (24, 2);
        let data = (0..n * n * c)
            .map(|i| {
                let (t, k) = (i / c, i % c);
                let (x, y) = ((t % n) as f32, (t / n) as f32);
                (x * 0.7 + k as f32).sin() + (y * 0.4).cos() * (x * 0.2).sin()
            })
            .collect();
        let p = FeaturePlane::from_data(n, n, c, AddressMode::Wrap, AddressMode::Wrap, data).unwrap();
        let g = build_gaussianization(&p);
        let gp = &g.gauss_plane;
        for (tx, ty) in [(0.0, 0.0), (0.5, 0.5), (0.2, 0.9), (0.75, 0.1)] {
            let lag = bilinear_lag_weights(tx, ty);
            for k in 0..c {
                let (mut sq, mut second) = (0.0, 0.0);
                for row in 0..n {
                    for col in 0..n {
                        let uv = [(col as f64 + 0.5 + tx) / n as f64, (row as f64 + 0.5 + ty) / n as f64];
                        let v = gp.fetch(uv)[k] as f64;
                        sq += v * v;
                        second += (gp.texel(row, col)[k] as f64).powi(2);
                    }
                }
                let predicted = g.fetch_variance(k, &lag);
                assert!((sq / second - predicted).abs() < 1e-6, "{tx} {ty} {k}: {} {predicted}", sq / second);
            }
        }
        assert_eq!(bilinear_lag_weights(0.0, 0.0), [1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn blended_gaussian_has_unit_variance() {
        let (_, g) = random_gex(4, 32, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let mut m2 = [0.0; 2];
        let mut gs = [0.0; 2];
        for _ in 0..n {
            let u = [rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)];
            blend_gaussian(&g, &triangle_grid_lookup(u, DEFAULT_GRID_SCALE, 9), &mut gs);
            for k in 0..2 {
                m2[k] += gs[k] * gs[k] / n as f64;
            }
        }
        // white-noise exemplar: an uncorrected bilinear fetch averages to 4/9
        for v in m2 {
            assert!((v - 1.0).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn storage_numbers() {
        let c = ModelConfig::default();
        assert_eq!(storage_estimate(&c, SynthesisMode::HistBlend, 15.0).unwrap(), 10_265_600);
        assert_eq!(storage_estimate(&c, SynthesisMode::Quilted, 15.0).unwrap(), 2_304_000_000);
        assert_eq!(storage_estimate(&c, SynthesisMode::Quilted, 1.0).unwrap(), 400 * 400 * 16 * 4);
        assert!(storage_estimate(&c, SynthesisMode::Quilted, 0.5).is_err());
    }

    #[test]
    fn mode_parsing() {
        for m in [
            SynthesisMode::Repeat,
            SynthesisMode::HistBlend,
            SynthesisMode::HexTile,
            SynthesisMode::Quilted,
        ] {
            assert_eq!(m.to_string().parse::<SynthesisMode>().unwrap(), m);
        }
        assert!("tile".parse::<SynthesisMode>().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SynthesisParams::default().validate().is_ok());
        let bad = SynthesisParams {
            grid_scale: 1.5,
            ..SynthesisParams::default()
        };
        assert!(bad.validate().is_err());
        let q = SynthesisParams::new(SynthesisMode::Quilted, 0);
        assert!(matches!(q.validate(), Err(Error::Configuration(_))));
    }
}
