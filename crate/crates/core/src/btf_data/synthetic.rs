//! Analytic ground-truth BTFs: a per-texel Lambertian albedo plus an isotropic
//! GGX lobe with Smith shadowing and Schlick Fresnel, sampled on a regular
//! `(theta, phi)` direction grid crossed with itself.

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BtfDataset, DirectionPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridLayout {
    /// `theta_k = theta_max * (k + 0.5) / n_theta`; never hits the pole.
    #[default]
    Centered,
    /// `theta_k = theta_max * k / (n_theta - 1)`; includes the pole (and
    /// `theta = 0` only when `n_theta = 1`).
    Endpoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    #[serde(default = "default_theta_max")]
    pub theta_max_deg: f64,
    #[serde(default)]
    pub layout: GridLayout,
}

fn default_theta_max() -> f64 {
    75.0
}

impl Default for AngularGrid {
    fn default() -> Self {
        AngularGrid {
            n_theta: 5,
            n_phi: 8,
            theta_max_deg: default_theta_max(),
            layout: GridLayout::Centered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlbedoSource {
    Constant {
        rgb: [f64; 3],
    },
    /// Tileable multi-octave value noise modulating a base color.
    Noise {
        seed: u64,
        base: [f64; 3],
        #[serde(default = "default_contrast")]
        contrast: f64,
        #[serde(default = "default_cells")]
        cells: usize,
        #[serde(default = "default_octaves")]
        octaves: usize,
    },
    /// Row-major `height * width` linear RGB values.
    Map {
        rgb: Vec<[f64; 3]>,
    },
    /// An 8-bit sRGB image, nearest-resampled to the dataset resolution.
    Image {
        path: PathBuf,
    },
}

fn default_contrast() -> f64 {
    0.8
}

fn default_cells() -> usize {
    8
}

fn default_octaves() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoughnessSource {
    Constant {
        value: f64,
    },
    Noise {
        seed: u64,
        min: f64,
        max: f64,
        #[serde(default = "default_cells")]
        cells: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecularParams {
    pub weight: f64,
    #[serde(default = "default_ior")]
    pub ior: f64,
    pub roughness: RoughnessSource,
}

fn default_ior() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticBtfSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub angular: AngularGrid,
    pub albedo: AlbedoSource,
    pub specular: Option<SpecularParams>,
}

impl SyntheticBtfSpec {
    /// Noise albedo plus a GGX lobe of varying roughness on the default
    /// 5 x 8 direction grid.
    pub fn mixed(width: usize, height: usize, seed: u64) -> Self {
        SyntheticBtfSpec {
            width,
            height,
            angular: AngularGrid::default(),
            albedo: AlbedoSource::Noise {
                seed,
                base: [0.55, 0.4, 0.3],
                contrast: 0.8,
                cells: 8,
                octaves: 3,
            },
            specular: Some(SpecularParams {
                weight: 0.3,
                ior: 1.5,
                roughness: RoughnessSource::Noise {
                    seed: seed.wrapping_add(1),
                    min: 0.25,
                    max: 0.6,
                    cells: 4,
                },
            }),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SyntheticBtfSpec =
            toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be >= 1".into());
        }
        let g = &self.angular;
        if g.n_theta == 0 || g.n_phi == 0 {
            return bad("angular grid counts must be >= 1".into());
        }
        if !(g.theta_max_deg > 0.0 && g.theta_max_deg < 90.0) {
            return bad(format!("theta_max_deg must be in (0, 90), got {}", g.theta_max_deg));
        }
        match &self.albedo {
            AlbedoSource::Constant { rgb } if rgb.iter().any(|c| !(*c >= 0.0)) => {
                return bad("albedo must be >= 0".into())
            }
            AlbedoSource::Noise {
                base,
                contrast,
                cells,
                octaves,
                ..
            } => {
                if base.iter().any(|c| !(*c >= 0.0)) || !(0.0..=1.0).contains(contrast) {
                    return bad("noise albedo needs base >= 0 and contrast in [0, 1]".into());
                }
                if *cells == 0 || *octaves == 0 {
                    return bad("noise cells and octaves must be >= 1".into());
                }
            }
            AlbedoSource::Map { rgb } => {
                if rgb.len() != self.width * self.height {
                    return bad(format!(
                        "albedo map has {} entries, expected {}",
                        rgb.len(),
                        self.width * self.height
                    ));
                }
                if rgb.iter().flatten().any(|c| !(*c >= 0.0)) {
                    return bad("albedo must be >= 0".into());
                }
            }
            _ => {}
        }
        if let Some(spec) = &self.specular {
            if !(spec.weight >= 0.0) || !(spec.ior > 0.0) {
                return bad("specular weight must be >= 0 and ior > 0".into());
            }
            let in_range = |r: f64| r > 0.0 && r <= 1.0;
            let ok = match spec.roughness {
                RoughnessSource::Constant { value } => in_range(value),
                RoughnessSource::Noise { min, max, cells, .. } => {
                    in_range(min) && in_range(max) && min <= max && cells > 0
                }
            };
            if !ok {
                return bad("roughness must lie in (0, 1]".into());
            }
        }
        Ok(())
    }
}

/// Directions of one hemisphere grid, theta-major.
pub fn direction_grid(grid: &AngularGrid) -> Vec<Vector3<f64>> {
    let theta_max = grid.theta_max_deg.to_radians();
    let mut dirs = Vec::with_capacity(grid.n_theta * grid.n_phi);
    for k in 0..grid.n_theta {
        let theta = match grid.layout {
            GridLayout::Centered => theta_max * (k as f64 + 0.5) / grid.n_theta as f64,
            GridLayout::Endpoints if grid.n_theta == 1 => 0.0,
            GridLayout::Endpoints => theta_max * k as f64 / (grid.n_theta - 1) as f64,
        };
        for l in 0..grid.n_phi {
            let phi = TAU * l as f64 / grid.n_phi as f64;
            let (st, ct) = theta.sin_cos();
            let d = Vector3::new(st * phi.cos(), st * phi.sin(), ct);
            dirs.push(d.map(|c| c as f32 as f64).normalize());
        }
    }
    dirs
}

/// Periodic value noise on `[0, 1)^2` with quintic interpolation.
struct TileableNoise {
    octaves: Vec<(usize, f64, Vec<f64>)>,
    total_amplitude: f64,
}

impl TileableNoise {
    fn new(seed: u64, cells: usize, octaves: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(octaves);
        let mut total = 0.0;
        for o in 0..octaves {
            let period = cells << o;
            let amp = 0.5f64.powi(o as i32);
            let lattice = (0..period * period).map(|_| rng.gen::<f64>()).collect();
            layers.push((period, amp, lattice));
            total += amp;
        }
        TileableNoise {
            octaves: layers,
            total_amplitude: total,
        }
    }

    /// Value in `[0, 1]`.
    fn sample(&self, u: f64, v: f64) -> f64 {
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let mut acc = 0.0;
        for (period, amp, lattice) in &self.octaves {
            let p = *period;
            let x = u * p as f64;
            let y = v * p as f64;
            let (x0, y0) = (x.floor(), y.floor());
            let (tx, ty) = (fade(x - x0), fade(y - y0));
            let i0 = (x0 as i64).rem_euclid(p as i64) as usize;
            let j0 = (y0 as i64).rem_euclid(p as i64) as usize;
            let (i1, j1) = ((i0 + 1) % p, (j0 + 1) % p);
            let at = |i: usize, j: usize| lattice[j * p + i];
            let top = at(i0, j0) + (at(i1, j0) - at(i0, j0)) * tx;
            let bottom = at(i0, j1) + (at(i1, j1) - at(i0, j1)) * tx;
            acc += amp * (top + (bottom - top) * ty);
        }
        acc / self.total_amplitude
    }
}

fn albedo_map(spec: &SyntheticBtfSpec) -> Result<Vec<[f64; 3]>> {
    let (w, h) = (spec.width, spec.height);
    let uv = |idx: usize| ((idx % w) as f64 + 0.5) / w as f64;
    let vv = |idx: usize| ((idx / w) as f64 + 0.5) / h as f64;
    Ok(match &spec.albedo {
        AlbedoSource::Constant { rgb } => vec![*rgb; w * h],
        AlbedoSource::Map { rgb } => rgb.clone(),
        AlbedoSource::Noise {
            seed,
            base,
            contrast,
            cells,
            octaves,
        } => {
            let channels: Vec<TileableNoise> = (0..3)
                .map(|c| TileableNoise::new(seed.wrapping_add(c as u64 * 0x9E37_79B9), *cells, *octaves))
                .collect();
            (0..w * h)
                .map(|idx| {
                    let mut rgb = [0.0; 3];
                    for (c, noise) in channels.iter().enumerate() {
                        let n = noise.sample(uv(idx), vv(idx));
                        rgb[c] = (base[c] * (1.0 + contrast * (2.0 * n - 1.0))).max(0.0);
                    }
                    rgb
                })
                .collect()
        }
        AlbedoSource::Image { path } => {
            let img = image::open(path)
                .map_err(|e| Error::Configuration(format!("albedo image {}: {e}", path.display())))?
                .to_rgb8();
            let (iw, ih) = (img.width() as usize, img.height() as usize);
            (0..w * h)
                .map(|idx| {
                    let x = ((idx % w) * iw / w).min(iw - 1);
                    let y = ((idx / w) * ih / h).min(ih - 1);
                    let p = img.get_pixel(x as u32, y as u32);
                    [0, 1, 2].map(|c| (p[c] as f64 / 255.0).powf(2.2))
                })
                .collect()
        }
    })
}

fn roughness_map(spec: &SyntheticBtfSpec) -> Vec<f64> {
    let (w, h) = (spec.width, spec.height);
    match spec.specular.as_ref().map(|s| &s.roughness) {
        None => vec![1.0; w * h],
        Some(RoughnessSource::Constant { value }) => vec![*value; w * h],
        Some(RoughnessSource::Noise { seed, min, max, cells }) => {
            let noise = TileableNoise::new(*seed, *cells, 2);
            (0..w * h)
                .map(|idx| {
                    let u = ((idx % w) as f64 + 0.5) / w as f64;
                    let v = ((idx / w) as f64 + 0.5) / h as f64;
                    min + (max - min) * noise.sample(u, v)
                })
                .collect()
        }
    }
}

/// GGX microfacet reflectance (without the cosine), symmetric in its arguments.
fn ggx_lobe(wi: &Vector3<f64>, wo: &Vector3<f64>, alpha: f64, f0: f64) -> f64 {
    let sum = wi + wo;
    let h = sum / sum.norm();
    let a2 = alpha * alpha;
    let cos_h = h.z;
    let denom = cos_h * cos_h * (a2 - 1.0) + 1.0;
    let d = a2 / (PI * denom * denom);
    let g1 = |c: f64| 2.0 * c / (c + (a2 + (1.0 - a2) * c * c).sqrt());
    let cos_d = 0.5 * (wi.dot(&h) + wo.dot(&h));
    let fresnel = f0 + (1.0 - f0) * (1.0 - cos_d).powi(5);
    fresnel * d * g1(wi.z) * g1(wo.z) / (4.0 * wi.z * wo.z)
}

pub fn generate_synthetic_btf(spec: &SyntheticBtfSpec) -> Result<BtfDataset> {
    spec.validate()?;
    let dirs = direction_grid(&spec.angular);
    let pairs: Vec<DirectionPair> = dirs
        .iter()
        .flat_map(|wi| dirs.iter().map(move |wo| DirectionPair::new(*wi, *wo)))
        .collect::<Result<_>>()?;

    let albedo = albedo_map(spec)?;
    let roughness = roughness_map(spec);
    let (weight, f0) = match &spec.specular {
        Some(s) => (s.weight, ((s.ior - 1.0) / (s.ior + 1.0)).powi(2)),
        None => (0.0, 0.0),
    };

    let texels = spec.width * spec.height;
    let mut data = vec![0f32; pairs.len() * texels * 3];
    data.par_chunks_mut(texels * 3)
        .zip(pairs.par_iter())
        .for_each(|(image, pair)| {
            let (wi, wo) = (pair.wi(), pair.wo());
            for (t, rgb) in image.chunks_exact_mut(3).enumerate() {
                let spec_term = if weight > 0.0 {
                    weight * ggx_lobe(&wi, &wo, roughness[t], f0)
                } else {
                    0.0
                };
                for c in 0..3 {
                    rgb[c] = (albedo[t][c] / PI + spec_term) as f32;
                }
            }
        });
    BtfDataset::new(spec.width, spec.height, pairs, data)
}
