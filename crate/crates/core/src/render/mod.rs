//! Direct-lighting renders of a flat BTF-textured surface, image metrics and
//! query benchmarking.
//!
//! The surface is the `z = 0` plane seen from above. World position `p` maps
//! to texture coordinate `u* = p * uv_scale`, so the unit quad holds
//! `uv_scale x uv_scale` exemplar periods. A pixel's linear value is
//! `BTF(u*, wi, wo) * cos(theta_i) * E`, with `E` the light's radiance
//! (directional) or `intensity / distance^2` (point).

mod bench;
mod image;
mod metrics;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bench::{bench, bench_queries, BenchReport};
pub use image::{ImageBuffer, LUMA};
pub use metrics::{autocorrelation, compute_dssim, compute_dssim_per_channel, compute_rmse, ssim_map_mean};

use crate::btf_data::{BtfDataset, DirectionPair};
use crate::error::{Error, Result};
use crate::evaluator::{BtfQuery, Evaluator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Camera {
    /// Looks straight down at the unit quad; every pixel sees `wo = +z`.
    Orthographic,
    Perspective {
        eye: [f64; 3],
        target: [f64; 3],
        /// Vertical field of view in degrees.
        fov_deg: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Light {
    /// `direction` points from the surface toward the light.
    Directional { direction: [f64; 3], radiance: [f64; 3] },
    Point { position: [f64; 3], intensity: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSpec {
    pub width: usize,
    pub height: usize,
    pub uv_scale: f64,
    pub camera: Camera,
    pub light: Light,
    /// Applied only when encoding 8-bit output.
    pub exposure: f64,
    pub gamma: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            width: 512,
            height: 512,
            uv_scale: 1.0,
            camera: Camera::Orthographic,
            light: Light::Directional {
                direction: [0.3, 0.2, 1.0],
                radiance: [1.0, 1.0, 1.0],
            },
            exposure: 1.0,
            gamma: 2.2,
        }
    }
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Argument("image size must be positive".into()));
        }
        if !(self.uv_scale >= 1.0 && self.uv_scale.is_finite()) {
            return Err(Error::Argument(format!("uv scale must be >= 1, got {}", self.uv_scale)));
        }
        if !(self.exposure > 0.0 && self.gamma > 0.0) {
            return Err(Error::Argument("exposure and gamma must be positive".into()));
        }
        match &self.light {
            Light::Directional { direction, radiance } => {
                if vec3(*direction).norm() == 0.0 || radiance.iter().any(|r| !(*r >= 0.0)) {
                    return Err(Error::Argument("directional light needs a direction and radiance >= 0".into()));
                }
            }
            Light::Point { intensity, .. } => {
                if intensity.iter().any(|r| !(*r >= 0.0)) {
                    return Err(Error::Argument("point light intensity must be >= 0".into()));
                }
            }
        }
        if let Camera::Perspective { eye, target, fov_deg } = &self.camera {
            if vec3(*eye) == vec3(*target) || !(*fov_deg > 0.0 && *fov_deg < 180.0) {
                return Err(Error::Argument("perspective camera needs eye != target and 0 < fov < 180".into()));
            }
        }
        Ok(())
    }

    /// Surface point and view direction for pixel `(x, y)`, or `None` when
    /// the pixel misses the surface from above.
    pub fn pixel_ray(&self, x: usize, y: usize) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let sx = (x as f64 + 0.5) / self.width as f64;
        let sy = (y as f64 + 0.5) / self.height as f64;
        match &self.camera {
            Camera::Orthographic => Some((Vector3::new(sx, sy, 0.0), Vector3::z())),
            Camera::Perspective { eye, target, fov_deg } => {
                let eye = vec3(*eye);
                let fwd = (vec3(*target) - eye).normalize();
                let up_hint = if fwd.cross(&Vector3::y()).norm() > 1e-6 {
                    Vector3::y()
                } else {
                    Vector3::x()
                };
                let right = fwd.cross(&up_hint).normalize();
                let up = right.cross(&fwd);
                let t = (fov_deg.to_radians() / 2.0).tan();
                let aspect = self.width as f64 / self.height as f64;
                let dir = (fwd + right * ((2.0 * sx - 1.0) * t * aspect) - up * ((2.0 * sy - 1.0) * t)).normalize();
                if eye.z <= 0.0 || dir.z >= 0.0 {
                    return None;
                }
                let p = eye + dir * (-eye.z / dir.z);
                Some((Vector3::new(p.x, p.y, 0.0), -dir))
            }
        }
    }

    /// Unit direction toward the light and the irradiance scale at `p`.
    pub fn light_at(&self, p: &Vector3<f64>) -> (Vector3<f64>, [f64; 3]) {
        match &self.light {
            Light::Directional { direction, radiance } => (vec3(*direction).normalize(), *radiance),
            Light::Point { position, intensity } => {
                let d = vec3(*position) - p;
                let r2 = d.norm_squared();
                (d / r2.sqrt(), intensity.map(|i| i / r2))
            }
        }
    }

    /// Query inputs of pixel `(x, y)`; `None` for black pixels.
    fn pixel_setup(&self, x: usize, y: usize) -> Option<(DirectionPair, [f64; 2], [f64; 3])> {
        let (p, wo) = self.pixel_ray(x, y)?;
        let (wi, e) = self.light_at(&p);
        if wi.z <= 0.0 || wo.z <= 0.0 {
            return None;
        }
        let pair = DirectionPair::new(wi, wo).ok()?;
        let scale = e.map(|v| v * wi.z);
        Some((pair, [p.x * self.uv_scale, p.y * self.uv_scale], scale))
    }
}

fn render_with(spec: &RenderSpec, shade: impl Fn(&DirectionPair, [f64; 2]) -> Result<[f32; 3]> + Sync) -> Result<ImageBuffer> {
    spec.validate()?;
    let w = spec.width;
    let mut data = vec![0f32; w * spec.height * 3];
    data.par_chunks_mut(w * 3).enumerate().try_for_each(|(y, row)| -> Result<()> {
        for x in 0..w {
            if let Some((pair, u, e)) = spec.pixel_setup(x, y) {
                let f = shade(&pair, u)?;
                for c in 0..3 {
                    row[3 * x + c] = (f[c] as f64 * e[c]) as f32;
                }
            }
        }
        Ok(())
    })?;
    ImageBuffer::from_rgb(w, spec.height, data)
}

/// Linear render of the evaluator's (possibly synthesized) BTF.
pub fn render_plane(eval: &Evaluator, spec: &RenderSpec) -> Result<ImageBuffer> {
    render_with(spec, |pair, u| {
        eval.query(&BtfQuery {
            u_star: u,
            wi: pair.wi(),
            wo: pair.wo(),
        })
    })
}

/// Reflectance of the stored data at an arbitrary position and direction
/// pair: bilinear in space (wrapping), inverse-distance weighted over the
/// four nearest stored direction pairs.
pub fn interpolate_dataset(dataset: &BtfDataset, u_star: [f64; 2], pair: &DirectionPair) -> [f32; 3] {
    let near = dataset.nearest_pairs(pair, 4);
    let (w, h) = (dataset.width(), dataset.height());
    let x = u_star[0] * w as f64 - 0.5;
    let y = u_star[1] * h as f64 - 0.5;
    let (x0, y0) = (x.floor(), y.floor());
    let (tx, ty) = (x - x0, y - y0);
    let col = |i: f64| (i as i64).rem_euclid(w as i64) as usize;
    let row = |i: f64| (i as i64).rem_euclid(h as i64) as usize;
    let taps = [
        (row(y0), col(x0), (1.0 - tx) * (1.0 - ty)),
        (row(y0), col(x0 + 1.0), tx * (1.0 - ty)),
        (row(y0 + 1.0), col(x0), (1.0 - tx) * ty),
        (row(y0 + 1.0), col(x0 + 1.0), tx * ty),
    ];
    let spatial = |p: usize| {
        let mut v = [0.0f64; 3];
        for (r, c, wt) in taps {
            let s = dataset.value(p, r, c);
            for k in 0..3 {
                v[k] += wt * s[k] as f64;
            }
        }
        v
    };
    if near[0].1 < 1e-9 {
        return spatial(near[0].0).map(|v| v as f32);
    }
    let mut acc = [0.0f64; 3];
    let mut total = 0.0;
    for (p, d) in near {
        let wt = 1.0 / d;
        total += wt;
        let v = spatial(p);
        for k in 0..3 {
            acc[k] += wt * v[k];
        }
    }
    acc.map(|v| (v / total) as f32)
}

/// Ground-truth render from the stored data, repeating the exemplar.
pub fn render_reference(dataset: &BtfDataset, spec: &RenderSpec) -> Result<ImageBuffer> {
    render_with(spec, |pair, u| Ok(interpolate_dataset(dataset, u, pair)))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::btf_data::{generate_synthetic_btf, AlbedoSource, AngularGrid, SyntheticBtfSpec};
    use crate::neural::{ModelConfig, PlaneDims, TriplePlaneModel};
    use crate::synthesis::{SynthesisMode, SynthesisParams};

    fn constant_model(k: [f32; 3]) -> TriplePlaneModel<f32> {
        let config = ModelConfig {
            positional: PlaneDims::new(8, 8, 16),
            half: PlaneDims::new(4, 4, 8),
            diff: PlaneDims::new(4, 4, 8),
            ..ModelConfig::default()
        };
        let mut m = TriplePlaneModel::new(&config, 1).unwrap();
        for l in &mut m.mlp.layers {
            l.weight.iter_mut().for_each(|v| *v = 0.0);
            l.bias.iter_mut().for_each(|v| *v = 0.0);
        }
        m.mlp.layers.last_mut().unwrap().bias = k.to_vec();
        m
    }

    fn spec_at(theta: f64) -> RenderSpec {
        RenderSpec {
            width: 9,
            height: 7,
            light: Light::Directional {
                direction: [theta.sin(), 0.0, theta.cos()],
                radiance: [2.0, 1.0, 0.5],
            },
            ..RenderSpec::default()
        }
    }

    #[test]
    fn constant_model_renders_closed_form() {
        let k = [0.2f32, 0.4, 0.6];
        let e = Evaluator::new(constant_model(k), SynthesisParams::default()).unwrap();
        let theta = 0.6f64;
        let img = render_plane(&e, &spec_at(theta)).unwrap();
        let l = [2.0, 1.0, 0.5];
        for p in img.data().chunks(3) {
            for c in 0..3 {
                let expect = k[c] as f64 * theta.cos() * l[c];
                assert!((p[c] as f64 - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_pixel_is_one_query() {
        let m = constant_model([0.1, 0.2, 0.3]);
        let e = Evaluator::new(m, SynthesisParams::new(SynthesisMode::HexTile, 4)).unwrap();
        let mut spec = spec_at(0.3);
        spec.width = 1;
        spec.height = 1;
        spec.uv_scale = 3.0;
        let img = render_plane(&e, &spec).unwrap();
        let wi = Vector3::new(0.3f64.sin(), 0.0, 0.3f64.cos());
        let q = e
            .query(&BtfQuery {
                u_star: [1.5, 1.5],
                wi,
                wo: Vector3::z(),
            })
            .unwrap();
        assert_eq!(img.get(0, 0)[1], (q[1] as f64 * wi.z * 1.0) as f32);
    }

    #[test]
    fn light_below_horizon_is_black() {
        let e = Evaluator::new(constant_model([1.0; 3]), SynthesisParams::default()).unwrap();
        let img = render_plane(&e, &spec_at(1.8)).unwrap();
        assert!(img.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn point_light_falls_off() {
        let e = Evaluator::new(constant_model([1.0; 3]), SynthesisParams::default()).unwrap();
        let spec = RenderSpec {
            width: 5,
            height: 5,
            light: Light::Point {
                position: [0.5, 0.5, 1.0],
                intensity: [1.0; 3],
            },
            ..RenderSpec::default()
        };
        let img = render_plane(&e, &spec).unwrap();
        // center pixel: distance 1, normal incidence
        assert!((img.get(2, 2)[0] - 1.0).abs() < 1e-6);
        assert!(img.get(0, 0)[0] < img.get(2, 2)[0]);
    }

    #[test]
    fn perspective_center_ray_hits_target() {
        let spec = RenderSpec {
            width: 3,
            height: 3,
            camera: Camera::Perspective {
                eye: [0.5, -1.0, 1.0],
                target: [0.5, 0.5, 0.0],
                fov_deg: 40.0,
            },
            ..RenderSpec::default()
        };
        let (p, wo) = spec.pixel_ray(1, 1).unwrap();
        assert!((p - Vector3::new(0.5, 0.5, 0.0)).norm() < 1e-9);
        assert!((wo - Vector3::new(0.0, -1.5, 1.0).normalize()).norm() < 1e-9);
        let mut bad = spec.clone();
        bad.uv_scale = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reference_render_of_lambertian_data() {
        let albedo = [0.5, 0.25, 0.75];
        let d = generate_synthetic_btf(&SyntheticBtfSpec {
            width: 4,
            height: 4,
            angular: AngularGrid {
                n_theta: 3,
                n_phi: 4,
                ..AngularGrid::default()
            },
            albedo: AlbedoSource::Constant { rgb: albedo },
            specular: None,
        })
        .unwrap();
        let theta = 0.4f64;
        let img = render_reference(&d, &spec_at(theta)).unwrap();
        let l = [2.0, 1.0, 0.5];
        for p in img.data().chunks(3) {
            for c in 0..3 {
                let expect = albedo[c] / PI * theta.cos() * l[c];
                assert!((p[c] as f64 - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dataset_interpolation_hits_stored_samples() {
        let d = generate_synthetic_btf(&SyntheticBtfSpec {
            width: 4,
            height: 4,
            angular: AngularGrid {
                n_theta: 2,
                n_phi: 3,
                ..AngularGrid::default()
            },
            albedo: AlbedoSource::Noise {
                seed: 1,
                base: [0.5; 3],
                contrast: 0.8,
                cells: 2,
                octaves: 1,
            },
            specular: None,
        })
        .unwrap();
        for p in [0, 7, 20] {
            for (r, c) in [(0, 0), (1, 3), (3, 2)] {
                let v = interpolate_dataset(&d, d.texel_uv(r, c), &d.pairs()[p]);
                let s = d.value(p, r, c);
                for k in 0..3 {
                    assert!((v[k] - s[k]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let m = TriplePlaneModel::new(&ModelConfig::for_exemplar(8, 8), 2).unwrap();
        let e = Evaluator::new(m, SynthesisParams::new(SynthesisMode::HistBlend, 5)).unwrap();
        let spec = RenderSpec {
            width: 32,
            height: 16,
            uv_scale: 4.0,
            ..RenderSpec::default()
        };
        let a = render_plane(&e, &spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| render_plane(&e, &spec)).unwrap();
        assert_eq!(a, b);
    }
}
