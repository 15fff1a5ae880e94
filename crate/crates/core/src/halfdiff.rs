//! Half/difference angle reparameterization of direction pairs.
//!
//! Convention: `h = normalize(wi + wo)`, and `d` is `wi` expressed in the
//! frame obtained by rotating `h` back onto the pole, i.e.
//! `d = R_y(-theta_h) * R_z(-phi_h) * wi`. When `theta_h` is (numerically)
//! zero the azimuth of `h` is undefined and pinned to 0; the same rule
//! applies to `phi_d`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Rotation3, Vector3};

use crate::btf_data::DirectionPair;
use crate::error::{Error, Result};

/// Below this polar angle the azimuth is pinned to zero.
pub const POLE_EPSILON: f64 = 1e-7;

const DEGENERATE_SUM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfDiffCoords {
    pub theta_h: f64,
    pub phi_h: f64,
    pub theta_d: f64,
    pub phi_d: f64,
}

impl HalfDiffCoords {
    pub fn new(theta_h: f64, phi_h: f64, theta_d: f64, phi_d: f64) -> Result<Self> {
        let hd = HalfDiffCoords {
            theta_h,
            phi_h,
            theta_d,
            phi_d,
        };
        if hd.is_valid() {
            Ok(hd)
        } else {
            Err(Error::Argument(format!("half/diff angles out of range: {hd:?}")))
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=FRAC_PI_2).contains(&self.theta_h)
            && (0.0..=FRAC_PI_2).contains(&self.theta_d)
            && (0.0..TAU).contains(&self.phi_h)
            && (0.0..TAU).contains(&self.phi_d)
    }
}

/// Texture coordinates of the H and D planes for one direction pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneUv {
    pub h: [f64; 2],
    pub d: [f64; 2],
}

fn wrap_angle(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if p >= TAU {
        p = 0.0;
    }
    p
}

fn spherical(v: &Vector3<f64>) -> (f64, f64) {
    let theta = v.z.clamp(-1.0, 1.0).acos();
    let phi = if theta < POLE_EPSILON {
        0.0
    } else {
        wrap_angle(v.y.atan2(v.x))
    };
    (theta, phi)
}

fn unit_from_spherical(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

pub fn to_half_diff(pair: &DirectionPair) -> Result<HalfDiffCoords> {
    let sum = pair.wi() + pair.wo();
    let norm = sum.norm();
    if norm <= DEGENERATE_SUM {
        return Err(Error::DegeneratePair(norm));
    }
    let h = sum / norm;
    let (theta_h, phi_h) = spherical(&h);

    let to_local = Rotation3::from_axis_angle(&Vector3::y_axis(), -theta_h)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), -phi_h);
    let d = to_local * pair.wi();
    let (theta_d, phi_d) = spherical(&d);

    Ok(HalfDiffCoords {
        theta_h: theta_h.min(FRAC_PI_2),
        phi_h,
        theta_d: theta_d.min(FRAC_PI_2),
        phi_d,
    })
}

pub fn from_half_diff(hd: &HalfDiffCoords) -> Result<DirectionPair> {
    let h = unit_from_spherical(hd.theta_h, hd.phi_h);
    let d = unit_from_spherical(hd.theta_d, hd.phi_d);
    let to_world = Rotation3::from_axis_angle(&Vector3::z_axis(), hd.phi_h)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), hd.theta_h);
    let wi = (to_world * d).normalize();
    let wo = (2.0 * wi.dot(&h) * h - wi).normalize();
    if wi.z <= 0.0 || wo.z <= 0.0 {
        return Err(Error::OutOfHemisphere {
            wi_z: wi.z,
            wo_z: wo.z,
        });
    }
    DirectionPair::new(wi, wo)
}

/// Rectangular `(theta / 90deg, phi / 360deg)` map onto the H and D planes.
///
/// The second coordinate of each is the azimuth and must be fetched with
/// wrap addressing. With `fold_phi_d` the difference azimuth is folded to
/// `[0, pi)`, which is only valid for reciprocal isotropic materials.
pub fn halfdiff_to_plane_uv(hd: &HalfDiffCoords) -> PlaneUv {
    halfdiff_to_plane_uv_with(hd, false)
}

pub fn halfdiff_to_plane_uv_with(hd: &HalfDiffCoords, fold_phi_d: bool) -> PlaneUv {
    let d_phi = if fold_phi_d {
        hd.phi_d.rem_euclid(PI) / PI
    } else {
        hd.phi_d / TAU
    };
    PlaneUv {
        h: [hd.theta_h / FRAC_PI_2, hd.phi_h / TAU],
        d: [hd.theta_d / FRAC_PI_2, d_phi],
    }
}

/// Cosine-weighted direction on the upper hemisphere and its solid-angle pdf.
pub fn cosine_sample_hemisphere(u1: f64, u2: f64) -> (Vector3<f64>, f64) {
    let r = u1.sqrt();
    let phi = TAU * u2;
    let z = (1.0 - u1).max(0.0).sqrt();
    let dir = Vector3::new(r * phi.cos(), r * phi.sin(), z);
    (dir, z / PI)
}
