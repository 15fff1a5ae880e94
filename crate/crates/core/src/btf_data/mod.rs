//! BTF exemplars: in-memory representation, synthetic generation, the
//! on-disk container and training-batch extraction.

mod batch;
mod io;
mod synthetic;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use batch::{sample_batch, BatchSampler, TrainingBatch};
pub use io::{load_btf, save_btf, save_btf_as, ScalarType, BTF_MAGIC, BTF_VERSION};
pub use synthetic::{
    direction_grid, generate_synthetic_btf, AlbedoSource, AngularGrid, GridLayout,
    RoughnessSource, SpecularParams, SyntheticBtfSpec,
};

const UNIT_TOLERANCE: f64 = 1e-6;

/// Incident and outgoing directions in the z-up shading frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionPair {
    wi: Vector3<f64>,
    wo: Vector3<f64>,
}

impl DirectionPair {
    pub fn new(wi: Vector3<f64>, wo: Vector3<f64>) -> Result<Self> {
        for (name, w) in [("wi", &wi), ("wo", &wo)] {
            if !w.iter().all(|c| c.is_finite()) || (w.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::Argument(format!("{name} is not a unit vector: {w:?}")));
            }
            if w.z <= 0.0 {
                return Err(Error::Argument(format!("{name} is below the horizon: {w:?}")));
            }
        }
        Ok(DirectionPair { wi, wo })
    }

    /// Normalizes both inputs before validating the hemisphere constraint.
    pub fn from_unnormalized(wi: Vector3<f64>, wo: Vector3<f64>) -> Result<Self> {
        Self::new(wi.normalize(), wo.normalize())
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked(wi: Vector3<f64>, wo: Vector3<f64>) -> Self {
        DirectionPair { wi, wo }
    }

    pub fn wi(&self) -> Vector3<f64> {
        self.wi
    }

    pub fn wo(&self) -> Vector3<f64> {
        self.wo
    }

    pub fn swapped(&self) -> Self {
        DirectionPair {
            wi: self.wo,
            wo: self.wi,
        }
    }

    /// Rounds both directions through `f32`, the precision of the file format.
    pub(crate) fn quantized(&self) -> Self {
        let q = |v: Vector3<f64>| v.map(|c| c as f32 as f64);
        DirectionPair {
            wi: q(self.wi),
            wo: q(self.wo),
        }
    }
}

/// Dense discretized BTF: `data[pair][row][col][rgb]`, linear reflectance.
#[derive(Debug, Clone, PartialEq)]
pub struct BtfDataset {
    width: usize,
    height: usize,
    pairs: Vec<DirectionPair>,
    data: Vec<f32>,
}

impl BtfDataset {
    pub fn new(width: usize, height: usize, pairs: Vec<DirectionPair>, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument("dataset dimensions must be positive".into()));
        }
        if pairs.is_empty() {
            return Err(Error::Argument("dataset needs at least one direction pair".into()));
        }
        let expected = pairs.len() * width * height * 3;
        if data.len() != expected {
            return Err(Error::Argument(format!(
                "payload holds {} values, expected {expected}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Argument(format!("reflectance must be finite and >= 0, found {bad}")));
        }
        let pairs = pairs.iter().map(DirectionPair::quantized).collect();
        Ok(BtfDataset {
            width,
            height,
            pairs,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pairs(&self) -> &[DirectionPair] {
        &self.pairs
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn texels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// One spatial RGB image (`height * width * 3` values) for a direction pair.
    pub fn slice(&self, pair: usize) -> &[f32] {
        let n = self.texels() * 3;
        &self.data[pair * n..(pair + 1) * n]
    }

    pub fn value(&self, pair: usize, row: usize, col: usize) -> [f32; 3] {
        let base = ((pair * self.height + row) * self.width + col) * 3;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    /// Texel-center UV of `(row, col)`.
    pub fn texel_uv(&self, row: usize, col: usize) -> [f64; 2] {
        [
            (col as f64 + 0.5) / self.width as f64,
            (row as f64 + 0.5) / self.height as f64,
        ]
    }

    /// Index of the stored pair closest to `pair` in summed angular distance.
    pub fn nearest_pair(&self, pair: &DirectionPair) -> usize {
        self.nearest_pairs(pair, 1)[0].0
    }

    /// The `k` stored pairs closest to `pair`, with their angular distances
    /// (radians, summed over both directions), closest first.
    pub fn nearest_pairs(&self, pair: &DirectionPair, k: usize) -> Vec<(usize, f64)> {
        let angle = |a: &Vector3<f64>, b: &Vector3<f64>| a.dot(b).clamp(-1.0, 1.0).acos();
        let mut dists: Vec<(usize, f64)> = self
            .pairs
            .iter()
            .enumerate()
            .map(|(i, p)| (i, angle(&p.wi, &pair.wi) + angle(&p.wo, &pair.wo)))
            .collect();
        dists.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        dists.truncate(k.max(1));
        dists
    }
}
