//! The query engine: synthesized positional feature + directional features + decoder.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::btf_data::DirectionPair;
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::halfdiff::{to_half_diff, HalfDiffCoords};
use crate::neural::{FeaturePlane, TriplePlaneModel};
use crate::synthesis::{blend_features_into, build_gaussianization, GaussianizedExemplar, SynthesisMode, SynthesisParams};

/// One BTF lookup. `u_star` is unbounded; one unit is one exemplar period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtfQuery {
    pub u_star: [f64; 2],
    pub wi: Vector3<f64>,
    pub wo: Vector3<f64>,
}

impl BtfQuery {
    pub fn new(u_star: [f64; 2], pair: &DirectionPair) -> Self {
        BtfQuery {
            u_star,
            wi: pair.wi(),
            wo: pair.wo(),
        }
    }
}

/// Reusable buffers for allocation-free queries.
#[derive(Debug, Clone)]
pub struct QueryScratch {
    input: Vec<f32>,
    mlp: Vec<f32>,
}

/// Immutable query handle. The Gaussianized exemplar is built (or taken from
/// a checkpoint) once at construction.
#[derive(Debug, Clone)]
pub struct Evaluator {
    model: TriplePlaneModel<f32>,
    params: SynthesisParams,
    gex: Option<GaussianizedExemplar>,
    /// Exemplar periods covered by the quilted plane along each axis.
    quilt_periods: [f64; 2],
}

impl Evaluator {
    pub fn new(model: TriplePlaneModel<f32>, params: SynthesisParams) -> Result<Self> {
        Self::with_gaussianized(model, params, None)
    }

    /// Uses `gex` when given instead of rebuilding it from the positional plane.
    pub fn with_gaussianized(
        model: TriplePlaneModel<f32>,
        params: SynthesisParams,
        gex: Option<GaussianizedExemplar>,
    ) -> Result<Self> {
        params.validate()?;
        let needs_gex = matches!(params.mode, SynthesisMode::HistBlend | SynthesisMode::HexTile);
        let gex = match gex {
            Some(g) => {
                if !g.gauss_plane.same_shape(&model.plane_u) || g.luts.len() != model.plane_u.channels() {
                    return Err(Error::Configuration("gaussianized exemplar does not match the positional plane".into()));
                }
                Some(g)
            }
            None if needs_gex => Some(build_gaussianization(&model.plane_u)),
            None => None,
        };
        let mut quilt_periods = [1.0, 1.0];
        if let Some(q) = &params.quilted_plane {
            if q.channels() != model.plane_u.channels() {
                return Err(Error::Configuration("quilted plane channel count differs from the model".into()));
            }
            quilt_periods = [
                q.width() as f64 / model.plane_u.width() as f64,
                q.height() as f64 / model.plane_u.height() as f64,
            ];
        }
        Ok(Evaluator {
            model,
            params,
            gex,
            quilt_periods,
        })
    }

    /// Evaluator over a loaded checkpoint; its stored tables and quilted plane
    /// are used when present. `params.quilted_plane` takes precedence.
    pub fn from_checkpoint(ckpt: Checkpoint, mut params: SynthesisParams) -> Result<Self> {
        if params.quilted_plane.is_none() && params.mode == SynthesisMode::Quilted {
            params.quilted_plane = ckpt.quilted;
        }
        Self::with_gaussianized(ckpt.model, params, ckpt.gaussianized)
    }

    pub fn model(&self) -> &TriplePlaneModel<f32> {
        &self.model
    }

    pub fn params(&self) -> &SynthesisParams {
        &self.params
    }

    pub fn gaussianized(&self) -> Option<&GaussianizedExemplar> {
        self.gex.as_ref()
    }

    pub fn scratch(&self) -> QueryScratch {
        QueryScratch {
            input: vec![0.0; self.model.mlp.input_dim()],
            mlp: vec![0.0; self.model.mlp.scratch_len()],
        }
    }

    /// Positional feature at `u_star` under the configured synthesis mode.
    pub fn positional_feature_into(&self, u_star: [f64; 2], out: &mut [f32]) {
        match self.params.mode {
            SynthesisMode::Repeat => self.model.plane_u.fetch_into(u_star, out),
            SynthesisMode::HistBlend | SynthesisMode::HexTile => {
                let lookups = self.params.lookups(u_star).expect("dynamic mode has lookups");
                blend_features_into(self.gex.as_ref().expect("built at construction"), &lookups, out);
            }
            SynthesisMode::Quilted => {
                let q: &FeaturePlane<f32> = self.params.quilted_plane.as_ref().expect("validated");
                let uv = [u_star[0] / self.quilt_periods[0], u_star[1] / self.quilt_periods[1]];
                q.fetch_into(uv, out);
            }
        }
    }

    pub fn positional_feature(&self, u_star: [f64; 2]) -> Vec<f32> {
        let mut out = vec![0.0; self.model.plane_u.channels()];
        self.positional_feature_into(u_star, &mut out);
        out
    }

    /// Unclamped decoder output for precomputed angles.
    pub fn decode_raw(&self, u_star: [f64; 2], hd: &HalfDiffCoords, s: &mut QueryScratch) -> [f32; 3] {
        let cu = self.model.plane_u.channels();
        let ch = self.model.plane_h.channels();
        let uv = self.model.plane_uv(hd);
        let (pos, dir) = s.input.split_at_mut(cu);
        self.positional_feature_into(u_star, pos);
        self.model.plane_h.fetch_into(uv.h, &mut dir[..ch]);
        self.model.plane_d.fetch_into(uv.d, &mut dir[ch..]);
        let mut y = [0.0f32; 3];
        self.model.mlp.eval_into(&s.input, &mut s.mlp, &mut y);
        y
    }

    pub fn query_with(&self, q: &BtfQuery, s: &mut QueryScratch) -> Result<[f32; 3]> {
        let norm = (q.wi + q.wo).norm();
        if !(norm > 1e-9) {
            return Err(Error::DegeneratePair(norm));
        }
        let pair = DirectionPair::new(q.wi, q.wo)?;
        let hd = to_half_diff(&pair)?;
        Ok(self.decode_raw(q.u_star, &hd, s).map(|v| v.max(0.0)))
    }

    /// Reflectance (no cosine factor), negative decoder outputs clamped to 0.
    pub fn query(&self, q: &BtfQuery) -> Result<[f32; 3]> {
        self.query_with(q, &mut self.scratch())
    }

    /// Element-wise [`query`](Self::query); results are independent of order and thread count.
    pub fn query_batch(&self, queries: &[BtfQuery]) -> Vec<Result<[f32; 3]>> {
        queries
            .par_iter()
            .map_init(|| self.scratch(), |s, q| self.query_with(q, s))
            .collect()
    }

    /// Like [`query_batch`](Self::query_batch) but fails on the first invalid query.
    pub fn query_batch_strict(&self, queries: &[BtfQuery]) -> Result<Vec<[f32; 3]>> {
        queries
            .par_iter()
            .map_init(|| self.scratch(), |s, q| self.query_with(q, s))
            .collect()
    }
}
