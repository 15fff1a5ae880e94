use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpGrads, MlpParams, DEFAULT_LEAKY_SLOPE};
use super::plane::{AddressMode, FeaturePlane};
use crate::error::{Error, Result};
use crate::halfdiff::{halfdiff_to_plane_uv_with, HalfDiffCoords, PlaneUv};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneDims {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl PlaneDims {
    pub const fn new(width: usize, height: usize, channels: usize) -> Self {
        PlaneDims {
            width,
            height,
            channels,
        }
    }

    pub fn values(&self) -> usize {
        self.width * self.height * self.channels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub positional: PlaneDims,
    pub half: PlaneDims,
    pub diff: PlaneDims,
    pub hidden: usize,
    pub hidden_layers: usize,
    pub leaky_slope: f64,
    pub output_activation: bool,
    pub fold_phi_d: bool,
}

impl Default for ModelConfig {
    /// 400 x 400 x 16 positional plane, 20 x 20 x 8 directional planes and a
    /// decoder with three hidden layers of 32 units.
    fn default() -> Self {
        ModelConfig {
            positional: PlaneDims::new(400, 400, 16),
            half: PlaneDims::new(20, 20, 8),
            diff: PlaneDims::new(20, 20, 8),
            hidden: 32,
            hidden_layers: 3,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            output_activation: false,
            fold_phi_d: false,
        }
    }
}

impl ModelConfig {
    /// Default configuration with the positional plane matched to an exemplar.
    pub fn for_exemplar(width: usize, height: usize) -> Self {
        ModelConfig {
            positional: PlaneDims::new(width, height, 16),
            ..Self::default()
        }
    }

    pub fn input_dim(&self) -> usize {
        self.positional.channels + self.half.channels + self.diff.channels
    }

    pub fn mlp_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(std::iter::repeat(self.hidden).take(self.hidden_layers));
        dims.push(3);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("positional", self.positional), ("half", self.half), ("diff", self.diff)] {
            if p.width == 0 || p.height == 0 || p.channels == 0 {
                return Err(Error::Argument(format!("{name} plane dimensions must be positive")));
            }
        }
        if self.hidden == 0 {
            return Err(Error::Argument("hidden width must be positive".into()));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return Err(Error::Argument("leaky slope must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Positional plane `U`, half-vector plane `H`, difference plane `D`, and the decoder.
///
/// The directional planes map `theta` to the clamped horizontal axis and
/// `phi` to the wrapped vertical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TriplePlaneModel<T = f32> {
    pub plane_u: FeaturePlane<T>,
    pub plane_h: FeaturePlane<T>,
    pub plane_d: FeaturePlane<T>,
    pub mlp: MlpParams<T>,
    pub fold_phi_d: bool,
}

impl<T: Real> TriplePlaneModel<T> {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slope = config.leaky_slope;
        let plane = |d: PlaneDims, wrap_u, wrap_v, rng: &mut ChaCha8Rng| {
            FeaturePlane::he_uniform(d.width, d.height, d.channels, wrap_u, wrap_v, slope, rng)
        };
        let plane_u = plane(config.positional, AddressMode::Wrap, AddressMode::Wrap, &mut rng);
        let plane_h = plane(config.half, AddressMode::Clamp, AddressMode::Wrap, &mut rng);
        let plane_d = plane(config.diff, AddressMode::Clamp, AddressMode::Wrap, &mut rng);
        let mut mlp = MlpParams::init(&config.mlp_dims(), slope, &mut rng);
        mlp.output_activation = config.output_activation;
        Self::from_parts(plane_u, plane_h, plane_d, mlp, config.fold_phi_d)
    }

    pub fn from_parts(
        plane_u: FeaturePlane<T>,
        plane_h: FeaturePlane<T>,
        plane_d: FeaturePlane<T>,
        mlp: MlpParams<T>,
        fold_phi_d: bool,
    ) -> Result<Self> {
        let channels = plane_u.channels() + plane_h.channels() + plane_d.channels();
        if channels != mlp.input_dim() {
            return Err(Error::Argument(format!(
                "plane channels sum to {channels} but the decoder takes {} inputs",
                mlp.input_dim()
            )));
        }
        if mlp.output_dim() != 3 {
            return Err(Error::Argument("decoder must output RGB".into()));
        }
        Ok(TriplePlaneModel {
            plane_u,
            plane_h,
            plane_d,
            mlp,
            fold_phi_d,
        })
    }

    pub fn config(&self) -> ModelConfig {
        let dims = |p: &FeaturePlane<T>| PlaneDims::new(p.width(), p.height(), p.channels());
        ModelConfig {
            positional: dims(&self.plane_u),
            half: dims(&self.plane_h),
            diff: dims(&self.plane_d),
            hidden: self.mlp.layers[0].outputs,
            hidden_layers: self.mlp.layers.len() - 1,
            leaky_slope: self.mlp.leaky_slope,
            output_activation: self.mlp.output_activation,
            fold_phi_d: self.fold_phi_d,
        }
    }

    pub fn plane_uv(&self, hd: &HalfDiffCoords) -> PlaneUv {
        halfdiff_to_plane_uv_with(hd, self.fold_phi_d)
    }

    /// Concatenated H and D features for a direction pair.
    pub fn directional_features(&self, hd: &HalfDiffCoords) -> Vec<T> {
        let uv = self.plane_uv(hd);
        let (ch, cd) = (self.plane_h.channels(), self.plane_d.channels());
        let mut out = vec![T::zero(); ch + cd];
        self.plane_h.fetch_into(uv.h, &mut out[..ch]);
        self.plane_d.fetch_into(uv.d, &mut out[ch..]);
        out
    }

    /// Decoder output for an explicit positional feature (e.g. a synthesized one).
    pub fn decode_features(&self, positional: &[T], directional: &[T]) -> [T; 3] {
        let mut x = Vec::with_capacity(self.mlp.input_dim());
        x.extend_from_slice(positional);
        x.extend_from_slice(directional);
        assert_eq!(x.len(), self.mlp.input_dim(), "feature widths match decoder");
        let mut scratch = vec![T::zero(); self.mlp.scratch_len()];
        let mut y = [T::zero(); 3];
        self.mlp.eval_into(&x, &mut scratch, &mut y);
        y
    }

    /// Raw (unclamped) reconstruction at exemplar position `uv`.
    pub fn decode(&self, uv: [f64; 2], hd: &HalfDiffCoords) -> [T; 3] {
        let positional = self.plane_u.fetch(uv);
        self.decode_features(&positional, &self.directional_features(hd))
    }

    /// Bytes of the three planes at the scalar width of `T`.
    pub fn plane_payload_bytes(&self) -> usize {
        self.plane_u.byte_size() + self.plane_h.byte_size() + self.plane_d.byte_size()
    }

    pub fn num_tensors(&self) -> usize {
        3 + 2 * self.mlp.layers.len()
    }

    /// Parameter tensors in a fixed order: U, H, D, then each layer's weight and bias.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![self.plane_u.data(), self.plane_h.data(), self.plane_d.data()];
        for l in &self.mlp.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![
            self.plane_u.data_mut(),
            self.plane_h.data_mut(),
            self.plane_d.data_mut(),
        ];
        for l in &mut self.mlp.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> TriplePlaneModel<U> {
        let conv = |v: T| U::from_f64(v.to_f64().unwrap()).unwrap();
        TriplePlaneModel {
            plane_u: self.plane_u.map(conv),
            plane_h: self.plane_h.map(conv),
            plane_d: self.plane_d.map(conv),
            mlp: self.mlp.map(conv),
            fold_phi_d: self.fold_phi_d,
        }
    }
}

/// Gradients laid out like [`TriplePlaneModel::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    pub plane_u: Vec<T>,
    pub plane_h: Vec<T>,
    pub plane_d: Vec<T>,
    pub mlp: MlpGrads<T>,
}

impl<T: Real> ModelGrads<T> {
    pub fn zeros_like(model: &TriplePlaneModel<T>) -> Self {
        ModelGrads {
            plane_u: vec![T::zero(); model.plane_u.data().len()],
            plane_h: vec![T::zero(); model.plane_h.data().len()],
            plane_d: vec![T::zero(); model.plane_d.data().len()],
            mlp: MlpGrads::zeros_like(&model.mlp),
        }
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![&self.plane_u, &self.plane_h, &self.plane_d];
        for l in &self.mlp.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out
    }

    pub fn clear(&mut self) {
        for v in [&mut self.plane_u, &mut self.plane_h, &mut self.plane_d] {
            v.iter_mut().for_each(|x| *x = T::zero());
        }
        self.mlp.clear();
    }
}
