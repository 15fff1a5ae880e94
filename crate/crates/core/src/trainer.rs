//! Joint optimization of the three planes and the decoder under an l1 loss.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::btf_data::BtfDataset;
use crate::checkpoint::{save_checkpoint, Checkpoint, TrainState};
use crate::error::{Error, Result};
use crate::evaluator::{BtfQuery, Evaluator};
use crate::halfdiff::{to_half_diff, HalfDiffCoords};
use crate::neural::{
    adamw_step, dot, AdamWState, BilinearTaps, ColumnCache, MlpGrads, ModelConfig, ModelGrads, ParamGroup,
    TriplePlaneModel,
};
use crate::real::Real;
use crate::render::{compute_dssim, compute_rmse, ImageBuffer};
use crate::synthesis::{SynthesisMode, SynthesisParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossSpace {
    /// l1 on raw reflectance.
    #[default]
    Linear,
    /// l1 on `log1p(reflectance)`; negative predictions are clamped to 0
    /// with a straight-through gradient.
    Log1p,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr_planes: f64,
    pub lr_mlp: f64,
    pub epochs: u32,
    pub lr_decay_per_epoch: f64,
    pub images_per_batch: usize,
    pub seed: u64,
    pub loss_space: LossSpace,
    /// Decoupled weight decay on decoder weights.
    pub weight_decay: f64,
    /// Also decay plane texels and biases.
    pub decay_all: bool,
    /// Save a checkpoint every this many epochs (0 disables periodic saves).
    pub checkpoint_every: u32,
    /// Samples per work item of the batched gradient.
    pub chunk: usize,
    /// Model shape; by default the positional plane matches the exemplar.
    pub model: Option<ModelConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_planes: 1e-3,
            lr_mlp: 3e-4,
            epochs: 50,
            lr_decay_per_epoch: 0.9,
            images_per_batch: 16,
            seed: 0,
            loss_space: LossSpace::Linear,
            weight_decay: 0.01,
            decay_all: false,
            checkpoint_every: 10,
            chunk: 256,
            model: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: TrainConfig = toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_planes > 0.0 && self.lr_mlp > 0.0) {
            return Err(Error::Configuration("learning rates must be positive".into()));
        }
        if !(self.lr_decay_per_epoch > 0.0 && self.lr_decay_per_epoch <= 1.0) {
            return Err(Error::Configuration("lr decay must be in (0, 1]".into()));
        }
        if self.images_per_batch == 0 || self.chunk == 0 {
            return Err(Error::Configuration("batch and chunk sizes must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Configuration("weight decay must be >= 0".into()));
        }
        if let Some(m) = &self.model {
            m.validate()?;
        }
        Ok(())
    }

    /// Learning-rate multiplier of epoch `k` (0-based).
    pub fn lr_scale(&self, epoch: u32) -> f64 {
        self.lr_decay_per_epoch.powi(epoch as i32)
    }

    pub fn model_config(&self, dataset: &BtfDataset) -> ModelConfig {
        self.model
            .clone()
            .unwrap_or_else(|| ModelConfig::for_exemplar(dataset.width(), dataset.height()))
    }
}

/// Mean absolute difference over all components.
pub fn loss_l1(pred: &[[f32; 3]], target: &[[f32; 3]]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Argument(format!(
            "prediction has {} entries, target {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .flat_map(|(p, t)| (0..3).map(move |c| (p[c] as f64 - t[c] as f64).abs()))
        .sum();
    Ok(sum / (3 * pred.len()) as f64)
}

/// Samples sharing one direction pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup {
    pub hd: HalfDiffCoords,
    pub uv: Vec<[f64; 2]>,
    pub target: Vec<[f32; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossValue {
    /// The optimized objective (l1 in the configured space).
    pub loss: f64,
    /// l1 on raw reflectance.
    pub l1: f64,
    pub samples: usize,
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-sample objective and its derivative with respect to the prediction.
#[inline]
fn pointwise(space: LossSpace, y: f64, t: f64) -> (f64, f64) {
    match space {
        LossSpace::Linear => ((y - t).abs(), sign(y - t)),
        LossSpace::Log1p => {
            let yp = y.max(0.0);
            let r = yp.ln_1p() - t.max(0.0).ln_1p();
            (r.abs(), sign(r) / (1.0 + yp))
        }
    }
}

struct Scratch<T> {
    input: Vec<T>,
    cache: ColumnCache<T>,
    delta: Vec<T>,
    grad_in: Vec<T>,
    feat: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new() -> Self {
        Scratch {
            input: Vec::new(),
            cache: ColumnCache::default(),
            delta: Vec::new(),
            grad_in: Vec::new(),
            feat: Vec::new(),
        }
    }
}

/// Everything one group contributes; merged into the batch gradient in a
/// fixed order so the result does not depend on scheduling.
struct GroupGrad<T> {
    value: LossValue,
    mlp: MlpGrads<T>,
    taps_h: BilinearTaps,
    taps_d: BilinearTaps,
    dir_grad: Vec<T>,
    taps_u: Vec<BilinearTaps>,
    /// `channels_u x n`, feature-major.
    u_grad: Vec<T>,
}

fn group_gradient<T: Real>(
    model: &TriplePlaneModel<T>,
    group: &SampleGroup,
    space: LossSpace,
    norm: f64,
    s: &mut Scratch<T>,
) -> GroupGrad<T> {
    let n = group.uv.len();
    let (cu, ch, cd) = (model.plane_u.channels(), model.plane_h.channels(), model.plane_d.channels());
    let l0 = &model.mlp.layers[0];

    let uv = model.plane_uv(&group.hd);
    let taps_h = model.plane_h.taps(uv.h);
    let taps_d = model.plane_d.taps(uv.d);
    let mut dir = vec![T::zero(); ch + cd];
    model.plane_h.gather(&taps_h, &mut dir[..ch]);
    model.plane_d.gather(&taps_d, &mut dir[ch..]);
    // The directional features are constant over the group: fold them into the first bias.
    let first_bias: Vec<T> = (0..l0.outputs)
        .map(|j| l0.bias[j] + dot(&l0.row(j)[cu..], &dir))
        .collect();

    s.input.clear();
    s.input.resize(cu * n, T::zero());
    s.feat.resize(cu, T::zero());
    let taps_u: Vec<BilinearTaps> = group.uv.iter().map(|p| model.plane_u.taps(*p)).collect();
    for (k, taps) in taps_u.iter().enumerate() {
        model.plane_u.gather(taps, &mut s.feat);
        for (c, v) in s.feat.iter().enumerate() {
            s.input[c * n + k] = *v;
        }
    }
    model.mlp.forward_columns(&s.input, n, Some(&first_bias), &mut s.cache);

    let y = s.cache.act.last().unwrap();
    s.delta.clear();
    s.delta.resize(3 * n, T::zero());
    let mut value = LossValue {
        samples: n,
        ..LossValue::default()
    };
    for k in 0..n {
        for c in 0..3 {
            let yv = y[c * n + k].to_f64().unwrap();
            let t = group.target[k][c] as f64;
            let (l, g) = pointwise(space, yv, t);
            value.loss += l;
            value.l1 += (yv - t).abs();
            s.delta[c * n + k] = T::lit(g * norm);
        }
    }

    let mut mlp = MlpGrads::zeros_like(&model.mlp);
    let dsum = model.mlp.backward_columns(&s.cache, &mut s.delta, &mut mlp, &mut s.grad_in);
    let mut dir_grad = vec![T::zero(); ch + cd];
    let gw = &mut mlp.layers[0].weight;
    for j in 0..l0.outputs {
        let row = l0.row(j);
        for i in 0..ch + cd {
            gw[j * l0.inputs + cu + i] += dsum[j] * dir[i];
            dir_grad[i] += row[cu + i] * dsum[j];
        }
    }
    GroupGrad {
        value,
        mlp,
        taps_h,
        taps_d,
        dir_grad,
        taps_u,
        u_grad: std::mem::take(&mut s.grad_in),
    }
}

/// Groups evaluated in parallel before their results are merged.
const WAVE: usize = 64;

/// Adds the gradient of the mean objective over all samples of `groups` to
/// `grads` and returns the loss. The summation order is fixed by group order,
/// independent of the number of worker threads.
pub fn loss_and_gradients<T: Real>(
    model: &TriplePlaneModel<T>,
    groups: &[SampleGroup],
    space: LossSpace,
    grads: &mut ModelGrads<T>,
) -> Result<LossValue> {
    let total: usize = groups.iter().map(|g| g.uv.len()).sum();
    for g in groups {
        if g.uv.len() != g.target.len() {
            return Err(Error::Argument("group uv and target lengths differ".into()));
        }
    }
    if total == 0 {
        return Ok(LossValue::default());
    }
    let norm = 1.0 / (3 * total) as f64;
    let (cu, ch) = (model.plane_u.channels(), model.plane_h.channels());
    let mut value = LossValue::default();
    let mut column = vec![T::zero(); cu];

    for wave in groups.chunks(WAVE) {
        let parts: Vec<GroupGrad<T>> = wave
            .par_iter()
            .map_init(Scratch::new, |s, g| group_gradient(model, g, space, norm, s))
            .collect();
        for p in parts {
            value.loss += p.value.loss;
            value.l1 += p.value.l1;
            value.samples += p.value.samples;
            grads.mlp.add_assign(&p.mlp);
            model.plane_h.accumulate_backward(&p.taps_h, &p.dir_grad[..ch], &mut grads.plane_h);
            model.plane_d.accumulate_backward(&p.taps_d, &p.dir_grad[ch..], &mut grads.plane_d);
            let n = p.taps_u.len();
            for (k, taps) in p.taps_u.iter().enumerate() {
                for (c, v) in column.iter_mut().enumerate() {
                    *v = p.u_grad[c * n + k];
                }
                model.plane_u.accumulate_backward(taps, &column, &mut grads.plane_u);
            }
        }
    }
    value.loss *= norm;
    value.l1 *= norm;
    Ok(value)
}

/// Splits every texel of the given pairs into groups of at most `chunk` samples.
pub fn dataset_groups(dataset: &BtfDataset, pairs: &[usize], chunk: usize) -> Vec<SampleGroup> {
    let texels = dataset.texels();
    let w = dataset.width();
    let mut out = Vec::with_capacity(pairs.len() * texels.div_ceil(chunk));
    for &p in pairs {
        // dataset pairs are validated upper-hemisphere directions, never opposite
        let hd = to_half_diff(&dataset.pairs()[p]).expect("stored pair is non-degenerate");
        let image = dataset.slice(p);
        for start in (0..texels).step_by(chunk) {
            let end = (start + chunk).min(texels);
            out.push(SampleGroup {
                hd,
                uv: (start..end).map(|t| dataset.texel_uv(t / w, t % w)).collect(),
                target: (start..end)
                    .map(|t| [image[3 * t], image[3 * t + 1], image[3 * t + 2]])
                    .collect(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: u32,
    pub loss: f64,
    pub l1: f64,
    pub seconds: f64,
    pub lr_planes: f64,
    pub lr_mlp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionMetrics {
    pub mean_l1: f64,
    pub rmse: f64,
    pub dssim: Vec<f64>,
}

impl ReconstructionMetrics {
    pub fn mean_dssim(&self) -> f64 {
        self.dssim.iter().sum::<f64>() / self.dssim.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub final_metrics: Option<ReconstructionMetrics>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,l1,seconds,lr_planes,lr_mlp\n");
        for e in &self.epochs {
            writeln!(
                s,
                "{},{:.8e},{:.8e},{:.3},{:.6e},{:.6e}",
                e.epoch, e.loss, e.l1, e.seconds, e.lr_planes, e.lr_mlp
            )
            .unwrap();
        }
        if let Some(m) = &self.final_metrics {
            writeln!(s, "# mean_l1={:.6e} rmse={:.6e} mean_dssim={:.6e}", m.mean_l1, m.rmse, m.mean_dssim()).unwrap();
        }
        s
    }
}

/// A training run that can be stepped, checkpointed and resumed.
pub struct TrainSession<'a> {
    dataset: &'a BtfDataset,
    config: TrainConfig,
    model: TriplePlaneModel<f32>,
    optimizer: AdamWState<f32>,
    grads: ModelGrads<f32>,
    epochs_done: u32,
    report: TrainReport,
    checkpoint_path: Option<PathBuf>,
}

impl<'a> TrainSession<'a> {
    pub fn new(dataset: &'a BtfDataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = TriplePlaneModel::new(&config.model_config(dataset), config.seed)?;
        Self::from_state(dataset, config, model, None)
    }

    /// Continues from a checkpoint written by an earlier session with the same config.
    pub fn resume(dataset: &'a BtfDataset, config: TrainConfig, checkpoint: Checkpoint) -> Result<Self> {
        config.validate()?;
        Self::from_state(dataset, config, checkpoint.model, checkpoint.train_state)
    }

    fn from_state(
        dataset: &'a BtfDataset,
        config: TrainConfig,
        model: TriplePlaneModel<f32>,
        state: Option<TrainState>,
    ) -> Result<Self> {
        if dataset.num_pairs() == 0 || dataset.texels() == 0 {
            return Err(Error::Argument("cannot train on an empty dataset".into()));
        }
        let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        let (optimizer, epochs_done) = match state {
            Some(s) => {
                if s.optimizer.shapes() != shapes {
                    return Err(Error::Configuration("optimizer state does not match the model".into()));
                }
                (s.optimizer, s.epochs_done)
            }
            None => (AdamWState::new(&shapes), 0),
        };
        let grads = ModelGrads::zeros_like(&model);
        Ok(TrainSession {
            dataset,
            config,
            model,
            optimizer,
            grads,
            epochs_done,
            report: TrainReport::default(),
            checkpoint_path: None,
        })
    }

    pub fn with_checkpoint_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint_path = Some(path.into());
        self
    }

    pub fn model(&self) -> &TriplePlaneModel<f32> {
        &self.model
    }

    pub fn epochs_done(&self) -> u32 {
        self.epochs_done
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            train_state: Some(TrainState {
                epochs_done: self.epochs_done,
                optimizer: self.optimizer.clone(),
            }),
            ..Checkpoint::new(self.model.clone())
        }
    }

    fn groups_for_step(&self, lr_scale: f64) -> Vec<ParamGroup> {
        let c = &self.config;
        let plane_decay = if c.decay_all { c.weight_decay } else { 0.0 };
        let mut g = vec![
            ParamGroup {
                lr: c.lr_planes * lr_scale,
                weight_decay: plane_decay,
            };
            3
        ];
        for _ in &self.model.mlp.layers {
            g.push(ParamGroup {
                lr: c.lr_mlp * lr_scale,
                weight_decay: c.weight_decay,
            });
            g.push(ParamGroup {
                lr: c.lr_mlp * lr_scale,
                weight_decay: plane_decay,
            });
        }
        g
    }

    /// One optimizer step on all texels of `pairs`.
    pub fn step(&mut self, pairs: &[usize], lr_scale: f64) -> Result<LossValue> {
        let groups = dataset_groups(self.dataset, pairs, self.config.chunk);
        self.grads.clear();
        let value = loss_and_gradients(&self.model, &groups, self.config.loss_space, &mut self.grads)?;
        if !value.loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss {} at epoch {} (pairs {:?})",
                value.loss, self.epochs_done, pairs
            )));
        }
        let param_groups = self.groups_for_step(lr_scale);
        let grads = self.grads.tensors();
        adamw_step(&mut self.model.tensors_mut(), &grads, &mut self.optimizer, &param_groups)?;
        Ok(value)
    }

    /// Pair order of epoch `k`: a permutation drawn from its own stream, so a
    /// resumed run sees the same order as an uninterrupted one.
    pub fn epoch_order(&self, epoch: u32) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(epoch as u64 + 1);
        let mut order: Vec<usize> = (0..self.dataset.num_pairs()).collect();
        order.shuffle(&mut rng);
        order
    }

    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let start = Instant::now();
        let epoch = self.epochs_done;
        let scale = self.config.lr_scale(epoch);
        let order = self.epoch_order(epoch);
        let (mut loss, mut l1, mut samples) = (0.0, 0.0, 0usize);
        for batch in order.chunks(self.config.images_per_batch) {
            let v = self.step(batch, scale)?;
            loss += v.loss * v.samples as f64;
            l1 += v.l1 * v.samples as f64;
            samples += v.samples;
        }
        if !self.model.all_finite() {
            return Err(Error::Numeric(format!("non-finite parameters after epoch {epoch}")));
        }
        self.epochs_done += 1;
        let stats = EpochStats {
            epoch,
            loss: loss / samples as f64,
            l1: l1 / samples as f64,
            seconds: start.elapsed().as_secs_f64(),
            lr_planes: self.config.lr_planes * scale,
            lr_mlp: self.config.lr_mlp * scale,
        };
        self.report.epochs.push(stats.clone());
        let every = self.config.checkpoint_every;
        if let Some(path) = &self.checkpoint_path {
            if (every > 0 && self.epochs_done % every == 0) || self.epochs_done == self.config.epochs {
                save_checkpoint(&self.checkpoint(), path)?;
            }
        }
        Ok(stats)
    }

    /// Runs the remaining epochs and returns the model with its report.
    pub fn run(mut self, mut on_epoch: impl FnMut(&EpochStats)) -> Result<(TriplePlaneModel<f32>, TrainReport)> {
        while self.epochs_done < self.config.epochs {
            let s = self.run_epoch()?;
            on_epoch(&s);
        }
        Ok((self.model, self.report))
    }
}

pub fn train(dataset: &BtfDataset, config: &TrainConfig) -> Result<(TriplePlaneModel<f32>, TrainReport)> {
    TrainSession::new(dataset, config.clone())?.run(|_| {})
}

/// Trains while writing periodic checkpoints to `path`.
pub fn train_to(
    dataset: &BtfDataset,
    config: &TrainConfig,
    path: &Path,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(TriplePlaneModel<f32>, TrainReport)> {
    TrainSession::new(dataset, config.clone())?
        .with_checkpoint_path(path)
        .run(on_epoch)
}

/// Renders each selected pair through a repeat-mode evaluator at exemplar
/// resolution and compares with the stored images.
pub fn evaluate_reconstruction(
    model: &TriplePlaneModel<f32>,
    dataset: &BtfDataset,
    pairs: &[usize],
) -> Result<ReconstructionMetrics> {
    if pairs.is_empty() {
        return Err(Error::Argument("no pairs to evaluate".into()));
    }
    if let Some(p) = pairs.iter().find(|p| **p >= dataset.num_pairs()) {
        return Err(Error::Argument(format!("pair {p} out of range")));
    }
    let eval = Evaluator::new(model.clone(), SynthesisParams::new(SynthesisMode::Repeat, 0))?;
    let (w, h) = (dataset.width(), dataset.height());
    let per_pair: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|&p| {
            let pair = dataset.pairs()[p];
            let mut pred = ImageBuffer::new(w, h);
            let mut scratch = eval.scratch();
            for row in 0..h {
                for col in 0..w {
                    let q = BtfQuery::new(dataset.texel_uv(row, col), &pair);
                    pred.set(col, row, eval.query_with(&q, &mut scratch)?);
                }
            }
            let truth = ImageBuffer::from_rgb(w, h, dataset.slice(p).to_vec())?;
            let l1 = pred
                .data()
                .iter()
                .zip(truth.data())
                .map(|(a, b)| (*a as f64 - *b as f64).abs())
                .sum::<f64>();
            let rmse = compute_rmse(&pred, &truth)?;
            let dssim = compute_dssim(&pred, &truth)?;
            Ok((l1, rmse * rmse, dssim))
        })
        .collect::<Result<_>>()?;
    let count = (pairs.len() * w * h * 3) as f64;
    Ok(ReconstructionMetrics {
        mean_l1: per_pair.iter().map(|v| v.0).sum::<f64>() / count,
        rmse: (per_pair.iter().map(|v| v.1).sum::<f64>() / pairs.len() as f64).sqrt(),
        dssim: per_pair.iter().map(|v| v.2).collect(),
    })
}
