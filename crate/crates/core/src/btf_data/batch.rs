use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BtfDataset;
use crate::error::{Error, Result};
use crate::halfdiff::{to_half_diff, HalfDiffCoords};

/// Flattened training samples; entry `k` of each array describes the same sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub uv: Vec<[f32; 2]>,
    pub hd: Vec<HalfDiffCoords>,
    pub target: Vec<[f32; 3]>,
    /// Dataset pair index of each selected image, in batch order.
    pub pairs: Vec<usize>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.uv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uv.is_empty()
    }
}

/// Draws batches of whole images (every texel of `images` direction pairs).
///
/// Stratified sampling walks a per-epoch shuffled permutation of all pairs,
/// so no pair repeats before every pair has been visited. Otherwise each
/// batch draws its pairs independently (distinct within the batch).
pub struct BatchSampler<'a> {
    dataset: &'a BtfDataset,
    rng: ChaCha8Rng,
    images: usize,
    stratified: bool,
    queue: Vec<usize>,
}

impl<'a> BatchSampler<'a> {
    pub fn new(dataset: &'a BtfDataset, seed: u64, images: usize, stratified: bool) -> Result<Self> {
        if images == 0 || images > dataset.num_pairs() {
            return Err(Error::Argument(format!(
                "images per batch must be in 1..={}, got {images}",
                dataset.num_pairs()
            )));
        }
        Ok(BatchSampler {
            dataset,
            rng: ChaCha8Rng::seed_from_u64(seed),
            images,
            stratified,
            queue: Vec::new(),
        })
    }

    pub fn next_pairs(&mut self) -> Vec<usize> {
        let n = self.dataset.num_pairs();
        if !self.stratified {
            let mut all: Vec<usize> = (0..n).collect();
            let (chosen, _) = all.partial_shuffle(&mut self.rng, self.images);
            return chosen.to_vec();
        }
        let mut out = Vec::with_capacity(self.images);
        while out.len() < self.images {
            if self.queue.is_empty() {
                self.queue = (0..n).collect();
                self.queue.shuffle(&mut self.rng);
                // popped from the back
                self.queue.reverse();
            }
            let next = self.queue.pop().unwrap();
            // At an epoch boundary the fresh permutation may repeat a pair
            // already in this batch; skip it to keep the batch distinct.
            if out.contains(&next) {
                self.queue.insert(0, next);
                continue;
            }
            out.push(next);
        }
        out
    }

    pub fn next_batch(&mut self) -> TrainingBatch {
        let pairs = self.next_pairs();
        expand(self.dataset, pairs)
    }
}

fn expand(dataset: &BtfDataset, pairs: Vec<usize>) -> TrainingBatch {
    let texels = dataset.texels();
    let len = pairs.len() * texels;
    let mut batch = TrainingBatch {
        uv: Vec::with_capacity(len),
        hd: Vec::with_capacity(len),
        target: Vec::with_capacity(len),
        pairs: pairs.clone(),
    };
    for &p in &pairs {
        // Dataset directions are validated on construction; a degenerate
        // pair cannot be stored since both lie strictly above the horizon.
        let hd = to_half_diff(&dataset.pairs()[p]).expect("stored pair is non-degenerate");
        let image = dataset.slice(p);
        for row in 0..dataset.height() {
            for col in 0..dataset.width() {
                let uv = dataset.texel_uv(row, col);
                let t = (row * dataset.width() + col) * 3;
                batch.uv.push([uv[0] as f32, uv[1] as f32]);
                batch.hd.push(hd);
                batch.target.push([image[t], image[t + 1], image[t + 2]]);
            }
        }
    }
    batch
}

pub fn sample_batch(dataset: &BtfDataset, rng_seed: u64, images: usize, stratified: bool) -> Result<TrainingBatch> {
    Ok(BatchSampler::new(dataset, rng_seed, images, stratified)?.next_batch())
}
