//! Compares analytic gradients of the training loss with central
//! differences on a tiny double-precision model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triplane::halfdiff::HalfDiffCoords;
use triplane::neural::{ModelConfig, ModelGrads, PlaneDims, TriplePlaneModel};
use triplane::trainer::{loss_and_gradients, LossSpace, SampleGroup};

fn main() -> triplane::Result<()> {
    let config = ModelConfig {
        positional: PlaneDims::new(4, 4, 16),
        half: PlaneDims::new(4, 4, 8),
        diff: PlaneDims::new(4, 4, 8),
        ..ModelConfig::default()
    };
    let mut model = TriplePlaneModel::<f64>::new(&config, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let groups: Vec<SampleGroup> = (0..16)
        .map(|_| SampleGroup {
            hd: HalfDiffCoords::new(rng.gen_range(0.0..1.5), rng.gen_range(0.0..6.2), rng.gen_range(0.0..1.5), rng.gen_range(0.0..6.2)).unwrap(),
            uv: vec![[rng.gen(), rng.gen()]],
            target: vec![[rng.gen(), rng.gen(), rng.gen()]],
        })
        .collect();
    let mut grads = ModelGrads::zeros_like(&model);
    loss_and_gradients(&model, &groups, LossSpace::Linear, &mut grads)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let loss = |m: &TriplePlaneModel<f64>| {
        let mut g = ModelGrads::zeros_like(m);
        loss_and_gradients(m, &groups, LossSpace::Linear, &mut g).unwrap().loss
    };
    let names = ["U", "H", "D"];
    let h = 1e-6;
    for k in 0..analytic.len() {
        let mut worst = 0.0f64;
        for i in (0..analytic[k].len()).step_by(7) {
            let orig = model.tensors()[k][i];
            model.tensors_mut()[k][i] = orig + h;
            let p = loss(&model);
            model.tensors_mut()[k][i] = orig - h;
            let m = loss(&model);
            model.tensors_mut()[k][i] = orig;
            worst = worst.max((analytic[k][i] - (p - m) / (2.0 * h)).abs());
        }
        let name = names.get(k).map_or_else(|| format!("mlp[{}]", k - 3), |s| s.to_string());
        println!("{name:>8}: max |analytic - numeric| {worst:.2e}");
    }
    Ok(())
}
