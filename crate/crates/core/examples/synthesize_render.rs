//! Renders a material at 8 exemplar periods in every synthesis mode and
//! reports the autocorrelation at one period of lag.
//!
//! `cargo run --release --example synthesize_render -- [model.tpln] [out_dir]`
//!
//! Without a checkpoint a small model is fitted for a few epochs first.

use std::path::PathBuf;

use triplane::btf_data::{generate_synthetic_btf, SyntheticBtfSpec};
use triplane::checkpoint::load_checkpoint;
use triplane::evaluator::Evaluator;
use triplane::neural::TriplePlaneModel;
use triplane::render::{autocorrelation, render_plane, RenderSpec};
use triplane::synthesis::{quilt_synthesize_with, QuiltParams, SynthesisMode, SynthesisParams};
use triplane::trainer::{TrainConfig, TrainSession};

fn quick_model() -> triplane::Result<TriplePlaneModel<f32>> {
    let d = generate_synthetic_btf(&SyntheticBtfSpec::mixed(32, 32, 3))?;
    let config = TrainConfig {
        epochs: 4,
        ..TrainConfig::default()
    };
    let (model, _) = TrainSession::new(&d, config)?.run(|e| eprintln!("fit epoch {} loss {:.3e}", e.epoch, e.loss))?;
    Ok(model)
}

fn main() -> triplane::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match args.next() {
        Some(p) => load_checkpoint(p)?.model,
        None => quick_model()?,
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));
    let spec = RenderSpec {
        width: 256,
        height: 256,
        uv_scale: 8.0,
        ..RenderSpec::default()
    };
    let lag = spec.width / 8;
    let (w, h) = (model.plane_u.width(), model.plane_u.height());
    let quilted = quilt_synthesize_with(&model.plane_u, w * 2, h * 2, &QuiltParams::new(w / 4, w / 16, 5))?;

    for mode in [SynthesisMode::Repeat, SynthesisMode::HistBlend, SynthesisMode::HexTile, SynthesisMode::Quilted] {
        let mut params = SynthesisParams::new(mode, 11);
        if mode == SynthesisMode::Quilted {
            params.quilted_plane = Some(quilted.clone());
        }
        let eval = Evaluator::new(model.clone(), params)?;
        let img = render_plane(&eval, &spec)?;
        let rho = autocorrelation(&img.luma(), img.width(), img.height(), lag)?;
        let path = out.join(format!("render_{mode}.png"));
        img.save(&path, spec.exposure, spec.gamma)?;
        println!("{mode:>10}: autocorrelation at {lag}px {rho:+.3} -> {}", path.display());
    }
    Ok(())
}
