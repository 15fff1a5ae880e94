//! Trains on a generated 64 x 64 diffuse + specular exemplar and reports
//! reconstruction quality.
//!
//! `cargo run --release --example train_synthetic -- [epochs] [out.tpln]`

use triplane::btf_data::{generate_synthetic_btf, SyntheticBtfSpec};
use triplane::checkpoint::{save_checkpoint, Checkpoint};
use triplane::trainer::{evaluate_reconstruction, TrainConfig, TrainSession};

fn main() -> triplane::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: u32 = args.next().map(|a| a.parse().expect("epochs")).unwrap_or(50);
    let out = args.next();

    let dataset = generate_synthetic_btf(&SyntheticBtfSpec::mixed(64, 64, 7))?;
    println!("{} pairs of {}x{}", dataset.num_pairs(), dataset.width(), dataset.height());

    let config = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let session = TrainSession::new(&dataset, config)?;
    let (model, _) = session.run(|e| {
        println!("epoch {:3}  loss {:.5e}  {:.1}s", e.epoch, e.loss, e.seconds);
    })?;

    let pairs: Vec<usize> = (0..dataset.num_pairs()).collect();
    let m = evaluate_reconstruction(&model, &dataset, &pairs)?;
    println!("mean l1 {:.5e}  rmse {:.5e}  mean dssim {:.5e}", m.mean_l1, m.rmse, m.mean_dssim());
    if let Some(path) = out {
        save_checkpoint(&Checkpoint::new(model), &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
