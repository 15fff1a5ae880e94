//! Query throughput of an untrained default-size model in each mode.
//!
//! `cargo run --release --example bench_queries -- [n] [threads]`

use triplane::evaluator::Evaluator;
use triplane::neural::{ModelConfig, TriplePlaneModel};
use triplane::render::bench;
use triplane::synthesis::{SynthesisMode, SynthesisParams};

fn main() -> triplane::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse().expect("n")).unwrap_or(100_000);
    let threads: usize = args.next().map(|a| a.parse().expect("threads")).unwrap_or(1);
    let model = TriplePlaneModel::new(&ModelConfig::default(), 0)?;
    for mode in [SynthesisMode::Repeat, SynthesisMode::HistBlend, SynthesisMode::HexTile] {
        let eval = Evaluator::new(model.clone(), SynthesisParams::new(mode, 1))?;
        println!("{mode:>10}: {}", bench(&eval, n, threads, 2)?);
    }
    Ok(())
}
