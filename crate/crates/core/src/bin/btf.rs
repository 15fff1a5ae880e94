use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use triplane::btf_data::{generate_synthetic_btf, load_btf, save_btf, SyntheticBtfSpec};
use triplane::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use triplane::evaluator::Evaluator;
use triplane::render::{bench, compute_dssim, compute_dssim_per_channel, compute_rmse, render_plane, render_reference, ImageBuffer, Light, RenderSpec};
use triplane::synthesis::{build_gaussianization, quilt_synthesize_with, QuiltParams, SynthesisMode, SynthesisParams};
use triplane::trainer::{evaluate_reconstruction, TrainConfig, TrainSession};
use triplane::{Error, Result};

#[derive(Parser)]
#[command(name = "btf", version, about = "Triple-plane neural BTF toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an analytic BTF exemplar.
    GenSynthetic(GenArgs),
    /// Fit a model to a BTF file.
    Train(TrainArgs),
    /// Reconstruction error of a checkpoint against its data.
    Eval(EvalArgs),
    /// Render the (synthesized) material under a single light.
    Render(RenderArgs),
    /// Pre-generate a quilted positional plane into a checkpoint.
    SynthQuilt(QuiltArgs),
    /// Compare two images.
    Metrics(MetricsArgs),
    /// Query throughput at n and 4n.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// TOML description; overrides the size flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// TOML training configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from this checkpoint's optimizer state.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Per-epoch statistics as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Evaluate every k-th pair only.
    #[arg(long, default_value_t = 1)]
    every: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "repeat")]
    mode: SynthesisMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lattice edge length in exemplar periods.
    #[arg(long, default_value_t = triplane::synthesis::DEFAULT_GRID_SCALE)]
    grid: f64,
}

impl SynthArgs {
    fn params(&self) -> SynthesisParams {
        SynthesisParams {
            grid_scale: self.grid,
            ..SynthesisParams::new(self.mode, self.seed)
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    /// Checkpoint to render; omit with --data for a ground-truth render.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Render the stored data instead of a model.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    /// Exemplar periods across the image.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// TOML render specification; --scale and the size flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Directional light elevation from the normal, degrees.
    #[arg(long)]
    light_theta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    light_phi: f64,
    /// .png (encoded) or .pfm (linear).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QuiltArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Output size in exemplar periods.
    #[arg(long, default_value_t = 4.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    block: usize,
    #[arg(long, default_value_t = 8)]
    overlap: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    a: PathBuf,
    b: PathBuf,
    /// Average DSSIM over RGB instead of using luma.
    #[arg(long)]
    per_channel: bool,
    /// Gamma used to linearize PNG inputs.
    #[arg(long, default_value_t = 2.2)]
    gamma: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, default_value_t = 518_400)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn gen_synthetic(a: GenArgs) -> Result<()> {
    let spec = match &a.config {
        Some(p) => SyntheticBtfSpec::from_toml(&read_text(p)?)?,
        None => SyntheticBtfSpec::mixed(a.width, a.height, a.seed),
    };
    let d = generate_synthetic_btf(&spec)?;
    save_btf(&d, &a.out)?;
    println!("{} pairs of {}x{} -> {}", d.num_pairs(), d.width(), d.height(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let dataset = load_btf(&a.data)?;
    let mut config = match &a.config {
        Some(p) => TrainConfig::from_toml(&read_text(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let session = match &a.resume {
        Some(p) => TrainSession::resume(&dataset, config, load_checkpoint(p)?)?,
        None => TrainSession::new(&dataset, config)?,
    };
    let (model, report) = session.with_checkpoint_path(&a.out).run(|e| {
        eprintln!("epoch {:3}  loss {:.5e}  l1 {:.5e}  {:.1}s", e.epoch, e.loss, e.l1, e.seconds);
    })?;
    let mut ckpt = load_checkpoint(&a.out).unwrap_or_else(|_| Checkpoint::new(model.clone()));
    ckpt.model = model;
    ckpt.gaussianized = Some(build_gaussianization(&ckpt.model.plane_u));
    save_checkpoint(&ckpt, &a.out)?;
    if let Some(log) = &a.log {
        std::fs::write(log, report.to_csv()).map_err(|e| Error::Io {
            path: log.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.every == 0 {
        return Err(Error::Argument("--every must be >= 1".into()));
    }
    let ckpt = load_checkpoint(&a.ckpt)?;
    let dataset = load_btf(&a.data)?;
    let pairs: Vec<usize> = (0..dataset.num_pairs()).step_by(a.every).collect();
    let m = evaluate_reconstruction(&ckpt.model, &dataset, &pairs)?;
    println!("pairs {}", pairs.len());
    println!("mean_l1 {:.6e}", m.mean_l1);
    println!("rmse {:.6e}", m.rmse);
    println!("mean_dssim {:.6e}", m.mean_dssim());
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Error::Configuration(e.to_string()))?,
        None => RenderSpec::default(),
    };
    spec.uv_scale = a.scale;
    if let Some(w) = a.width {
        spec.width = w;
    }
    if let Some(h) = a.height {
        spec.height = h;
    }
    if let Some(t) = a.light_theta {
        let (t, p) = (t.to_radians(), a.light_phi.to_radians());
        spec.light = Light::Directional {
            direction: [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()],
            radiance: [1.0; 3],
        };
    }
    let img = match (&a.ckpt, &a.data) {
        (Some(c), None) => {
            let eval = Evaluator::from_checkpoint(load_checkpoint(c)?, a.synth.params())?;
            render_plane(&eval, &spec)?
        }
        (None, Some(d)) => render_reference(&load_btf(d)?, &spec)?,
        _ => return Err(Error::Argument("give exactly one of --ckpt and --data".into())),
    };
    img.save(&a.out, spec.exposure, spec.gamma)?;
    println!("{}x{} -> {}", img.width(), img.height(), a.out.display());
    Ok(())
}

fn synth_quilt(a: QuiltArgs) -> Result<()> {
    if !(a.scale >= 1.0) {
        return Err(Error::Argument("--scale must be >= 1".into()));
    }
    let mut ckpt = load_checkpoint(&a.ckpt)?;
    let u = &ckpt.model.plane_u;
    let out_w = (a.scale * u.width() as f64).round() as usize;
    let out_h = (a.scale * u.height() as f64).round() as usize;
    let params = QuiltParams {
        stride: a.stride,
        ..QuiltParams::new(a.block, a.overlap, a.seed)
    };
    let quilted = quilt_synthesize_with(u, out_w, out_h, &params)?;
    println!("quilted plane {}x{}x{} ({} bytes)", out_w, out_h, quilted.channels(), quilted.byte_size());
    ckpt.quilted = Some(quilted);
    save_checkpoint(&ckpt, &a.out)
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let x = ImageBuffer::load(&a.a, a.gamma)?;
    let y = ImageBuffer::load(&a.b, a.gamma)?;
    let dssim = if a.per_channel {
        compute_dssim_per_channel(&x, &y)?
    } else {
        compute_dssim(&x, &y)?
    };
    println!("rmse {:.6e}", compute_rmse(&x, &y)?);
    println!("dssim {:.6e}", dssim);
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let eval = Evaluator::from_checkpoint(load_checkpoint(&a.ckpt)?, a.synth.params())?;
    let r = bench(&eval, a.n, a.threads, a.reps)?;
    println!("mode {}", a.synth.mode);
    println!("{r}");
    println!("GPU reference figure: 2,073,600 queries in 2.0 ms (RTX 4090)");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render(a),
        Command::SynthQuilt(a) => synth_quilt(a),
        Command::Metrics(a) => metrics(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
