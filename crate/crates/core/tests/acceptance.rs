//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! `cargo test --release --test acceptance` (about 20 minutes on one core,
//! dominated by the 50-epoch reconstruction run). Set `ACCEPTANCE_ONLY=1,5`
//! to run a subset; criteria 5 and 6 need the model from criterion 3.

use std::time::Instant;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use triplane::btf_data::{generate_synthetic_btf, AlbedoSource, AngularGrid, BtfDataset, SyntheticBtfSpec};
use triplane::evaluator::{BtfQuery, Evaluator};
use triplane::halfdiff::{to_half_diff, HalfDiffCoords};
use triplane::neural::{AddressMode, FeaturePlane, ModelConfig, ModelGrads, PlaneDims, TriplePlaneModel};
use triplane::render::{autocorrelation, bench, render_plane, Light, RenderSpec};
use triplane::synthesis::{
    make_tileable, min_error_seam, seam_delta, storage_estimate, triangle_vertices, SynthesisMode, SynthesisParams,
};
use triplane::trainer::{evaluate_reconstruction, loss_and_gradients, LossSpace, SampleGroup, TrainConfig, TrainSession};
use triplane::btf_data::DirectionPair;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_dir(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = rng.gen_range(0.1..1.0);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

fn random_hd(rng: &mut ChaCha8Rng) -> HalfDiffCoords {
    loop {
        if let Ok(pair) = DirectionPair::new(random_dir(rng), random_dir(rng)) {
            return to_half_diff(&pair).unwrap();
        }
    }
}

// ---------------------------------------------------------------------------

fn direct_loss(model: &TriplePlaneModel<f64>, groups: &[SampleGroup]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for g in groups {
        for (uv, t) in g.uv.iter().zip(&g.target) {
            let y = model.decode(*uv, &g.hd);
            for c in 0..3 {
                sum += (y[c] - t[c] as f64).abs();
            }
            n += 3;
        }
    }
    sum / n as f64
}

fn gradient_check() -> Outcome {
    let config = ModelConfig {
        positional: PlaneDims::new(8, 8, 16),
        half: PlaneDims::new(4, 4, 8),
        diff: PlaneDims::new(4, 4, 8),
        ..ModelConfig::default()
    };
    let mut model = TriplePlaneModel::<f64>::new(&config, 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for t in model.tensors_mut().into_iter().take(3) {
        t.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    let groups: Vec<SampleGroup> = (0..64)
        .map(|_| SampleGroup {
            hd: random_hd(&mut rng),
            uv: vec![[rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)]],
            target: vec![[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]],
        })
        .collect();
    let mut grads = ModelGrads::zeros_like(&model);
    loss_and_gradients(&model, &groups, LossSpace::Linear, &mut grads).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

    let h = 1e-5;
    // guards the ratio where both values vanish; central differences of a
    // loss of order 1 carry ~1e-11 of roundoff at this step
    let floor = 1e-6;
    let (mut worst, mut checked, mut fails) = (0.0f64, 0usize, 0usize);
    for k in 0..analytic.len() {
        for i in 0..analytic[k].len() {
            let orig = model.tensors()[k][i];
            model.tensors_mut()[k][i] = orig + h;
            let p = direct_loss(&model, &groups);
            model.tensors_mut()[k][i] = orig - h;
            let m = direct_loss(&model, &groups);
            model.tensors_mut()[k][i] = orig;
            let fd = (p - m) / (2.0 * h);
            let a = analytic[k][i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
            worst = worst.max(rel);
            checked += 1;
            if rel >= 1e-4 {
                fails += 1;
            }
        }
    }
    outcome(
        fails == 0,
        format!("{checked} parameters, max relative error {worst:.2e}, {fails} above 1e-4"),
    )
}

// ---------------------------------------------------------------------------

fn overfit() -> Outcome {
    let d = generate_synthetic_btf(&SyntheticBtfSpec {
        width: 1,
        height: 1,
        angular: AngularGrid {
            n_theta: 1,
            n_phi: 1,
            ..AngularGrid::default()
        },
        albedo: AlbedoSource::Constant { rgb: [0.7, 0.45, 0.2] },
        specular: None,
    })
    .unwrap();
    // one step per epoch and no schedule: 500 steps at the base rates
    let config = TrainConfig {
        epochs: 500,
        lr_decay_per_epoch: 1.0,
        images_per_batch: 1,
        seed: 1,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (model, report) = TrainSession::new(&d, config).unwrap().run(|_| {}).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let first = report.epochs.iter().position(|e| e.l1 < 1e-3);
    let last = evaluate_reconstruction(&model, &d, &[0]).unwrap().mean_l1;
    let min = report.epochs.iter().map(|e| e.l1).fold(f64::INFINITY, f64::min);
    outcome(
        first.is_some() && secs < 10.0,
        format!(
            "first step with l1 < 1e-3: {}, min l1 {min:.2e}, l1 after 500 steps {last:.2e}, {secs:.2}s",
            first.map_or("never".to_string(), |s| (s + 1).to_string())
        ),
    )
}

// ---------------------------------------------------------------------------

fn reconstruction(model_out: &mut Option<TriplePlaneModel<f32>>) -> Outcome {
    let d: BtfDataset = generate_synthetic_btf(&SyntheticBtfSpec::mixed(64, 64, 7)).unwrap();
    let start = Instant::now();
    let (model, report) = TrainSession::new(&d, TrainConfig::default())
        .unwrap()
        .run(|e| eprintln!("  epoch {:2} loss {:.4e} ({:.1}s)", e.epoch, e.loss, e.seconds))
        .unwrap();
    let pairs: Vec<usize> = (0..d.num_pairs()).collect();
    let m = evaluate_reconstruction(&model, &d, &pairs).unwrap();
    let secs = start.elapsed().as_secs_f64();
    *model_out = Some(model);
    let dssim = m.mean_dssim();
    outcome(
        dssim < 0.05 && m.rmse < 0.02 && secs < 1800.0,
        format!(
            "{} pairs, {} epochs: mean DSSIM {dssim:.4e}, RMSE {:.4e}, final loss {:.4e}, {secs:.0}s",
            d.num_pairs(),
            report.epochs.len(),
            m.rmse,
            report.epochs.last().unwrap().loss
        ),
    )
}

// ---------------------------------------------------------------------------

fn storage() -> Outcome {
    let config = ModelConfig::default();
    let model = TriplePlaneModel::<f32>::new(&config, 0).unwrap();
    let payload = model.plane_payload_bytes() as u64;
    let dynamic = storage_estimate(&config, SynthesisMode::HistBlend, 15.0).unwrap();
    let quilted = storage_estimate(&config, SynthesisMode::Quilted, 15.0).unwrap();
    outcome(
        payload == 10_265_600 && dynamic == 10_265_600 && quilted == 2_304_000_000,
        format!(
            "plane payload {payload} B, dynamic at 15x {dynamic} B, quilted at 15x {quilted} B ({:.3} GiB)",
            quilted as f64 / (1u64 << 30) as f64
        ),
    )
}

// ---------------------------------------------------------------------------

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn histogram_preservation(model: &TriplePlaneModel<f32>) -> Outcome {
    let eval = Evaluator::new(model.clone(), SynthesisParams::new(SynthesisMode::HistBlend, 5)).unwrap();
    let c = model.plane_u.channels();
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut synth: Vec<Vec<f64>> = vec![Vec::with_capacity(n); c];
    let mut f = vec![0.0f32; c];
    for _ in 0..n {
        eval.positional_feature_into([rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0)], &mut f);
        for k in 0..c {
            synth[k].push(f[k] as f64);
        }
    }
    let data = model.plane_u.data();
    let mut worst = 0.0f64;
    let mut all = Vec::new();
    for k in 0..c {
        let mut ex: Vec<f64> = data.iter().skip(k).step_by(c).map(|v| *v as f64).collect();
        let ks = ks_statistic(&mut ex, &mut synth[k]);
        all.push(format!("{ks:.3}"));
        worst = worst.max(ks);
    }
    outcome(
        worst < 0.03,
        format!("max KS over {c} channels {worst:.4} (per channel: {})", all.join(" ")),
    )
}

// ---------------------------------------------------------------------------

fn luma_render(eval: &Evaluator, size: usize, scale: f64) -> Vec<f64> {
    let spec = RenderSpec {
        width: size,
        height: size,
        uv_scale: scale,
        light: Light::Directional {
            direction: [0.3, 0.2, 1.0],
            radiance: [1.0; 3],
        },
        ..RenderSpec::default()
    };
    render_plane(eval, &spec).unwrap().luma()
}

fn non_repetition(model: &TriplePlaneModel<f32>) -> Outcome {
    let (size, scale) = (512, 8.0);
    let lag = (size as f64 / scale) as usize;
    let hist = Evaluator::new(model.clone(), SynthesisParams::new(SynthesisMode::HistBlend, 3)).unwrap();
    let repeat = Evaluator::new(model.clone(), SynthesisParams::new(SynthesisMode::Repeat, 0)).unwrap();
    let a_hist = autocorrelation(&luma_render(&hist, size, scale), size, size, lag).unwrap();
    let a_rep = autocorrelation(&luma_render(&repeat, size, scale), size, size, lag).unwrap();
    outcome(
        a_hist < 0.5 && a_rep > 0.99,
        format!("autocorrelation at lag {lag}px: hist-blend {a_hist:.4}, repeat {a_rep:.4}"),
    )
}

// ---------------------------------------------------------------------------

fn purity(model: &TriplePlaneModel<f32>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let queries: Vec<BtfQuery> = (0..100_000)
        .map(|_| BtfQuery {
            u_star: [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)],
            wi: random_dir(&mut rng),
            wo: random_dir(&mut rng),
        })
        .collect();
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.shuffle(&mut rng);
    let shuffled: Vec<BtfQuery> = order.iter().map(|i| queries[*i]).collect();
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let mut mismatches = 0;
    for mode in [SynthesisMode::HistBlend, SynthesisMode::HexTile] {
        let eval = Evaluator::new(model.clone(), SynthesisParams::new(mode, 99)).unwrap();
        let a = pool(1).install(|| eval.query_batch_strict(&queries)).unwrap();
        let b = pool(8).install(|| eval.query_batch_strict(&shuffled)).unwrap();
        for (k, i) in order.iter().enumerate() {
            if a[*i].map(f32::to_bits) != b[k].map(f32::to_bits) {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("2 modes x 1e5 queries, 1 vs 8 threads, shuffled: {mismatches} mismatches"),
    )
}

// ---------------------------------------------------------------------------

fn throughput(model: &TriplePlaneModel<f32>) -> Outcome {
    let eval = Evaluator::new(model.clone(), SynthesisParams::new(SynthesisMode::HistBlend, 1)).unwrap();
    let r = bench(&eval, 518_400, 1, 3).unwrap();
    outcome(
        (3.2..=4.8).contains(&r.ratio),
        format!("{r}; GPU reference figure 2,073,600 queries in 2.0 ms (no parity expected)"),
    )
}

// ---------------------------------------------------------------------------

fn smooth_nonperiodic_plane(n: usize, c: usize) -> FeaturePlane<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let waves: Vec<[f64; 4]> = (0..c * 3)
        .map(|_| {
            [
                rng.gen_range(0.3..1.7),
                rng.gen_range(0.3..1.7),
                rng.gen_range(0.0..6.3),
                rng.gen_range(0.3..1.0),
            ]
        })
        .collect();
    let mut data = Vec::with_capacity(n * n * c);
    for row in 0..n {
        for col in 0..n {
            let (x, y) = (col as f64 / n as f64, row as f64 / n as f64);
            for k in 0..c {
                let v: f64 = waves[k * 3..k * 3 + 3]
                    .iter()
                    .map(|w| w[3] * (std::f64::consts::TAU * (w[0] * x + w[1] * y) + w[2]).sin())
                    .sum();
                data.push(v as f32);
            }
        }
    }
    FeaturePlane::from_data(n, n, c, AddressMode::Wrap, AddressMode::Wrap, data).unwrap()
}

fn rgb_dist(a: [f32; 3], b: [f32; 3]) -> f64 {
    (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum::<f64>().sqrt()
}

fn seams_and_continuity(model: &TriplePlaneModel<f32>) -> Outcome {
    let plane = smooth_nonperiodic_plane(256, 16);
    let before = seam_delta(&plane);
    let after = seam_delta(&make_tileable(&plane, 16).unwrap());
    let seam_ok = after < 0.05 * before;

    let step = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let (wi, wo) = (random_dir(&mut rng), random_dir(&mut rng));
    let mut worst_ratio = 0.0f64;
    let mut crossings = 0;
    for mode in [SynthesisMode::HistBlend, SynthesisMode::HexTile] {
        let params = SynthesisParams::new(mode, 7);
        let eval = Evaluator::new(model.clone(), params.clone()).unwrap();
        // a diagonal sweep over several lattice cells
        let start = [0.113, 0.071];
        let dir = [0.8, 0.6];
        let n = 6000;
        let pts: Vec<[f64; 2]> = (0..=n)
            .map(|k| [start[0] + dir[0] * step * k as f64, start[1] + dir[1] * step * k as f64])
            .collect();
        let qs: Vec<BtfQuery> = pts.iter().map(|u| BtfQuery { u_star: *u, wi, wo }).collect();
        let rgb = eval.query_batch_strict(&qs).unwrap();
        let jumps: Vec<f64> = rgb.windows(2).map(|w| rgb_dist(w[0], w[1])).collect();
        let cell = |u: [f64; 2]| {
            let mut v: Vec<(i64, i64)> = triangle_vertices(u, params.grid_scale).iter().map(|x| x.0).collect();
            v.sort();
            v
        };
        for k in 0..jumps.len() {
            if cell(pts[k]) == cell(pts[k + 1]) {
                continue;
            }
            crossings += 1;
            let lo = k.saturating_sub(50);
            let hi = (k + 50).min(jumps.len() - 1);
            let interior = (lo..=hi)
                .filter(|i| cell(pts[*i]) == cell(pts[*i + 1]))
                .map(|i| jumps[i])
                .fold(0.0f64, f64::max);
            worst_ratio = worst_ratio.max(jumps[k] / interior.max(1e-12));
        }
    }
    outcome(
        seam_ok && worst_ratio < 10.0 && crossings > 0,
        format!(
            "wrap seam {before:.4e} -> {after:.4e} ({:.2}%); {crossings} cell crossings, max jump / local interior max {worst_ratio:.2}",
            100.0 * after / before
        ),
    )
}

// ---------------------------------------------------------------------------

fn brute_force_min(errors: &[f64], rows: usize, cols: usize) -> f64 {
    fn go(errors: &[f64], rows: usize, cols: usize, r: usize, c: usize, acc: f64) -> f64 {
        let acc = acc + errors[r * cols + c];
        if r + 1 == rows {
            return acc;
        }
        let mut best = f64::INFINITY;
        for nc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
            best = best.min(go(errors, rows, cols, r + 1, nc, acc));
        }
        best
    }
    (0..cols).map(|c| go(errors, rows, cols, 0, c, 0.0)).fold(f64::INFINITY, f64::min)
}

fn quilting_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut mismatches = 0;
    for case in 0..100 {
        let e: Vec<f64> = if case % 10 == 0 {
            // integer surfaces with many ties
            (0..25).map(|_| rng.gen_range(0..3) as f64).collect()
        } else {
            (0..25).map(|_| rng.gen::<f64>()).collect()
        };
        let (path, cost) = min_error_seam(&e, 5, 5);
        let path_cost: f64 = path.iter().enumerate().map(|(r, c)| e[r * 5 + c]).sum();
        let valid = path.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1);
        if cost != brute_force_min(&e, 5, 5) || cost != path_cost || !valid {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("100 random 5x5 surfaces: {mismatches} mismatches"))
}

// ---------------------------------------------------------------------------

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().map_or(true, |o| o.contains(&k));
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |k: u32, name: &'static str, o: Outcome| {
        println!("{} [{k}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, name, o));
    };

    if wanted(1) {
        report(1, "gradient correctness", gradient_check());
    }
    if wanted(2) {
        report(2, "overfit convergence", overfit());
    }
    let mut model = None;
    if wanted(3) || wanted(5) || wanted(6) {
        let o = reconstruction(&mut model);
        if wanted(3) {
            report(3, "desk-scale reconstruction", o);
        }
    }
    if wanted(4) {
        report(4, "storage accounting", storage());
    }
    // criteria that only need some trained-looking model fall back to a
    // randomly initialized one when run on their own
    let fallback = || TriplePlaneModel::<f32>::new(&ModelConfig::for_exemplar(64, 64), 3).unwrap();
    let trained = model.clone().unwrap_or_else(fallback);
    if wanted(5) {
        report(5, "histogram preservation", histogram_preservation(&trained));
    }
    if wanted(6) {
        report(6, "non-repetition", non_repetition(&trained));
    }
    if wanted(7) {
        report(7, "dynamic purity", purity(&trained));
    }
    if wanted(8) {
        report(8, "throughput scaling", throughput(&trained));
    }
    if wanted(9) {
        report(9, "seams and continuity", seams_and_continuity(&trained));
    }
    if wanted(10) {
        report(10, "quilting oracle", quilting_oracle());
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
