use triplane::btf_data::{generate_synthetic_btf, load_btf, save_btf, SyntheticBtfSpec};
use triplane::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use triplane::evaluator::Evaluator;
use triplane::render::{compute_dssim, render_plane, render_reference, RenderSpec};
use triplane::synthesis::{build_gaussianization, SynthesisMode, SynthesisParams};
use triplane::trainer::{evaluate_reconstruction, TrainConfig, TrainSession};

#[test]
fn generate_train_save_load_render() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("d.btf");
    let d = generate_synthetic_btf(&SyntheticBtfSpec::mixed(16, 16, 4)).unwrap();
    save_btf(&d, &data_path).unwrap();
    let d = load_btf(&data_path).unwrap();

    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let (model, report) = TrainSession::new(&d, config).unwrap().run(|_| {}).unwrap();
    assert_eq!(report.epochs.len(), 3);
    assert!(report.epochs[2].loss < report.epochs[0].loss);

    let pairs: Vec<usize> = (0..d.num_pairs()).step_by(40).collect();
    let m = evaluate_reconstruction(&model, &d, &pairs).unwrap();
    assert!(m.rmse.is_finite() && m.rmse < 0.1, "{m:?}");

    let mut ckpt = Checkpoint::new(model.clone());
    ckpt.gaussianized = Some(build_gaussianization(&model.plane_u));
    let ckpt_path = dir.path().join("m.tpln");
    save_checkpoint(&ckpt, &ckpt_path).unwrap();
    let back = load_checkpoint(&ckpt_path).unwrap();
    assert_eq!(back.model, model);

    let spec = RenderSpec {
        width: 48,
        height: 48,
        ..RenderSpec::default()
    };
    let repeat = Evaluator::from_checkpoint(back.clone(), SynthesisParams::new(SynthesisMode::Repeat, 0)).unwrap();
    let img = render_plane(&repeat, &spec).unwrap();
    let reference = render_reference(&d, &spec).unwrap();
    assert!(compute_dssim(&img, &reference).unwrap() < 0.2);

    // the stored Gaussianization is the one rebuilt from the plane
    let hist = Evaluator::from_checkpoint(back, SynthesisParams::new(SynthesisMode::HistBlend, 3)).unwrap();
    let rebuilt = Evaluator::new(model, SynthesisParams::new(SynthesisMode::HistBlend, 3)).unwrap();
    assert_eq!(
        render_plane(&hist, &spec).unwrap(),
        render_plane(&rebuilt, &spec).unwrap()
    );
}
