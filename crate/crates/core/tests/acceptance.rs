//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 7-11 share one toy protocol: 400/100/100 synthetic images with
//! thin parts, GRIDS16 trained for `TOY_ITERATIONS` Nadam steps, once on
//! grid encodings and once on bicubic downsampling. Takes ~15 min on one core.

mod common;

use std::path::Path;
use std::time::Instant;

use common::Check;
use grids::eval::{evaluate_dataset, fbeta, EvalMode, EvalReport, Predictor};
use grids::nn::{LayerSpec, NetworkModel, Tensor4};
use grids::train::{
    generate_synthetic, prepare_samples, train, DatasetManifest, Encoding, SynthOptions, TrainConfig, TrainOutcome,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOY_ITERATIONS: usize = 500;
const TOY_VAL_INTERVAL: usize = 250;
const TOY_SEED: u64 = 5;

fn report(id: u32, name: &str, check: impl FnOnce() -> Check<String>) -> bool {
    let t = Instant::now();
    let (ok, detail) = match check() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    println!(
        "{} {id:>2}. {name}: {detail} [{:.1}s]",
        if ok { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    ok
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond { Ok(()) } else { Err(msg()) }
}

/// Trainable plus running-statistic count, summed layer by layer.
fn closed_form_count(f: usize, blocks: usize) -> usize {
    let conv = |cin: usize, cout: usize| 9 * cin * cout + cout;
    let bn = |c: usize| 4 * c;
    conv(3, f) + blocks * (2 * bn(f) + 2 * conv(f, f)) + bn(f) + conv(f, 1)
}

fn parameter_counts() -> Check<String> {
    let t = Instant::now();
    let m16 = NetworkModel::new(16, 13).map_err(|e| e.to_string())?.count_parameters();
    let m32 = NetworkModel::new(32, 13).map_err(|e| e.to_string())?.count_parameters();
    let secs = t.elapsed().as_secs_f64();
    ensure(m16 == closed_form_count(16, 13), || format!("GRIDS16 {m16} != {}", closed_form_count(16, 13)))?;
    ensure(m32 == closed_form_count(32, 13), || format!("GRIDS32 {m32} != {}", closed_form_count(32, 13)))?;
    ensure((55_000..=67_000).contains(&m16), || format!("GRIDS16 {m16} outside [55k, 67k]"))?;
    ensure((220_000..=248_000).contains(&m32), || format!("GRIDS32 {m32} outside [220k, 248k]"))?;
    ensure(secs < 1.0, || format!("took {secs:.2}s"))?;
    Ok(format!("GRIDS16 {m16}, GRIDS32 {m32}, both equal the closed form"))
}

fn architecture() -> Check<String> {
    let model = NetworkModel::initialized(16, 13, 1).map_err(|e| e.to_string())?;
    let specs = model.layer_specs();
    let mut convs = 0;
    let mut adds = 0;
    for s in &specs {
        match *s {
            LayerSpec::Conv { kernel, stride, padding, .. } => {
                ensure(kernel == 3 && stride == 1 && padding == 1, || format!("conv {s:?} changes resolution"))?;
                convs += 1;
            }
            LayerSpec::ResidualAdd => adds += 1,
            LayerSpec::BatchNorm { .. } | LayerSpec::Relu | LayerSpec::Sigmoid => {}
        }
    }
    ensure(convs == 28 && adds == 13 && model.block_count() == 13, || {
        format!("{convs} convs, {adds} residual adds, {} blocks", model.block_count())
    })?;
    ensure(matches!(specs.last(), Some(LayerSpec::Sigmoid)), || "output is not a sigmoid".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut shapes = Vec::new();
    for _ in 0..5 {
        let (h, w) = (rng.random_range(8..=40), rng.random_range(8..=40));
        let x = Tensor4::from_vec(1, h, w, 3, (0..h * w * 3).map(|_| rng.random()).collect()).unwrap();
        let y = model.forward_eval(&x).map_err(|e| e.to_string())?;
        ensure(y.shape() == (1, h, w, 1), || format!("{h}x{w} input gave {:?}", y.shape()))?;
        ensure(y.data.iter().all(|&v| v > 0.0 && v < 1.0), || "output outside (0, 1)".into())?;
        shapes.push(format!("{h}x{w}"));
    }
    Ok(format!("28 convs, 13 blocks, no pooling or stride; shapes preserved for {}", shapes.join(" ")))
}

fn gradients() -> Check<String> {
    let t = Instant::now();
    let layer = common::conv_fd(1)? + common::batchnorm_fd(2)? + common::activation_and_loss_fd(3)?;
    let (model, skipped) = common::composed_model_fd(17, 200)?;
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.0}s"))?;
    Ok(format!(
        "{layer} per-layer entries (conv, batch norm, ReLU, sigmoid, BCE) and {model} model parameters agree; \
         {skipped} kink-crossing perturbations redrawn"
    ))
}

fn gridization() -> Check<String> {
    let segments = common::dp_matches_brute_force(100, 7)?;
    let fallbacks = common::noise_grids_are_valid(100, 256)?;
    common::constant_images_tile_rectangles()?;
    Ok(format!(
        "{segments} segments on 100 maps match exhaustive search; 100 noise grids valid \
         ({fallbacks} regular fallbacks); constant images tile rectangles"
    ))
}

fn codec() -> Check<String> {
    common::codec_round_trips(100)?;
    Ok("100 random grids: encode(reconstruct(X)) = X, projection idempotent, cell-constant previews lossless".into())
}

fn metrics() -> Check<String> {
    common::metrics_match_enumeration(50, 99)?;
    let f = fbeta(0.8, 0.5);
    ensure((f - 0.7027).abs() <= 1e-4, || format!("F(0.8, 0.5) = {f}"))?;
    Ok(format!("50 cases match enumeration exactly; F(0.8, 0.5) = {f:.4}"))
}

struct Toy {
    test: DatasetManifest,
    grid: TrainOutcome,
    bicubic: TrainOutcome,
    config: TrainConfig,
    train_manifest: std::path::PathBuf,
    val_manifest: std::path::PathBuf,
}

fn toy_config(encoding: Encoding) -> TrainConfig {
    TrainConfig {
        filters: 16,
        max_iterations: TOY_ITERATIONS,
        val_interval: TOY_VAL_INTERVAL,
        seed: TOY_SEED,
        encoding,
        ..TrainConfig::default()
    }
}

fn run_toy(root: &Path) -> grids::Result<Toy> {
    let opts = SynthOptions { thin_parts: true };
    let train_m = generate_synthetic(400, 11, root.join("train"), &opts)?;
    let val_m = generate_synthetic(100, 12, root.join("val"), &opts)?;
    let test = generate_synthetic(100, 13, root.join("test"), &opts)?;
    let fit = |encoding| {
        let cfg = toy_config(encoding);
        let tr = prepare_samples(&train_m, &cfg.granularities, encoding);
        let va = prepare_samples(&val_m, &cfg.granularities, encoding);
        train(&cfg, &tr.samples, &va.samples, None)
    };
    Ok(Toy {
        test,
        grid: fit(Encoding::Grid)?,
        bicubic: fit(Encoding::Bicubic)?,
        config: toy_config(Encoding::Grid),
        train_manifest: root.join("train/manifest.txt"),
        val_manifest: root.join("val/manifest.txt"),
    })
}

fn score(r: &EvalReport) -> String {
    format!("F {:.4} / MAE {:.4}", r.mean_fbeta(), r.mean_mae())
}

fn main() {
    // Deterministic mode for the whole run.
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().expect("first pool");

    let mut passed = 0;
    let mut total = 0;
    let mut tally = |ok: bool| {
        total += 1;
        passed += ok as usize;
    };
    tally(report(1, "parameter counts", parameter_counts));
    tally(report(2, "architecture invariants", architecture));
    tally(report(3, "gradient correctness", gradients));
    tally(report(4, "gridization oracle", gridization));
    tally(report(5, "codec round trip", codec));
    tally(report(6, "metric oracles", metrics));

    let dir = tempfile::tempdir().expect("temp dir");
    let t = Instant::now();
    let toy = run_toy(dir.path());
    eprintln!("toy data and two trainings: {:.0}s", t.elapsed().as_secs_f64());
    let toy = match toy {
        Ok(t) => t,
        Err(e) => {
            for (id, name) in [(7, "toy learning"), (8, "grid vs bicubic"), (9, "resolution robustness"), (10, "voting"), (11, "determinism")] {
                tally(report(id, name, || Err(format!("toy protocol failed: {e}"))));
            }
            println!("{passed}/{total} criteria passed");
            return;
        }
    };
    let model = Predictor::Model(Box::new(toy.grid.best.clone()));
    let single = evaluate_dataset(&model, &toy.test, &EvalMode::Single(950));

    tally(report(7, "toy learning", || {
        let (f, m) = (single.mean_fbeta(), single.mean_mae());
        let detail = format!(
            "{} on {} held-out images (best iteration {})",
            score(&single),
            single.rows.len(),
            toy.grid.best_iteration
        );
        ensure(f >= 0.80 && m <= 0.10, || detail.clone())?;
        Ok(detail)
    }));

    tally(report(8, "grid encoding vs bicubic downsampling", || {
        let base = evaluate_dataset(
            &Predictor::Model(Box::new(toy.bicubic.best.clone())),
            &toy.test,
            &EvalMode::Baseline(950),
        );
        let gap = single.mean_fbeta() - base.mean_fbeta();
        let detail = format!("grid {} vs bicubic {}; F gap {gap:+.4}", score(&single), score(&base));
        ensure(gap >= 0.02 && single.mean_mae() <= base.mean_mae() + 0.01, || detail.clone())?;
        Ok(detail)
    }));

    tally(report(9, "resolution robustness", || {
        let reps: Vec<EvalReport> = [900, 950, 1000]
            .iter()
            .map(|&n| evaluate_dataset(&model, &toy.test, &EvalMode::Single(n)))
            .collect();
        let spread = |v: Vec<f64>| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        let fs = spread(reps.iter().map(EvalReport::mean_fbeta).collect());
        let ms = spread(reps.iter().map(EvalReport::mean_mae).collect());
        let detail = format!(
            "900/950/1000: {}; F spread {fs:.4}, MAE spread {ms:.4}",
            reps.iter().map(score).collect::<Vec<_>>().join(", ")
        );
        ensure(fs <= 0.02 && ms <= 0.005, || detail.clone())?;
        Ok(detail)
    }));

    tally(report(10, "multi-resolution voting", || {
        let vote = evaluate_dataset(&model, &toy.test, &EvalMode::Vote(vec![900, 925, 950, 975, 1000]));
        let detail = format!("vote F {:.4} vs single-950 F {:.4}", vote.mean_fbeta(), single.mean_fbeta());
        ensure(vote.mean_fbeta() >= single.mean_fbeta() - 0.005, || detail.clone())?;
        Ok(detail)
    }));

    tally(report(11, "determinism", || {
        let model_path = dir.path().join("rerun.gseg");
        let c = &toy.config;
        let args = [
            "grids".to_string(),
            "--deterministic".into(),
            "train".into(),
            "--train-manifest".into(),
            toy.train_manifest.display().to_string(),
            "--val-manifest".into(),
            toy.val_manifest.display().to_string(),
            "--out-model".into(),
            model_path.display().to_string(),
            "--filters".into(),
            c.filters.to_string(),
            "--iterations".into(),
            c.max_iterations.to_string(),
            "--seed".into(),
            c.seed.to_string(),
            "--set".into(),
            format!("val_interval={}", c.val_interval),
        ];
        let code = grids::cli::run(args);
        ensure(code == 0, || format!("CLI rerun exited with {code}"))?;
        let rerun = std::fs::read(model_path.with_extension("log.csv")).map_err(|e| e.to_string())?;
        let first = toy.grid.log.to_csv().into_bytes();
        ensure(rerun == first, || "rerun log differs from the first run".into())?;
        Ok(format!("CLI rerun log is byte-identical ({} bytes, {} rows)", first.len(), toy.grid.log.rows.len()))
    }));

    println!("{passed}/{total} criteria passed");
}
