//! Trains a small network on a freshly generated synthetic dataset and
//! scores it on held-out images.
//!
//! cargo run --release --example train_toy -- [iterations] [work_dir]

use grids::eval::{evaluate_dataset, EvalMode, Predictor};
use grids::train::{generate_synthetic, prepare_samples, train, SynthOptions, TrainConfig};

fn main() -> grids::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let iterations = args.first().and_then(|v| v.parse().ok()).unwrap_or(200);
    let work = std::path::PathBuf::from(args.get(1).map(String::as_str).unwrap_or("train_toy_out"));

    let opts = SynthOptions::default();
    let train_m = generate_synthetic(60, 1, work.join("train"), &opts)?;
    let val_m = generate_synthetic(15, 2, work.join("val"), &opts)?;
    let test_m = generate_synthetic(15, 3, work.join("test"), &opts)?;

    let config = TrainConfig {
        filters: 8,
        blocks: 4,
        granularities: vec![400, 450],
        max_iterations: iterations,
        val_interval: 50,
        ..TrainConfig::default()
    };
    let tr = prepare_samples(&train_m, &config.granularities, config.encoding);
    let va = prepare_samples(&val_m, &config.granularities, config.encoding);
    let outcome = train(&config, &tr.samples, &va.samples, None)?;
    print!("{}", outcome.log.to_csv());

    let report = evaluate_dataset(&Predictor::Model(Box::new(outcome.best)), &test_m, &EvalMode::Single(400));
    println!("held-out: MAE {:.4}, F-beta {:.4}", report.mean_mae(), report.mean_fbeta());
    Ok(())
}
