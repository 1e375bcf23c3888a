//! Scores the oracle stubs on synthetic data in all three modes: plain,
//! multi-granularity vote, and bicubic downsampling.

use grids::eval::{evaluate_dataset, fbeta, EvalMode, Predictor};
use grids::train::{generate_synthetic, SynthOptions};

fn main() -> grids::Result<()> {
    let dir = std::env::temp_dir().join("grids_evaluate_example");
    let manifest = generate_synthetic(10, 7, &dir, &SynthOptions { thin_parts: true })?;
    println!("F-beta at PRE 0.8 / REC 0.5: {:.4}", fbeta(0.8, 0.5));
    let modes = [
        ("single 950", EvalMode::Single(950)),
        ("vote", EvalMode::Vote(vec![900, 925, 950, 975, 1000])),
        ("bicubic 950", EvalMode::Baseline(950)),
    ];
    for (name, predictor) in [("stub:gt", Predictor::GroundTruth), ("stub:const=0.5", Predictor::Constant(0.5))] {
        for (label, mode) in &modes {
            let r = evaluate_dataset(&predictor, &manifest, mode);
            println!("{name:>15} {label:>12}: MAE {:.4}  F-beta {:.4}", r.mean_mae(), r.mean_fbeta());
        }
    }
    Ok(())
}
