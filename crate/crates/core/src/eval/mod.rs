//! Saliency metrics, the comparison baseline, dataset evaluation and plots.

pub mod baseline;
pub mod dataset;
pub mod metrics;
pub mod plot;

pub use baseline::{downsample_baseline, upsample_prediction};
pub use dataset::{
    evaluate_dataset, predict_baseline, predict_for_mode, predict_saliency, EvalMode, EvalReport,
    ImageScore, Predictor,
};
pub use metrics::{adaptive_fbeta, fbeta, mae, majority_vote, pr_curve, FbetaScore, PrPoint};
