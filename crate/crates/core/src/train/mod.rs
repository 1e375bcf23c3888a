//! Dataset handling, augmentation, shape-bucketed batching, the training
//! loop, and the synthetic dataset generator.

pub mod batch;
pub mod config;
pub mod manifest;
pub mod samples;
pub mod synth;
pub mod trainer;

pub use batch::{make_batches, BatchSampler};
pub use config::TrainConfig;
pub use manifest::{DatasetManifest, ManifestEntry};
pub use samples::{augment_flip, encode_pair, prepare_samples, EncodedSample, Encoding, PreparedSamples};
pub use synth::{generate_synthetic, synthesize, SynthOptions, SyntheticImage};
pub use trainer::{train, validation_loss, LogRow, TrainOutcome, TrainingLog};
