use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::batch::BatchSampler;
use super::config::TrainConfig;
use super::samples::{augment_flip, EncodedSample};
use crate::error::{Error, Result};
use crate::nn::layers::bce_loss;
use crate::nn::{save_model, Nadam, NetworkModel, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    /// Parameter updates applied before this row.
    pub iteration: usize,
    /// Mean training batch loss since the previous row; none at iteration 0.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub is_best: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,train_loss,val_loss,is_best\n");
        for r in &self.rows {
            let train = r.train_loss.map(|v| format!("{v:.8}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:.8},{}", r.iteration, train, r.val_loss, r.is_best as u8);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the lowest validation loss.
    pub best: NetworkModel,
    pub best_iteration: usize,
    pub best_val_loss: f64,
    pub log: TrainingLog,
}

/// Index of the first minimum.
pub fn select_best(losses: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &l) in losses.iter().enumerate() {
        if best.is_none_or(|b| l < losses[b]) {
            best = Some(i);
        }
    }
    best
}

/// Stacks same-shaped samples into input and target batches.
pub fn stack(samples: &[&EncodedSample]) -> Result<(Tensor4, Tensor4)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let (r, c) = first.shape();
    let mut x = Vec::with_capacity(samples.len() * r * c * 3);
    let mut y = Vec::with_capacity(samples.len() * r * c);
    for s in samples {
        if s.shape() != (r, c) {
            return Err(Error::mismatch(format!("{r}x{c}"), format!("{:?}", s.shape())));
        }
        x.extend_from_slice(s.input.data());
        y.extend_from_slice(s.label.data());
    }
    Ok((
        Tensor4::from_vec(samples.len(), r, c, 3, x)?,
        Tensor4::from_vec(samples.len(), r, c, 1, y)?,
    ))
}

/// Mean over samples of each sample's mean cross-entropy, in eval mode.
pub fn validation_loss(model: &NetworkModel, samples: &[EncodedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no validation samples".into()));
    }
    let losses = samples
        .par_iter()
        .map(|s| {
            let (x, y) = stack(&[s])?;
            bce_loss(&model.forward_eval(&x)?, &y)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Runs the training loop. Validation happens before the first update,
/// every `val_interval` updates, and after the last one. On a non-finite
/// loss the current parameters are written to `diagnostic` (if given)
/// before the error is returned.
pub fn train(
    config: &TrainConfig,
    train_set: &[EncodedSample],
    val_set: &[EncodedSample],
    diagnostic: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut model = NetworkModel::initialized(config.filters, config.blocks, config.seed)?;
    let mut opt = Nadam::new(&model, config.learning_rate)?;
    let sampler = BatchSampler::new(train_set, config.batch_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    info!(
        "training F={} blocks={} on {} samples in {} shape buckets, {} validation samples",
        config.filters,
        config.blocks,
        train_set.len(),
        sampler.bucket_count(),
        val_set.len()
    );

    let v0 = validation_loss(&model, val_set)?;
    let mut log = TrainingLog {
        rows: vec![LogRow {
            iteration: 0,
            train_loss: None,
            val_loss: v0,
            is_best: true,
        }],
    };
    let (mut best, mut best_iteration, mut best_val) = (model.clone(), 0, v0);

    let (mut iteration, mut acc, mut acc_n) = (0usize, 0f64, 0usize);
    'outer: while iteration < config.max_iterations {
        for batch in sampler.epoch(&mut rng) {
            let flipped: Vec<EncodedSample> =
                batch.iter().map(|&i| augment_flip(&train_set[i], &mut rng)).collect();
            let refs: Vec<&EncodedSample> = flipped.iter().collect();
            let (x, y) = stack(&refs)?;
            let step = model
                .loss_and_gradients(&x, &y)
                .and_then(|(loss, grads)| opt.update(&mut model, &grads).map(|_| loss));
            let loss = match step {
                Ok(l) => l,
                Err(e) => {
                    if let (Error::NonFinite(_), Some(path)) = (&e, diagnostic) {
                        warn!("non-finite training state; writing {}", path.display());
                        save_model(&model, path)?;
                    }
                    return Err(e);
                }
            };
            iteration += 1;
            acc += loss;
            acc_n += 1;

            if iteration % config.val_interval == 0 || iteration == config.max_iterations {
                let v = validation_loss(&model, val_set)?;
                let is_best = v < best_val;
                if is_best {
                    best = model.clone();
                    best_iteration = iteration;
                    best_val = v;
                }
                let train_loss = acc / acc_n as f64;
                info!("iter {iteration}: train {train_loss:.5} val {v:.5}{}", if is_best { " *" } else { "" });
                log.rows.push(LogRow {
                    iteration,
                    train_loss: Some(train_loss),
                    val_loss: v,
                    is_best,
                });
                acc = 0.0;
                acc_n = 0;
            }
            if iteration == config.max_iterations {
                break 'outer;
            }
        }
    }
    Ok(TrainOutcome {
        best,
        best_iteration,
        best_val_loss: best_val,
        log,
    })
}
