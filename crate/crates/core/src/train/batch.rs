use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::samples::EncodedSample;
use crate::error::{Error, Result};

/// Groups samples by grid shape so that a batch never mixes shapes and no
/// padding reaches batch-norm statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSampler {
    buckets: Vec<Vec<usize>>,
    batch_size: usize,
}

impl BatchSampler {
    pub fn new(samples: &[EncodedSample], batch_size: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no training samples".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let mut by_shape: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            by_shape.entry(s.shape()).or_default().push(i);
        }
        Ok(Self {
            buckets: by_shape.into_values().collect(),
            batch_size,
        })
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// One pass over all samples: bucket order and within-bucket order are
    /// shuffled, and each bucket yields consecutive batches of up to
    /// `batch_size`.
    pub fn epoch(&self, rng: &mut impl Rng) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.buckets.len()).collect();
        order.shuffle(rng);
        let mut batches = Vec::new();
        for b in order {
            let mut idx = self.buckets[b].clone();
            idx.shuffle(rng);
            batches.extend(idx.chunks(self.batch_size).map(<[usize]>::to_vec));
        }
        batches
    }
}

/// One epoch of batches over `samples`.
pub fn make_batches(
    samples: &[EncodedSample],
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<usize>>> {
    Ok(BatchSampler::new(samples, batch_size)?.epoch(rng))
}
