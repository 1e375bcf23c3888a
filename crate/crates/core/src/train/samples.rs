use log::warn;
use rand::Rng;
use rayon::prelude::*;

use super::manifest::DatasetManifest;
use crate::codec::{encode_image, encode_label, minmax_normalize, GridTensor};
use crate::error::{Error, Result};
use crate::eval::downsample_baseline;
use crate::gridize::gridize;
use crate::image::{load_image, load_mask, BinaryMask, RasterImage};

/// How a full-resolution image becomes a small network input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Encoding {
    /// Superpixel gridization with mean-color cells.
    #[default]
    Grid,
    /// Plain bicubic downsampling to about the same number of pixels.
    Bicubic,
}

impl std::str::FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Encoding::Grid),
            "bicubic" => Ok(Encoding::Bicubic),
            other => Err(Error::InvalidArgument(format!(
                "unknown encoding `{other}` (expected grid or bicubic)"
            ))),
        }
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Encoding::Grid => "grid",
            Encoding::Bicubic => "bicubic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    /// Min-max normalized, 3 channels.
    pub input: GridTensor,
    /// 0/1 per cell, 1 channel.
    pub label: GridTensor,
    pub granularity: usize,
    pub source: String,
}

impl EncodedSample {
    pub fn shape(&self) -> (usize, usize) {
        self.input.shape()
    }

    /// Input and label mirrored together.
    pub fn flipped(&self) -> EncodedSample {
        EncodedSample {
            input: self.input.flip_horizontal(),
            label: self.label.flip_horizontal(),
            granularity: self.granularity,
            source: self.source.clone(),
        }
    }
}

/// Encodes one image/mask pair at granularity `n`.
pub fn encode_pair(
    img: &RasterImage,
    mask: &BinaryMask,
    n: usize,
    encoding: Encoding,
    source: &str,
) -> Result<EncodedSample> {
    let img = img.to_rgb();
    if (img.height(), img.width()) != (mask.height(), mask.width()) {
        return Err(Error::mismatch(
            format!("mask of {}x{}", img.height(), img.width()),
            format!("{}x{}", mask.height(), mask.width()),
        ));
    }
    let (input, label) = match encoding {
        Encoding::Grid => {
            let grid = gridize(&img, n)?;
            (encode_image(&img, &grid)?, encode_label(mask, &grid)?)
        }
        Encoding::Bicubic => {
            let (small, small_mask) = downsample_baseline(&img, Some(mask), n)?;
            let small_mask = small_mask.expect("mask requested");
            let (h, w) = (small.height(), small.width());
            (
                GridTensor::new(h, w, 3, small.into_data())?,
                GridTensor::new(h, w, 1, small_mask.data().iter().map(|&v| v as f32).collect())?,
            )
        }
    };
    Ok(EncodedSample {
        input: minmax_normalize(&input),
        label,
        granularity: n,
        source: source.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSample {
    pub source: String,
    pub granularity: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSamples {
    /// Manifest order, then granularity order.
    pub samples: Vec<EncodedSample>,
    pub skipped: Vec<SkippedSample>,
}

impl PreparedSamples {
    pub fn attempted(&self) -> usize {
        self.samples.len() + self.skipped.len()
    }
}

/// Every manifest image at every granularity. Failures are logged and
/// counted, never fatal.
pub fn prepare_samples(
    manifest: &DatasetManifest,
    granularities: &[usize],
    encoding: Encoding,
) -> PreparedSamples {
    let per_image: Vec<Vec<std::result::Result<EncodedSample, SkippedSample>>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let id = entry.id();
            let loaded = load_image(&entry.image).and_then(|img| Ok((img, load_mask(&entry.mask)?)));
            granularities
                .iter()
                .map(|&n| {
                    loaded
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|(img, mask)| {
                            encode_pair(img, mask, n, encoding, &id).map_err(|e| e.to_string())
                        })
                        .map_err(|reason| SkippedSample {
                            source: id.clone(),
                            granularity: n,
                            reason,
                        })
                })
                .collect()
        })
        .collect();
    let mut out = PreparedSamples {
        samples: Vec::new(),
        skipped: Vec::new(),
    };
    for r in per_image.into_iter().flatten() {
        match r {
            Ok(s) => out.samples.push(s),
            Err(s) => {
                warn!("skipping {} at n={}: {}", s.source, s.granularity, s.reason);
                out.skipped.push(s);
            }
        }
    }
    out
}

/// Mirrors input and label together with probability 1/2.
pub fn augment_flip(sample: &EncodedSample, rng: &mut impl Rng) -> EncodedSample {
    if rng.random_bool(0.5) {
        sample.flipped()
    } else {
        sample.clone()
    }
}
