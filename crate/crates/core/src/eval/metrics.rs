//! Saliency-map scores: MAE, threshold-swept precision/recall, adaptive
//! F-beta, and majority voting over binarized maps.

use crate::error::{Error, Result};
use crate::image::{BinaryMask, RasterImage};

pub const BETA_SQ: f64 = 0.3;
pub const PR_THRESHOLDS: usize = 256;
/// Upper clamp for the adaptive threshold; keeps the prediction set of a
/// bright map from collapsing to empty.
pub const MAX_ADAPTIVE_TAU: f64 = 1.0 - 1.0 / 510.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbetaScore {
    pub fbeta: f64,
    pub precision: f64,
    pub recall: f64,
    pub tau: f64,
}

fn check_pair(s: &RasterImage, gt: &BinaryMask) -> Result<()> {
    if s.channels() != 1 {
        return Err(Error::mismatch("1-channel saliency map", format!("{} channels", s.channels())));
    }
    if (s.height(), s.width()) != (gt.height(), gt.width()) {
        return Err(Error::mismatch(
            format!("{}x{}", gt.height(), gt.width()),
            format!("{}x{}", s.height(), s.width()),
        ));
    }
    Ok(())
}

fn check_positive(gt: &BinaryMask) -> Result<usize> {
    match gt.count_ones() {
        0 => Err(Error::InvalidArgument(
            "ground truth has no salient pixel; precision and recall are undefined".into(),
        )),
        n => Ok(n),
    }
}

/// Mean absolute difference between the map and the 0/1 ground truth.
pub fn mae(s: &RasterImage, gt: &BinaryMask) -> Result<f64> {
    check_pair(s, gt)?;
    let total: f64 = s
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&v, &g)| (v as f64 - g as f64).abs())
        .sum();
    Ok(total / s.data().len() as f64)
}

pub fn fbeta(precision: f64, recall: f64) -> f64 {
    let denom = BETA_SQ * precision + recall;
    if denom <= 0.0 {
        0.0
    } else {
        (1.0 + BETA_SQ) * precision * recall / denom
    }
}

/// Number of thresholds `k / 255`, `k = 0..=255`, lying strictly below `v`.
fn thresholds_below(v: f32) -> usize {
    let v = v as f64;
    let mut b = ((v * 255.0).floor().max(0.0) as usize).min(PR_THRESHOLDS);
    while b < PR_THRESHOLDS && (b as f64 / 255.0) < v {
        b += 1;
    }
    while b > 0 && ((b - 1) as f64 / 255.0) >= v {
        b -= 1;
    }
    b
}

/// Precision and recall of `S > tau` for `tau = k / 255`, `k = 0..=255`.
/// Precision of an empty prediction is 0.
pub fn pr_curve(s: &RasterImage, gt: &BinaryMask) -> Result<Vec<PrPoint>> {
    check_pair(s, gt)?;
    let positives = check_positive(gt)? as f64;
    // hist[b]: pixels exceeding exactly the first b thresholds.
    let mut hist_all = vec![0u64; PR_THRESHOLDS + 1];
    let mut hist_hit = vec![0u64; PR_THRESHOLDS + 1];
    for (&v, &g) in s.data().iter().zip(gt.data()) {
        let b = thresholds_below(v);
        hist_all[b] += 1;
        hist_hit[b] += g as u64;
    }
    let (mut predicted, mut hits) = (0u64, 0u64);
    let mut out = vec![
        PrPoint {
            tau: 0.0,
            precision: 0.0,
            recall: 0.0
        };
        PR_THRESHOLDS
    ];
    // Pixels counted in bins > k exceed threshold k.
    for k in (0..PR_THRESHOLDS).rev() {
        predicted += hist_all[k + 1];
        hits += hist_hit[k + 1];
        out[k] = PrPoint {
            tau: k as f64 / 255.0,
            precision: if predicted == 0 { 0.0 } else { hits as f64 / predicted as f64 },
            recall: hits as f64 / positives,
        };
    }
    Ok(out)
}

/// Twice the mean saliency, clamped below one.
pub fn adaptive_threshold(s: &RasterImage) -> f64 {
    let mean = s.data().iter().map(|&v| v as f64).sum::<f64>() / s.data().len().max(1) as f64;
    (2.0 * mean).min(MAX_ADAPTIVE_TAU)
}

pub fn binarize(s: &RasterImage, tau: f64) -> Result<BinaryMask> {
    BinaryMask::new(
        s.height(),
        s.width(),
        s.data().iter().map(|&v| (v as f64 > tau) as u8).collect(),
    )
}

/// F-beta of the map binarized at its adaptive threshold.
pub fn adaptive_fbeta(s: &RasterImage, gt: &BinaryMask) -> Result<FbetaScore> {
    check_pair(s, gt)?;
    let positives = check_positive(gt)? as f64;
    let tau = adaptive_threshold(s);
    let (mut predicted, mut hits) = (0u64, 0u64);
    for (&v, &g) in s.data().iter().zip(gt.data()) {
        if v as f64 > tau {
            predicted += 1;
            hits += g as u64;
        }
    }
    let precision = if predicted == 0 { 0.0 } else { hits as f64 / predicted as f64 };
    let recall = hits as f64 / positives;
    Ok(FbetaScore {
        fbeta: fbeta(precision, recall),
        precision,
        recall,
        tau,
    })
}

/// Each map is binarized at its own adaptive threshold; a pixel is salient
/// when at least `ceil((k + 1) / 2)` of the `k` maps agree.
pub fn majority_vote(maps: &[RasterImage]) -> Result<BinaryMask> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InvalidArgument("majority vote needs at least one map".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut votes = vec![0usize; h * w];
    for m in maps {
        if (m.height(), m.width(), m.channels()) != (h, w, 1) {
            return Err(Error::mismatch(
                format!("{h}x{w}x1"),
                format!("{}x{}x{}", m.height(), m.width(), m.channels()),
            ));
        }
        let tau = adaptive_threshold(m);
        for (v, &s) in votes.iter_mut().zip(m.data()) {
            *v += (s as f64 > tau) as usize;
        }
    }
    let need = (maps.len() + 2) / 2;
    BinaryMask::new(h, w, votes.iter().map(|&v| (v >= need) as u8).collect())
}
