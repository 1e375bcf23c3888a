//! Whole-pipeline evaluation: predict full-resolution saliency maps for a
//! manifest and score them against ground truth.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use super::baseline::{downsample_baseline, upsample_prediction};
use super::metrics::{adaptive_fbeta, mae, majority_vote, pr_curve, FbetaScore, PrPoint, PR_THRESHOLDS};
use crate::codec::{encode_image, encode_label, minmax_normalize, reconstruct, GridTensor};
use crate::error::{Error, Result};
use crate::gridize::{gridize, SuperpixelGrid};
use crate::image::{load_image, load_mask, BinaryMask, RasterImage};
use crate::nn::{load_model, NetworkModel};
use crate::train::DatasetManifest;

/// Something that maps an encoded input to per-cell saliency.
#[derive(Debug, Clone)]
pub enum Predictor {
    Model(Box<NetworkModel>),
    /// Returns the encoded ground truth: the best any cell-level predictor
    /// can do.
    GroundTruth,
    Constant(f32),
}

impl Predictor {
    /// `stub:gt`, `stub:const=<v>`, or a model file path.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if spec == "stub:gt" {
            return Ok(Predictor::GroundTruth);
        }
        if let Some(v) = spec.strip_prefix("stub:const=") {
            let v: f32 = v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad stub constant `{v}`")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("stub constant {v} outside [0, 1]")));
            }
            return Ok(Predictor::Constant(v));
        }
        if spec.starts_with("stub:") {
            return Err(Error::InvalidArgument(format!("unknown stub `{spec}`")));
        }
        Ok(Predictor::Model(Box::new(load_model(spec)?)))
    }

    /// `label` is the encoded ground truth, needed only by the GT stub.
    fn predict(&self, input: &GridTensor, label: Option<&GridTensor>) -> Result<GridTensor> {
        match self {
            Predictor::Model(m) => m.predict_grid(input),
            Predictor::Constant(v) => GridTensor::filled(input.rows(), input.cols(), 1, *v),
            Predictor::GroundTruth => label
                .cloned()
                .ok_or_else(|| Error::InvalidArgument("the ground-truth stub needs a mask".into())),
        }
    }

    fn needs_mask(&self) -> bool {
        matches!(self, Predictor::GroundTruth)
    }
}

/// Encode, predict, reconstruct. Returns the full-resolution map and the
/// grid it is piecewise constant on.
pub fn predict_saliency(
    predictor: &Predictor,
    img: &RasterImage,
    mask: Option<&BinaryMask>,
    n: usize,
) -> Result<(RasterImage, SuperpixelGrid)> {
    let img = img.to_rgb();
    let grid = gridize(&img, n)?;
    let input = minmax_normalize(&encode_image(&img, &grid)?);
    let label = match (predictor.needs_mask(), mask) {
        (true, Some(m)) => Some(encode_label(m, &grid)?),
        _ => None,
    };
    let pred = predictor.predict(&input, label.as_ref())?;
    Ok((reconstruct(&pred, &grid)?, grid))
}

/// The downsampling comparison pipeline for one image.
pub fn predict_baseline(
    predictor: &Predictor,
    img: &RasterImage,
    mask: Option<&BinaryMask>,
    n: usize,
) -> Result<RasterImage> {
    let img = img.to_rgb();
    let want_mask = if predictor.needs_mask() { mask } else { None };
    let (small, small_mask) = downsample_baseline(&img, want_mask, n)?;
    let (h, w) = (small.height(), small.width());
    let input = minmax_normalize(&GridTensor::new(h, w, 3, small.into_data())?);
    let label = small_mask
        .map(|m| GridTensor::new(h, w, 1, m.data().iter().map(|&v| v as f32).collect()))
        .transpose()?;
    let pred = predictor.predict(&input, label.as_ref())?;
    let small_pred = RasterImage::new(h, w, 1, pred.data().iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
    upsample_prediction(&small_pred, img.height(), img.width())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalMode {
    Single(usize),
    /// Majority vote over binarized predictions at each granularity.
    Vote(Vec<usize>),
    /// Bicubic downsampling instead of gridization.
    Baseline(usize),
}

/// Saliency map for one image under `mode`. Vote mode yields the binary
/// voted map.
pub fn predict_for_mode(
    predictor: &Predictor,
    img: &RasterImage,
    mask: Option<&BinaryMask>,
    mode: &EvalMode,
) -> Result<RasterImage> {
    match mode {
        EvalMode::Single(n) => Ok(predict_saliency(predictor, img, mask, *n)?.0),
        EvalMode::Baseline(n) => predict_baseline(predictor, img, mask, *n),
        EvalMode::Vote(ns) => {
            let maps = ns
                .iter()
                .map(|&n| Ok(predict_saliency(predictor, img, mask, n)?.0))
                .collect::<Result<Vec<_>>>()?;
            Ok(majority_vote(&maps)?.to_image())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub image_id: String,
    pub mae: f64,
    pub score: FbetaScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ImageScore>,
    /// Dataset-averaged precision and recall per threshold.
    pub pr: Vec<PrPoint>,
    pub excluded: Vec<(String, String)>,
}

impl EvalReport {
    pub fn mean_mae(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.mae))
    }

    /// Mean of per-image adaptive F-beta.
    pub fn mean_fbeta(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.score.fbeta))
    }

    pub fn mean_precision(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.score.precision))
    }

    pub fn mean_recall(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.score.recall))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# images={} excluded={} mean_mae={:.6} mean_fbeta={:.6}\nimage_id,mae,fbeta,precision,recall,tau\n",
            self.rows.len(),
            self.excluded.len(),
            self.mean_mae(),
            self.mean_fbeta()
        );
        for r in &self.rows {
            let s = &r.score;
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.image_id, r.mae, s.fbeta, s.precision, s.recall, s.tau
            );
        }
        out
    }

    pub fn pr_csv(&self) -> String {
        let mut out = String::from("tau,precision,recall\n");
        for p in &self.pr {
            let _ = writeln!(out, "{:.6},{:.6},{:.6}", p.tau, p.precision, p.recall);
        }
        out
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

type Scored = (ImageScore, Vec<PrPoint>);

fn score_entry(predictor: &Predictor, image: &Path, mask: &Path, id: &str, mode: &EvalMode) -> Result<Scored> {
    let img = load_image(image)?;
    let gt = load_mask(mask)?;
    let s = predict_for_mode(predictor, &img, Some(&gt), mode)?;
    Ok((
        ImageScore {
            image_id: id.to_string(),
            mae: mae(&s, &gt)?,
            score: adaptive_fbeta(&s, &gt)?,
        },
        pr_curve(&s, &gt)?,
    ))
}

/// Scores every manifest entry. Images that fail are logged and excluded.
pub fn evaluate_dataset(predictor: &Predictor, manifest: &DatasetManifest, mode: &EvalMode) -> EvalReport {
    let results: Vec<(String, Result<Scored>)> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let id = e.id();
            let r = score_entry(predictor, &e.image, &e.mask, &id, mode);
            (id, r)
        })
        .collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut pr_sum = vec![(0f64, 0f64); PR_THRESHOLDS];
    for (id, r) in results {
        match r {
            Ok((row, pr)) => {
                for (acc, p) in pr_sum.iter_mut().zip(&pr) {
                    acc.0 += p.precision;
                    acc.1 += p.recall;
                }
                rows.push(row);
            }
            Err(e) => {
                warn!("excluding {id}: {e}");
                excluded.push((id, e.to_string()));
            }
        }
    }
    let n = rows.len().max(1) as f64;
    let pr = pr_sum
        .iter()
        .enumerate()
        .map(|(k, &(p, r))| PrPoint {
            tau: k as f64 / 255.0,
            precision: p / n,
            recall: r / n,
        })
        .collect();
    EvalReport { rows, pr, excluded }
}
