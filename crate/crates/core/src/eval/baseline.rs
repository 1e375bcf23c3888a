//! The plain-downsampling comparison pipeline: bicubic resize to a grid of
//! about `n` pixels, and bicubic upsampling of predictions.

use crate::error::Result;
use crate::gridize::aspect_dims;
use crate::image::{resize_bicubic, BinaryMask, RasterImage};

/// Image and mask resized to about `target_n` pixels with the aspect ratio
/// kept; the mask is thresholded at 0.5 after resampling.
pub fn downsample_baseline(
    img: &RasterImage,
    mask: Option<&BinaryMask>,
    target_n: usize,
) -> Result<(RasterImage, Option<BinaryMask>)> {
    let (h, w) = aspect_dims(img.height(), img.width(), target_n);
    let small = resize_bicubic(img, h, w)?;
    let small_mask = match mask {
        Some(m) => Some(BinaryMask::from_threshold(&resize_bicubic(&m.to_image(), h, w)?)?),
        None => None,
    };
    Ok((small, small_mask))
}

/// Bicubic upsampling back to full resolution, clamped to `[0, 1]`.
pub fn upsample_prediction(pred: &RasterImage, height: usize, width: usize) -> Result<RasterImage> {
    resize_bicubic(pred, height, width)
}
