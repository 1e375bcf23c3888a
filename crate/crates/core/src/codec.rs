//! Mean-color encoding of images onto a superpixel lattice, majority-vote
//! encoding of masks, and replication back to full resolution.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gridize::SuperpixelGrid;
use crate::image::{BinaryMask, RasterImage};

const BLOB_MAGIC: &[u8; 4] = b"GRDT";

/// `R x C x channels` values on the lattice, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTensor {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f32>,
}

impl GridTensor {
    pub fn new(rows: usize, cols: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid tensor dims must be positive, got {rows}x{cols}x{channels}"
            )));
        }
        if data.len() != rows * cols * channels {
            return Err(Error::mismatch(
                rows * cols * channels,
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn filled(rows: usize, cols: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(rows, cols, channels, vec![value; rows * cols * channels])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, k: usize) -> f32 {
        self.data[(r * self.cols + c) * self.channels + k]
    }

    /// Mirror along the column axis.
    pub fn flip_horizontal(&self) -> GridTensor {
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.rows {
            for c in (0..self.cols).rev() {
                let at = (r * self.cols + c) * self.channels;
                data.extend_from_slice(&self.data[at..at + self.channels]);
            }
        }
        GridTensor { data, ..*self }
    }

    /// Binary blob: `GRDT`, little-endian `u32` rows, cols, channels, then
    /// little-endian `f32` values row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.data.len());
        out.extend_from_slice(BLOB_MAGIC);
        for v in [self.rows, self.cols, self.channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != BLOB_MAGIC {
            return Err(Error::Format("missing GRDT header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (rows, cols, channels) = (word(0), word(1), word(2));
        let body = &bytes[16..];
        if body.len() != rows * cols * channels * 4 {
            return Err(Error::Format(format!(
                "GRDT body has {} bytes, header implies {}",
                body.len(),
                rows * cols * channels * 4
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(rows, cols, channels, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

fn check_dims(grid: &SuperpixelGrid, height: usize, width: usize) -> Result<()> {
    if grid.height() != height || grid.width() != width {
        return Err(Error::mismatch(
            format!("{}x{} (grid)", grid.height(), grid.width()),
            format!("{height}x{width}"),
        ));
    }
    Ok(())
}

/// Per-cell channel means in 64-bit accumulation.
fn cell_means(values: impl Fn(usize, usize) -> f64, channels: usize, grid: &SuperpixelGrid) -> Vec<f64> {
    let mut sums = vec![0f64; grid.dims().cells() * channels];
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let l = grid.label(y, x);
            for k in 0..channels {
                sums[l * channels + k] += values(y * grid.width() + x, k);
            }
        }
    }
    for (i, s) in sums.iter_mut().enumerate() {
        *s /= grid.cell_sizes()[i / channels] as f64;
    }
    sums
}

/// Each cell takes the mean color of its pixels.
pub fn encode_image(img: &RasterImage, grid: &SuperpixelGrid) -> Result<GridTensor> {
    check_dims(grid, img.height(), img.width())?;
    let ch = img.channels();
    let data = img.data();
    let means = cell_means(|p, k| data[p * ch + k] as f64, ch, grid);
    let dims = grid.dims();
    GridTensor::new(
        dims.rows,
        dims.cols,
        ch,
        means.into_iter().map(|m| m as f32).collect(),
    )
}

/// A cell is salient when at least half of its pixels are.
pub fn encode_label(mask: &BinaryMask, grid: &SuperpixelGrid) -> Result<GridTensor> {
    check_dims(grid, mask.height(), mask.width())?;
    let data = mask.data();
    let means = cell_means(|p, _| data[p] as f64, 1, grid);
    let dims = grid.dims();
    GridTensor::new(
        dims.rows,
        dims.cols,
        1,
        means.into_iter().map(|m| if m >= 0.5 { 1.0 } else { 0.0 }).collect(),
    )
}

/// One affine map over all cells and channels so that the minimum becomes 0
/// and the maximum 1. A constant tensor becomes all zeros.
pub fn minmax_normalize(x: &GridTensor) -> GridTensor {
    let lo = x.data.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = x.data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let data = if hi > lo {
        let span = (hi - lo) as f64;
        x.data
            .iter()
            .map(|&v| ((v - lo) as f64 / span) as f32)
            .collect()
    } else {
        vec![0.0; x.data.len()]
    };
    GridTensor { data, ..*x }
}

/// Every pixel takes the value of its cell.
pub fn reconstruct(pred: &GridTensor, grid: &SuperpixelGrid) -> Result<RasterImage> {
    let dims = grid.dims();
    if pred.shape() != (dims.rows, dims.cols) {
        return Err(Error::mismatch(
            format!("{}x{}", dims.rows, dims.cols),
            format!("{}x{}", pred.rows, pred.cols),
        ));
    }
    if pred.channels != 1 && pred.channels != 3 {
        return Err(Error::InvalidArgument(format!(
            "can only reconstruct 1- or 3-channel tensors, got {}",
            pred.channels
        )));
    }
    let ch = pred.channels;
    let mut data = Vec::with_capacity(grid.height() * grid.width() * ch);
    for &l in grid.labels() {
        let at = l as usize * ch;
        data.extend(pred.data[at..at + ch].iter().map(|v| v.clamp(0.0, 1.0)));
    }
    RasterImage::new(grid.height(), grid.width(), ch, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridize::GridDims;

    fn quad_grid() -> SuperpixelGrid {
        SuperpixelGrid::regular(4, 4, GridDims::new(2, 2).unwrap()).unwrap()
    }

    #[test]
    fn constant_image_encodes_to_constant() {
        let img = RasterImage::filled(12, 15, 3, 0.625).unwrap();
        let grid = SuperpixelGrid::regular(12, 15, GridDims::new(3, 4).unwrap()).unwrap();
        let x = encode_image(&img, &grid).unwrap();
        assert!(x.data().iter().all(|&v| (v - 0.625).abs() < 1e-7));
    }

    #[test]
    fn single_cell_mean() {
        let img = RasterImage::new(2, 2, 1, vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let grid = SuperpixelGrid::regular(2, 2, GridDims::new(1, 1).unwrap()).unwrap();
        let x = encode_image(&img, &grid).unwrap();
        assert!((x.get(0, 0, 0) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn quadrants_encode_to_their_constants() {
        let q = [0.1f32, 0.3, 0.7, 0.9];
        let img = RasterImage::from_fn(4, 4, 1, |y, x, _| q[(y / 2) * 2 + x / 2]).unwrap();
        let grid = quad_grid();
        let x = encode_image(&img, &grid).unwrap();
        assert_eq!(x.data(), &q);
        assert_eq!(reconstruct(&x, &grid).unwrap(), img);
    }

    #[test]
    fn label_threshold_cases() {
        let grid = SuperpixelGrid::regular(2, 4, GridDims::new(1, 1).unwrap()).unwrap();
        let three = BinaryMask::new(2, 4, vec![1, 1, 1, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(encode_label(&three, &grid).unwrap().data(), &[0.0]);
        let half = BinaryMask::new(2, 4, vec![1, 1, 1, 1, 0, 0, 0, 0]).unwrap();
        assert_eq!(encode_label(&half, &grid).unwrap().data(), &[1.0]);
        let full = BinaryMask::new(2, 4, vec![1; 8]).unwrap();
        assert_eq!(encode_label(&full, &grid).unwrap().data(), &[1.0]);
    }

    #[test]
    fn normalization_cases() {
        let t = GridTensor::new(1, 3, 1, vec![0.2, 0.4, 0.8]).unwrap();
        let n = minmax_normalize(&t);
        let expect = [0.0, 1.0 / 3.0, 1.0];
        for (a, b) in n.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-6);
        }
        let flat = GridTensor::filled(2, 2, 3, 0.4).unwrap();
        assert!(minmax_normalize(&flat).data().iter().all(|&v| v == 0.0));
        let t = GridTensor::new(2, 1, 2, vec![0.25, 0.5, 0.75, 0.3]).unwrap();
        let n = minmax_normalize(&t);
        assert_eq!(n.data().iter().copied().fold(f32::INFINITY, f32::min), 0.0);
        assert_eq!(n.data().iter().copied().fold(f32::NEG_INFINITY, f32::max), 1.0);
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let grid = quad_grid();
        let img = RasterImage::filled(5, 4, 1, 0.0).unwrap();
        assert!(encode_image(&img, &grid).is_err());
        let mask = BinaryMask::new(4, 5, vec![0; 20]).unwrap();
        assert!(encode_label(&mask, &grid).is_err());
        let pred = GridTensor::filled(3, 2, 1, 0.5).unwrap();
        assert!(reconstruct(&pred, &grid).is_err());
    }

    #[test]
    fn single_cell_reconstructs_to_constant() {
        let grid = SuperpixelGrid::regular(9, 8, GridDims::new(1, 1).unwrap()).unwrap();
        let pred = GridTensor::filled(1, 1, 1, 0.3).unwrap();
        let s = reconstruct(&pred, &grid).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn blob_round_trip_and_header() {
        let t = GridTensor::new(2, 3, 1, vec![0.0, 0.1, 0.2, 0.3, 0.4, 1.0]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"GRDT");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(GridTensor::from_bytes(&bytes).unwrap(), t);
        assert!(GridTensor::from_bytes(&bytes[..30]).is_err());
        assert!(GridTensor::from_bytes(b"NOPE0000000000000").is_err());
    }
}
