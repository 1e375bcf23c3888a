//! Raster images in `[0, 1]`, binary masks, boundary-strength maps and the
//! handful of pixel operations the pipeline needs: file I/O, luma conversion,
//! Sobel edge strength and Catmull-Rom bicubic resampling.
//!
//! All images are stored row-major with interleaved channels.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageReader};

use crate::error::{Error, Result};

/// Full-resolution image with 1 or 3 channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyImage);
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::mismatch(
                height * width * channels,
                format!("{} values", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Constant image.
    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    /// Builds an image from `f(y, x, c)`; values are clamped into `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Three-channel view; gray images are replicated into R, G and B.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        RasterImage {
            channels: 3,
            data,
            ..*self
        }
    }

    /// Mirror along the column axis.
    pub fn flip_horizontal(&self) -> RasterImage {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                let at = (y * self.width + x) * self.channels;
                data.extend_from_slice(&self.data[at..at + self.channels]);
            }
        }
        RasterImage { data, ..*self }
    }

    /// Writes the image as 8-bit PNG, PGM (P5) or PPM (P6), chosen by the
    /// file extension. Values are quantized as `round(v * 255)`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        write_8bit(path.as_ref(), self.height, self.width, self.channels, &bytes)
    }
}

/// Ground-truth mask with values exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != height * width {
            return Err(Error::mismatch(height * width, format!("{} values", data.len())));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x) as u8);
            }
        }
        Self::new(height, width, data)
    }

    /// Pixels where `v >= 0.5` become salient.
    pub fn from_threshold(img: &RasterImage) -> Result<Self> {
        let gray = to_grayscale(img);
        Self::new(
            gray.height,
            gray.width,
            gray.data.iter().map(|&v| (v >= 0.5) as u8).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn invert(&self) -> BinaryMask {
        BinaryMask {
            data: self.data.iter().map(|&v| 1 - v).collect(),
            ..*self
        }
    }

    pub fn flip_horizontal(&self) -> BinaryMask {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks(self.width) {
            data.extend(row.iter().rev());
        }
        BinaryMask { data, ..*self }
    }

    /// Mask as a one-channel image with values 0.0 / 1.0.
    pub fn to_image(&self) -> RasterImage {
        RasterImage {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| v * 255).collect();
        write_8bit(path.as_ref(), self.height, self.width, 1, &bytes)
    }
}

/// Per-pixel edge strength in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl BoundaryMap {
    /// Wraps raw strengths without renormalizing; values must be finite and
    /// non-negative.
    pub fn from_raw(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::mismatch(height * width, format!("{} values", data.len())));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "boundary strengths must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Loads an 8-bit PNG, PGM or PPM image. Color input yields 3 channels,
/// gray input yields 1; alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let decoded = decode(path)?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    let (channels, bytes) = match decoded.color() {
        ColorType::L8 => (1, decoded.into_luma8().into_raw()),
        ColorType::La8 => (1, decoded.to_luma8().into_raw()),
        ColorType::Rgb8 => (3, decoded.into_rgb8().into_raw()),
        ColorType::Rgba8 => (3, decoded.to_rgb8().into_raw()),
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.to_path_buf(),
                detail: format!("{other:?}"),
            })
        }
    };
    let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
    RasterImage::new(height, width, channels, data)
}

/// Loads a grayscale mask; color masks are reduced to luma first.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    BinaryMask::from_threshold(&load_image(path)?)
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub(crate) fn write_8bit(
    path: &Path,
    height: usize,
    width: usize,
    channels: usize,
    bytes: &[u8],
) -> Result<()> {
    match extension(path).as_str() {
        "pgm" | "ppm" | "pnm" => {
            let magic = if channels == 1 { "P5" } else { "P6" };
            let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
            out.extend_from_slice(bytes);
            fs::write(path, out).map_err(|e| Error::io(path, e))
        }
        "png" => {
            let color = if channels == 1 {
                image::ExtendedColorType::L8
            } else {
                image::ExtendedColorType::Rgb8
            };
            image::save_buffer_with_format(
                path,
                bytes,
                width as u32,
                height as u32,
                color,
                image::ImageFormat::Png,
            )
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
        }
        other => Err(Error::InvalidArgument(format!(
            "unsupported output extension {other:?} (use png, pgm or ppm)"
        ))),
    }
}

/// Writes a 16-bit binary PGM (big-endian samples, maxval 65535).
pub fn write_pgm16(path: impl AsRef<Path>, height: usize, width: usize, values: &[u16]) -> Result<()> {
    let path = path.as_ref();
    assert_eq!(values.len(), height * width);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(values.len() * 2);
    for v in values {
        out.extend_from_slice(&v.to_be_bytes());
    }
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Reads a 16-bit binary PGM written by [`write_pgm16`].
pub fn read_pgm16(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u16>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    let mut at = 0;
    while fields.len() < 4 {
        while at < bytes.len() && bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        let start = at;
        while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        if start == at {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..at]).into_owned());
    }
    at += 1;
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    if fields[0] != "P5" || parse(&fields[3])? != 65535 {
        return Err(Error::Format("not a 16-bit P5 file".into()));
    }
    let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = &bytes[at.min(bytes.len())..];
    if body.len() != width * height * 2 {
        return Err(Error::Format("PGM body has wrong length".into()));
    }
    let values = body
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((height, width, values))
}

/// BT.601 luma; identity on one-channel input.
pub fn to_grayscale(img: &RasterImage) -> RasterImage {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
        .collect();
    RasterImage {
        height: img.height,
        width: img.width,
        channels: 1,
        data,
    }
}

/// Sobel gradient magnitude of the luma image, edge-replicated borders,
/// min-max normalized. A constant image maps to all zeros.
pub fn boundary_map(img: &RasterImage) -> BoundaryMap {
    let gray = to_grayscale(img);
    let (h, w) = (gray.height, gray.width);
    let at = |y: isize, x: isize| -> f32 {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        gray.data[y * w + x]
    };
    let mut mag = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            let gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
            mag.push((gx * gx + gy * gy).sqrt());
        }
    }
    let lo = mag.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = mag.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = hi - lo;
    // Treat float noise on flat images as no signal.
    if span <= 1e-6 {
        mag.iter_mut().for_each(|v| *v = 0.0);
    } else {
        mag.iter_mut().for_each(|v| *v = (*v - lo) / span);
    }
    BoundaryMap {
        height: h,
        width: w,
        data: mag,
    }
}

/// Keys cubic convolution kernel with a = -0.5 (Catmull-Rom).
fn catmull_rom(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Tap indices and normalized weights for each output sample along one axis.
/// When shrinking, the kernel is stretched by the scale factor so that the
/// result is low-pass filtered rather than aliased.
fn resample_taps(src_len: usize, dst_len: usize) -> Vec<(Vec<usize>, Vec<f64>)> {
    let scale = src_len as f64 / dst_len as f64;
    let stretch = scale.max(1.0);
    let support = 2.0 * stretch;
    (0..dst_len)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale - 0.5;
            let first = (center - support).floor() as isize + 1;
            let last = (center + support).ceil() as isize - 1;
            let mut idx = Vec::new();
            let mut wts = Vec::new();
            for i in first..=last {
                let wt = catmull_rom((i as f64 - center) / stretch);
                if wt != 0.0 {
                    idx.push(i.clamp(0, src_len as isize - 1) as usize);
                    wts.push(wt);
                }
            }
            let sum: f64 = wts.iter().sum();
            wts.iter_mut().for_each(|w| *w /= sum);
            (idx, wts)
        })
        .collect()
}

/// Separable Catmull-Rom bicubic resampling with edge replication; output
/// clamped to `[0, 1]`.
pub fn resize_bicubic(img: &RasterImage, new_h: usize, new_w: usize) -> Result<RasterImage> {
    if new_h == 0 || new_w == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target {new_h}x{new_w} must be at least 1x1"
        )));
    }
    let ch = img.channels;
    let col_taps = resample_taps(img.width, new_w);
    let row_taps = resample_taps(img.height, new_h);

    // Horizontal pass: height x new_w.
    let mut tmp = vec![0f64; img.height * new_w * ch];
    for y in 0..img.height {
        for (ox, (idx, wts)) in col_taps.iter().enumerate() {
            for c in 0..ch {
                let mut acc = 0.0;
                for (&x, &wt) in idx.iter().zip(wts) {
                    acc += wt * img.data[(y * img.width + x) * ch + c] as f64;
                }
                tmp[(y * new_w + ox) * ch + c] = acc;
            }
        }
    }
    let mut data = vec![0f32; new_h * new_w * ch];
    for (oy, (idx, wts)) in row_taps.iter().enumerate() {
        for ox in 0..new_w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (&y, &wt) in idx.iter().zip(wts) {
                    acc += wt * tmp[(y * new_w + ox) * ch + c];
                }
                data[(oy * new_w + ox) * ch + c] = acc.clamp(0.0, 1.0) as f32;
            }
        }
    }
    RasterImage::new(new_h, new_w, ch, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_weights() {
        let red = RasterImage::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((to_grayscale(&red).get(0, 0, 0) - 0.299).abs() < 1e-6);
        let white = RasterImage::filled(2, 2, 3, 1.0).unwrap();
        assert!(to_grayscale(&white).data().iter().all(|&v| (v - 1.0).abs() < 1e-6));
        let gray = RasterImage::from_fn(3, 3, 1, |y, x, _| (y * 3 + x) as f32 / 9.0).unwrap();
        assert_eq!(to_grayscale(&gray), gray);
    }

    #[test]
    fn constructor_rejects_out_of_range_and_bad_shapes() {
        assert!(RasterImage::new(1, 1, 1, vec![1.5]).is_err());
        assert!(RasterImage::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(RasterImage::new(0, 2, 1, vec![]).is_err());
        assert!(RasterImage::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(BinaryMask::new(1, 2, vec![0, 2]).is_err());
    }

    #[test]
    fn boundary_of_constant_image_is_zero() {
        let img = RasterImage::filled(10, 12, 3, 0.4).unwrap();
        assert!(boundary_map(&img).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boundary_of_vertical_step_peaks_beside_the_step() {
        let k = 6;
        let img = RasterImage::from_fn(10, 14, 1, |_, x, _| if x >= k { 1.0 } else { 0.0 }).unwrap();
        let b = boundary_map(&img);
        for y in 0..10 {
            for x in 0..14 {
                let v = b.get(y, x);
                if x == k - 1 || x == k {
                    assert_eq!(v, 1.0);
                } else {
                    assert_eq!(v, 0.0, "({y},{x})");
                }
            }
        }
    }

    #[test]
    fn boundary_of_ramp_is_uniform_in_interior() {
        let img = RasterImage::from_fn(9, 9, 1, |_, x, _| x as f32 / 8.0).unwrap();
        let b = boundary_map(&img);
        // Interior Sobel response of a ramp is constant and is the maximum;
        // replicated border columns respond at half strength.
        for y in 0..9 {
            for x in 1..8 {
                assert!((b.get(y, x) - 1.0).abs() < 1e-5);
            }
            assert_eq!(b.get(y, 0), 0.0);
        }
    }

    #[test]
    fn resize_identity_and_constants() {
        let img = RasterImage::from_fn(7, 5, 3, |y, x, c| ((y * 5 + x) * 3 + c) as f32 / 105.0).unwrap();
        let same = resize_bicubic(&img, 7, 5).unwrap();
        for (a, b) in img.data().iter().zip(same.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        let flat = RasterImage::filled(9, 13, 1, 0.37).unwrap();
        for (h, w) in [(1, 1), (4, 20), (30, 3)] {
            let r = resize_bicubic(&flat, h, w).unwrap();
            assert!(r.data().iter().all(|&v| (v - 0.37).abs() < 1e-6));
        }
        assert!(resize_bicubic(&flat, 0, 3).is_err());
    }

    #[test]
    fn resize_ramp_round_trip_interior() {
        let img = RasterImage::from_fn(4, 4, 1, |_, x, _| x as f32 / 3.0).unwrap();
        let small = resize_bicubic(&img, 2, 2).unwrap();
        let back = resize_bicubic(&small, 4, 4).unwrap();
        for y in 1..3 {
            for x in 1..3 {
                assert!((back.get(y, x, 0) - img.get(y, x, 0)).abs() < 0.05);
            }
        }
    }

    #[test]
    fn catmull_rom_interpolates_and_sums_to_one() {
        assert_eq!(catmull_rom(0.0), 1.0);
        assert_eq!(catmull_rom(1.0), 0.0);
        assert_eq!(catmull_rom(2.0), 0.0);
        for k in 0..10 {
            let f = k as f64 / 10.0;
            let s: f64 = (-1..=2).map(|i| catmull_rom(i as f64 - f)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flips_are_involutions() {
        let img = RasterImage::from_fn(3, 4, 3, |y, x, c| (y + 2 * x + c) as f32 / 12.0).unwrap();
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
        assert_eq!(img.flip_horizontal().get(1, 0, 2), img.get(1, 3, 2));
        let m = BinaryMask::from_fn(3, 4, |y, x| (x + y) % 3 == 0).unwrap();
        assert_eq!(m.flip_horizontal().flip_horizontal(), m);
    }
}
