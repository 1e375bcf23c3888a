//! Desk-scale stand-in for a salient-object dataset: smooth cluttered
//! backgrounds with one or two convex objects whose color differs from the
//! local background by at least 0.3 in one channel.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::manifest::{DatasetManifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, RasterImage};

const SIDES: [usize; 5] = [192, 224, 256, 288, 320];
const MIN_FRACTION: f64 = 0.05;
const MAX_FRACTION: f64 = 0.5;
/// Gap between the offset channel's background band and the object value.
const OFFSET_GAP: f32 = 0.35;
const BAND: f32 = 0.3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SynthOptions {
    /// Attach 1-3 thin bars (2-4 px wide) to the main object.
    pub thin_parts: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub image: RasterImage,
    pub mask: BinaryMask,
    /// The image as it would look without the objects.
    pub background: RasterImage,
    /// Channel in which every object is offset from the background.
    pub offset_channel: usize,
}

#[derive(Debug, Clone)]
enum Shape {
    Ellipse {
        cy: f64,
        cx: f64,
        ry: f64,
        rx: f64,
        cos: f64,
        sin: f64,
    },
    /// Convex polygon, `(y, x)` vertices in boundary order.
    Polygon(Vec<(f64, f64)>),
}

impl Shape {
    fn contains(&self, y: f64, x: f64) -> bool {
        match self {
            Shape::Ellipse {
                cy,
                cx,
                ry,
                rx,
                cos,
                sin,
            } => {
                let (dy, dx) = (y - cy, x - cx);
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Polygon(pts) => {
                let n = pts.len();
                let mut sign = 0.0f64;
                for i in 0..n {
                    let (y0, x0) = pts[i];
                    let (y1, x1) = pts[(i + 1) % n];
                    let cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
                    if cross != 0.0 {
                        if sign != 0.0 && cross.signum() != sign {
                            return false;
                        }
                        sign = cross.signum();
                    }
                }
                true
            }
        }
    }
}

fn random_convex(rng: &mut ChaCha8Rng, cy: f64, cx: f64, r: f64) -> Shape {
    if rng.random_bool(0.5) {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        Shape::Ellipse {
            cy,
            cx,
            ry: r * rng.random_range(0.6..1.0),
            rx: r * rng.random_range(0.6..1.0),
            cos: angle.cos(),
            sin: angle.sin(),
        }
    } else {
        // Vertices at sorted angles on a circle are always convex.
        let n = rng.random_range(5..=8);
        let mut angles: Vec<f64> = (0..n)
            .map(|i| (i as f64 + rng.random_range(0.2..0.8)) * std::f64::consts::TAU / n as f64)
            .collect();
        angles.sort_by(f64::total_cmp);
        Shape::Polygon(angles.iter().map(|a| (cy + r * a.sin(), cx + r * a.cos())).collect())
    }
}

fn bar(cy: f64, cx: f64, angle: f64, length: f64, width: f64) -> Shape {
    let (dy, dx) = (angle.sin(), angle.cos());
    let (ny, nx) = (dx * width / 2.0, -dy * width / 2.0);
    let (ey, ex) = (cy + dy * length, cx + dx * length);
    Shape::Polygon(vec![
        (cy + ny, cx + nx),
        (ey + ny, ex + nx),
        (ey - ny, ex - nx),
        (cy - ny, cx - nx),
    ])
}

/// Bilinear value noise on a `cells x cells` lattice, in `[0, 1]`.
fn value_noise(rng: &mut ChaCha8Rng, h: usize, w: usize, cells: usize) -> Vec<f32> {
    let lattice: Vec<f32> = (0..(cells + 1) * (cells + 1)).map(|_| rng.random()).collect();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let fy = y as f32 / (h - 1) as f32 * cells as f32;
        let iy = (fy as usize).min(cells - 1);
        let ty = fy - iy as f32;
        for x in 0..w {
            let fx = x as f32 / (w - 1) as f32 * cells as f32;
            let ix = (fx as usize).min(cells - 1);
            let tx = fx - ix as f32;
            let at = |a: usize, b: usize| lattice[a * (cells + 1) + b];
            out.push(
                at(iy, ix) * (1.0 - ty) * (1.0 - tx)
                    + at(iy + 1, ix) * ty * (1.0 - tx)
                    + at(iy, ix + 1) * (1.0 - ty) * tx
                    + at(iy + 1, ix + 1) * ty * tx,
            );
        }
    }
    out
}

/// Gradient plus value noise, in `[0, 1]`.
fn smooth_field(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<f32> {
    let a: f32 = rng.random();
    let (fy, fx) = (rng.random_bool(0.5), rng.random_bool(0.5));
    let cells = rng.random_range(3..=6);
    let noise = value_noise(rng, h, w, cells);
    (0..h * w)
        .map(|p| {
            let (y, x) = (p / w, p % w);
            let mut gy = y as f32 / (h - 1) as f32;
            let mut gx = x as f32 / (w - 1) as f32;
            if fy {
                gy = 1.0 - gy;
            }
            if fx {
                gx = 1.0 - gx;
            }
            0.5 * (a * gy + (1.0 - a) * gx) + 0.5 * noise[p]
        })
        .collect()
}

/// Draws the object layout until the mask covers an allowed fraction.
/// Returns the number of colored shapes and, per pixel, the index + 1 of the
/// color painted there (0 for background). Bars take the main shape's color.
fn layout(rng: &mut ChaCha8Rng, h: usize, w: usize, opts: &SynthOptions) -> (usize, Vec<u8>) {
    let side = h.min(w) as f64;
    loop {
        let r = side * rng.random_range(0.15..0.35);
        let margin = 0.6 * r;
        let cy = rng.random_range(margin..h as f64 - margin);
        let cx = rng.random_range(margin..w as f64 - margin);
        let mut shapes = vec![(random_convex(rng, cy, cx, r), 0u8)];
        if opts.thin_parts {
            for _ in 0..rng.random_range(1..=3) {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let length = r * 0.5 + side * rng.random_range(0.15..0.3);
                let width = rng.random_range(2.0..4.0);
                shapes.push((bar(cy, cx, a, length, width), 0));
            }
        }
        let mut colors = 1;
        if rng.random_bool(0.5) {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let d = r * rng.random_range(0.3..0.8);
            let r2 = r * rng.random_range(0.5..0.9);
            shapes.push((random_convex(rng, cy + d * a.sin(), cx + d * a.cos(), r2), 1));
            colors = 2;
        }
        // Later shapes paint over earlier ones.
        let mut owner = vec![0u8; h * w];
        for (s, color) in &shapes {
            for y in 0..h {
                for x in 0..w {
                    if s.contains(y as f64 + 0.5, x as f64 + 0.5) {
                        owner[y * w + x] = color + 1;
                    }
                }
            }
        }
        let frac = owner.iter().filter(|&&o| o > 0).count() as f64 / (h * w) as f64;
        if (MIN_FRACTION..=MAX_FRACTION).contains(&frac) {
            return (colors, owner);
        }
    }
}

/// Image `index` of the dataset with the given seed.
pub fn synthesize(seed: u64, index: u64, opts: &SynthOptions) -> SyntheticImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let h = SIDES[rng.random_range(0..SIDES.len())];
    let w = SIDES[rng.random_range(0..SIDES.len())];
    let k = rng.random_range(0..3);

    // The offset channel's background stays inside [lo, lo + BAND].
    let lo: f32 = rng.random_range(0.05..0.65);
    let mut bg = vec![0f32; h * w * 3];
    for c in 0..3 {
        let field = smooth_field(&mut rng, h, w);
        let (base, amp) = if c == k {
            (lo, BAND)
        } else {
            (rng.random_range(0.05..0.5), rng.random_range(0.2..0.45))
        };
        for p in 0..h * w {
            bg[p * 3 + c] = base + amp * field[p];
        }
    }
    let fine: Vec<f32> = (0..h * w * 3).map(|_| rng.random_range(-0.02..0.02)).collect();

    let (color_count, owner) = layout(&mut rng, h, w, opts);
    let colors: Vec<[f32; 3]> = (0..color_count)
        .map(|_| {
            let mut col = [0f32; 3];
            for (c, v) in col.iter_mut().enumerate() {
                *v = if c != k {
                    rng.random_range(0.05..0.95)
                } else if lo > OFFSET_GAP {
                    rng.random_range(0.0..=lo - OFFSET_GAP)
                } else {
                    rng.random_range(lo + BAND + OFFSET_GAP..=1.0)
                };
            }
            col
        })
        .collect();
    let texture = value_noise(&mut rng, h, w, 8);

    let mut img = vec![0f32; h * w * 3];
    let mut background = vec![0f32; h * w * 3];
    for p in 0..h * w {
        for c in 0..3 {
            let b = (bg[p * 3 + c] + fine[p * 3 + c]).clamp(0.0, 1.0);
            background[p * 3 + c] = b;
            img[p * 3 + c] = match owner[p] {
                0 => b,
                o => {
                    let v = colors[o as usize - 1][c] + 0.06 * (texture[p] - 0.5) + fine[p * 3 + c];
                    v.clamp(0.0, 1.0)
                }
            };
        }
    }
    SyntheticImage {
        image: RasterImage::new(h, w, 3, img).expect("values clamped"),
        mask: BinaryMask::new(h, w, owner.iter().map(|&o| (o > 0) as u8).collect()).expect("sized"),
        background: RasterImage::new(h, w, 3, background).expect("values clamped"),
        offset_channel: k,
    }
}

/// Writes `count` image/mask pairs plus `manifest.txt` into `out_dir`.
pub fn generate_synthetic(
    count: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
    opts: &SynthOptions,
) -> Result<DatasetManifest> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let entries = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = synthesize(seed, i as u64, opts);
            let entry = ManifestEntry {
                image: out_dir.join(format!("synth_{i:05}.png")),
                mask: out_dir.join(format!("synth_{i:05}_mask.png")),
            };
            s.image.save(&entry.image)?;
            s.mask.save(&entry.mask)?;
            Ok(entry)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest { entries };
    manifest.save(out_dir.join("manifest.txt"))?;
    Ok(manifest)
}
