//! Regular superpixel lattice ("gridization").
//!
//! Seeds are laid out on a regular `(R+1) x (C+1)` junction lattice and each
//! one is pulled toward the strongest boundary response inside a small window
//! around it. Neighbouring junctions are then joined by monotone paths that
//! maximize the summed boundary strength, found exactly by dynamic
//! programming inside a corridor that keeps paths of different lattice lines
//! apart. The horizontal and vertical paths cut the image into `R x C` cells
//! that keep the 4-neighbour structure of a pixel grid.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{boundary_map, BoundaryMap, RasterImage};

/// Smallest image side accepted by [`gridize`].
pub const MIN_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
}

impl GridDims {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid dims must be positive, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

/// Maps a requested superpixel count to lattice dimensions that follow the
/// image aspect ratio.
pub fn choose_dims(height: usize, width: usize, target_n: usize) -> Result<GridDims> {
    if target_n < 4 {
        return Err(Error::InvalidArgument(format!(
            "superpixel count must be at least 4, got {target_n}"
        )));
    }
    if height == 0 || width == 0 {
        return Err(Error::EmptyImage);
    }
    let (rows, cols) = aspect_dims(height, width, target_n);
    if height < 2 * rows || width < 2 * cols {
        return Err(Error::InvalidArgument(format!(
            "{height}x{width} image is too small for a {rows}x{cols} grid \
             (needs at least 2 pixels per cell side)"
        )));
    }
    GridDims::new(rows, cols)
}

/// Aspect-preserving `(rows, cols)` with about `target_n` cells. Shared with
/// the downsampling baseline.
pub fn aspect_dims(height: usize, width: usize, target_n: usize) -> (usize, usize) {
    let rows = ((target_n as f64 * height as f64 / width as f64).sqrt().round() as usize).max(2);
    let cols = ((target_n as f64 / rows as f64).round() as usize).max(2);
    (rows, cols)
}

/// `(R+1) x (C+1)` junction coordinates, stored row-major as `(y, x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionSet {
    dims: GridDims,
    positions: Vec<(usize, usize)>,
}

impl JunctionSet {
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> (usize, usize) {
        self.positions[r * (self.dims.cols + 1) + c]
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }
}

fn seed(index: usize, parts: usize, len: usize) -> usize {
    (index as f64 * (len - 1) as f64 / parts as f64).round() as usize
}

/// Regular seeds, each relocated to the boundary maximum inside its window.
///
/// The window of an interior junction is its corridor cell: the lateral
/// positions of its horizontal line's corridor crossed with those of its
/// vertical line's corridor (see [`corridor`]). Corridors tile the image, so
/// windows are disjoint and junction ordering is preserved. Border junctions
/// slide along their border, corners stay put. Junctions are visited in
/// raster order and a candidate is only accepted when a unit-step path can
/// still join it to the already placed left and upper neighbours. Ties go to
/// the smallest squared displacement, then the smallest `y`, then the
/// smallest `x`.
pub fn place_and_relocate_junctions(bmap: &BoundaryMap, dims: GridDims) -> Result<JunctionSet> {
    let (h, w) = (bmap.height(), bmap.width());
    if h < 2 * dims.rows || w < 2 * dims.cols {
        return Err(Error::mismatch(
            format!("boundary map of at least {}x{}", 2 * dims.rows, 2 * dims.cols),
            format!("{h}x{w}"),
        ));
    }
    let span = |line: usize, parts: usize, len: usize| -> (usize, usize) {
        let s = seed(line, parts, len);
        if line == 0 || line == parts {
            (s, s)
        } else {
            band_range(corridor(line, parts, len), len)
        }
    };
    let stride = dims.cols + 1;
    let mut positions: Vec<(usize, usize)> = Vec::with_capacity((dims.rows + 1) * stride);
    for r in 0..=dims.rows {
        let (ylo, yhi) = span(r, dims.rows, h);
        let y0 = seed(r, dims.rows, h);
        for c in 0..=dims.cols {
            let (xlo, xhi) = span(c, dims.cols, w);
            let x0 = seed(c, dims.cols, w);
            let left = (c > 0).then(|| positions[r * stride + c - 1]);
            let up = (r > 0).then(|| positions[(r - 1) * stride + c]);
            let reachable = |y: usize, x: usize| {
                left.is_none_or(|(ly, lx)| x > lx && y.abs_diff(ly) <= x - lx)
                    && up.is_none_or(|(uy, ux)| y > uy && x.abs_diff(ux) <= y - uy)
            };
            let mut best: Option<((usize, usize), (f32, usize))> = None;
            // Raster order inside the window already prefers smaller y, then x.
            for y in ylo..=yhi {
                for x in xlo..=xhi {
                    if !reachable(y, x) {
                        continue;
                    }
                    let disp = y.abs_diff(y0).pow(2) + x.abs_diff(x0).pow(2);
                    let key = (bmap.get(y, x), disp);
                    let better = match best {
                        None => true,
                        Some((_, (bv, bd))) => key.0 > bv || (key.0 == bv && key.1 < bd),
                    };
                    if better {
                        best = Some(((y, x), key));
                    }
                }
            }
            positions.push(best.map_or((y0, x0), |(p, _)| p));
        }
    }
    Ok(JunctionSet { dims, positions })
}

/// Half-open interval `(lo, hi]` of lateral coordinates that interior lattice
/// line `line` may occupy, bounded by the midlines toward the neighbouring
/// seeds. The corridors of consecutive lines tile `0..len`.
pub fn corridor(line: usize, parts: usize, len: usize) -> (f64, f64) {
    let s = |i: usize| seed(i, parts, len) as f64;
    let lo = if line == 0 { -1.0 } else { (s(line - 1) + s(line)) / 2.0 };
    let hi = if line == parts {
        (len - 1) as f64
    } else {
        (s(line) + s(line + 1)) / 2.0
    };
    (lo, hi)
}

/// Inclusive integer range of a `(lo, hi]` corridor, clipped to `0..len`.
fn band_range((lo, hi): (f64, f64), len: usize) -> (usize, usize) {
    let first = (lo.floor() as isize + 1).max(0) as usize;
    let last = (hi.floor().max(0.0) as usize).min(len - 1);
    (first, last)
}

/// One path segment between two junctions on the same lattice line.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Lateral coordinate at each step, from `start` to `end` inclusive.
    pub lateral: Vec<usize>,
    /// Summed boundary strength along the segment.
    pub score: f64,
    /// True when no corridor-confined monotone path existed and the straight
    /// line between the endpoints was used instead.
    pub straight_fallback: bool,
}

/// Maximum-strength monotone path from `(s0, l0)` to `(s1, l1)`: one step
/// along the travel axis per move, lateral step in `{-1, 0, +1}`, lateral
/// coordinate inside the half-open `band` `(lo, hi]`. `value(step, lateral)`
/// gives the boundary strength. Ties prefer lateral step 0, then -1.
pub fn trace_segment(
    value: impl Fn(usize, usize) -> f32,
    (s0, l0): (usize, usize),
    (s1, l1): (usize, usize),
    band: (f64, f64),
) -> Segment {
    assert!(s1 >= s0, "segment must advance along its axis");
    let lmin = (band.0.floor() as isize + 1).max(0) as usize;
    let lmax = band.1.floor().max(0.0) as usize;
    let steps = s1 - s0;
    let inside = |l: usize| l >= lmin && l <= lmax;
    if lmin > lmax || !(inside(l0) && inside(l1)) || l0.abs_diff(l1) > steps {
        return straight_segment(value, (s0, l0), (s1, l1));
    }

    let width = lmax - lmin + 1;
    // best[k][j]: highest score from step s0+k at lateral lmin+j to the end.
    let mut best = vec![f64::NEG_INFINITY; (steps + 1) * width];
    best[steps * width + (l1 - lmin)] = value(s1, l1) as f64;
    for k in (0..steps).rev() {
        let s = s0 + k;
        for j in 0..width {
            let l = lmin + j;
            // Prune states that cannot reach the end point.
            if l.abs_diff(l1) > steps - k {
                continue;
            }
            let mut next = f64::NEG_INFINITY;
            for d in [0isize, -1, 1] {
                let nj = j as isize + d;
                if nj >= 0 && (nj as usize) < width {
                    next = next.max(best[(k + 1) * width + nj as usize]);
                }
            }
            if next > f64::NEG_INFINITY {
                best[k * width + j] = value(s, l) as f64 + next;
            }
        }
    }
    let score = best[l0 - lmin];
    if score == f64::NEG_INFINITY {
        return straight_segment(value, (s0, l0), (s1, l1));
    }

    let mut lateral = Vec::with_capacity(steps + 1);
    let mut j = l0 - lmin;
    lateral.push(l0);
    for k in 0..steps {
        let mut pick = None;
        let mut pick_val = f64::NEG_INFINITY;
        for d in [0isize, -1, 1] {
            let nj = j as isize + d;
            if nj >= 0 && (nj as usize) < width {
                let v = best[(k + 1) * width + nj as usize];
                if v > pick_val {
                    pick_val = v;
                    pick = Some(nj as usize);
                }
            }
        }
        j = pick.expect("feasible state has a feasible successor");
        lateral.push(lmin + j);
    }
    Segment {
        lateral,
        score,
        straight_fallback: false,
    }
}

fn straight_segment(
    value: impl Fn(usize, usize) -> f32,
    (s0, l0): (usize, usize),
    (s1, l1): (usize, usize),
) -> Segment {
    let steps = s1 - s0;
    let lateral: Vec<usize> = (0..=steps)
        .map(|k| {
            if steps == 0 {
                l0
            } else {
                let t = k as f64 / steps as f64;
                (l0 as f64 + t * (l1 as f64 - l0 as f64)).round() as usize
            }
        })
        .collect();
    let score = lateral
        .iter()
        .enumerate()
        .map(|(k, &l)| value(s0 + k, l) as f64)
        .sum();
    Segment {
        lateral,
        score,
        straight_fallback: true,
    }
}

/// Full-length lattice lines. `horizontal[r][x]` is the row of horizontal
/// line `r` at column `x`; `vertical[c][y]` the column of vertical line `c`
/// at row `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPathSet {
    pub horizontal: Vec<Vec<usize>>,
    pub vertical: Vec<Vec<usize>>,
    /// Number of segments that fell back to a straight line.
    pub straight_fallbacks: usize,
}

/// Joins every pair of lattice-adjacent junctions with a maximum-strength
/// corridor-confined monotone path. Border lines run along the image frame.
pub fn trace_paths(bmap: &BoundaryMap, junctions: &JunctionSet) -> BoundaryPathSet {
    let dims = junctions.dims;
    let (h, w) = (bmap.height(), bmap.width());
    let mut fallbacks = 0;

    let mut horizontal = Vec::with_capacity(dims.rows + 1);
    for r in 0..=dims.rows {
        if r == 0 || r == dims.rows {
            horizontal.push(vec![if r == 0 { 0 } else { h - 1 }; w]);
            continue;
        }
        let band = corridor(r, dims.rows, h);
        let mut line = Vec::with_capacity(w);
        for c in 0..dims.cols {
            let (ya, xa) = junctions.get(r, c);
            let (yb, xb) = junctions.get(r, c + 1);
            let seg = trace_segment(|x, y| bmap.get(y, x), (xa, ya), (xb, yb), band);
            fallbacks += seg.straight_fallback as usize;
            let skip = usize::from(c > 0);
            line.extend_from_slice(&seg.lateral[skip..]);
        }
        debug_assert_eq!(line.len(), w);
        horizontal.push(line);
    }

    let mut vertical = Vec::with_capacity(dims.cols + 1);
    for c in 0..=dims.cols {
        if c == 0 || c == dims.cols {
            vertical.push(vec![if c == 0 { 0 } else { w - 1 }; h]);
            continue;
        }
        let band = corridor(c, dims.cols, w);
        let mut line = Vec::with_capacity(h);
        for r in 0..dims.rows {
            let (ya, xa) = junctions.get(r, c);
            let (yb, xb) = junctions.get(r + 1, c);
            let seg = trace_segment(|y, x| bmap.get(y, x), (ya, xa), (yb, xb), band);
            fallbacks += seg.straight_fallback as usize;
            let skip = usize::from(r > 0);
            line.extend_from_slice(&seg.lateral[skip..]);
        }
        debug_assert_eq!(line.len(), h);
        vertical.push(line);
    }

    BoundaryPathSet {
        horizontal,
        vertical,
        straight_fallbacks: fallbacks,
    }
}

/// `R x C` lattice of superpixels over an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelGrid {
    dims: GridDims,
    height: usize,
    width: usize,
    labels: Vec<u32>,
    cell_sizes: Vec<usize>,
    junctions: JunctionSet,
    fallback: bool,
}

impl SuperpixelGrid {
    fn from_labels(
        dims: GridDims,
        height: usize,
        width: usize,
        labels: Vec<u32>,
        junctions: JunctionSet,
        fallback: bool,
    ) -> Self {
        let mut cell_sizes = vec![0usize; dims.cells()];
        for &l in &labels {
            cell_sizes[l as usize] += 1;
        }
        Self {
            dims,
            height,
            width,
            labels,
            cell_sizes,
            junctions,
            fallback,
        }
    }

    /// Plain rectangular tiling with row/column boundaries at the regular
    /// seed positions.
    pub fn regular(height: usize, width: usize, dims: GridDims) -> Result<Self> {
        if height < dims.rows || width < dims.cols {
            return Err(Error::InvalidArgument(format!(
                "{height}x{width} image cannot hold a {}x{} grid",
                dims.rows, dims.cols
            )));
        }
        let junctions = regular_junctions(height, width, dims);
        let paths = straight_paths(height, width, &junctions);
        let labels = count_labels(&paths, dims, height, width);
        let grid = Self::from_labels(dims, height, width, labels, junctions, true);
        if grid.cell_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "{height}x{width} image is too small for a {}x{} grid",
                dims.rows, dims.cols
            )));
        }
        Ok(grid)
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Cell index `r * C + c` of every pixel, row-major.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, y: usize, x: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    pub fn cell_sizes(&self) -> &[usize] {
        &self.cell_sizes
    }

    pub fn junctions(&self) -> &JunctionSet {
        &self.junctions
    }

    /// True when the traced lattice was rejected and the regular rectangular
    /// partition was used instead.
    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    /// Mirror along the column axis; cell `(r, c)` becomes `(r, C-1-c)`.
    pub fn flip_horizontal(&self) -> SuperpixelGrid {
        let cols = self.dims.cols;
        let mut labels = Vec::with_capacity(self.labels.len());
        for row in self.labels.chunks(self.width) {
            labels.extend(row.iter().rev().map(|&l| {
                let (r, c) = (l as usize / cols, l as usize % cols);
                (r * cols + cols - 1 - c) as u32
            }));
        }
        let mut positions = Vec::with_capacity(self.junctions.positions.len());
        for r in 0..=self.dims.rows {
            for c in (0..=cols).rev() {
                let (y, x) = self.junctions.get(r, c);
                positions.push((y, self.width - 1 - x));
            }
        }
        let junctions = JunctionSet {
            dims: self.dims,
            positions,
        };
        Self::from_labels(self.dims, self.height, self.width, labels, junctions, self.fallback)
    }

    /// Checks the partition, connectivity and lattice-adjacency invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let (h, w) = (self.height, self.width);
        let (rows, cols) = (self.dims.rows, self.dims.cols);
        if self.labels.len() != h * w {
            return Err("label map size differs from image size".into());
        }
        if let Some(l) = self.labels.iter().find(|&&l| l as usize >= rows * cols) {
            return Err(format!("label {l} out of range"));
        }
        if let Some(i) = self.cell_sizes.iter().position(|&s| s == 0) {
            return Err(format!("cell ({}, {}) is empty", i / cols, i % cols));
        }
        let components = components(&self.labels, h, w);
        let mut seen = vec![0usize; rows * cols];
        for comp in &components {
            seen[comp.label as usize] += 1;
        }
        if let Some(i) = seen.iter().position(|&n| n != 1) {
            return Err(format!(
                "cell ({}, {}) has {} connected components",
                i / cols,
                i % cols,
                seen[i]
            ));
        }
        let mut right = vec![false; rows * cols];
        let mut down = vec![false; rows * cols];
        for y in 0..h {
            for x in 0..w {
                let a = self.label(y, x);
                for (ny, nx) in [(y, x + 1), (y + 1, x)] {
                    if ny >= h || nx >= w {
                        continue;
                    }
                    let b = self.label(ny, nx);
                    if a == b {
                        continue;
                    }
                    let (ra, ca) = (a / cols, a % cols);
                    let (rb, cb) = (b / cols, b % cols);
                    if ra.abs_diff(rb) > 1 || ca.abs_diff(cb) > 1 {
                        return Err(format!(
                            "cells ({ra}, {ca}) and ({rb}, {cb}) touch but are not lattice neighbours"
                        ));
                    }
                    if ra == rb {
                        right[ra * cols + ca.min(cb)] = true;
                    }
                    if ca == cb {
                        down[ra.min(rb) * cols + ca] = true;
                    }
                }
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols && !right[r * cols + c] {
                    return Err(format!("cells ({r}, {c}) and ({r}, {}) do not touch", c + 1));
                }
                if r + 1 < rows && !down[r * cols + c] {
                    return Err(format!("cells ({r}, {c}) and ({}, {c}) do not touch", r + 1));
                }
            }
        }
        Ok(())
    }

    /// Label map for 16-bit output. Fails when the grid has more than 65536
    /// cells.
    pub fn label_map_u16(&self) -> Result<Vec<u16>> {
        if self.dims.cells() > u16::MAX as usize + 1 {
            return Err(Error::InvalidArgument("too many cells for a 16-bit label map".into()));
        }
        Ok(self.labels.iter().map(|&l| l as u16).collect())
    }

    /// Plain-text metadata: dimensions, fallback flag and junction table.
    pub fn metadata(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rows={}", self.dims.rows);
        let _ = writeln!(out, "cols={}", self.dims.cols);
        let _ = writeln!(out, "height={}", self.height);
        let _ = writeln!(out, "width={}", self.width);
        let _ = writeln!(out, "fallback={}", self.fallback);
        for r in 0..=self.dims.rows {
            for c in 0..=self.dims.cols {
                let (y, x) = self.junctions.get(r, c);
                let _ = writeln!(out, "junction={r},{c},{y},{x}");
            }
        }
        out
    }

    pub fn write_metadata(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.metadata()).map_err(|e| Error::io(path, e))
    }

    /// True where a pixel's right or lower neighbour lies in another cell.
    pub fn boundary_pixels(&self) -> Vec<bool> {
        let (h, w) = (self.height, self.width);
        let mut out = vec![false; h * w];
        for y in 0..h {
            for x in 0..w {
                let l = self.label(y, x);
                out[y * w + x] =
                    (x + 1 < w && self.label(y, x + 1) != l) || (y + 1 < h && self.label(y + 1, x) != l);
            }
        }
        out
    }

    /// Copy of `img` with cell boundaries painted red.
    pub fn overlay(&self, img: &RasterImage) -> Result<RasterImage> {
        if img.height() != self.height || img.width() != self.width {
            return Err(Error::mismatch(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", img.height(), img.width()),
            ));
        }
        let edges = self.boundary_pixels();
        RasterImage::from_fn(self.height, self.width, 3, |y, x, c| {
            if edges[y * self.width + x] {
                [1.0, 0.0, 0.0][c]
            } else {
                img.get(y, x, c.min(img.channels() - 1))
            }
        })
    }
}

fn regular_junctions(height: usize, width: usize, dims: GridDims) -> JunctionSet {
    let mut positions = Vec::with_capacity((dims.rows + 1) * (dims.cols + 1));
    for r in 0..=dims.rows {
        for c in 0..=dims.cols {
            positions.push((seed(r, dims.rows, height), seed(c, dims.cols, width)));
        }
    }
    JunctionSet { dims, positions }
}

fn straight_paths(height: usize, width: usize, junctions: &JunctionSet) -> BoundaryPathSet {
    let dims = junctions.dims;
    BoundaryPathSet {
        horizontal: (0..=dims.rows)
            .map(|r| vec![junctions.get(r, 0).0; width])
            .collect(),
        vertical: (0..=dims.cols)
            .map(|c| vec![junctions.get(0, c).1; height])
            .collect(),
        straight_fallbacks: 0,
    }
}

/// Row index = number of interior horizontal lines at or above the pixel;
/// column index likewise for vertical lines.
fn count_labels(paths: &BoundaryPathSet, dims: GridDims, height: usize, width: usize) -> Vec<u32> {
    let mut row_of = vec![0usize; height * width];
    for x in 0..width {
        for line in &paths.horizontal[1..dims.rows] {
            for y in line[x]..height {
                row_of[y * width + x] += 1;
            }
        }
    }
    let mut labels = vec![0u32; height * width];
    for y in 0..height {
        for x in 0..width {
            let col = paths.vertical[1..dims.cols]
                .iter()
                .filter(|line| line[y] <= x)
                .count();
            labels[y * width + x] = (row_of[y * width + x] * dims.cols + col) as u32;
        }
    }
    labels
}

struct Component {
    label: u32,
    pixels: Vec<usize>,
}

/// 4-connected components of equal labels, in raster order of their first
/// pixel.
fn components(labels: &[u32], height: usize, width: usize) -> Vec<Component> {
    let mut visited = vec![false; labels.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if visited[start] {
            continue;
        }
        let label = labels[start];
        visited[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(p) = queue.pop_front() {
            pixels.push(p);
            let (y, x) = (p / width, p % width);
            let mut visit = |q: usize| {
                if !visited[q] && labels[q] == label {
                    visited[q] = true;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
        out.push(Component { label, pixels });
    }
    out
}

/// Moves every non-largest component of a cell into the 4-adjacent cell with
/// which it shares the longest border. Returns false when nothing changed.
fn repair_once(labels: &mut [u32], height: usize, width: usize, cells: usize) -> bool {
    let comps = components(labels, height, width);
    let mut largest = vec![usize::MAX; cells];
    for (i, comp) in comps.iter().enumerate() {
        let slot = &mut largest[comp.label as usize];
        if *slot == usize::MAX || comp.pixels.len() > comps[*slot].pixels.len() {
            *slot = i;
        }
    }
    let mut changed = false;
    for (i, comp) in comps.iter().enumerate() {
        if largest[comp.label as usize] == i {
            continue;
        }
        let mut border: Vec<(u32, usize)> = Vec::new();
        for &p in &comp.pixels {
            let (y, x) = (p / width, p % width);
            let mut neighbours = Vec::with_capacity(4);
            if x > 0 {
                neighbours.push(p - 1);
            }
            if x + 1 < width {
                neighbours.push(p + 1);
            }
            if y > 0 {
                neighbours.push(p - width);
            }
            if y + 1 < height {
                neighbours.push(p + width);
            }
            for q in neighbours {
                let l = labels[q];
                if l != comp.label {
                    match border.iter_mut().find(|(bl, _)| *bl == l) {
                        Some((_, n)) => *n += 1,
                        None => border.push((l, 1)),
                    }
                }
            }
        }
        let target = border
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|&(l, _)| l);
        if let Some(target) = target {
            for &p in &comp.pixels {
                labels[p] = target;
            }
            changed = true;
        }
    }
    changed
}

const MAX_REPAIR_PASSES: usize = 8;

/// Cuts the image along the traced lines, repairs split cells, and falls back
/// to the regular rectangular partition when the result still violates the
/// lattice invariants.
pub fn label_cells(
    paths: &BoundaryPathSet,
    junctions: &JunctionSet,
    height: usize,
    width: usize,
) -> Result<SuperpixelGrid> {
    let dims = junctions.dims;
    if paths.horizontal.len() != dims.rows + 1
        || paths.vertical.len() != dims.cols + 1
        || paths.horizontal.iter().any(|l| l.len() != width)
        || paths.vertical.iter().any(|l| l.len() != height)
    {
        return Err(Error::mismatch(
            format!("{} horizontal x {width} and {} vertical x {height}", dims.rows + 1, dims.cols + 1),
            "paths of another shape",
        ));
    }
    let mut labels = count_labels(paths, dims, height, width);
    for _ in 0..MAX_REPAIR_PASSES {
        if !repair_once(&mut labels, height, width, dims.cells()) {
            break;
        }
    }
    let grid = SuperpixelGrid::from_labels(dims, height, width, labels, junctions.clone(), false);
    match grid.validate() {
        Ok(()) => Ok(grid),
        Err(reason) => {
            log::debug!("lattice rejected ({reason}); using regular partition");
            SuperpixelGrid::regular(height, width, dims)
        }
    }
}

/// Boundary map, lattice dimensions, junction relocation, path tracing and
/// cell labeling, in that order.
pub fn gridize(img: &RasterImage, target_n: usize) -> Result<SuperpixelGrid> {
    if img.height() < MIN_SIDE || img.width() < MIN_SIDE {
        return Err(Error::InvalidArgument(format!(
            "image must be at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    let bmap = boundary_map(img);
    let dims = choose_dims(img.height(), img.width(), target_n)?;
    let junctions = place_and_relocate_junctions(&bmap, dims)?;
    let paths = trace_paths(&bmap, &junctions);
    label_cells(&paths, &junctions, img.height(), img.width())
}
