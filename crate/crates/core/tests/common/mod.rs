//! Independent oracles shared by the integration tests and the acceptance
//! harness. Checks return `Err(description)` instead of panicking so the
//! harness can report them.
#![allow(dead_code)]

use grids::gridize::{choose_dims, corridor, place_and_relocate_junctions, trace_paths};
use grids::image::{BinaryMask, BoundaryMap, RasterImage};
use grids::nn::layers::{bce_grad, bce_loss, relu, relu_backward, sigmoid, sigmoid_backward, BatchNorm, Conv3x3};
use grids::nn::{NetworkModel, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check<T = ()> = Result<T, String>;

/// Smooth value noise plus a little pixel noise.
pub fn natural_noise(h: usize, w: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = 6;
    let lattice: Vec<f32> = (0..(cells + 1) * (cells + 1) * 3).map(|_| rng.random()).collect();
    let fine: Vec<f32> = (0..h * w * 3).map(|_| rng.random::<f32>() * 0.1).collect();
    RasterImage::from_fn(h, w, 3, |y, x, c| {
        let fy = y as f32 / (h - 1) as f32 * cells as f32;
        let fx = x as f32 / (w - 1) as f32 * cells as f32;
        let (iy, ix) = ((fy as usize).min(cells - 1), (fx as usize).min(cells - 1));
        let (ty, tx) = (fy - iy as f32, fx - ix as f32);
        let at = |a: usize, b: usize| lattice[(a * (cells + 1) + b) * 3 + c];
        let v = at(iy, ix) * (1.0 - ty) * (1.0 - tx)
            + at(iy + 1, ix) * ty * (1.0 - tx)
            + at(iy, ix + 1) * (1.0 - ty) * tx
            + at(iy + 1, ix + 1) * ty * tx;
        0.9 * v + fine[(y * w + x) * 3 + c]
    })
    .unwrap()
}

// ---- gridization ----

/// Exhaustive search over all monotone paths inside the band `(lo, hi]`.
pub fn brute_force_best(
    value: &dyn Fn(usize, usize) -> f32,
    start: (usize, usize),
    end: (usize, usize),
    band: (f64, f64),
) -> Option<f64> {
    fn walk(
        value: &dyn Fn(usize, usize) -> f32,
        s: usize,
        l: isize,
        end: (usize, usize),
        band: (f64, f64),
        acc: f64,
        best: &mut Option<f64>,
    ) {
        if (l as f64) <= band.0 || (l as f64) > band.1 || l < 0 {
            return;
        }
        let acc = acc + value(s, l as usize) as f64;
        if s == end.0 {
            if l as usize == end.1 {
                *best = Some(best.map_or(acc, |b: f64| b.max(acc)));
            }
            return;
        }
        for d in [-1isize, 0, 1] {
            walk(value, s + 1, l + d, end, band, acc, best);
        }
    }
    let mut best = None;
    walk(value, start.0, start.1 as isize, end, band, 0.0, &mut best);
    best
}

pub fn path_score(value: &dyn Fn(usize, usize) -> f32, lateral: &[usize], from: usize, to: usize) -> f64 {
    (from..=to).map(|s| value(s, lateral[s]) as f64).sum()
}

/// Compares every traced segment against exhaustive search on `images`
/// random boundary maps of at most 40x40. Returns the number of segments.
pub fn dp_matches_brute_force(images: usize, seed: u64) -> Check<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for case in 0..images {
        let h = rng.random_range(12..=40);
        let w = rng.random_range(12..=40);
        let data: Vec<f32> = (0..h * w).map(|_| rng.random::<f32>()).collect();
        let bmap = BoundaryMap::from_raw(h, w, data).unwrap();
        // Seed spacing of about 6 keeps every corridor small enough to enumerate.
        let dims = choose_dims(h, w, (h * w / 36).max(4)).unwrap();
        let junctions = place_and_relocate_junctions(&bmap, dims).map_err(|e| e.to_string())?;
        let paths = trace_paths(&bmap, &junctions);
        let hval = |x: usize, y: usize| bmap.get(y, x);
        for r in 1..dims.rows {
            let band = corridor(r, dims.rows, h);
            for c in 0..dims.cols {
                let (ya, xa) = junctions.get(r, c);
                let (yb, xb) = junctions.get(r, c + 1);
                let got = path_score(&hval, &paths.horizontal[r], xa, xb);
                let want = brute_force_best(&hval, (xa, ya), (xb, yb), band).ok_or("no feasible path")?;
                if (got - want).abs() >= 1e-9 {
                    return Err(format!("case {case} h-seg ({r},{c}): {got} vs {want}"));
                }
                checked += 1;
            }
        }
        let vval = |y: usize, x: usize| bmap.get(y, x);
        for c in 1..dims.cols {
            let band = corridor(c, dims.cols, w);
            for r in 0..dims.rows {
                let (ya, xa) = junctions.get(r, c);
                let (yb, xb) = junctions.get(r + 1, c);
                let got = path_score(&vval, &paths.vertical[c], ya, yb);
                let want = brute_force_best(&vval, (ya, xa), (yb, xb), band).ok_or("no feasible path")?;
                if (got - want).abs() >= 1e-9 {
                    return Err(format!("case {case} v-seg ({r},{c}): {got} vs {want}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

// ---- metrics ----

pub fn random_metric_case(rng: &mut ChaCha8Rng) -> (RasterImage, BinaryMask) {
    let (h, w) = (rng.random_range(1..=16), rng.random_range(1..=16));
    // Half the cases sit exactly on the 8-bit threshold grid.
    let quantized = rng.random_bool(0.5);
    let s: Vec<f32> = (0..h * w)
        .map(|_| {
            if quantized {
                rng.random_range(0..=255) as f32 / 255.0
            } else {
                rng.random()
            }
        })
        .collect();
    let mut g: Vec<u8> = (0..h * w).map(|_| rng.random_bool(0.4) as u8).collect();
    g[rng.random_range(0..h * w)] = 1;
    (RasterImage::new(h, w, 1, s).unwrap(), BinaryMask::new(h, w, g).unwrap())
}

pub struct BruteMetrics {
    pub mae: f64,
    pub pr: Vec<(f64, f64)>,
    /// (F, precision, recall, tau)
    pub adaptive: (f64, f64, f64, f64),
}

/// Pixel-by-pixel enumeration of every metric.
pub fn brute_metrics(s: &RasterImage, gt: &BinaryMask) -> BruteMetrics {
    let (h, w) = (s.height(), s.width());
    let mut abs = 0.0;
    let mut sum = 0.0;
    let mut positives = 0usize;
    for y in 0..h {
        for x in 0..w {
            let v = s.get(y, x, 0) as f64;
            let g = gt.get(y, x) as f64;
            abs += (v - g).abs();
            sum += v;
            positives += gt.get(y, x) as usize;
        }
    }
    let at = |tau: f64| {
        let (mut pred, mut hit) = (0usize, 0usize);
        for y in 0..h {
            for x in 0..w {
                if s.get(y, x, 0) as f64 > tau {
                    pred += 1;
                    hit += gt.get(y, x) as usize;
                }
            }
        }
        let p = if pred == 0 { 0.0 } else { hit as f64 / pred as f64 };
        (p, hit as f64 / positives as f64)
    };
    let pr = (0..256).map(|k| at(k as f64 / 255.0)).collect();
    let tau = (2.0 * sum / (h * w) as f64).min(1.0 - 1.0 / 510.0);
    let (p, r) = at(tau);
    let f = if p + r == 0.0 { 0.0 } else { 1.3 * p * r / (0.3 * p + r) };
    BruteMetrics {
        mae: abs / (h * w) as f64,
        pr,
        adaptive: (f, p, r, tau),
    }
}

/// Exact agreement of the library metrics with enumeration on `cases` cases.
pub fn metrics_match_enumeration(cases: usize, seed: u64) -> Check {
    use grids::eval::{adaptive_fbeta, mae, pr_curve};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (s, gt) = random_metric_case(&mut rng);
        let b = brute_metrics(&s, &gt);
        let m = mae(&s, &gt).map_err(|e| e.to_string())?;
        if m != b.mae {
            return Err(format!("case {case}: mae {m} vs {}", b.mae));
        }
        let pr = pr_curve(&s, &gt).map_err(|e| e.to_string())?;
        for (k, (p, want)) in pr.iter().zip(&b.pr).enumerate() {
            if (p.precision, p.recall) != *want {
                return Err(format!("case {case} k={k}: {:?} vs {want:?}", (p.precision, p.recall)));
            }
        }
        let a = adaptive_fbeta(&s, &gt).map_err(|e| e.to_string())?;
        if (a.fbeta, a.precision, a.recall, a.tau) != b.adaptive {
            return Err(format!("case {case}: adaptive {a:?} vs {:?}", b.adaptive));
        }
    }
    Ok(())
}

// ---- finite differences ----

/// Zero-mean inputs. With all-positive inputs a stem channel can be dead
/// everywhere; batch norm then sits exactly on a ReLU kink.
pub fn centered(rng: &mut ChaCha8Rng, n: usize, h: usize, w: usize, k: usize) -> Tensor4 {
    let data = (0..n * h * w * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor4::from_vec(n, h, w, k, data).unwrap()
}

pub fn close(analytic: f64, numeric: f64) -> bool {
    let err = (analytic - numeric).abs();
    err <= 1e-4 || err <= 1e-2 * analytic.abs().max(numeric.abs())
}

fn dot(t: &Tensor4, w: &[f32]) -> f64 {
    t.data.iter().zip(w).map(|(&a, &b)| a as f64 * b as f64).sum()
}

/// Checks `d/dv sum(w * f(v))` for sampled entries of `v`.
fn check_entries(
    what: &str,
    v: &mut [f32],
    analytic: &[f32],
    samples: usize,
    h: f32,
    rng: &mut ChaCha8Rng,
    mut objective: impl FnMut(&[f32]) -> f64,
) -> Check<usize> {
    for _ in 0..samples {
        let j = rng.random_range(0..v.len());
        let orig = v[j];
        v[j] = orig + h;
        let up = objective(v);
        v[j] = orig - h;
        let down = objective(v);
        v[j] = orig;
        let numeric = (up - down) / (2.0 * h as f64);
        if !close(analytic[j] as f64, numeric) {
            return Err(format!("{what}[{j}]: analytic {} numeric {numeric}", analytic[j]));
        }
    }
    Ok(samples)
}

pub fn conv_fd(seed: u64) -> Check<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conv = Conv3x3::new(3, 4);
    conv.weight.iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
    conv.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    let mut x = centered(&mut rng, 2, 5, 6, 3);
    let wts: Vec<f32> = (0..2 * 5 * 6 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dy = Tensor4::from_vec(2, 5, 6, 4, wts.clone()).unwrap();
    let (dx, dw, db) = conv.backward(&x, &dy).map_err(|e| e.to_string())?;

    let mut n = 0;
    let mut weight = conv.weight.clone();
    n += check_entries("conv weight", &mut weight, &dw, 30, 1e-2, &mut rng, |v| {
        let mut c = conv.clone();
        c.weight.copy_from_slice(v);
        dot(&c.forward(&x).unwrap(), &wts)
    })?;
    let mut bias = conv.bias.clone();
    n += check_entries("conv bias", &mut bias, &db, 4, 1e-2, &mut rng, |v| {
        let mut c = conv.clone();
        c.bias.copy_from_slice(v);
        dot(&c.forward(&x).unwrap(), &wts)
    })?;
    let shape = x.shape();
    n += check_entries("conv input", &mut x.data, &dx.data, 30, 1e-2, &mut rng, |v| {
        let t = Tensor4::from_vec(shape.0, shape.1, shape.2, shape.3, v.to_vec()).unwrap();
        dot(&conv.forward(&t).unwrap(), &wts)
    })?;
    Ok(n)
}

pub fn batchnorm_fd(seed: u64) -> Check<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bn = BatchNorm::new(3);
    bn.gamma.iter_mut().for_each(|g| *g = rng.random_range(0.5..1.5));
    bn.beta.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    let mut x = centered(&mut rng, 2, 4, 5, 3);
    let wts: Vec<f32> = (0..2 * 4 * 5 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, cache) = bn.clone().forward_train(&x).map_err(|e| e.to_string())?;
    let (dx, dg, dbt) = bn.backward(&cache, &Tensor4::from_vec(2, 4, 5, 3, wts.clone()).unwrap());

    let eval = |b: &BatchNorm, t: &Tensor4| dot(&b.clone().forward_train(t).unwrap().0, &wts);
    let mut n = 0;
    let mut gamma = bn.gamma.clone();
    n += check_entries("bn gamma", &mut gamma, &dg, 3, 1e-2, &mut rng, |v| {
        let mut b = bn.clone();
        b.gamma.copy_from_slice(v);
        eval(&b, &x)
    })?;
    let mut beta = bn.beta.clone();
    n += check_entries("bn beta", &mut beta, &dbt, 3, 1e-2, &mut rng, |v| {
        let mut b = bn.clone();
        b.beta.copy_from_slice(v);
        eval(&b, &x)
    })?;
    let shape = x.shape();
    n += check_entries("bn input", &mut x.data, &dx.data, 30, 1e-2, &mut rng, |v| {
        eval(&bn, &Tensor4::from_vec(shape.0, shape.1, shape.2, shape.3, v.to_vec()).unwrap())
    })?;
    Ok(n)
}

/// ReLU, sigmoid and the cross-entropy loss.
pub fn activation_and_loss_fd(seed: u64) -> Check<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Keep ReLU inputs away from zero so a step never crosses the kink.
    let mut x = Tensor4::from_vec(
        1,
        4,
        4,
        2,
        (0..32)
            .map(|i| {
                let m = rng.random_range(0.1..1.0f32);
                if i % 2 == 0 { m } else { -m }
            })
            .collect(),
    )
    .unwrap();
    let wts: Vec<f32> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dy = Tensor4::from_vec(1, 4, 4, 2, wts.clone()).unwrap();
    let shape = x.shape();
    let rebuild = |v: &[f32]| Tensor4::from_vec(shape.0, shape.1, shape.2, shape.3, v.to_vec()).unwrap();

    let mut n = 0;
    let dr = relu_backward(&relu(&x), &dy);
    n += check_entries("relu", &mut x.data.clone(), &dr.data, 20, 1e-2, &mut rng, |v| dot(&relu(&rebuild(v)), &wts))?;
    let ds = sigmoid_backward(&sigmoid(&x), &dy);
    n += check_entries("sigmoid", &mut x.data, &ds.data, 20, 1e-2, &mut rng, |v| dot(&sigmoid(&rebuild(v)), &wts))?;

    let mut p = Tensor4::from_vec(1, 4, 4, 1, (0..16).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap();
    let y = Tensor4::from_vec(1, 4, 4, 1, (0..16).map(|i| (i % 3 == 0) as u8 as f32).collect()).unwrap();
    let g = bce_grad(&p, &y).map_err(|e| e.to_string())?;
    n += check_entries("bce", &mut p.data, &g.data, 16, 1e-3, &mut rng, |v| {
        bce_loss(&Tensor4::from_vec(1, 4, 4, 1, v.to_vec()).unwrap(), &y).unwrap()
    })?;
    Ok(n)
}

/// Weighted sum of output probabilities plus the ReLU pattern it ran with.
fn objective(model: &mut NetworkModel, x: &Tensor4, weights: &[f32]) -> (f64, Vec<bool>) {
    let y = model.forward_train(x).unwrap();
    (dot(&y, weights), model.relu_pattern().unwrap())
}

fn perturb(model: &mut NetworkModel, tensor: usize, j: usize, delta: f32) {
    let mut idx = 0;
    model.visit_params_mut(|p| {
        if idx == tensor {
            p[j] += delta;
        }
        idx += 1;
    });
}

/// Checks `count` parameters of the composed F=4, 2-block model, covering
/// every tensor. Perturbations that flip any ReLU are skipped and redrawn.
/// Returns (checked, skipped).
pub fn composed_model_fd(seed: u64, count: usize) -> Check<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = NetworkModel::initialized(4, 2, 3).unwrap();
    let x = centered(&mut rng, 2, 6, 7, 3);
    let weights: Vec<f32> = (0..2 * 6 * 7).map(|_| rng.random_range(-1.0..1.0)).collect();
    model.forward_train(&x).map_err(|e| e.to_string())?;
    let base = model.relu_pattern().unwrap();
    let grads = model
        .backward(&Tensor4::from_vec(2, 6, 7, 1, weights.clone()).unwrap())
        .map_err(|e| e.to_string())?;

    let h = 2e-3f32;
    let shapes = model.param_shapes();
    let (mut checked, mut kinked) = (0, 0);
    let mut per_tensor = vec![0; shapes.len()];
    while checked < count {
        let t = if checked < shapes.len() * 4 { checked % shapes.len() } else { rng.random_range(0..shapes.len()) };
        let j = rng.random_range(0..shapes[t]);
        perturb(&mut model, t, j, h);
        let (up, pu) = objective(&mut model, &x, &weights);
        perturb(&mut model, t, j, -2.0 * h);
        let (down, pd) = objective(&mut model, &x, &weights);
        perturb(&mut model, t, j, h);
        if pu != base || pd != base {
            kinked += 1;
            if kinked >= 2 * count {
                return Err("too many perturbations cross a ReLU kink".into());
            }
            continue;
        }
        let numeric = (up - down) / (2.0 * h as f64);
        let analytic = grads.params[t][j] as f64;
        if !close(analytic, numeric) {
            return Err(format!("tensor {t}[{j}]: analytic {analytic} numeric {numeric}"));
        }
        per_tensor[t] += 1;
        checked += 1;
    }
    if per_tensor.contains(&0) {
        return Err("some parameter tensor was never checked".into());
    }
    Ok((checked, kinked))
}

// ---- lattice and codec ----

/// Partition, connectivity and adjacency on `images` 128x128 noise images.
/// Returns how many grids fell back to the regular tiling.
pub fn noise_grids_are_valid(images: u64, n: usize) -> Check<usize> {
    use grids::gridize::gridize;
    let mut fallbacks = 0;
    for seed in 0..images {
        let grid = gridize(&natural_noise(128, 128, seed), n).map_err(|e| e.to_string())?;
        grid.validate().map_err(|e| format!("image {seed}: {e}"))?;
        if grid.cell_sizes().iter().sum::<usize>() != 128 * 128 {
            return Err(format!("image {seed}: cells do not cover the image"));
        }
        fallbacks += grid.is_fallback() as usize;
    }
    Ok(fallbacks)
}

/// Every cell of a constant image's grid fills its bounding box exactly.
pub fn constant_images_tile_rectangles() -> Check {
    use grids::gridize::gridize;
    for (h, w, n, v) in [(40, 60, 24, 0.0), (64, 64, 64, 0.5), (97, 131, 200, 1.0), (300, 400, 950, 0.3)] {
        let img = RasterImage::filled(h, w, 3, v).unwrap();
        let grid = gridize(&img, n).map_err(|e| e.to_string())?;
        let cells = grid.dims().cells();
        let mut bbox = vec![(usize::MAX, usize::MAX, 0, 0); cells];
        for y in 0..h {
            for x in 0..w {
                let b = &mut bbox[grid.label(y, x)];
                *b = (b.0.min(y), b.1.min(x), b.2.max(y), b.3.max(x));
            }
        }
        for (l, &(y0, x0, y1, x1)) in bbox.iter().enumerate() {
            if (y1 - y0 + 1) * (x1 - x0 + 1) != grid.cell_sizes()[l] {
                return Err(format!("{h}x{w}: cell {l} is not a rectangle"));
            }
        }
    }
    Ok(())
}

/// `encode(reconstruct(X)) == X`, `P(P(I)) == P(I)` for `P = reconstruct . encode`,
/// and cell-constant images encode losslessly, all bit-exact.
pub fn codec_round_trips(cases: u64) -> Check {
    use grids::codec::{encode_image, reconstruct, GridTensor};
    use grids::gridize::gridize;
    for seed in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (h, w) = (rng.random_range(24..=90), rng.random_range(24..=90));
        let img = natural_noise(h, w, seed);
        let grid = gridize(&img, rng.random_range(16..=120)).map_err(|e| e.to_string())?;
        let d = grid.dims();
        for ch in [1, 3] {
            let x = GridTensor::new(d.rows, d.cols, ch, (0..d.cells() * ch).map(|_| rng.random()).collect()).unwrap();
            let back = encode_image(&reconstruct(&x, &grid).unwrap(), &grid).unwrap();
            if back != x {
                return Err(format!("case {seed}: encode(reconstruct(X)) != X with {ch} channels"));
            }
        }
        let once = reconstruct(&encode_image(&img, &grid).unwrap(), &grid).unwrap();
        let twice = reconstruct(&encode_image(&once, &grid).unwrap(), &grid).unwrap();
        if once != twice {
            return Err(format!("case {seed}: projection is not idempotent"));
        }
        if reconstruct(&encode_image(&once, &grid).unwrap(), &grid).unwrap() != once {
            return Err(format!("case {seed}: cell-constant image changed"));
        }
    }
    Ok(())
}
