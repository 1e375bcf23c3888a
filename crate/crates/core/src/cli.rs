//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use crate::codec::{encode_image, encode_label, minmax_normalize, reconstruct};
use crate::error::{Error, Result};
use crate::eval::plot::{bar_chart_svg, pr_curve_svg};
use crate::eval::{evaluate_dataset, predict_saliency, EvalMode, Predictor};
use crate::gridize::gridize;
use crate::image::{load_image, load_mask, write_pgm16};
use crate::nn::save_model;
use crate::train::config::{parse_list, DEFAULT_GRANULARITIES};
use crate::train::{generate_synthetic, prepare_samples, train, DatasetManifest, SynthOptions, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "grids", version, about = "Gridized-superpixel salient object segmentation")]
pub struct Cli {
    /// Worker threads for data preparation and evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Pin every stage to one thread. Reductions are ordered in all modes,
    /// so outputs do not depend on this flag.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Single,
    Vote,
    Baseline,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gridize an image: label map, grid metadata, optional boundary overlay.
    Gridify {
        image: PathBuf,
        #[arg(long, default_value_t = 950)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overlay: bool,
    },
    /// Encode an image (and optionally its mask) into grid tensors.
    Encode {
        image: PathBuf,
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 950)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes the model file and `<model>.log.csv`.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        train_manifest: PathBuf,
        #[arg(long)]
        val_manifest: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        /// Extra `key=value` overrides applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        filters: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Full-resolution saliency map for one image.
    Predict {
        /// Model file, `stub:gt` or `stub:const=<v>`.
        #[arg(long)]
        model: String,
        image: PathBuf,
        /// Ground-truth mask, used only by `stub:gt`.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 950)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the grid label map.
        #[arg(long)]
        labels: bool,
    },
    /// Score a model on a manifest; writes report.csv and pr.csv.
    Eval {
        #[arg(long)]
        model: String,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Single)]
        mode: ModeArg,
        /// Granularity, or comma list for vote mode.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write PR-curve and F-beta SVG charts.
        #[arg(long)]
        svg: bool,
    },
    /// Generate a synthetic dataset with a manifest.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Attach thin bars to the objects.
        #[arg(long)]
        thin: bool,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. }
        | Error::Decode { .. }
        | Error::UnsupportedBitDepth { .. }
        | Error::EmptyImage
        | Error::DimensionMismatch { .. }
        | Error::InvalidArgument(_) => EXIT_INPUT,
        Error::NonFinite(_) => EXIT_NUMERIC,
        Error::Format(_) => EXIT_FORMAT,
        Error::NoForwardPass => EXIT_INTERNAL,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if cli.verbose {
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    }
    let threads = if cli.deterministic { 1 } else { cli.threads };
    // Fails only when a global pool already exists, e.g. in tests.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gridify { image, n, out, overlay } => {
            let img = load_image(&image)?;
            let grid = gridize(&img, n)?;
            ensure_dir(&out)?;
            let s = stem(&image);
            write_pgm16(out.join(format!("{s}_labels.pgm")), grid.height(), grid.width(), &grid.label_map_u16()?)?;
            grid.write_metadata(out.join(format!("{s}_grid.txt")))?;
            if overlay {
                grid.overlay(&img)?.save(out.join(format!("{s}_overlay.png")))?;
            }
            let d = grid.dims();
            println!("{}x{} grid, fallback={}", d.rows, d.cols, grid.is_fallback());
            Ok(())
        }
        Command::Encode { image, mask, n, out } => {
            let img = load_image(&image)?;
            let mask = mask.map(load_mask).transpose()?;
            let grid = gridize(&img, n)?;
            ensure_dir(&out)?;
            let s = stem(&image);
            let x = encode_image(&img, &grid)?;
            reconstruct(&x, &grid)?.save(out.join(format!("{s}_preview.png")))?;
            minmax_normalize(&x).save(out.join(format!("{s}_x.grdt")))?;
            if let Some(m) = mask {
                let y = encode_label(&m, &grid)?;
                y.save(out.join(format!("{s}_y.grdt")))?;
                reconstruct(&y, &grid)?.save(out.join(format!("{s}_label_preview.png")))?;
            }
            Ok(())
        }
        Command::Train {
            config,
            train_manifest,
            val_manifest,
            out_model,
            overrides,
            filters,
            iterations,
            seed,
        } => {
            let mut cfg = match config {
                Some(p) => TrainConfig::load(p)?,
                None => TrainConfig::default(),
            };
            for kv in &overrides {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("override `{kv}` is not key=value")))?;
                cfg.set(k, v)?;
            }
            if let Some(f) = filters {
                cfg.filters = f;
            }
            if let Some(i) = iterations {
                cfg.max_iterations = i;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let train_m = DatasetManifest::load(&train_manifest)?;
            let val_m = DatasetManifest::load(&val_manifest)?;
            train_m.check_disjoint(&val_m)?;
            let tr = prepare_samples(&train_m, &cfg.granularities, cfg.encoding);
            let va = prepare_samples(&val_m, &cfg.granularities, cfg.encoding);
            info!(
                "train samples: {} used, {} skipped; validation: {} used, {} skipped",
                tr.samples.len(),
                tr.skipped.len(),
                va.samples.len(),
                va.skipped.len()
            );
            if let Some(parent) = out_model.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(parent)?;
            }
            let diag = out_model.with_extension("nonfinite.gseg");
            let outcome = train(&cfg, &tr.samples, &va.samples, Some(&diag))?;
            save_model(&outcome.best, &out_model)?;
            write_text(&out_model.with_extension("log.csv"), &outcome.log.to_csv())?;
            println!(
                "best validation loss {:.6} at iteration {}",
                outcome.best_val_loss, outcome.best_iteration
            );
            Ok(())
        }
        Command::Predict {
            model,
            image,
            mask,
            n,
            out,
            labels,
        } => {
            let predictor = Predictor::from_spec(&model)?;
            let img = load_image(&image)?;
            let mask = mask.map(load_mask).transpose()?;
            let (sal, grid) = predict_saliency(&predictor, &img, mask.as_ref(), n)?;
            ensure_dir(&out)?;
            let s = stem(&image);
            sal.save(out.join(format!("{s}_saliency.png")))?;
            if labels {
                write_pgm16(out.join(format!("{s}_labels.pgm")), grid.height(), grid.width(), &grid.label_map_u16()?)?;
            }
            Ok(())
        }
        Command::Eval {
            model,
            manifest,
            mode,
            n,
            out,
            svg,
        } => {
            let predictor = Predictor::from_spec(&model)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let grans = match &n {
                Some(list) => parse_list("n", list)?,
                None if mode == ModeArg::Vote => DEFAULT_GRANULARITIES.to_vec(),
                None => vec![950],
            };
            let single = |grans: &[usize]| match grans {
                [g] => Ok(*g),
                _ => Err(Error::InvalidArgument("this mode takes a single --n".into())),
            };
            let eval_mode = match mode {
                ModeArg::Single => EvalMode::Single(single(&grans)?),
                ModeArg::Baseline => EvalMode::Baseline(single(&grans)?),
                ModeArg::Vote => EvalMode::Vote(grans),
            };
            let report = evaluate_dataset(&predictor, &manifest, &eval_mode);
            ensure_dir(&out)?;
            write_text(&out.join("report.csv"), &report.to_csv())?;
            write_text(&out.join("pr.csv"), &report.pr_csv())?;
            if svg {
                write_text(&out.join("pr.svg"), &pr_curve_svg(&[(&model, &report.pr)]))?;
                let label = match &predictor {
                    Predictor::Model(m) => format!("{} ({} params)", model, m.count_parameters()),
                    _ => model.clone(),
                };
                write_text(
                    &out.join("fbeta.svg"),
                    &bar_chart_svg("Adaptive F-beta", "F-beta", &[(label, report.mean_fbeta())]),
                )?;
            }
            println!(
                "{} images ({} excluded): MAE {:.4}, F-beta {:.4}",
                report.rows.len(),
                report.excluded.len(),
                report.mean_mae(),
                report.mean_fbeta()
            );
            Ok(())
        }
        Command::Synth { count, seed, out, thin } => {
            let m = generate_synthetic(count, seed, &out, &SynthOptions { thin_parts: thin })?;
            println!("wrote {} pairs to {}", m.len(), out.display());
            Ok(())
        }
    }
}
