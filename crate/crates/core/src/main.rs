use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use freespace::config::RunConfig;
use freespace::error::Error;
use freespace::fallback::handcrafted_feature_map;
use freespace::io;
use freespace::maskgen::overlay;
use freespace::pipeline::{self, Baseline, SweepAxis};
use freespace::superpix::{boundary_overlay, segment, FHParams};
use freespace::synth::{generate_scene, SceneParams};

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "freespace", version, about = "Free-space mask generation without manual labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one image into superpixels and write a 16-bit label map.
    Superpixels {
        image: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Optional boundary overlay PNG.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long, default_value_t = 300.0)]
        scale: f64,
        #[arg(long, default_value_t = 0.8)]
        sigma: f64,
        #[arg(long, default_value_t = 100)]
        min_size: usize,
    },
    /// Write hand-crafted FMP1 feature maps for every PNG in a directory.
    FeaturesFallback {
        image_dir: PathBuf,
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        stride: usize,
    },
    /// Generate free-space masks for an image directory.
    Generate {
        /// key = value config file
        #[arg(long)]
        config: Option<PathBuf>,
        /// key=value overrides applied after the config file
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score predicted masks against ground-truth masks with the same names.
    Evaluate {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        /// Write metrics JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run generate + evaluate across values of one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        gt_dir: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Blend a mask's free-space region in red over its image.
    Overlay {
        image: PathBuf,
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write bottom-half or largest-superpixel baseline masks.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score the bottom-half baseline on Cityscapes gtFine labelIds.
    CityscapesBottomHalf { gt_root: PathBuf },
    /// Write synthetic road scenes and their ground-truth masks.
    Synth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Clusters,
    BatchSize,
    Scale,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    BottomHalf,
    LargestSuperpixel,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) => EXIT_USAGE,
        Error::NotFound(_)
        | Error::UnsupportedBitDepth { .. }
        | Error::CorruptStream { .. }
        | Error::BadMagic { .. }
        | Error::ShapeMismatch { .. }
        | Error::NonFinite { .. }
        | Error::InvalidMaskValue { .. }
        | Error::DimensionMismatch(_)
        | Error::Unmatched { .. }
        | Error::Empty(_)
        | Error::TooFewFeatures { .. } => EXIT_PARTIAL,
        _ => EXIT_INTERNAL,
    }
}

fn run_config(config: Option<&Path>, overrides: &[String]) -> Result<RunConfig, Error> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(overrides.iter().map(String::as_str))?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Superpixels { image, labels, overlay: overlay_path, scale, sigma, min_size } => {
            let img = io::load_image(&image)?;
            let sp = segment(&img, &FHParams { scale, smoothing_sigma: sigma, min_size })?;
            io::save_label_map16(&labels, sp.width(), sp.height(), sp.labels())?;
            if let Some(p) = overlay_path {
                io::save_image(p, &boundary_overlay(&img, &sp, [255, 0, 0])?)?;
            }
            println!("{}", sp.segment_count());
        }
        Command::FeaturesFallback { image_dir, out_dir, stride } => {
            std::fs::create_dir_all(&out_dir)?;
            let files = pipeline::list_pngs(&image_dir)?;
            if files.is_empty() {
                return Err(Error::Empty(format!("no PNG images in {}", image_dir.display())));
            }
            for path in files {
                let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let f = handcrafted_feature_map(&io::load_image(&path)?, stride, &stem)?;
                io::write_feature_map(out_dir.join(format!("{stem}.fmp1")), &f)?;
            }
        }
        Command::Generate { config, overrides } => {
            let cfg = run_config(config.as_deref(), &overrides)?;
            let manifest = pipeline::generate(&cfg)?;
            eprintln!(
                "wrote {} masks to {} ({} failures)",
                manifest.images.len(),
                cfg.out_dir.display(),
                manifest.failures.len()
            );
            if manifest.is_partial() {
                return Ok(EXIT_PARTIAL);
            }
        }
        Command::Evaluate { pred_dir, gt_dir, out } => {
            let metrics = pipeline::evaluate(&pred_dir, &gt_dir)?;
            print_json(&metrics, out.as_deref())?;
        }
        Command::Sweep { config, overrides, gt_dir, axis, values, out_dir } => {
            let cfg = run_config(config.as_deref(), &overrides)?;
            let axis = match axis {
                AxisArg::Clusters => SweepAxis::Clusters,
                AxisArg::BatchSize => SweepAxis::BatchSize,
                AxisArg::Scale => SweepAxis::Scale,
            };
            let report = pipeline::sweep(&cfg, &gt_dir, axis, &values, &out_dir)?;
            for r in &report.rows {
                println!("{}\t{:.4}", r.value, r.score.iou);
            }
        }
        Command::Overlay { image, mask, out } => {
            let img = io::load_image(&image)?;
            let m = io::load_mask(&mask)?;
            io::save_image(out, &overlay(&img, &m)?)?;
        }
        Command::Baseline { kind, config, overrides } => {
            let cfg = run_config(config.as_deref(), &overrides)?;
            let kind = match kind {
                BaselineArg::BottomHalf => Baseline::BottomHalf,
                BaselineArg::LargestSuperpixel => Baseline::LargestSuperpixel,
            };
            let n = pipeline::baseline_masks(&cfg, kind)?;
            eprintln!("wrote {n} masks to {}", cfg.out_dir.display());
        }
        Command::CityscapesBottomHalf { gt_root } => {
            let (score, n) = pipeline::cityscapes_bottom_half(&gt_root)?;
            print_json(&serde_json::json!({ "images": n, "dataset": score }), None)?;
        }
        Command::Synth { out_dir, count, seed } => {
            let (img_dir, gt_dir) = (out_dir.join("images"), out_dir.join("gt"));
            std::fs::create_dir_all(&img_dir)?;
            std::fs::create_dir_all(&gt_dir)?;
            for i in 0..count {
                let scene = generate_scene(seed.wrapping_add(i as u64), &SceneParams::default());
                let name = format!("scene_{i:04}.png");
                io::save_image(img_dir.join(&name), &scene.image)?;
                io::save_mask(gt_dir.join(&name), &scene.ground_truth)?;
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
