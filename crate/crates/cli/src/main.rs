//! `qpmseg`: segment quantitative phase images and evaluate on phantoms.
//!
//! Exit codes: 0 success, 2 configuration error, 3 degenerate threshold,
//! 4 no loadable images, 1 anything else.

mod settings;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use qpmseg::bench::benchmark;
use qpmseg::eval::{evaluate, predictions_from_regions, EvalConfig, ErrorReport};
use qpmseg::export::{self, CellRegions};
use qpmseg::io::{self, Calibration, RawDtype};
use qpmseg::overlay::save_overlay;
use qpmseg::phantom::{GroundTruth, PhantomParams, PhantomSet};
use qpmseg::pipeline::{run_pipeline, DirSource, ImageSource};
use qpmseg::Error;

use settings::{load_config, load_toml, ConfigError};

#[derive(Parser)]
#[command(name = "qpmseg", version, about = "Cell and nucleus segmentation of quantitative phase images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment every image of a measurement directory.
    Segment(SegmentArgs),
    /// Synthetic phantoms: generation, evaluation and benchmarking.
    #[command(subcommand)]
    Phantom(PhantomCommand),
}

#[derive(Args)]
struct SegmentArgs {
    /// Directory with .tif/.tiff or .raw (+ .json header) phase images.
    input: PathBuf,
    /// Pixel size in µm; overrides raw headers.
    #[arg(long)]
    pixel_size_um: Option<f64>,
    /// Wavelength in nm; overrides raw headers.
    #[arg(long)]
    wavelength_nm: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// TOML file with pipeline settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Write a PNG overlay per analysed image.
    #[arg(long)]
    overlays: bool,
    /// Threshold (rad) to use when the automatic one is zero.
    #[arg(long)]
    fallback_threshold: Option<f64>,
    /// Write per-image statistics to stats.csv.
    #[arg(long)]
    stats_dump: bool,
}

#[derive(Subcommand)]
enum PhantomCommand {
    /// Write phantom images and their ground truth.
    Generate(GenerateArgs),
    /// Classify a segmentation run against phantom ground truth.
    Evaluate(EvaluateArgs),
    /// Time the pipeline on in-memory phantoms.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Raw,
    Tiff,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file with phantom parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Raw)]
    format: Format,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of ground-truth JSON files written by `phantom generate`.
    #[arg(long)]
    truth: PathBuf,
    /// Output directory of a `segment` run.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    match_iou: f64,
    #[arg(long, default_value_t = 0.8)]
    boundary_iou: f64,
    /// Report file; defaults to <run>/error_report.json.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn segment(args: SegmentArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref(), std::env::vars())?;
    if let Some(t) = args.fallback_threshold {
        cfg.fallback_threshold = Some(t);
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    }
    let workers = args.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(ConfigError("--workers must be at least 1".into()).into());
    }
    let cal = Calibration { pixel_size_um: args.pixel_size_um, wavelength_nm: args.wavelength_nm };
    let source = DirSource::open(&args.input, cal)?;
    info!("{} images in {}", source.len(), args.input.display());

    let output = run_pipeline(&source, &cfg, workers)?;
    let m = &output.manifest;
    for f in &m.load_failures {
        warn!("skipped {}: {}", f.input, f.error);
    }
    if m.measurement.fallback_used {
        warn!("automatic threshold is zero, using fallback {}", m.measurement.threshold);
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    export::write_features_csv(create(&args.out.join("features.csv"))?, output.records())?;
    export::write_features_jsonl(create(&args.out.join("features.jsonl"))?, output.records())?;
    export::write_regions_jsonl(create(&args.out.join("regions.jsonl"))?, &output)?;
    export::write_diagnostics(create(&args.out.join("diagnostics.log"))?, &output)?;
    serde_json::to_writer_pretty(create(&args.out.join("manifest.json"))?, m)?;
    if args.stats_dump {
        export::write_stats_csv(create(&args.out.join("stats.csv"))?, &output)?;
    }
    if args.overlays {
        let dir = args.out.join("overlays");
        fs::create_dir_all(&dir)?;
        for (i, path) in source.paths().iter().enumerate() {
            let id = io::image_id(path);
            let Some(result) = output.images.iter().find(|r| r.image_id == id) else { continue };
            // overlays are best effort
            match source.load(i).and_then(|img| save_overlay(&img, &result.cells, &dir.join(format!("{id}.png")))) {
                Ok(()) => {}
                Err(e) => warn!("overlay for {id}: {e}"),
            }
        }
    }
    println!(
        "{} images ({} filtered, {} unreadable), threshold {:.6} rad, {} cells, {} with nucleus, {:.3} s/image",
        m.counts.loaded_images,
        m.counts.filtered_images,
        m.counts.load_failures,
        m.measurement.threshold,
        m.counts.cells,
        m.counts.cells_with_nucleus,
        m.timings.per_image_s.unwrap_or(0.0)
    );
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let params: PhantomParams = load_toml(args.params.as_deref())?;
    params.validate().map_err(|e| ConfigError(e.to_string()))?;
    let set = PhantomSet::new(params, args.seed, args.count);
    let truth_dir = args.out.join("truth");
    fs::create_dir_all(&truth_dir)?;
    for i in 0..args.count {
        let scene = set.scene(i)?;
        match args.format {
            Format::Raw => {
                io::write_raw(&scene.image, &args.out, RawDtype::F32)?;
            }
            Format::Tiff => io::write_tiff(&scene.image, &args.out.join(format!("{}.tif", scene.image.id())))?,
        }
        serde_json::to_writer(create(&truth_dir.join(format!("{}.json", scene.image.id())))?, &scene.truth)?;
    }
    println!("{} phantoms written to {}", args.count, args.out.display());
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let cfg = EvalConfig { match_iou: args.match_iou, boundary_iou: args.boundary_iou };
    let regions_path = args.run.join("regions.jsonl");
    let text = fs::read_to_string(&regions_path).with_context(|| format!("reading {}", regions_path.display()))?;
    let regions = export::read_regions_jsonl(&text)?;

    let mut truth_paths: Vec<PathBuf> = fs::read_dir(&args.truth)
        .with_context(|| format!("reading {}", args.truth.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    truth_paths.sort();
    let truths: Vec<GroundTruth> = truth_paths
        .iter()
        .map(|p| -> Result<GroundTruth> {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<_>>()?;

    if let Some(c) = regions.iter().find(|c| !truths.iter().any(|t| t.image_id == c.image_id)) {
        return Err(Error::SceneMismatch { truth: String::new(), prediction: c.image_id.clone() }.into());
    }
    let mut report = ErrorReport::empty(&cfg);
    for t in &truths {
        let cells: Vec<CellRegions> = regions.iter().filter(|c| c.image_id == t.image_id).cloned().collect();
        report = report.merge(&evaluate(t, &t.image_id, &predictions_from_regions(&cells), &cfg)?);
    }
    let json = args.json.unwrap_or_else(|| args.run.join("error_report.json"));
    serde_json::to_writer_pretty(create(&json)?, &report)?;
    print!("{}", report.table());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), std::env::vars())?;
    let params: PhantomParams = load_toml(args.params.as_deref())?;
    params.validate().map_err(|e| ConfigError(e.to_string()))?;
    let set = PhantomSet::new(params, args.seed, args.count);
    // generation is kept out of the timed runs
    let images = (0..args.count).map(|i| set.load(i)).collect::<qpmseg::Result<Vec<_>>>()?;
    let report = benchmark(images.as_slice(), &cfg, args.workers, args.repetitions)?;
    if let Some(p) = &args.json {
        serde_json::to_writer_pretty(create(p)?, &report)?;
    }
    println!("{report}");
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_)) => 2,
        Some(Error::DegenerateThreshold { .. }) => 3,
        Some(Error::NoImages(_) | Error::EmptyMeasurement) => 4,
        _ => 1,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment(a) => segment(a),
        Command::Phantom(PhantomCommand::Generate(a)) => generate(a),
        Command::Phantom(PhantomCommand::Evaluate(a)) => evaluate_cmd(a),
        Command::Phantom(PhantomCommand::Bench(a)) => bench(a),
    };
    if let Err(e) = result {
        let code = exit_code(&e);
        match e.downcast_ref::<Error>() {
            Some(Error::DegenerateThreshold { mean_background }) => eprintln!(
                "error: mean background {mean_background} gives a zero threshold; pass --fallback-threshold to continue"
            ),
            _ => eprintln!("error: {e:#}"),
        }
        std::process::exit(code);
    }
}
