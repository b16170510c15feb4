//! Command-line front end: synthetic dataset generation, segmentation,
//! evaluation, refinement-pair generation, and the self-check battery.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 data error
//! (unreadable or inconsistent files), 3 self-check failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use tabseg_core::augment::make_refine_pair;
use tabseg_core::config::PipelineConfig;
use tabseg_core::io::{
    read_camera_json, read_mask_png, read_predictions, read_scene_dir, scene_dirs,
    write_camera_json, write_label_png, write_predictions, write_refine_index,
    write_refine_pair, write_scene_dir, RefineIndexEntry,
};
use tabseg_core::metrics::ScoreReport;
use tabseg_core::pipeline::{
    evaluate_dirs, paste_refined, refine_seam, segment_cloud, write_report,
};
use tabseg_core::predictor::{DensePredictor, FixedPredictor, OraclePredictor};
use tabseg_core::rng::substream;
use tabseg_core::scenegen::generate_scene;
use tabseg_core::selfcheck::{self, Fault};
use tabseg_core::types::{BinaryMask, Error, ImageGrid, Result, RgbRaster};
use tabseg_core::voting::VotingMode;

#[derive(Parser)]
#[command(name = "tabseg", version, about = "Tabletop instance segmentation toolkit")]
struct Cli {
    /// JSON config file; omitted keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the subcommand's randomness (default: the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-scene parallelism.
    #[arg(long, global = true, default_value_t = 4)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tabletop dataset.
    GenScenes {
        /// Dataset root to create.
        #[arg(long)]
        out: PathBuf,
        /// Number of scenes.
        #[arg(long, default_value_t = 20)]
        scenes: usize,
    },
    /// Segment every scene of a dataset; writes per-scene label.png.
    Segment {
        /// Dataset root (scene dirs with depth.png, plus camera.json).
        #[arg(long)]
        data: PathBuf,
        /// Output root for predicted label.png files.
        #[arg(long)]
        out: PathBuf,
        /// Per-scene dense prediction cache (<scene>.bin); files found here
        /// are replayed, anything missing is computed and written back.
        #[arg(long)]
        dense_cache: Option<PathBuf>,
        /// Externally refined masks (<scene>/instance_<id>.png), pasted
        /// back through the inverse crop transform.
        #[arg(long)]
        refined_masks: Option<PathBuf>,
        /// Write each instance's refiner input crops
        /// (<scene>/instance_<id>_{rgb,mask}.png plus index.json).
        #[arg(long)]
        export_crops: Option<PathBuf>,
        /// Force the quadratic reference voting path.
        #[arg(long)]
        exact_voting: bool,
    },
    /// Score predictions against ground truth.
    Evaluate {
        /// Root of predicted label.png scene dirs.
        #[arg(long)]
        pred: PathBuf,
        /// Root of ground-truth label.png scene dirs.
        #[arg(long)]
        gt: PathBuf,
        /// Report directory (summary.json, per_image.csv).
        #[arg(long)]
        out: PathBuf,
        /// Boundary slack radius in pixels (default scales with image size).
        #[arg(long)]
        slack_radius: Option<usize>,
    },
    /// Produce augmented refinement training pairs from a labeled dataset.
    AugmentGen {
        /// Dataset root with ground-truth label.png files.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for pair files and index.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the internal verification battery.
    Selfcheck {
        #[arg(long, hide = true)]
        fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    Semantic,
    Direction,
    Rrn,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors exit 1; --help and --version exit 0.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Data(_) | Error::Io(_) => 2,
                _ => 1,
            })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    if cli.workers == 0 {
        return Err(Error::InvalidParam("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;

    match cli.command {
        Command::GenScenes { out, scenes } => {
            let seed = cli.seed.unwrap_or(cfg.scene.rng_seed);
            gen_scenes(&cfg, seed, &out, scenes, &pool)
        }
        Command::Segment {
            data,
            out,
            dense_cache,
            refined_masks,
            export_crops,
            exact_voting,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let mode = if exact_voting { VotingMode::Exact } else { VotingMode::Fast };
            segment(
                &cfg,
                seed,
                mode,
                &data,
                &out,
                dense_cache.as_deref(),
                refined_masks.as_deref(),
                export_crops.as_deref(),
                &pool,
            )
        }
        Command::Evaluate { pred, gt, out, slack_radius } => {
            let slack = slack_radius.or(cfg.eval.slack_radius);
            evaluate(&pred, &gt, &out, slack, cfg.eval.aggregation, cli.workers)
        }
        Command::AugmentGen { data, out } => {
            let seed = cli.seed.unwrap_or(cfg.augment.rng_seed);
            augment_gen(&cfg, seed, &data, &out)
        }
        Command::Selfcheck { fault } => {
            let seed = cli.seed.unwrap_or(0);
            let fault = match fault {
                None => Fault::None,
                Some(FaultArg::Semantic) => Fault::SemanticGradient,
                Some(FaultArg::Direction) => Fault::DirectionGradient,
                Some(FaultArg::Rrn) => Fault::RrnGradient,
            };
            let report = selfcheck::run_with_fault(seed, fault);
            print!("{}", report.render());
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn gen_scenes(
    cfg: &PipelineConfig,
    seed: u64,
    out: &Path,
    scenes: usize,
    pool: &rayon::ThreadPool,
) -> Result<ExitCode> {
    std::fs::create_dir_all(out)?;
    let grid = ImageGrid::new(cfg.scene.height, cfg.scene.width)?;
    let camera =
        tabseg_core::geometry::PinholeCamera::from_vertical_fov(grid, cfg.scene.vertical_fov_deg)?;
    write_camera_json(&out.join("camera.json"), &camera)?;
    pool.install(|| {
        (0..scenes)
            .into_par_iter()
            .map(|i| {
                let scene = generate_scene(&cfg.scene, seed, i as u64)?;
                write_scene_dir(
                    &out.join(format!("scene_{i:04}")),
                    &scene.depth,
                    Some(&scene.rgb),
                    Some(&scene.instances),
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;
    println!("wrote {scenes} scenes -> {}", out.display());
    Ok(ExitCode::SUCCESS)
}

/// Splitmix-style per-scene seed derivation.
fn scene_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[allow(clippy::too_many_arguments)]
fn segment(
    cfg: &PipelineConfig,
    seed: u64,
    mode: VotingMode,
    data: &Path,
    out: &Path,
    dense_cache: Option<&Path>,
    refined_masks: Option<&Path>,
    export_crops: Option<&Path>,
    pool: &rayon::ThreadPool,
) -> Result<ExitCode> {
    let scenes = scene_dirs(data)?;
    if scenes.is_empty() {
        return Err(Error::Data(format!(
            "no scene directories under {}",
            data.display()
        )));
    }
    let camera = read_camera_json(&data.join("camera.json"))?;
    if let Some(cache) = dense_cache {
        std::fs::create_dir_all(cache)?;
    }
    pool.install(|| {
        scenes
            .par_iter()
            .enumerate()
            .map(|(index, (id, dir))| {
                let files = read_scene_dir(dir)?;
                let cloud = camera.backproject(&files.depth)?;
                let cached = dense_cache.map(|c| c.join(format!("{id}.bin")));
                let (probs, dirs) = match &cached {
                    Some(path) if path.is_file() => read_predictions(path, 3)?,
                    _ => {
                        let gt = files.labels.ok_or_else(|| {
                            Error::Data(format!(
                                "scene {id}: label.png required to derive oracle predictions"
                            ))
                        })?;
                        let oracle = OraclePredictor::noisy(
                            gt,
                            cfg.oracle.direction_noise_deg,
                            cfg.oracle.label_flip_prob,
                            scene_seed(seed, index),
                        )?;
                        let (probs, dirs) = oracle.predict(&cloud)?;
                        if let Some(path) = &cached {
                            write_predictions(path, &probs, &dirs)?;
                        }
                        (probs, dirs)
                    }
                };
                let predictor = FixedPredictor::new(probs, dirs)?;
                let mut map = segment_cloud(&cloud, &predictor, cfg, mode)?;
                if let Some(export) = export_crops {
                    let rgb = files
                        .rgb
                        .unwrap_or_else(|| RgbRaster::filled(map.grid(), [0, 0, 0]));
                    let pairs = refine_seam(&map, &rgb, cfg.refine.pad_frac)?;
                    let scene_dir = export.join(id);
                    let mut index_rows = Vec::with_capacity(pairs.len());
                    for (iid, pair) in &pairs {
                        let stem = format!("instance_{iid:02}");
                        write_refine_pair(&scene_dir, &stem, pair, false)?;
                        index_rows.push(RefineIndexEntry {
                            scene: id.clone(),
                            instance: *iid,
                            stem,
                            crop_box: pair.crop_box,
                        });
                    }
                    write_refine_index(&scene_dir.join("index.json"), &index_rows)?;
                }
                if let Some(refined_root) = refined_masks {
                    let rdir = refined_root.join(id);
                    if rdir.is_dir() {
                        let refined = read_refined_masks(&rdir)?;
                        map = paste_refined(&map, &refined, cfg.refine.pad_frac)
                            .map_err(|e| Error::Data(format!("scene {id}: {e}")))?;
                    }
                }
                let scene_out = out.join(id);
                std::fs::create_dir_all(&scene_out)?;
                write_label_png(&scene_out.join("label.png"), &map)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    println!("segmented {} scenes -> {}", scenes.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

/// Reads `instance_<id>.png` mask files from one scene's refined-mask
/// directory, ignoring anything else in it.
fn read_refined_masks(dir: &Path) -> Result<Vec<(u32, BinaryMask)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n.to_owned(),
            None => continue,
        };
        if let Some(idtext) = name.strip_prefix("instance_").and_then(|s| s.strip_suffix(".png")) {
            let id: u32 = idtext.parse().map_err(|_| {
                Error::Data(format!("{}: unparseable instance id", path.display()))
            })?;
            out.push((id, read_mask_png(&path)?));
        }
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

fn evaluate(
    pred: &Path,
    gt: &Path,
    out: &Path,
    slack: Option<usize>,
    aggregation: tabseg_core::metrics::Aggregation,
    workers: usize,
) -> Result<ExitCode> {
    let outcome = evaluate_dirs(pred, gt, slack, aggregation, workers)?;
    write_report(out, &outcome.report)?;
    print_score_summary(&outcome.report);
    println!("report -> {}", out.display());
    if outcome.missing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "skipped {} scene(s) present on only one side: {}",
            outcome.missing.len(),
            outcome.missing.join(", ")
        );
        Ok(ExitCode::from(2))
    }
}

fn print_score_summary(report: &ScoreReport) {
    println!(
        "overlap  P {:.2} R {:.2} F {:.2}",
        report.overlap.precision, report.overlap.recall, report.overlap.fmeasure
    );
    println!(
        "boundary P {:.2} R {:.2} F {:.2}",
        report.boundary.precision, report.boundary.recall, report.boundary.fmeasure
    );
    println!("images: {}", report.per_image.len());
}

fn augment_gen(cfg: &PipelineConfig, seed: u64, data: &Path, out: &Path) -> Result<ExitCode> {
    let scenes = scene_dirs(data)?;
    if scenes.is_empty() {
        return Err(Error::Data(format!(
            "no scene directories under {}",
            data.display()
        )));
    }
    std::fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for (scene_index, (id, dir)) in scenes.iter().enumerate() {
        let files = read_scene_dir(dir)?;
        let gt = files.labels.ok_or_else(|| {
            Error::Data(format!("scene {id}: label.png required for augmentation"))
        })?;
        let rgb = files
            .rgb
            .unwrap_or_else(|| RgbRaster::filled(gt.grid(), [0, 0, 0]));
        for (iid, mask) in gt.instance_masks() {
            let mut rng = substream(seed, ((scene_index as u64) << 20) | u64::from(iid));
            let augmented = tabseg_core::augment::augment_mask(&mask, &cfg.augment, &mut rng)?;
            let pair = make_refine_pair(&rgb, &mask, &augmented, cfg.refine.pad_frac)?;
            let stem = format!("{id}_{iid:02}");
            write_refine_pair(out, &stem, &pair, true)?;
            entries.push(RefineIndexEntry {
                scene: id.clone(),
                instance: iid,
                stem,
                crop_box: pair.crop_box,
            });
        }
    }
    write_refine_index(&out.join("index.json"), &entries)?;
    println!("wrote {} refinement pairs -> {}", entries.len(), out.display());
    Ok(ExitCode::SUCCESS)
}
