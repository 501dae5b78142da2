//! lidarkit command-line front end.
//!
//! Subcommands: `pcs-stats`, `eval`, `cascade-sim`, `voxel-stats`,
//! `convert`. Configuration comes from an optional TOML file plus flag
//! overrides (flags win); every output table embeds the seed and the full
//! resolved configuration, and frame-level problems go to stderr with a
//! non-zero exit code while the run continues.

mod commands;
mod config;
mod frames;
mod table;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use config::{
    parse_iou_kind, parse_metric, parse_stratifier, voxel_from, DatasetKind, FileConfig,
    RefinerKind, Settings,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lidarkit", version, about = "LiDAR detection geometry, statistics and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root (velodyne/, label_2/, calib/ for KITTI; velodyne/ and
    /// labels.jsonl for waymo-export).
    #[arg(long)]
    dataset_root: Option<PathBuf>,
    /// kitti | waymo-export
    #[arg(long)]
    dataset_kind: Option<String>,
    /// Output directory for the report tables.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for frame-level parallelism (0 = automatic).
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// ap11 | ap40
    #[arg(long)]
    metric: Option<String>,
    /// 3d | bev
    #[arg(long)]
    iou: Option<String>,
    #[arg(long)]
    iou_thresh: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-object completeness scores, histogram, and sparsity groups.
    PcsStats {
        #[command(flatten)]
        common: CommonArgs,
        /// Histogram bin width; must evenly divide 1.
        #[arg(long)]
        bin_width: Option<f64>,
    },
    /// Stratified AP over a detection results directory.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory of per-frame result files (KITTI) or a detections
        /// .jsonl (waymo-export).
        #[arg(long)]
        results: Option<PathBuf>,
        /// auto | none | kitti | waymo
        #[arg(long)]
        stratifier: Option<String>,
        /// Completeness bin edges for completeness-binned AP.
        #[arg(long, value_delimiter = ',')]
        pc_bins: Option<Vec<f64>>,
        /// Score thresholds for error-type analysis.
        #[arg(long, value_delimiter = ',')]
        error_thresholds: Option<Vec<f64>>,
        /// Also dump the pooled precision-recall curve.
        #[arg(long)]
        pr_dump: bool,
    },
    /// Cascade gain and loss-distribution experiments.
    CascadeSim {
        #[command(flatten)]
        common: CommonArgs,
        /// identity | contraction | jittered
        #[arg(long)]
        refiner: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Stage counts to compare, e.g. 1,2,3.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<usize>>,
        /// Input IoU grid points.
        #[arg(long, value_delimiter = ',')]
        iou_grid: Option<Vec<f64>>,
        /// Proposals per grid point.
        #[arg(long)]
        proposals: Option<usize>,
        /// Completeness bin edges for the loss study (0..1).
        #[arg(long, value_delimiter = ',')]
        loss_bins: Option<Vec<f64>>,
        #[arg(long)]
        loss_samples: Option<usize>,
    },
    /// Voxel occupancy per frame and aggregate.
    VoxelStats {
        #[command(flatten)]
        common: CommonArgs,
        /// kitti | waymo | custom (custom reads ranges from the config file)
        #[arg(long)]
        preset: Option<String>,
        /// Also write one grid dump per frame into this directory.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
    /// Camera-frame labels to a LiDAR-frame box dump.
    Convert {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Default)]
struct Extras {
    bin_width: Option<f64>,
    results: Option<PathBuf>,
    stratifier: Option<String>,
    pc_bins: Option<Vec<f64>>,
    error_thresholds: Option<Vec<f64>>,
    refiner: Option<String>,
    lambda: Option<f64>,
    sigma: Option<f64>,
    stages: Option<Vec<usize>>,
    iou_grid: Option<Vec<f64>>,
    proposals: Option<usize>,
    loss_bins: Option<Vec<f64>>,
    loss_samples: Option<usize>,
    preset: Option<String>,
}

fn resolve(common: &CommonArgs, extras: Extras) -> Result<Settings> {
    let file = FileConfig::load(common.config.as_deref())?;
    let dataset_kind = DatasetKind::parse(
        common
            .dataset_kind
            .as_deref()
            .or(file.dataset_kind.as_deref())
            .unwrap_or("kitti"),
    )?;
    let voxel_preset = extras
        .preset
        .or(file.voxel_preset.clone())
        .unwrap_or_else(|| match dataset_kind {
            DatasetKind::Kitti => "kitti".to_string(),
            DatasetKind::WaymoExport => "waymo".to_string(),
        });
    let stratifier = match extras.stratifier.as_deref().or(file.stratifier.as_deref()) {
        Some(s) => parse_stratifier(s)?,
        None => None,
    };
    let voxel = voxel_from(&voxel_preset, &file)?;
    Ok(Settings {
        dataset_root: common.dataset_root.clone().or(file.dataset_root),
        dataset_kind,
        out: common
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("out")),
        seed: common.seed.or(file.seed).unwrap_or(0),
        threads: common.threads.or(file.threads).unwrap_or(0),
        classes: common
            .classes
            .clone()
            .or(file.classes)
            .unwrap_or_else(|| vec!["Car".to_string()]),
        metric: parse_metric(common.metric.as_deref().or(file.metric.as_deref()).unwrap_or("ap40"))?,
        iou: parse_iou_kind(common.iou.as_deref().or(file.iou.as_deref()).unwrap_or("3d"))?,
        iou_thresh: common.iou_thresh.or(file.iou_thresh).unwrap_or(0.7),
        bin_width: extras.bin_width.or(file.bin_width).unwrap_or(0.05),
        stratifier,
        results: extras.results.or(file.results),
        pc_bins: extras.pc_bins.or(file.pc_bins),
        error_thresholds: extras
            .error_thresholds
            .or(file.error_thresholds)
            .unwrap_or_default(),
        voxel,
        voxel_preset,
        refiner: RefinerKind::parse(
            extras
                .refiner
                .as_deref()
                .or(file.refiner.as_deref())
                .unwrap_or("jittered"),
        )?,
        lambda: extras.lambda.or(file.lambda).unwrap_or(0.5),
        sigma: extras.sigma.or(file.sigma).unwrap_or(0.055),
        stages: extras.stages.or(file.stages).unwrap_or_else(|| vec![1, 2, 3]),
        iou_grid: extras
            .iou_grid
            .or(file.iou_grid)
            .unwrap_or_else(|| vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
        proposals: extras.proposals.or(file.proposals).unwrap_or(1000),
        loss_bins: extras
            .loss_bins
            .or(file.loss_bins)
            .unwrap_or_else(|| vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]),
        loss_samples: extras.loss_samples.or(file.loss_samples).unwrap_or(2000),
    })
}

type Action = Box<dyn FnOnce(&Settings) -> Result<Vec<String>>>;

fn run(cli: Cli) -> Result<Vec<String>> {
    let (settings, action): (Settings, Action) =
        match cli.command {
            Command::PcsStats { common, bin_width } => {
                let settings = resolve(&common, Extras { bin_width, ..Default::default() })?;
                (settings, Box::new(commands::pcs_stats::run))
            }
            Command::Eval {
                common,
                results,
                stratifier,
                pc_bins,
                error_thresholds,
                pr_dump,
            } => {
                let settings = resolve(
                    &common,
                    Extras {
                        results,
                        stratifier,
                        pc_bins,
                        error_thresholds,
                        ..Default::default()
                    },
                )?;
                (settings, Box::new(move |s: &Settings| commands::eval::run(s, pr_dump)))
            }
            Command::CascadeSim {
                common,
                refiner,
                lambda,
                sigma,
                stages,
                iou_grid,
                proposals,
                loss_bins,
                loss_samples,
            } => {
                let settings = resolve(
                    &common,
                    Extras {
                        refiner,
                        lambda,
                        sigma,
                        stages,
                        iou_grid,
                        proposals,
                        loss_bins,
                        loss_samples,
                        ..Default::default()
                    },
                )?;
                (settings, Box::new(commands::cascade_sim::run))
            }
            Command::VoxelStats { common, preset, dump_dir } => {
                let settings = resolve(&common, Extras { preset, ..Default::default() })?;
                (settings, Box::new(move |s: &Settings| commands::voxel_stats::run(s, dump_dir.as_deref())))
            }
            Command::Convert { common } => {
                let settings = resolve(&common, Extras::default())?;
                (settings, Box::new(commands::convert::run))
            }
        };
    if settings.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(settings.threads)
            .build_global()
            .ok();
    }
    action(&settings)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(errors) if errors.is_empty() => ExitCode::SUCCESS,
        Ok(errors) => {
            for e in &errors {
                eprintln!("error: {e}");
            }
            eprintln!("{} frame-level problem(s); outputs written for the readable frames", errors.len());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
