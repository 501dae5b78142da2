//! Run configuration: a TOML key-value file merged with flag overrides
//! (flags win), resolved into one settings struct whose echo line is
//! embedded in every output file.

use anyhow::{bail, Context, Result};
use lidarkit::cascade::{ConfidenceMode, ContractionRefiner, IdentityRefiner, Refiner};
use lidarkit::eval::{ApPositions, IouKind, Stratifier};
use lidarkit::voxel::VoxelConfig;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Kitti,
    WaymoExport,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kitti" => Ok(DatasetKind::Kitti),
            "waymo-export" => Ok(DatasetKind::WaymoExport),
            other => bail!("unknown dataset kind '{other}' (expected kitti | waymo-export)"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Kitti => "kitti",
            DatasetKind::WaymoExport => "waymo-export",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinerKind {
    Identity,
    Contraction,
    Jittered,
}

impl RefinerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(RefinerKind::Identity),
            "contraction" => Ok(RefinerKind::Contraction),
            "jittered" => Ok(RefinerKind::Jittered),
            other => bail!("unknown refiner '{other}' (expected identity | contraction | jittered)"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RefinerKind::Identity => "identity",
            RefinerKind::Contraction => "contraction",
            RefinerKind::Jittered => "jittered",
        }
    }
}

/// Optional keys of the TOML config file; flags override any of them.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset_root: Option<PathBuf>,
    pub dataset_kind: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub classes: Option<Vec<String>>,
    pub metric: Option<String>,
    pub iou: Option<String>,
    pub iou_thresh: Option<f64>,
    pub bin_width: Option<f64>,
    pub stratifier: Option<String>,
    pub results: Option<PathBuf>,
    pub pc_bins: Option<Vec<f64>>,
    pub error_thresholds: Option<Vec<f64>>,
    pub voxel_preset: Option<String>,
    pub range_min: Option<[f64; 3]>,
    pub range_max: Option<[f64; 3]>,
    pub voxel_size: Option<[f64; 3]>,
    pub refiner: Option<String>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub stages: Option<Vec<usize>>,
    pub iou_grid: Option<Vec<f64>>,
    pub proposals: Option<usize>,
    pub loss_bins: Option<Vec<f64>>,
    pub loss_samples: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct Settings {
    pub dataset_root: Option<PathBuf>,
    pub dataset_kind: DatasetKind,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub classes: Vec<String>,
    pub metric: ApPositions,
    pub iou: IouKind,
    pub iou_thresh: f64,
    pub bin_width: f64,
    pub stratifier: Option<Stratifier>,
    pub results: Option<PathBuf>,
    pub pc_bins: Option<Vec<f64>>,
    pub error_thresholds: Vec<f64>,
    pub voxel: VoxelConfig,
    pub voxel_preset: String,
    pub refiner: RefinerKind,
    pub lambda: f64,
    pub sigma: f64,
    pub stages: Vec<usize>,
    pub iou_grid: Vec<f64>,
    pub proposals: usize,
    pub loss_bins: Vec<f64>,
    pub loss_samples: usize,
}

impl Settings {
    pub fn metric_name(&self) -> &'static str {
        self.metric.name()
    }

    pub fn iou_name(&self) -> &'static str {
        match self.iou {
            IouKind::ThreeD => "3d",
            IouKind::Bev => "bev",
        }
    }

    pub fn build_refiner(&self) -> Box<dyn Refiner + Sync> {
        match self.refiner {
            RefinerKind::Identity => Box::new(IdentityRefiner { confidence: 1.0 }),
            RefinerKind::Contraction => Box::new(ContractionRefiner::new(self.lambda)),
            RefinerKind::Jittered => Box::new(
                ContractionRefiner::with_jitter(self.lambda, self.sigma)
                    .with_confidence(ConfidenceMode::FromIou),
            ),
        }
    }

    /// One-line echo of the full configuration, embedded in every output.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "dataset_root={} dataset_kind={} out={} seed={} threads={} classes={} metric={} iou={} iou_thresh={} bin_width={}",
            self.dataset_root
                .as_deref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into()),
            self.dataset_kind.name(),
            self.out.display(),
            self.seed,
            self.threads,
            self.classes.join(","),
            self.metric_name().to_lowercase(),
            self.iou_name(),
            self.iou_thresh,
            self.bin_width,
        );
        let _ = write!(
            s,
            " stratifier={} results={} pc_bins={} error_thresholds={}",
            self.stratifier
                .map(stratifier_name)
                .unwrap_or("auto"),
            self.results
                .as_deref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into()),
            self.pc_bins
                .as_ref()
                .map(|b| join_f64(b))
                .unwrap_or_else(|| "-".into()),
            join_f64(&self.error_thresholds),
        );
        let _ = write!(
            s,
            " voxel_preset={} range_min={} range_max={} voxel_size={}",
            self.voxel_preset,
            join_f64(&self.voxel.range_min),
            join_f64(&self.voxel.range_max),
            join_f64(&self.voxel.voxel_size),
        );
        let _ = write!(
            s,
            " refiner={} lambda={} sigma={} stages={} iou_grid={} proposals={} loss_bins={} loss_samples={}",
            self.refiner.name(),
            self.lambda,
            self.sigma,
            self.stages
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
            join_f64(&self.iou_grid),
            self.proposals,
            join_f64(&self.loss_bins),
            self.loss_samples,
        );
        s
    }
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn stratifier_name(s: Stratifier) -> &'static str {
    match s {
        Stratifier::AllInOne => "none",
        Stratifier::KittiDifficulty => "kitti",
        Stratifier::WaymoLevels => "waymo",
    }
}

pub fn parse_metric(s: &str) -> Result<ApPositions> {
    match s {
        "ap11" => Ok(ApPositions::Eleven),
        "ap40" => Ok(ApPositions::Forty),
        other => bail!("unknown metric '{other}' (expected ap11 | ap40)"),
    }
}

pub fn parse_iou_kind(s: &str) -> Result<IouKind> {
    match s {
        "3d" => Ok(IouKind::ThreeD),
        "bev" => Ok(IouKind::Bev),
        other => bail!("unknown iou kind '{other}' (expected 3d | bev)"),
    }
}

pub fn parse_stratifier(s: &str) -> Result<Option<Stratifier>> {
    match s {
        "auto" => Ok(None),
        "none" => Ok(Some(Stratifier::AllInOne)),
        "kitti" => Ok(Some(Stratifier::KittiDifficulty)),
        "waymo" => Ok(Some(Stratifier::WaymoLevels)),
        other => bail!("unknown stratifier '{other}' (expected auto | none | kitti | waymo)"),
    }
}

pub fn voxel_from(preset: &str, file: &FileConfig) -> Result<VoxelConfig> {
    match preset {
        "kitti" => Ok(VoxelConfig::kitti()),
        "waymo" => Ok(VoxelConfig::waymo()),
        "custom" => {
            let (Some(range_min), Some(range_max), Some(voxel_size)) =
                (file.range_min, file.range_max, file.voxel_size)
            else {
                bail!("voxel_preset=custom requires range_min, range_max, voxel_size in the config file");
            };
            Ok(VoxelConfig {
                range_min,
                range_max,
                voxel_size,
            })
        }
        other => bail!("unknown voxel preset '{other}' (expected kitti | waymo | custom)"),
    }
}
