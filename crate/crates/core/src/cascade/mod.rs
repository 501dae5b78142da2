//! Cascade detection-head simulation.
//!
//! The learned RoI feature extractor is abstracted behind the [`Refiner`]
//! contract: given a proposal box and the scene, produce a refined box and
//! a confidence. Chaining a refiner for T stages, fusing confidences by
//! their mean, and taking the last stage's box reproduces the cascade
//! inference structure without any network. Built-in synthetic refiners
//! (identity, λ-contraction toward the matched ground truth, jittered
//! contraction, IoU-derived confidence) make the qualitative behavior of
//! the cascade reproducible and testable.

mod experiments;
mod loss;
mod nms;
mod refiners;
mod sampling;

pub use experiments::{
    experiment_iou_gain, experiment_loss_distribution, gen_proposals_at_iou, IouGainRow,
    LossBinRow, LossDistribution,
};
pub use loss::{
    binary_cross_entropy, iou_guided_confidence_target, smooth_l1, stage_loss, LossBreakdown,
    ProposalStageLoss, StageLossTargets, CONFIDENCE_TARGET_HI, CONFIDENCE_TARGET_LO,
};
pub use nms::{inference_pipeline, nms_rotated, PipelineConfig};
pub use refiners::{ConfidenceMode, ContractionRefiner, IdentityRefiner};
pub use sampling::{sample_rois, RoiSample};

use crate::completeness::CompletenessError;
use crate::geometry::{Box3D, PointCloud};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("cascade needs at least one stage")]
    ZeroStages,
    #[error("refiner failed on proposal {proposal}: {source}")]
    RefinerFailed {
        proposal: usize,
        #[source]
        source: RefineError,
    },
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("confidence target {value} outside [0, 1] (proposal {proposal}, stage {stage})")]
    InvalidConfidenceTarget {
        proposal: usize,
        stage: usize,
        value: f64,
    },
    #[error("proposal {proposal} is positive but has no regression target")]
    MissingRegressionTarget { proposal: usize },
    #[error("target IoU {0} outside (0, 1]")]
    InvalidTargetIou(f64),
    #[error("target IoU {target} unreachable by bisection (achieved {achieved})")]
    TargetIouUnreachable { target: f64, achieved: f64 },
    #[error("bin edges must ascend from 0 to 1")]
    InvalidBinEdges,
    #[error(transparent)]
    Completeness(#[from] CompletenessError),
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("scene has no ground-truth box to refine toward")]
    NoGroundTruth,
    #[error("{0}")]
    Other(String),
}

/// The scene a refiner may consult.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub gt_boxes: Vec<Box3D>,
    pub cloud: PointCloud,
}

impl Scene {
    pub fn with_gt(gt_boxes: Vec<Box3D>) -> Self {
        Self {
            gt_boxes,
            cloud: PointCloud::new(),
        }
    }
}

/// One refinement step's output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOutput {
    pub refined: Box3D,
    pub confidence: f64,
}

/// One detection-head stage: box in, refined box and confidence out.
///
/// Implementations must be deterministic given the rng state, keep
/// confidence in [0, 1], and return boxes with positive extents.
pub trait Refiner {
    fn refine(
        &self,
        proposal: &Box3D,
        scene: &Scene,
        rng: &mut dyn RngCore,
    ) -> Result<RefineOutput, RefineError>;
}

/// Per-proposal refinement history across all stages.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub input: Box3D,
    /// Stage outputs r^1..r^T.
    pub boxes: Vec<Box3D>,
    /// Stage confidences c^1..c^T.
    pub confidences: Vec<f64>,
}

impl StageTrace {
    pub fn stages(&self) -> usize {
        self.boxes.len()
    }

    /// Mean of the per-stage confidences.
    pub fn fused_confidence(&self) -> f64 {
        if self.confidences.is_empty() {
            return 0.0;
        }
        self.confidences.iter().sum::<f64>() / self.confidences.len() as f64
    }

    /// The last stage's box.
    pub fn final_box(&self) -> Box3D {
        *self.boxes.last().unwrap_or(&self.input)
    }
}

/// Seeds the per-proposal RNG stream. XOR-ing the proposal index keeps
/// parallel and serial execution bit-identical.
pub(crate) fn proposal_rng(seed: u64, proposal_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ proposal_index as u64)
}

/// Runs the cascade: stage t consumes the boxes of stage t−1 (stage 0 being
/// the input proposals). A refiner failure aborts with the proposal index.
pub fn run_cascade(
    proposals: &[Box3D],
    refiner: &dyn Refiner,
    stages: usize,
    scene: &Scene,
    seed: u64,
) -> Result<Vec<StageTrace>, CascadeError> {
    if stages == 0 {
        return Err(CascadeError::ZeroStages);
    }
    let mut traces = Vec::with_capacity(proposals.len());
    for (m, &proposal) in proposals.iter().enumerate() {
        let mut rng = proposal_rng(seed, m);
        let mut boxes = Vec::with_capacity(stages);
        let mut confidences = Vec::with_capacity(stages);
        let mut current = proposal;
        for _ in 0..stages {
            let output = refiner
                .refine(&current, scene, &mut rng)
                .map_err(|source| CascadeError::RefinerFailed { proposal: m, source })?;
            debug_assert!(
                (0.0..=1.0).contains(&output.confidence),
                "refiner confidence out of range"
            );
            debug_assert!(
                output.refined.l > 0.0 && output.refined.w > 0.0 && output.refined.h > 0.0,
                "refiner produced a degenerate box"
            );
            current = output.refined;
            boxes.push(current);
            confidences.push(output.confidence);
        }
        traces.push(StageTrace {
            input: proposal,
            boxes,
            confidences,
        });
    }
    Ok(traces)
}
