//! Built-in synthetic refiners.

use super::{RefineError, RefineOutput, Refiner, Scene};
use crate::geometry::{iou_3d, wrap_angle, Box3D};
use rand::RngCore;
use rand_distr::{Distribution, Normal};

/// How a refiner scores the box it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfidenceMode {
    Fixed(f64),
    /// 3D IoU of the refined box with the matched ground truth.
    FromIou,
}

/// Returns its input unchanged with a fixed confidence.
#[derive(Debug, Clone, Copy)]
pub struct IdentityRefiner {
    pub confidence: f64,
}

impl Refiner for IdentityRefiner {
    fn refine(
        &self,
        proposal: &Box3D,
        _scene: &Scene,
        _rng: &mut dyn RngCore,
    ) -> Result<RefineOutput, RefineError> {
        Ok(RefineOutput {
            refined: *proposal,
            confidence: self.confidence.clamp(0.0, 1.0),
        })
    }
}

/// Moves every box parameter a fraction λ toward the matched ground truth
/// (best 3D IoU, nearest center on ties or zero overlap), optionally adding
/// Gaussian center jitter of standard deviation σ meters.
#[derive(Debug, Clone, Copy)]
pub struct ContractionRefiner {
    pub lambda: f64,
    pub sigma: f64,
    pub confidence: ConfidenceMode,
}

impl ContractionRefiner {
    pub fn new(lambda: f64) -> Self {
        assert!(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
        Self {
            lambda,
            sigma: 0.0,
            confidence: ConfidenceMode::FromIou,
        }
    }

    pub fn with_jitter(lambda: f64, sigma: f64) -> Self {
        assert!(sigma >= 0.0, "sigma must be non-negative");
        Self {
            sigma,
            ..Self::new(lambda)
        }
    }

    pub fn with_confidence(mut self, mode: ConfidenceMode) -> Self {
        self.confidence = mode;
        self
    }

    fn matched_gt<'a>(&self, proposal: &Box3D, scene: &'a Scene) -> Option<&'a Box3D> {
        let mut best: Option<(&Box3D, f64)> = None;
        for gt in &scene.gt_boxes {
            let iou = iou_3d(proposal, gt);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gt, iou));
            }
        }
        match best {
            Some((gt, iou)) if iou > 0.0 => Some(gt),
            _ => scene.gt_boxes.iter().min_by(|a, b| {
                let da = dist2(proposal, a);
                let db = dist2(proposal, b);
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            }),
        }
    }
}

fn dist2(a: &Box3D, b: &Box3D) -> f64 {
    (a.cx - b.cx).powi(2) + (a.cy - b.cy).powi(2) + (a.cz - b.cz).powi(2)
}

impl Refiner for ContractionRefiner {
    fn refine(
        &self,
        proposal: &Box3D,
        scene: &Scene,
        rng: &mut dyn RngCore,
    ) -> Result<RefineOutput, RefineError> {
        let gt = self.matched_gt(proposal, scene).ok_or(RefineError::NoGroundTruth)?;
        let lerp = |from: f64, to: f64| from + self.lambda * (to - from);
        let mut refined = Box3D::new(
            lerp(proposal.cx, gt.cx),
            lerp(proposal.cy, gt.cy),
            lerp(proposal.cz, gt.cz),
            lerp(proposal.l, gt.l),
            lerp(proposal.w, gt.w),
            lerp(proposal.h, gt.h),
            proposal.yaw + self.lambda * wrap_angle(gt.yaw - proposal.yaw),
        );
        if self.sigma > 0.0 {
            let normal = Normal::new(0.0, self.sigma).expect("valid sigma");
            refined.cx += normal.sample(rng);
            refined.cy += normal.sample(rng);
            refined.cz += normal.sample(rng);
        }
        let confidence = match self.confidence {
            ConfidenceMode::Fixed(c) => c.clamp(0.0, 1.0),
            ConfidenceMode::FromIou => iou_3d(&refined, gt),
        };
        Ok(RefineOutput { refined, confidence })
    }
}
