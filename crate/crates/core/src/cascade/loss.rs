//! Detection-head losses: smooth-L1 regression over raw 7-parameter box
//! residuals, binary cross-entropy against IoU-guided confidence targets,
//! and the task-weighted per-stage aggregation.

use super::{CascadeError, StageTrace};
use crate::completeness::TaskWeights;
use crate::geometry::{wrap_angle, Box3D};

/// Default linear-ramp bounds for the IoU-guided confidence target.
pub const CONFIDENCE_TARGET_LO: f64 = 0.25;
pub const CONFIDENCE_TARGET_HI: f64 = 0.75;

/// Piecewise quadratic/linear loss: 0.5·r²/β for |r| < β, else |r| − β/2.
pub fn smooth_l1(residual: f64, beta: f64) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    let abs = residual.abs();
    if abs < beta {
        0.5 * residual * residual / beta
    } else {
        abs - 0.5 * beta
    }
}

/// Binary cross-entropy with the prediction clamped away from {0, 1}.
pub fn binary_cross_entropy(prediction: f64, target: f64) -> f64 {
    let p = prediction.clamp(1e-12, 1.0 - 1e-12);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Linear ramp from 0 at `lo` to 1 at `hi`, clamped.
pub fn iou_guided_confidence_target(iou: f64, lo: f64, hi: f64) -> f64 {
    assert!(lo < hi, "lo must be below hi");
    ((iou - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Targets for [`stage_loss`].
#[derive(Debug, Clone)]
pub struct StageLossTargets<'a> {
    /// Confidence target per proposal per stage, each in [0, 1].
    pub confidence: &'a [Vec<f64>],
    /// Matched ground-truth box per proposal; `None` for negatives, which
    /// carry no regression term.
    pub regression: &'a [Option<Box3D>],
}

/// One proposal's loss terms at one stage, before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalStageLoss {
    pub confidence_loss: f64,
    pub regression_loss: f64,
    pub weight: f64,
}

impl ProposalStageLoss {
    pub fn weighted(&self) -> f64 {
        self.weight * self.confidence_loss + self.weight * self.regression_loss
    }
}

/// Full loss decomposition: per proposal per stage, per-stage sums, total.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    /// Indexed `[proposal][stage]`.
    pub per_proposal: Vec<Vec<ProposalStageLoss>>,
    pub stage_totals: Vec<f64>,
    pub total: f64,
}

/// Raw 7-parameter residuals between a box and its target, yaw wrapped.
fn box_residuals(b: &Box3D, target: &Box3D) -> [f64; 7] {
    [
        b.cx - target.cx,
        b.cy - target.cy,
        b.cz - target.cz,
        b.l - target.l,
        b.w - target.w,
        b.h - target.h,
        wrap_angle(b.yaw - target.yaw),
    ]
}

/// Task-weighted cascade loss.
///
/// Per stage and proposal: `w_m · (BCE(c_m^t, target) + Σ smooth_l1)` with
/// the regression sum over the 7 box residuals, positives only. The same
/// per-proposal weight applies at every stage (the quality score it derives
/// from is a ground-truth property and does not change across stages).
/// Stage totals sum over proposals; the total sums over stages.
pub fn stage_loss(
    traces: &[StageTrace],
    weights: &TaskWeights,
    targets: &StageLossTargets,
    beta: f64,
) -> Result<LossBreakdown, CascadeError> {
    let n = traces.len();
    if weights.weights.len() != n {
        return Err(CascadeError::LengthMismatch {
            what: "task weights",
            expected: n,
            got: weights.weights.len(),
        });
    }
    if targets.confidence.len() != n {
        return Err(CascadeError::LengthMismatch {
            what: "confidence targets",
            expected: n,
            got: targets.confidence.len(),
        });
    }
    if targets.regression.len() != n {
        return Err(CascadeError::LengthMismatch {
            what: "regression targets",
            expected: n,
            got: targets.regression.len(),
        });
    }
    let stages = traces.first().map_or(0, StageTrace::stages);
    let mut per_proposal = Vec::with_capacity(n);
    let mut stage_totals = vec![0.0; stages];
    for (m, trace) in traces.iter().enumerate() {
        if targets.confidence[m].len() != trace.stages() {
            return Err(CascadeError::LengthMismatch {
                what: "per-stage confidence targets",
                expected: trace.stages(),
                got: targets.confidence[m].len(),
            });
        }
        let positive = weights.positive_mask.get(m).copied().unwrap_or(false);
        let gt = match (positive, targets.regression[m].as_ref()) {
            (true, Some(gt)) => Some(gt),
            (true, None) => return Err(CascadeError::MissingRegressionTarget { proposal: m }),
            (false, _) => None,
        };
        let weight = weights.weights[m];
        let mut rows = Vec::with_capacity(trace.stages());
        for t in 0..trace.stages() {
            let target = targets.confidence[m][t];
            if !(0.0..=1.0).contains(&target) {
                return Err(CascadeError::InvalidConfidenceTarget {
                    proposal: m,
                    stage: t,
                    value: target,
                });
            }
            let confidence_loss = binary_cross_entropy(trace.confidences[t], target);
            let regression_loss = gt
                .map(|gt| {
                    box_residuals(&trace.boxes[t], gt)
                        .iter()
                        .map(|&r| smooth_l1(r, beta))
                        .sum()
                })
                .unwrap_or(0.0);
            let row = ProposalStageLoss {
                confidence_loss,
                regression_loss,
                weight,
            };
            if t < stage_totals.len() {
                stage_totals[t] += row.weighted();
            } else {
                stage_totals.resize(t + 1, 0.0);
                stage_totals[t] += row.weighted();
            }
            rows.push(row);
        }
        per_proposal.push(rows);
    }
    let total = stage_totals.iter().sum();
    Ok(LossBreakdown {
        per_proposal,
        stage_totals,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completeness::{task_weights, WeightStrategy};

    #[test]
    fn smooth_l1_hand_values() {
        assert_eq!(smooth_l1(0.0, 1.0), 0.0);
        assert!((smooth_l1(0.5, 1.0) - 0.125).abs() < 1e-12);
        assert!((smooth_l1(2.0, 1.0) - 1.5).abs() < 1e-12);
        assert!((smooth_l1(-2.0, 1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn smooth_l1_continuous_at_the_knee() {
        let beta = 0.7;
        let below = smooth_l1(beta - 1e-9, beta);
        let above = smooth_l1(beta + 1e-9, beta);
        assert!((below - above).abs() < 1e-8);
    }

    #[test]
    fn confidence_target_ramp() {
        assert_eq!(iou_guided_confidence_target(0.25, 0.25, 0.75), 0.0);
        assert_eq!(iou_guided_confidence_target(0.75, 0.25, 0.75), 1.0);
        assert!((iou_guided_confidence_target(0.5, 0.25, 0.75) - 0.5).abs() < 1e-12);
        assert_eq!(iou_guided_confidence_target(0.1, 0.25, 0.75), 0.0);
        assert_eq!(iou_guided_confidence_target(0.9, 0.25, 0.75), 1.0);
    }

    #[test]
    fn bce_basics() {
        assert!(binary_cross_entropy(0.999999, 1.0) < 1e-5);
        assert!(binary_cross_entropy(0.5, 1.0) > 0.69);
        assert!(binary_cross_entropy(0.0, 0.0) < 1e-9);
        assert!(binary_cross_entropy(1.0, 1.0).is_finite());
        assert!(binary_cross_entropy(0.0, 1.0).is_finite());
    }

    fn trace(confidence: f64, b: Box3D, stages: usize) -> StageTrace {
        StageTrace {
            input: b,
            boxes: vec![b; stages],
            confidences: vec![confidence; stages],
        }
    }

    #[test]
    fn negatives_only_sum_confidence_losses() {
        let b = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let traces = vec![trace(0.3, b, 1), trace(0.6, b, 1)];
        let weights = task_weights(&[0.0, 0.0], &[false, false], WeightStrategy::PcScore).unwrap();
        let confidence = vec![vec![0.0], vec![0.0]];
        let targets = StageLossTargets {
            confidence: &confidence,
            regression: &[None, None],
        };
        let breakdown = stage_loss(&traces, &weights, &targets, 1.0).unwrap();
        let expected = binary_cross_entropy(0.3, 0.0) + binary_cross_entropy(0.6, 0.0);
        assert!((breakdown.total - expected).abs() < 1e-12);
    }

    #[test]
    fn loss_is_linear_in_the_weight() {
        let gt = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let off = Box3D::new(0.4, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let traces = vec![StageTrace {
            input: off,
            boxes: vec![off],
            confidences: vec![0.5],
        }];
        let confidence = vec![vec![1.0]];
        let targets = StageLossTargets {
            confidence: &confidence,
            regression: &[Some(gt)],
        };
        let w1 = TaskWeights {
            weights: vec![1.0],
            positive_mask: vec![true],
            strategy: WeightStrategy::PcScore,
        };
        let w2 = TaskWeights {
            weights: vec![2.0],
            positive_mask: vec![true],
            strategy: WeightStrategy::PcScore,
        };
        let l1 = stage_loss(&traces, &w1, &targets, 1.0).unwrap().total;
        let l2 = stage_loss(&traces, &w2, &targets, 1.0).unwrap().total;
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn reweighted_equal_raw_losses_follow_normalized_weights() {
        // Two positives with equal raw losses L and Q = [0.2, 0.6] get
        // weights [0.5, 1.5]: stage total = 0.5 L + 1.5 L = 2 L.
        let gt = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let off = Box3D::new(0.4, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let traces = vec![
            StageTrace { input: off, boxes: vec![off], confidences: vec![0.5] },
            StageTrace { input: off, boxes: vec![off], confidences: vec![0.5] },
        ];
        let confidence = vec![vec![1.0], vec![1.0]];
        let targets = StageLossTargets {
            confidence: &confidence,
            regression: &[Some(gt), Some(gt)],
        };
        let weights = task_weights(&[0.2, 0.6], &[true, true], WeightStrategy::PcScore).unwrap();
        let breakdown = stage_loss(&traces, &weights, &targets, 1.0).unwrap();
        let raw = breakdown.per_proposal[0][0].confidence_loss
            + breakdown.per_proposal[0][0].regression_loss;
        assert!((breakdown.total - 2.0 * raw).abs() < 1e-9);
        assert!((breakdown.per_proposal[0][0].weight - 0.5).abs() < 1e-12);
        assert!((breakdown.per_proposal[1][0].weight - 1.5).abs() < 1e-12);
    }

    #[test]
    fn total_is_the_sum_of_stage_totals() {
        let gt = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let off = Box3D::new(0.3, 0.1, 0.0, 1.1, 1.0, 1.0, 0.1);
        let traces = vec![StageTrace {
            input: off,
            boxes: vec![off, gt, gt],
            confidences: vec![0.4, 0.6, 0.9],
        }];
        let confidence = vec![vec![0.2, 0.7, 1.0]];
        let targets = StageLossTargets {
            confidence: &confidence,
            regression: &[Some(gt)],
        };
        let weights = TaskWeights {
            weights: vec![1.0],
            positive_mask: vec![true],
            strategy: WeightStrategy::PcScore,
        };
        let breakdown = stage_loss(&traces, &weights, &targets, 1.0).unwrap();
        assert_eq!(breakdown.stage_totals.len(), 3);
        let sum: f64 = breakdown.stage_totals.iter().sum();
        assert!((breakdown.total - sum).abs() < 1e-12);
        assert!(breakdown.total >= 0.0);
    }

    #[test]
    fn invalid_target_rejected() {
        let b = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let traces = vec![trace(0.5, b, 1)];
        let confidence = vec![vec![1.5]];
        let targets = StageLossTargets {
            confidence: &confidence,
            regression: &[None],
        };
        let weights = TaskWeights {
            weights: vec![1.0],
            positive_mask: vec![false],
            strategy: WeightStrategy::PcScore,
        };
        let err = stage_loss(&traces, &weights, &targets, 1.0).unwrap_err();
        assert!(matches!(err, CascadeError::InvalidConfidenceTarget { .. }));
    }
}
