//! Rotated BEV non-maximum suppression and the cascade inference pipeline.

use super::{run_cascade, CascadeError, Refiner, Scene};
use crate::dataset::DetectionRecord;
use crate::geometry::iou_bev;
use std::cmp::Ordering;

/// Total order on detections: score descending, then content, so NMS output
/// depends only on the input multiset and not its order.
fn detection_order(a: &DetectionRecord, b: &DetectionRecord) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.frame_id.cmp(&b.frame_id))
        .then_with(|| a.class_name.cmp(&b.class_name))
        .then_with(|| a.box3d.cx.total_cmp(&b.box3d.cx))
        .then_with(|| a.box3d.cy.total_cmp(&b.box3d.cy))
        .then_with(|| a.box3d.cz.total_cmp(&b.box3d.cz))
        .then_with(|| a.box3d.l.total_cmp(&b.box3d.l))
        .then_with(|| a.box3d.w.total_cmp(&b.box3d.w))
        .then_with(|| a.box3d.h.total_cmp(&b.box3d.h))
        .then_with(|| a.box3d.yaw.total_cmp(&b.box3d.yaw))
}

/// Greedy score-descending suppression with rotated BEV IoU.
///
/// A candidate is suppressed when its overlap with an already kept
/// detection exceeds `iou_thresh` (strictly). At most `max_keep` survivors,
/// returned in descending score order.
pub fn nms_rotated(
    dets: &[DetectionRecord],
    iou_thresh: f64,
    max_keep: usize,
) -> Vec<DetectionRecord> {
    assert!(iou_thresh > 0.0 && iou_thresh < 1.0, "iou_thresh must be in (0, 1)");
    let mut sorted: Vec<&DetectionRecord> = dets.iter().collect();
    sorted.sort_by(|a, b| detection_order(a, b));
    let mut kept: Vec<DetectionRecord> = Vec::new();
    for det in sorted {
        if kept.len() >= max_keep {
            break;
        }
        let suppressed = kept
            .iter()
            .any(|k| iou_bev(&k.box3d, &det.box3d) > iou_thresh);
        if !suppressed {
            kept.push(det.clone());
        }
    }
    kept
}

/// Inference pipeline parameters; the defaults mirror the standard setup:
/// proposal NMS at 0.7, top-100 proposals into the cascade, final NMS at
/// 0.1 to remove duplicates of converged boxes.
#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub proposal_nms_thresh: f64,
    pub top_k: usize,
    pub final_nms_thresh: f64,
    pub stages: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            proposal_nms_thresh: 0.7,
            top_k: 100,
            final_nms_thresh: 0.1,
            stages: 3,
        }
    }
}

/// Full inference pass: proposal NMS → top-k → cascade → confidence fusion
/// → final NMS. Scores on the output are fused stage confidences.
pub fn inference_pipeline(
    raw_proposals: &[DetectionRecord],
    refiner: &dyn Refiner,
    config: &PipelineConfig,
    scene: &Scene,
    seed: u64,
) -> Result<Vec<DetectionRecord>, CascadeError> {
    let survivors = nms_rotated(raw_proposals, config.proposal_nms_thresh, config.top_k);
    let boxes: Vec<_> = survivors.iter().map(|d| d.box3d).collect();
    let traces = run_cascade(&boxes, refiner, config.stages, scene, seed)?;
    let refined: Vec<DetectionRecord> = survivors
        .iter()
        .zip(&traces)
        .map(|(det, trace)| DetectionRecord {
            frame_id: det.frame_id.clone(),
            box3d: trace.final_box(),
            class_name: det.class_name.clone(),
            score: trace.fused_confidence(),
        })
        .collect();
    Ok(nms_rotated(&refined, config.final_nms_thresh, usize::MAX))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::IdentityRefiner;
    use crate::geometry::Box3D;

    fn det(cx: f64, cy: f64, yaw: f64, score: f64) -> DetectionRecord {
        DetectionRecord {
            frame_id: "000000".into(),
            box3d: Box3D::new(cx, cy, 0.0, 4.0, 2.0, 1.5, yaw),
            class_name: "Car".into(),
            score,
        }
    }

    #[test]
    fn identical_boxes_keep_highest_score() {
        let kept = nms_rotated(&[det(0.0, 0.0, 0.0, 0.9), det(0.0, 0.0, 0.0, 0.8)], 0.7, 100);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
    }

    #[test]
    fn disjoint_boxes_all_kept() {
        let kept = nms_rotated(&[det(0.0, 0.0, 0.0, 0.9), det(50.0, 0.0, 0.0, 0.8)], 0.7, 100);
        assert_eq!(kept.len(), 2);
        assert!(kept[0].score >= kept[1].score);
    }

    #[test]
    fn overlap_above_threshold_suppressed() {
        // Offset 0.5 on a 4 m box: BEV IoU = 3.5/4.5 ≈ 0.778 > 0.7.
        let a = det(0.0, 0.0, 0.0, 0.9);
        let b = det(0.5, 0.0, 0.0, 0.8);
        assert!(iou_bev(&a.box3d, &b.box3d) > 0.7);
        let kept = nms_rotated(&[a, b], 0.7, 100);
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn max_keep_caps_output() {
        let dets: Vec<_> = (0..10).map(|i| det(10.0 * i as f64, 0.0, 0.0, 0.5)).collect();
        assert_eq!(nms_rotated(&dets, 0.7, 3).len(), 3);
    }

    #[test]
    fn order_invariant_for_tied_scores() {
        let a = det(0.0, 0.0, 0.0, 0.8);
        let b = det(0.4, 0.0, 0.1, 0.8);
        let forward = nms_rotated(&[a.clone(), b.clone()], 0.7, 100);
        let reverse = nms_rotated(&[b, a], 0.7, 100);
        assert_eq!(forward, reverse);
    }

    #[test]
    fn pipeline_single_proposal_passes_through() {
        let scene = Scene::with_gt(vec![Box3D::new(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0)]);
        let out = inference_pipeline(
            &[det(0.0, 0.0, 0.0, 0.9)],
            &IdentityRefiner { confidence: 0.6 },
            &PipelineConfig::default(),
            &scene,
            0,
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn pipeline_caps_cascade_input_at_top_k() {
        let scene = Scene::with_gt(vec![Box3D::new(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0)]);
        let proposals: Vec<_> = (0..300)
            .map(|i| det(8.0 * i as f64, 0.0, 0.0, (i % 97) as f64 / 97.0))
            .collect();
        let config = PipelineConfig { final_nms_thresh: 0.05, ..Default::default() };
        let out = inference_pipeline(
            &proposals,
            &IdentityRefiner { confidence: 0.5 },
            &config,
            &scene,
            0,
        )
        .unwrap();
        assert!(out.len() <= 100);
    }

    #[test]
    fn pipeline_deduplicates_converged_boxes() {
        // Proposals far apart survive proposal NMS, but a full-contraction
        // refiner maps all of them onto the ground truth; final NMS at 0.1
        // must collapse them to one detection.
        let gt = Box3D::new(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0);
        let scene = Scene::with_gt(vec![gt]);
        let proposals = vec![det(0.0, 0.0, 0.0, 0.9), det(10.0, 0.0, 0.0, 0.8)];
        let refiner = crate::cascade::ContractionRefiner::new(1.0);
        let out =
            inference_pipeline(&proposals, &refiner, &PipelineConfig::default(), &scene, 0).unwrap();
        assert_eq!(out.len(), 1);
    }
}
