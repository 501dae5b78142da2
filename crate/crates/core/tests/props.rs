//! Property tests for the geometric and statistical invariants.

use lidarkit::cascade::nms_rotated;
use lidarkit::completeness::{pc_score, task_weights, WeightStrategy};
use lidarkit::dataset::DetectionRecord;
use lidarkit::eval::{ap_interpolated, ApPositions, PrPoint};
use lidarkit::geometry::{
    apply_global_transform, bev_intersection_area, iou_3d, iou_bev, points_in_box,
    smallest_enclosing_aligned_box, Box3D, GlobalTransform, PointCloud,
};
use lidarkit::voxel::{bev_collapse, voxelize, VoxelConfig};
use proptest::prelude::*;

fn arb_box() -> impl Strategy<Value = Box3D> {
    (
        -10.0..10.0f64,
        -10.0..10.0f64,
        -3.0..3.0f64,
        0.2..5.0f64,
        0.2..5.0f64,
        0.2..5.0f64,
        -std::f64::consts::PI..std::f64::consts::PI,
    )
        .prop_map(|(cx, cy, cz, l, w, h, yaw)| Box3D::new(cx, cy, cz, l, w, h, yaw))
}

fn arb_cloud(max_points: usize) -> impl Strategy<Value = PointCloud> {
    proptest::collection::vec((-12.0..12.0f64, -12.0..12.0f64, -4.0..4.0f64), 0..max_points)
        .prop_map(|points| {
            let mut cloud = PointCloud::new();
            for (x, y, z) in points {
                cloud.push(x, y, z, 0.0);
            }
            cloud
        })
}

proptest! {
    #[test]
    fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        for f in [iou_bev, iou_3d] {
            let ab = f(&a, &b);
            let ba = f(&b, &a);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - ba).abs() <= 1e-9, "asymmetry {ab} vs {ba}");
        }
        prop_assert!((iou_bev(&a, &a) - 1.0).abs() < 1e-12);
        prop_assert!((iou_3d(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intersection_bounded_by_smaller_footprint(a in arb_box(), b in arb_box()) {
        let inter = bev_intersection_area(&a, &b);
        prop_assert!(inter >= 0.0);
        prop_assert!(inter <= a.bev_area().min(b.bev_area()) + 1e-9);
    }

    #[test]
    fn enclosing_box_contained_and_covering(b in arb_box(), cloud in arb_cloud(64)) {
        let inside = points_in_box(&b, &cloud);
        let a = smallest_enclosing_aligned_box(&b, &cloud, &inside);
        prop_assert!(a.l <= b.l + 1e-9 && a.w <= b.w + 1e-9 && a.h <= b.h + 1e-9);
        prop_assert_eq!(a.yaw, b.yaw);
        for &i in &inside {
            prop_assert!(a.contains(cloud.point(i)));
        }
    }

    #[test]
    fn containment_invariant_under_joint_transform(
        b in arb_box(),
        cloud in arb_cloud(48),
        theta in -std::f64::consts::PI..std::f64::consts::PI,
        scale in 0.5..2.0f64,
    ) {
        let before = points_in_box(&b, &cloud);
        for tf in [GlobalTransform::Flip, GlobalTransform::Scale(scale), GlobalTransform::RotateZ(theta)] {
            let (c2, b2) = apply_global_transform(&cloud, std::slice::from_ref(&b), tf);
            prop_assert_eq!(points_in_box(&b2[0], &c2), before.clone(), "{:?}", tf);
        }
    }

    #[test]
    fn pc_score_monotone_under_point_addition(
        b in arb_box(),
        cloud in arb_cloud(48),
        extra in (-12.0..12.0f64, -12.0..12.0f64, -4.0..4.0f64),
    ) {
        let q0 = pc_score(&b, &cloud).unwrap().score;
        let mut grown = cloud.clone();
        grown.push(extra.0, extra.1, extra.2, 0.0);
        let q1 = pc_score(&b, &grown).unwrap().score;
        prop_assert!(q1 >= q0 - 1e-12);
    }

    #[test]
    fn task_weight_mass_and_ordering(
        scores in proptest::collection::vec(0.0..1.0f64, 1..64),
        flips in proptest::collection::vec(any::<bool>(), 1..64),
    ) {
        let n = scores.len().min(flips.len());
        let scores = &scores[..n];
        let mask = &flips[..n];
        for strategy in [WeightStrategy::PcScore, WeightStrategy::IouV1, WeightStrategy::IouV2] {
            let weights = task_weights(scores, mask, strategy).unwrap();
            let n_pos = weights.positive_count();
            prop_assert!((weights.positive_mass() - n_pos as f64).abs() <= 1e-9);
            let positive_sum: f64 = (0..n).filter(|&i| mask[i]).map(|i| scores[i]).sum();
            for i in 0..n {
                if !mask[i] {
                    prop_assert_eq!(weights.weights[i], 1.0);
                }
                for j in 0..n {
                    if mask[i] && mask[j] && positive_sum > 0.0 && scores[i] > scores[j] {
                        prop_assert!(weights.weights[i] > weights.weights[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn voxel_point_conservation(cloud in arb_cloud(256)) {
        let config = VoxelConfig {
            range_min: [-10.0, -10.0, -3.0],
            range_max: [10.0, 10.0, 3.0],
            voxel_size: [0.8, 0.8, 0.6],
        };
        let grid = voxelize(&cloud, &config).unwrap();
        let in_range = cloud
            .iter_points()
            .filter(|p| (0..3).all(|a| p[a] >= config.range_min[a] && p[a] < config.range_max[a]))
            .count();
        prop_assert_eq!(grid.stored_points(), in_range);
        let cell_sum: usize = grid.sorted_cells().iter().map(|(_, pts)| pts.len()).sum();
        prop_assert_eq!(cell_sum, in_range);
        prop_assert_eq!(bev_collapse(&grid).total(), in_range as u64);
        // Quantization round trip: members stay within half a voxel of the
        // cell center.
        for (cell, points) in grid.sorted_cells() {
            let center = grid.cell_center(cell);
            for &i in points {
                let p = cloud.point(i);
                for a in 0..3 {
                    prop_assert!((p[a] - center[a]).abs() <= 0.5 * config.voxel_size[a] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn nms_depends_only_on_the_multiset(
        boxes in proptest::collection::vec((arb_box(), 0.0..1.0f64), 1..12),
        rotation in 0usize..12,
    ) {
        let dets: Vec<DetectionRecord> = boxes
            .iter()
            .map(|(b, s)| DetectionRecord {
                frame_id: "000000".into(),
                box3d: *b,
                class_name: "Car".into(),
                score: *s,
            })
            .collect();
        let mut permuted = dets.clone();
        permuted.rotate_left(rotation % dets.len().max(1));
        let a = nms_rotated(&dets, 0.5, 100);
        let b = nms_rotated(&permuted, 0.5, 100);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ap_monotone_when_tp_outranks_fps(
        n_fp in 0usize..4,
        tp_score in 0.05..0.95f64,
    ) {
        // One GT, one TP plus n_fp FPs above it; raising the TP score above
        // every FP must not decrease AP.
        let mut mixed: Vec<PrPoint> = Vec::new();
        let mut tp = 0usize;
        let mut fp = 0usize;
        // FPs outrank the TP initially.
        for _ in 0..n_fp {
            fp += 1;
            mixed.push(PrPoint { recall: tp as f64, precision: tp as f64 / (tp + fp) as f64 });
        }
        tp += 1;
        mixed.push(PrPoint { recall: tp as f64, precision: tp as f64 / (tp + fp) as f64 });
        let improved = {
            // TP first now.
            let mut points = vec![PrPoint { recall: 1.0, precision: 1.0 }];
            let mut fp2 = 0usize;
            for _ in 0..n_fp {
                fp2 += 1;
                points.push(PrPoint { recall: 1.0, precision: 1.0 / (1.0 + fp2 as f64) });
            }
            points
        };
        let _ = tp_score;
        for positions in [ApPositions::Eleven, ApPositions::Forty] {
            prop_assert!(ap_interpolated(&improved, positions) >= ap_interpolated(&mixed, positions) - 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn difficulty_never_worsens_when_visibility_improves(
        height in 10.0..80.0f64,
        occlusion in 0i32..4,
        truncation in 0.0..0.8f64,
        height_gain in 0.0..30.0f64,
    ) {
        use lidarkit::dataset::kitti::{difficulty_of, KittiLabel};
        let label = |height: f64, occlusion: i32, truncation: f64| KittiLabel {
            class_name: "Car".into(),
            truncation,
            occlusion,
            alpha: 0.0,
            bbox2d: [0.0, 0.0, 50.0, height],
            dims_cam: [1.5, 1.6, 3.9],
            loc_cam: [0.0, 1.0, 20.0],
            ry: 0.0,
            score: None,
        };
        let base = difficulty_of(&label(height, occlusion, truncation));
        let taller = difficulty_of(&label(height + height_gain, occlusion, truncation));
        let less_occluded = difficulty_of(&label(height, (occlusion - 1).max(0), truncation));
        let less_truncated = difficulty_of(&label(height, occlusion, truncation * 0.5));
        prop_assert!(taller <= base);
        prop_assert!(less_occluded <= base);
        prop_assert!(less_truncated <= base);
    }

    #[test]
    fn single_stratum_matches_unstratified_and_tp_is_bounded(
        layout in proptest::collection::vec((0.0..2.0f64, 0.0..1.0f64, any::<bool>()), 1..6),
        extra_fps in 0usize..3,
    ) {
        use lidarkit::dataset::kitti::Difficulty;
        use lidarkit::eval::{
            evaluate, match_detections, pr_curve, EvalConfig, FrameEvalRecord, GroundTruth,
            IouKind, Stratifier,
        };
        // Ground truths on a grid; detections perturb a subset and add far
        // false positives.
        let mut ground_truths = Vec::new();
        let mut detections = Vec::new();
        for (i, (offset, score, detect)) in layout.iter().enumerate() {
            let b = Box3D::new(10.0 * i as f64, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0);
            ground_truths.push(GroundTruth::new(b, "Car", Difficulty::Easy, 1.0, 10));
            if *detect {
                detections.push(DetectionRecord {
                    frame_id: "000000".into(),
                    box3d: Box3D::new(10.0 * i as f64 + offset, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0),
                    class_name: "Car".into(),
                    score: *score,
                });
            }
        }
        for j in 0..extra_fps {
            detections.push(DetectionRecord {
                frame_id: "000000".into(),
                box3d: Box3D::new(500.0 + 20.0 * j as f64, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0),
                class_name: "Car".into(),
                score: 0.5,
            });
        }
        let frame = FrameEvalRecord {
            frame_id: "000000".into(),
            detections,
            ground_truths,
        };
        let result = match_detections(&frame, "Car", IouKind::ThreeD, 0.5, &|_| true);
        let tp = result
            .det_outcomes
            .iter()
            .filter(|o| matches!(o, lidarkit::eval::DetOutcome::TruePositive))
            .count();
        prop_assert!(tp <= frame.detections.len().min(frame.ground_truths.len()));

        let frames = vec![frame];
        let config = EvalConfig {
            class_name: "Car".into(),
            iou_kind: IouKind::ThreeD,
            iou_thresh: 0.5,
            positions: ApPositions::Eleven,
            stratifier: Stratifier::AllInOne,
        };
        let stratified = evaluate(&frames, &config);
        let (pr, total_gt) = pr_curve(&frames, "Car", IouKind::ThreeD, 0.5, &|_| true);
        let direct = (total_gt > 0).then(|| ap_interpolated(&pr, ApPositions::Eleven));
        prop_assert_eq!(stratified[0].ap, direct);
        prop_assert_eq!(stratified[0].counted_gt, total_gt);
    }
}
