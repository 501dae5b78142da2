//! `eval`: stratified AP report plus optional completeness-binned AP,
//! error-type analysis, and PR dumps.

use crate::config::{DatasetKind, Settings};
use crate::frames::{load_frames, waymo_labels_path};
use crate::table::{fmt_ap, fmt_f64, Table};
use anyhow::{bail, Context, Result};
use lidarkit::dataset::kitti as kio;
use lidarkit::dataset::waymo as wio;
use lidarkit::dataset::DetectionRecord;
use lidarkit::eval::{
    error_analysis, evaluate, pc_binned_ap, pr_curve, EvalConfig, FrameEvalRecord, Stratifier,
};
use std::collections::BTreeMap;
use std::path::Path;

pub fn run(settings: &Settings, pr_dump: bool) -> Result<Vec<String>> {
    let root = settings
        .dataset_root
        .as_deref()
        .context("eval requires --dataset-root")?;
    let results_dir = settings
        .results
        .as_deref()
        .context("eval requires --results")?;

    let with_clouds = settings.pc_bins.is_some();
    let load = load_frames(root, settings.dataset_kind, with_clouds, None);
    let errors = load.errors;
    let mut frames: Vec<FrameEvalRecord> = load.frames.into_iter().map(|f| f.record).collect();

    attach_detections(&mut frames, settings.dataset_kind, root, results_dir)?;

    let stratifier = settings.stratifier.unwrap_or(match settings.dataset_kind {
        DatasetKind::Kitti => Stratifier::KittiDifficulty,
        DatasetKind::WaymoExport => Stratifier::WaymoLevels,
    });

    let echo = settings.echo();
    let mut ap_table = Table::new(&["stratum", "class", "metric", "iou", "iou_thresh", "counted_gt", "ap"]);
    let mut pr_table = Table::new(&["stratum", "class", "recall", "precision"]);
    for class in &settings.classes {
        let config = EvalConfig {
            class_name: class.clone(),
            iou_kind: settings.iou,
            iou_thresh: settings.iou_thresh,
            positions: settings.metric,
            stratifier,
        };
        for row in evaluate(&frames, &config) {
            ap_table.push(vec![
                row.stratum.clone(),
                class.clone(),
                settings.metric_name().to_string(),
                settings.iou_name().to_string(),
                fmt_f64(settings.iou_thresh),
                row.counted_gt.to_string(),
                fmt_ap(row.ap),
            ]);
        }
        if pr_dump {
            let (points, _) = pr_curve(
                &frames,
                class,
                settings.iou,
                settings.iou_thresh,
                &|_| true,
            );
            for p in points {
                pr_table.push(vec![
                    "All".to_string(),
                    class.clone(),
                    fmt_f64(p.recall),
                    fmt_f64(p.precision),
                ]);
            }
        }
    }
    ap_table.write_to(&settings.out.join("eval_ap.tsv"), "eval", settings.seed, &echo)?;
    if pr_dump {
        pr_table.write_to(&settings.out.join("eval_pr.tsv"), "eval", settings.seed, &echo)?;
    }

    if let Some(bin_edges) = &settings.pc_bins {
        let mut bins_table = Table::new(&["lo", "hi", "class", "counted_gt", "ap"]);
        for class in &settings.classes {
            let config = EvalConfig {
                class_name: class.clone(),
                iou_kind: settings.iou,
                iou_thresh: settings.iou_thresh,
                positions: settings.metric,
                stratifier: Stratifier::AllInOne,
            };
            for bin in pc_binned_ap(&frames, bin_edges, &config) {
                bins_table.push(vec![
                    fmt_f64(bin.lo),
                    fmt_f64(bin.hi),
                    class.clone(),
                    bin.counted_gt.to_string(),
                    fmt_ap(bin.ap),
                ]);
            }
        }
        bins_table.write_to(&settings.out.join("eval_pc_bins.tsv"), "eval", settings.seed, &echo)?;
    }

    if !settings.error_thresholds.is_empty() {
        let mut err_table = Table::new(&[
            "score_threshold",
            "class",
            "correct",
            "mislocalized",
            "background",
            "correct_ratio",
            "mislocalized_ratio",
            "background_ratio",
        ]);
        for class in &settings.classes {
            for &threshold in &settings.error_thresholds {
                let breakdown = error_analysis(&frames, class, threshold, settings.iou);
                let (c, m, b) = breakdown.ratios();
                err_table.push(vec![
                    fmt_f64(threshold),
                    class.clone(),
                    breakdown.correct.to_string(),
                    breakdown.mislocalized.to_string(),
                    breakdown.background.to_string(),
                    fmt_f64(c),
                    fmt_f64(m),
                    fmt_f64(b),
                ]);
            }
        }
        err_table.write_to(&settings.out.join("eval_errors.tsv"), "eval", settings.seed, &echo)?;
    }

    println!(
        "eval: {} frames, classes [{}] -> {}",
        frames.len(),
        settings.classes.join(","),
        settings.out.display()
    );
    Ok(errors)
}

/// Loads detections from the results directory into the matching frames.
/// A detection frame id with no ground-truth frame, or a ground-truth frame
/// with no result file, is a frame-id mismatch and aborts with both lists.
fn attach_detections(
    frames: &mut [FrameEvalRecord],
    kind: DatasetKind,
    root: &Path,
    results_dir: &Path,
) -> Result<()> {
    let mut by_frame: BTreeMap<String, Vec<DetectionRecord>> = BTreeMap::new();
    match kind {
        DatasetKind::Kitti => {
            // Check frame-id agreement before touching per-frame calibs so
            // a stray result file reports a mismatch, not a calib error.
            let result_ids = kio::list_frame_ids(results_dir)?;
            check_frame_ids(frames, result_ids.iter().map(String::as_str), true)?;
            for id in &result_ids {
                let calib = kio::parse_calib_file(&kio::calib_path(root, id))?;
                let path = results_dir.join(format!("{id}.txt"));
                by_frame.insert(id.clone(), kio::read_detection_file(&path, &calib, id)?);
            }
        }
        DatasetKind::WaymoExport => {
            let path = if results_dir.is_file() {
                results_dir.to_path_buf()
            } else {
                waymo_labels_path(results_dir)
            };
            for det in wio::read_waymo_detections(&path)? {
                by_frame
                    .entry(det.frame.clone())
                    .or_default()
                    .push(DetectionRecord {
                        frame_id: det.frame.clone(),
                        box3d: det.box3d(),
                        class_name: det.class.clone(),
                        score: det.score,
                    });
            }
        }
    }

    if kind == DatasetKind::WaymoExport {
        // A jsonl result set legitimately omits frames with no detections,
        // so only unknown frame ids count as a mismatch there.
        check_frame_ids(frames, by_frame.keys().map(String::as_str), false)?;
    }
    for frame in frames.iter_mut() {
        if let Some(dets) = by_frame.remove(&frame.frame_id) {
            frame.detections = dets;
        }
    }
    Ok(())
}

fn check_frame_ids<'a>(
    frames: &[FrameEvalRecord],
    result_ids: impl Iterator<Item = &'a str>,
    missing_is_error: bool,
) -> Result<()> {
    let gt_ids: Vec<&str> = frames.iter().map(|f| f.frame_id.as_str()).collect();
    let result_ids: Vec<&str> = result_ids.collect();
    let missing_results: Vec<&&str> = gt_ids
        .iter()
        .filter(|id| !result_ids.contains(*id))
        .collect();
    let unknown_frames: Vec<&&str> = result_ids
        .iter()
        .filter(|id| !gt_ids.contains(*id))
        .collect();
    if (missing_is_error && !missing_results.is_empty()) || !unknown_frames.is_empty() {
        bail!(
            "frame-id mismatch between ground truth and results: missing result files {missing_results:?}, results without ground truth {unknown_frames:?}"
        );
    }
    Ok(())
}
