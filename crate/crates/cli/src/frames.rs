//! Frame loading: turns a dataset root into evaluation records, collecting
//! per-frame problems as strings instead of aborting the run.

use crate::config::DatasetKind;
use lidarkit::completeness::pc_score;
use lidarkit::dataset::kitti as kio;
use lidarkit::dataset::waymo as wio;
use lidarkit::eval::{FrameEvalRecord, GroundTruth};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub struct LoadedFrame {
    pub record: FrameEvalRecord,
}

pub struct FrameLoad {
    pub frames: Vec<LoadedFrame>,
    pub errors: Vec<String>,
}

pub fn waymo_labels_path(root: &Path) -> PathBuf {
    root.join("labels.jsonl")
}

pub fn waymo_cloud_path(root: &Path, frame: &str) -> PathBuf {
    root.join("velodyne").join(format!("{frame}.bin"))
}

/// Loads ground truths (and clouds when `with_clouds`) for every frame of
/// the dataset, in frame-id order. Problems are reported per frame and the
/// run continues; a frame whose labels parse but whose cloud is missing is
/// kept with `cloud: None` and completeness scores defaulting to 1.
pub fn load_frames(
    root: &Path,
    kind: DatasetKind,
    with_clouds: bool,
    keep_classes: Option<&[String]>,
) -> FrameLoad {
    let per_frame: Vec<(String, Option<LoadedFrame>, Vec<String>)> = match kind {
        DatasetKind::Kitti => {
            let ids = match kio::list_frame_ids(&root.join("label_2")) {
                Ok(ids) => ids,
                Err(e) => {
                    return FrameLoad {
                        frames: Vec::new(),
                        errors: vec![e.to_string()],
                    }
                }
            };
            ids.par_iter()
                .map(|id| {
                    let (frame, errors) = load_kitti_frame(root, id, with_clouds, keep_classes);
                    (id.clone(), frame, errors)
                })
                .collect()
        }
        DatasetKind::WaymoExport => {
            let labels = match wio::read_waymo_labels(&waymo_labels_path(root)) {
                Ok(labels) => labels,
                Err(e) => {
                    return FrameLoad {
                        frames: Vec::new(),
                        errors: vec![e.to_string()],
                    }
                }
            };
            let mut by_frame: BTreeMap<String, Vec<wio::WaymoLabel>> = BTreeMap::new();
            for label in labels {
                by_frame.entry(label.frame.clone()).or_default().push(label);
            }
            let entries: Vec<(String, Vec<wio::WaymoLabel>)> = by_frame.into_iter().collect();
            entries
                .par_iter()
                .map(|(id, labels)| {
                    let (frame, errors) =
                        load_waymo_frame(root, id, labels, with_clouds, keep_classes);
                    (id.clone(), frame, errors)
                })
                .collect()
        }
    };

    let mut per_frame = per_frame;
    per_frame.sort_by(|a, b| a.0.cmp(&b.0));
    let mut frames = Vec::new();
    let mut errors = Vec::new();
    for (_, frame, errs) in per_frame {
        if let Some(frame) = frame {
            frames.push(frame);
        }
        errors.extend(errs);
    }
    FrameLoad { frames, errors }
}

fn class_kept(keep: Option<&[String]>, class: &str) -> bool {
    keep.is_none_or(|list| list.iter().any(|c| c == class))
}

fn load_kitti_frame(
    root: &Path,
    id: &str,
    with_clouds: bool,
    keep_classes: Option<&[String]>,
) -> (Option<LoadedFrame>, Vec<String>) {
    let mut errors = Vec::new();
    let labels = match kio::parse_label_file(&kio::label_path(root, id)) {
        Ok(labels) => labels,
        Err(e) => return (None, vec![e.to_string()]),
    };
    let calib = match kio::parse_calib_file(&kio::calib_path(root, id)) {
        Ok(calib) => calib,
        Err(e) => return (None, vec![e.to_string()]),
    };
    let cloud = if with_clouds {
        match kio::read_velodyne_bin(&kio::velodyne_path(root, id)) {
            Ok(read) => {
                if read.dropped_non_finite > 0 {
                    errors.push(format!(
                        "{id}: dropped {} non-finite points",
                        read.dropped_non_finite
                    ));
                }
                Some(read.cloud)
            }
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    let mut ground_truths = Vec::new();
    for label in &labels {
        // DontCare regions are 2D image rectangles with sentinel dims;
        // there is no 3D box to lift, so they are dropped here.
        if label.is_dont_care() || !class_kept(keep_classes, &label.class_name) {
            continue;
        }
        let box3d = match kio::camera_box_to_lidar(label, &calib) {
            Ok(b) => b,
            Err(e) => {
                errors.push(format!("{id}: {e}"));
                continue;
            }
        };
        let (q, num_points) = match &cloud {
            Some(cloud) => match pc_score(&box3d, cloud) {
                Ok(result) => (result.score, result.point_count),
                Err(e) => {
                    errors.push(format!("{id}: {e}"));
                    (1.0, 0)
                }
            },
            None => (1.0, 0),
        };
        ground_truths.push(GroundTruth::new(
            box3d,
            label.class_name.clone(),
            kio::difficulty_of(label),
            q,
            num_points,
        ));
    }
    let record = FrameEvalRecord {
        frame_id: id.to_string(),
        detections: Vec::new(),
        ground_truths,
    };
    (Some(LoadedFrame { record }), errors)
}

fn load_waymo_frame(
    root: &Path,
    id: &str,
    labels: &[wio::WaymoLabel],
    with_clouds: bool,
    keep_classes: Option<&[String]>,
) -> (Option<LoadedFrame>, Vec<String>) {
    let mut errors = Vec::new();
    let cloud = if with_clouds {
        match kio::read_velodyne_bin(&waymo_cloud_path(root, id)) {
            Ok(read) => Some(read.cloud),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    let mut ground_truths = Vec::new();
    for label in labels {
        if !class_kept(keep_classes, &label.class) {
            continue;
        }
        let box3d = label.box3d();
        let q = match &cloud {
            Some(cloud) => pc_score(&box3d, cloud).map(|r| r.score).unwrap_or(1.0),
            None => 1.0,
        };
        ground_truths.push(GroundTruth::new(
            box3d,
            label.class.clone(),
            // Difficulty is a KITTI concept; Easy keeps difficulty filters
            // permissive for exported rows.
            kio::Difficulty::Easy,
            q,
            label.num_points,
        ));
    }
    let record = FrameEvalRecord {
        frame_id: id.to_string(),
        detections: Vec::new(),
        ground_truths,
    };
    (Some(LoadedFrame { record }), errors)
}
