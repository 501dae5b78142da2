//! Pre-exported Waymo frames: the same packed binary clouds as KITTI plus a
//! JSON-lines label file with LiDAR-frame boxes and per-box point counts.
//!
//! The export avoids a dependency on the native dataset container; frames
//! reference `<frame>.bin` clouds next to the label file.

use super::DatasetError;
use crate::geometry::Box3D;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// One exported label row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaymoLabel {
    pub frame: String,
    pub class: String,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
    pub num_points: usize,
}

impl WaymoLabel {
    pub fn box3d(&self) -> Box3D {
        Box3D::new(self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw)
    }
}

/// One detection row in the same export style, with a confidence score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaymoDetection {
    pub frame: String,
    pub class: String,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
    pub score: f64,
}

impl WaymoDetection {
    pub fn box3d(&self) -> Box3D {
        Box3D::new(self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw)
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: T = serde_json::from_str(&line).map_err(|e| {
            DatasetError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_jsonl<T: Serialize>(rows: &[T], path: &Path) -> Result<(), DatasetError> {
    let mut file = fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    for row in rows {
        let line = serde_json::to_string(row).expect("row serializes");
        writeln!(file, "{line}").map_err(|e| DatasetError::io(path, e))?;
    }
    Ok(())
}

/// Reads a `.jsonl` label file, one JSON object per non-empty line.
pub fn read_waymo_labels(path: &Path) -> Result<Vec<WaymoLabel>, DatasetError> {
    read_jsonl(path)
}

pub fn write_waymo_labels(labels: &[WaymoLabel], path: &Path) -> Result<(), DatasetError> {
    write_jsonl(labels, path)
}

pub fn read_waymo_detections(path: &Path) -> Result<Vec<WaymoDetection>, DatasetError> {
    read_jsonl(path)
}

pub fn write_waymo_detections(dets: &[WaymoDetection], path: &Path) -> Result<(), DatasetError> {
    write_jsonl(dets, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let labels = vec![
            WaymoLabel {
                frame: "seg0-000".into(),
                class: "Vehicle".into(),
                cx: 10.0,
                cy: -3.5,
                cz: 0.8,
                l: 4.6,
                w: 2.0,
                h: 1.7,
                yaw: 0.3,
                num_points: 42,
            },
            WaymoLabel {
                frame: "seg0-001".into(),
                class: "Vehicle".into(),
                cx: -20.0,
                cy: 7.0,
                cz: 0.9,
                l: 4.2,
                w: 1.9,
                h: 1.6,
                yaw: -1.2,
                num_points: 0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        write_waymo_labels(&labels, &path).unwrap();
        assert_eq!(read_waymo_labels(&path).unwrap(), labels);
    }

    #[test]
    fn blank_lines_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        fs::write(
            &path,
            "\n{\"frame\":\"f\",\"class\":\"Vehicle\",\"cx\":0,\"cy\":0,\"cz\":0,\"l\":1,\"w\":1,\"h\":1,\"yaw\":0,\"num_points\":3}\n\n",
        )
        .unwrap();
        let labels = read_waymo_labels(&path).unwrap();
        assert_eq!(labels.len(), 1);
        assert_eq!(labels[0].num_points, 3);
    }
}
