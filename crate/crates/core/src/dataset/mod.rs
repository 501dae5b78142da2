//! Dataset ingestion and serialization: KITTI binary clouds, label/calib
//! text files, detection result files, and the pre-exported Waymo frame
//! format (binary clouds plus JSON-lines labels).

pub mod kitti;
pub mod waymo;

use crate::geometry::Box3D;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// One detection: a LiDAR-frame box with class and confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame_id: String,
    pub box3d: Box3D,
    pub class_name: String,
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    // Display carries the cause; the field is deliberately not named
    // `source` so error chains don't print the same io::Error twice.
    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },
    #[error("{path}: truncated point record ({len} bytes is not a multiple of 16)")]
    TruncatedPointRecord { path: PathBuf, len: usize },
    #[error("{path}:{line}: expected 15 or 16 label fields, got {count}")]
    LabelFieldCount { path: PathBuf, line: usize, count: usize },
    #[error("{path}:{line}: unparsable number in field '{field}': {value}")]
    LabelParse {
        path: PathBuf,
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("{path}: calibration key '{key}' missing")]
    CalibMissingKey { path: PathBuf, key: &'static str },
    #[error("{path}: calibration key '{key}' has {got} values, expected {expected}")]
    CalibShape {
        path: PathBuf,
        key: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{path}: rotation part of '{key}' is not orthonormal within 1e-3")]
    CalibNotOrthonormal { path: PathBuf, key: &'static str },
    #[error("singular camera-to-lidar transform")]
    SingularTransform,
    #[error("non-positive box dimensions (h={h}, w={w}, l={l})")]
    InvalidDimensions { h: f64, w: f64, l: f64 },
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.into(),
            cause,
        }
    }
}
