//! lidarkit — the non-neural core of a LiDAR 3D object detection stack.
//!
//! What's here:
//!
//! - [`geometry`] — oriented boxes, point containment, smallest aligned
//!   enclosing boxes, rotated BEV/3D IoU, global augmentation transforms.
//! - [`completeness`] — point completeness scoring, sparsity levels, and
//!   completeness-aware task re-weighting.
//! - [`voxel`] — sparse voxel grids with occupancy statistics and BEV
//!   collapse.
//! - [`dataset`] — KITTI velodyne/label/calib/result files and the
//!   pre-exported Waymo frame format.
//! - [`eval`] — detection matching, interpolated AP (11/40 recall
//!   positions), difficulty/level/completeness stratification, error
//!   analysis.
//! - [`cascade`] — a cascade detection-head simulation with pluggable
//!   refiners, RoI sampling, task-weighted losses, and rotated NMS.
//!
//! Everything is pure value-level computation; file I/O lives in
//! [`dataset`] and [`voxel`]'s dump helpers only.

pub mod cascade;
pub mod completeness;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod voxel;

pub use completeness::{pc_score, CompletenessResult, SparsityLevel};
pub use dataset::DetectionRecord;
pub use geometry::{iou_3d, iou_bev, Box3D, PointCloud};
