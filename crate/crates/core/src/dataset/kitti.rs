//! KITTI object-detection files: velodyne point clouds, devkit labels,
//! calibration matrices, result files, and the camera→LiDAR box conversion.
//!
//! Labels live in the rectified camera frame (x right, y down, z forward,
//! location at the bottom face center); boxes here live in the LiDAR frame
//! (x forward, y left, z up, geometric center). The devkit's 15/16-field
//! whitespace format and `KEY: v1 v2 ...` calib format are preserved
//! verbatim.

use super::{DatasetError, DetectionRecord};
use crate::geometry::{wrap_angle, Box3D, PointCloud};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One devkit label line.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiLabel {
    pub class_name: String,
    pub truncation: f64,
    /// 0 = visible, 1 = partly occluded, 2 = largely occluded, 3 = unknown;
    /// −1 on DontCare lines.
    pub occlusion: i32,
    pub alpha: f64,
    /// (left, top, right, bottom) in pixels.
    pub bbox2d: [f64; 4],
    /// (h, w, l) in meters, camera frame; −1 sentinels on DontCare lines.
    pub dims_cam: [f64; 3],
    /// Bottom-face center (x, y, z) in the rectified camera frame.
    pub loc_cam: [f64; 3],
    /// Rotation about the camera Y axis.
    pub ry: f64,
    pub score: Option<f64>,
}

impl KittiLabel {
    pub fn height_px(&self) -> f64 {
        self.bbox2d[3] - self.bbox2d[1]
    }

    pub fn is_dont_care(&self) -> bool {
        self.class_name == "DontCare"
    }
}

/// KITTI devkit difficulty of a ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
    /// Fails even the Hard thresholds; never counted, only absorbs matches.
    Ignored,
}

impl Difficulty {
    pub fn name(&self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Moderate => "Moderate",
            Difficulty::Hard => "Hard",
            Difficulty::Ignored => "Ignored",
        }
    }
}

/// Devkit stratification rules on 2D box height, occlusion and truncation.
pub fn difficulty_of(label: &KittiLabel) -> Difficulty {
    let height = label.height_px();
    if height >= 40.0 && label.occlusion <= 0 && label.truncation <= 0.15 {
        Difficulty::Easy
    } else if height >= 25.0 && label.occlusion <= 1 && label.truncation <= 0.30 {
        Difficulty::Moderate
    } else if height >= 25.0 && label.occlusion <= 2 && label.truncation <= 0.50 {
        Difficulty::Hard
    } else {
        Difficulty::Ignored
    }
}

/// Result of reading a velodyne file: the cloud plus how many points were
/// dropped for carrying non-finite coordinates.
#[derive(Debug, Clone)]
pub struct VelodyneRead {
    pub cloud: PointCloud,
    pub dropped_non_finite: usize,
}

/// Reads a packed little-endian f32 (x, y, z, intensity) file.
pub fn read_velodyne_bin(path: &Path) -> Result<VelodyneRead, DatasetError> {
    let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    parse_velodyne_bytes(&bytes, path)
}

/// Parses velodyne bytes; `origin` only labels errors.
pub fn parse_velodyne_bytes(bytes: &[u8], origin: &Path) -> Result<VelodyneRead, DatasetError> {
    if !bytes.len().is_multiple_of(16) {
        return Err(DatasetError::TruncatedPointRecord {
            path: origin.to_path_buf(),
            len: bytes.len(),
        });
    }
    let mut cloud = PointCloud::with_capacity(bytes.len() / 16);
    let mut dropped = 0usize;
    for record in bytes.chunks_exact(16) {
        let x = f32::from_le_bytes(record[0..4].try_into().unwrap());
        let y = f32::from_le_bytes(record[4..8].try_into().unwrap());
        let z = f32::from_le_bytes(record[8..12].try_into().unwrap());
        let intensity = f32::from_le_bytes(record[12..16].try_into().unwrap());
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            dropped += 1;
            continue;
        }
        let intensity = if intensity.is_finite() { intensity as f64 } else { 0.0 };
        cloud.push(x as f64, y as f64, z as f64, intensity);
    }
    Ok(VelodyneRead {
        cloud,
        dropped_non_finite: dropped,
    })
}

/// Serializes a cloud back to the packed binary layout (test fixtures and
/// the Waymo export share it).
pub fn write_velodyne_bin(cloud: &PointCloud, path: &Path) -> Result<(), DatasetError> {
    let mut bytes = Vec::with_capacity(cloud.len() * 16);
    for i in 0..cloud.len() {
        let [x, y, z] = cloud.point(i);
        for v in [x as f32, y as f32, z as f32, cloud.intensity(i) as f32] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| DatasetError::io(path, e))
}

/// Parses a devkit label file: one label per non-empty line, 15 fields or
/// 16 with a trailing score.
pub fn parse_label_file(path: &Path) -> Result<Vec<KittiLabel>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_label_str(&text, path)
}

pub fn parse_label_str(text: &str, origin: &Path) -> Result<Vec<KittiLabel>, DatasetError> {
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        labels.push(parse_label_line(line, origin, idx + 1)?);
    }
    Ok(labels)
}

const LABEL_FIELDS: [&str; 15] = [
    "type",
    "truncated",
    "occluded",
    "alpha",
    "bbox_left",
    "bbox_top",
    "bbox_right",
    "bbox_bottom",
    "height",
    "width",
    "length",
    "x",
    "y",
    "z",
    "rotation_y",
];

fn parse_label_line(line: &str, origin: &Path, lineno: usize) -> Result<KittiLabel, DatasetError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 15 && fields.len() != 16 {
        return Err(DatasetError::LabelFieldCount {
            path: origin.to_path_buf(),
            line: lineno,
            count: fields.len(),
        });
    }
    let num = |i: usize| -> Result<f64, DatasetError> {
        fields[i].parse().map_err(|_| DatasetError::LabelParse {
            path: origin.to_path_buf(),
            line: lineno,
            field: if i < 15 { LABEL_FIELDS[i] } else { "score" },
            value: fields[i].to_string(),
        })
    };
    let occlusion = num(2)? as i32;
    let score = if fields.len() == 16 { Some(num(15)?) } else { None };
    Ok(KittiLabel {
        class_name: fields[0].to_string(),
        truncation: num(1)?,
        occlusion,
        alpha: num(3)?,
        bbox2d: [num(4)?, num(5)?, num(6)?, num(7)?],
        dims_cam: [num(8)?, num(9)?, num(10)?],
        loc_cam: [num(11)?, num(12)?, num(13)?],
        ry: num(14)?,
        score,
    })
}

/// Projection and rectification matrices of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibBundle {
    pub p2: [[f64; 4]; 3],
    pub r0_rect: [[f64; 3]; 3],
    pub tr_velo_to_cam: [[f64; 4]; 3],
}

impl CalibBundle {
    /// Canonical synthetic calib: rectification is the identity and
    /// velo→cam is the pure axis permutation (x_cam, y_cam, z_cam) =
    /// (−y_velo, −z_velo, x_velo) with a generic P2.
    pub fn canonical() -> Self {
        Self {
            p2: [
                [700.0, 0.0, 600.0, 0.0],
                [0.0, 700.0, 180.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            r0_rect: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            tr_velo_to_cam: [
                [0.0, -1.0, 0.0, 0.0],
                [0.0, 0.0, -1.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
            ],
        }
    }

    /// Rotation part of R0_rect · Tr_velo_to_cam and its translation, i.e.
    /// the affine map taking LiDAR coordinates into the rectified camera
    /// frame.
    pub fn cam_from_velo(&self) -> ([[f64; 3]; 3], [f64; 3]) {
        let r_tr = [
            [self.tr_velo_to_cam[0][0], self.tr_velo_to_cam[0][1], self.tr_velo_to_cam[0][2]],
            [self.tr_velo_to_cam[1][0], self.tr_velo_to_cam[1][1], self.tr_velo_to_cam[1][2]],
            [self.tr_velo_to_cam[2][0], self.tr_velo_to_cam[2][1], self.tr_velo_to_cam[2][2]],
        ];
        let t_tr = [
            self.tr_velo_to_cam[0][3],
            self.tr_velo_to_cam[1][3],
            self.tr_velo_to_cam[2][3],
        ];
        (mat3_mul(&self.r0_rect, &r_tr), mat3_apply(&self.r0_rect, t_tr))
    }

    /// Checks the 1e-3 orthonormality invariants on R0_rect and the
    /// rotation part of Tr_velo_to_cam.
    pub fn validate(&self, origin: &Path) -> Result<(), DatasetError> {
        if !is_orthonormal(&self.r0_rect, 1e-3) {
            return Err(DatasetError::CalibNotOrthonormal {
                path: origin.to_path_buf(),
                key: "R0_rect",
            });
        }
        let r = [
            [self.tr_velo_to_cam[0][0], self.tr_velo_to_cam[0][1], self.tr_velo_to_cam[0][2]],
            [self.tr_velo_to_cam[1][0], self.tr_velo_to_cam[1][1], self.tr_velo_to_cam[1][2]],
            [self.tr_velo_to_cam[2][0], self.tr_velo_to_cam[2][1], self.tr_velo_to_cam[2][2]],
        ];
        if !is_orthonormal(&r, 1e-3) {
            return Err(DatasetError::CalibNotOrthonormal {
                path: origin.to_path_buf(),
                key: "Tr_velo_to_cam",
            });
        }
        Ok(())
    }
}

/// Parses a `KEY: v1 v2 ...` calib file; requires P2, R0_rect and
/// Tr_velo_to_cam and ignores other keys.
pub fn parse_calib_file(path: &Path) -> Result<CalibBundle, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_calib_str(&text, path)
}

pub fn parse_calib_str(text: &str, origin: &Path) -> Result<CalibBundle, DatasetError> {
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for line in text.lines() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let nums: Vec<f64> = rest
            .split_whitespace()
            .filter_map(|v| v.parse().ok())
            .collect();
        values.insert(key.trim(), nums);
    }
    let take = |key: &'static str, expected: usize| -> Result<Vec<f64>, DatasetError> {
        let vals = values.get(key).ok_or(DatasetError::CalibMissingKey {
            path: origin.to_path_buf(),
            key,
        })?;
        if vals.len() != expected {
            return Err(DatasetError::CalibShape {
                path: origin.to_path_buf(),
                key,
                expected,
                got: vals.len(),
            });
        }
        Ok(vals.clone())
    };
    let p2v = take("P2", 12)?;
    let r0v = take("R0_rect", 9)?;
    let trv = take("Tr_velo_to_cam", 12)?;
    let bundle = CalibBundle {
        p2: [
            [p2v[0], p2v[1], p2v[2], p2v[3]],
            [p2v[4], p2v[5], p2v[6], p2v[7]],
            [p2v[8], p2v[9], p2v[10], p2v[11]],
        ],
        r0_rect: [
            [r0v[0], r0v[1], r0v[2]],
            [r0v[3], r0v[4], r0v[5]],
            [r0v[6], r0v[7], r0v[8]],
        ],
        tr_velo_to_cam: [
            [trv[0], trv[1], trv[2], trv[3]],
            [trv[4], trv[5], trv[6], trv[7]],
            [trv[8], trv[9], trv[10], trv[11]],
        ],
    };
    bundle.validate(origin)?;
    Ok(bundle)
}

/// Writes a calib bundle back in the devkit key-value format (P0/P1/P3 are
/// duplicated from P2; fixtures only).
pub fn write_calib_file(calib: &CalibBundle, path: &Path) -> Result<(), DatasetError> {
    let row12 = |m: &[[f64; 4]; 3]| {
        m.iter()
            .flatten()
            .map(|v| format!("{v:.12e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let row9 = |m: &[[f64; 3]; 3]| {
        m.iter()
            .flatten()
            .map(|v| format!("{v:.12e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut text = String::new();
    for key in ["P0", "P1", "P2", "P3"] {
        text.push_str(&format!("{key}: {}\n", row12(&calib.p2)));
    }
    text.push_str(&format!("R0_rect: {}\n", row9(&calib.r0_rect)));
    text.push_str(&format!("Tr_velo_to_cam: {}\n", row12(&calib.tr_velo_to_cam)));
    fs::write(path, text).map_err(|e| DatasetError::io(path, e))
}

/// Camera-frame box parameters as stored in label files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrameBox {
    /// Bottom-face center in the rectified camera frame.
    pub loc: [f64; 3],
    pub h: f64,
    pub w: f64,
    pub l: f64,
    pub ry: f64,
}

/// Lifts a camera-frame label into a LiDAR-frame box.
///
/// The bottom center rises by h/2 along camera −Y to the geometric center,
/// the affine inverse of R0_rect·Tr_velo_to_cam maps it into the LiDAR
/// frame, and the heading becomes yaw = −ry − π/2 wrapped to (−π, π].
pub fn camera_box_to_lidar(label: &KittiLabel, calib: &CalibBundle) -> Result<Box3D, DatasetError> {
    let cam = CameraFrameBox {
        loc: label.loc_cam,
        h: label.dims_cam[0],
        w: label.dims_cam[1],
        l: label.dims_cam[2],
        ry: label.ry,
    };
    camera_frame_box_to_lidar(&cam, calib)
}

pub fn camera_frame_box_to_lidar(
    cam: &CameraFrameBox,
    calib: &CalibBundle,
) -> Result<Box3D, DatasetError> {
    if cam.h <= 0.0 || cam.w <= 0.0 || cam.l <= 0.0 {
        return Err(DatasetError::InvalidDimensions {
            h: cam.h,
            w: cam.w,
            l: cam.l,
        });
    }
    let (a, b) = calib.cam_from_velo();
    let inv = mat3_invert(&a).ok_or(DatasetError::SingularTransform)?;
    let center_cam = [cam.loc[0], cam.loc[1] - 0.5 * cam.h, cam.loc[2]];
    let center = mat3_apply(
        &inv,
        [center_cam[0] - b[0], center_cam[1] - b[1], center_cam[2] - b[2]],
    );
    Ok(Box3D::new(
        center[0],
        center[1],
        center[2],
        cam.l,
        cam.w,
        cam.h,
        wrap_angle(-cam.ry - FRAC_PI_2),
    ))
}

/// Inverse of [`camera_frame_box_to_lidar`].
pub fn lidar_box_to_camera(box3d: &Box3D, calib: &CalibBundle) -> CameraFrameBox {
    let (a, b) = calib.cam_from_velo();
    let center_cam = {
        let c = mat3_apply(&a, box3d.center());
        [c[0] + b[0], c[1] + b[1], c[2] + b[2]]
    };
    CameraFrameBox {
        loc: [center_cam[0], center_cam[1] + 0.5 * box3d.h, center_cam[2]],
        h: box3d.h,
        w: box3d.w,
        l: box3d.l,
        ry: wrap_angle(-box3d.yaw - FRAC_PI_2),
    }
}

/// 2D image box of the 3D box's projected corners through P2, or zeros when
/// every corner sits behind the image plane.
fn project_bbox2d(box3d: &Box3D, calib: &CalibBundle) -> [f64; 4] {
    let (a, b) = calib.cam_from_velo();
    let (mut min_u, mut min_v) = (f64::INFINITY, f64::INFINITY);
    let (mut max_u, mut max_v) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let p = box3d.to_world([
                    sx * 0.5 * box3d.l,
                    sy * 0.5 * box3d.w,
                    sz * 0.5 * box3d.h,
                ]);
                let c = mat3_apply(&a, p);
                let cam = [c[0] + b[0], c[1] + b[1], c[2] + b[2]];
                let u = calib.p2[0][0] * cam[0] + calib.p2[0][1] * cam[1] + calib.p2[0][2] * cam[2] + calib.p2[0][3];
                let v = calib.p2[1][0] * cam[0] + calib.p2[1][1] * cam[1] + calib.p2[1][2] * cam[2] + calib.p2[1][3];
                let depth = calib.p2[2][0] * cam[0] + calib.p2[2][1] * cam[1] + calib.p2[2][2] * cam[2] + calib.p2[2][3];
                if depth <= 1e-6 {
                    continue;
                }
                any = true;
                min_u = min_u.min(u / depth);
                max_u = max_u.max(u / depth);
                min_v = min_v.min(v / depth);
                max_v = max_v.max(v / depth);
            }
        }
    }
    if any {
        [min_u, min_v, max_u, max_v]
    } else {
        [0.0, 0.0, 0.0, 0.0]
    }
}

fn format6(v: f64) -> String {
    format!("{v:.6}")
}

/// Value after formatting at 6 decimals, used so derived quantities are
/// computed from exactly what the file will carry.
fn quantize6(v: f64) -> f64 {
    format6(v).parse().unwrap()
}

/// Formats one detection as a devkit 16-field result line.
///
/// The stored bottom-center is derived from the quantized height, so the
/// read-side h/2 lift reconstructs the center to within one formatting
/// quantum instead of compounding two of them.
pub fn detection_to_line(record: &DetectionRecord, calib: &CalibBundle) -> String {
    let cam = lidar_box_to_camera(&record.box3d, calib);
    let h_q = quantize6(cam.h);
    let center_cam = [cam.loc[0], cam.loc[1] - 0.5 * cam.h, cam.loc[2]];
    let loc = [center_cam[0], center_cam[1] + 0.5 * h_q, center_cam[2]];
    let alpha = wrap_angle(cam.ry - center_cam[0].atan2(center_cam[2]));
    let bbox = project_bbox2d(&record.box3d, calib);
    let fields = [
        alpha, bbox[0], bbox[1], bbox[2], bbox[3], cam.h, cam.w, cam.l, loc[0], loc[1], loc[2],
        cam.ry, record.score,
    ];
    let mut line = format!("{} -1 -1", record.class_name);
    for v in fields {
        line.push(' ');
        line.push_str(&format6(v));
    }
    line
}

/// Writes one frame's detections as a devkit result file; an empty record
/// list produces an empty file.
pub fn write_detection_file(
    records: &[DetectionRecord],
    calib: &CalibBundle,
    path: &Path,
) -> Result<(), DatasetError> {
    let mut file = fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    for record in records {
        writeln!(file, "{}", detection_to_line(record, calib))
            .map_err(|e| DatasetError::io(path, e))?;
    }
    Ok(())
}

/// Writes detections grouped by frame id, one `<frame_id>.txt` per frame.
pub fn write_detections(
    records: &[DetectionRecord],
    calib: &CalibBundle,
    out_dir: &Path,
) -> Result<(), DatasetError> {
    fs::create_dir_all(out_dir).map_err(|e| DatasetError::io(out_dir, e))?;
    let mut by_frame: BTreeMap<&str, Vec<&DetectionRecord>> = BTreeMap::new();
    for record in records {
        by_frame.entry(&record.frame_id).or_default().push(record);
    }
    for (frame_id, frame_records) in by_frame {
        let path = out_dir.join(format!("{frame_id}.txt"));
        let owned: Vec<DetectionRecord> = frame_records.into_iter().cloned().collect();
        write_detection_file(&owned, calib, &path)?;
    }
    Ok(())
}

/// Reads one frame's detection file back into LiDAR-frame records. A
/// missing score field defaults to 1.0 so ground-truth files can be
/// replayed as perfect detections.
pub fn read_detection_file(
    path: &Path,
    calib: &CalibBundle,
    frame_id: &str,
) -> Result<Vec<DetectionRecord>, DatasetError> {
    let labels = parse_label_file(path)?;
    labels
        .iter()
        .filter(|label| !label.is_dont_care())
        .map(|label| {
            Ok(DetectionRecord {
                frame_id: frame_id.to_string(),
                box3d: camera_box_to_lidar(label, calib)?,
                class_name: label.class_name.clone(),
                score: label.score.unwrap_or(1.0),
            })
        })
        .collect()
}

/// Reads every `*.txt` detection file in a directory; `calib_for` supplies
/// the per-frame calibration.
pub fn read_detections(
    dir: &Path,
    mut calib_for: impl FnMut(&str) -> Result<CalibBundle, DatasetError>,
) -> Result<Vec<DetectionRecord>, DatasetError> {
    let mut frame_ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
        let entry = entry.map_err(|e| DatasetError::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                frame_ids.push((stem.to_string(), path.clone()));
            }
        }
    }
    frame_ids.sort();
    let mut records = Vec::new();
    for (frame_id, path) in frame_ids {
        let calib = calib_for(&frame_id)?;
        records.extend(read_detection_file(&path, &calib, &frame_id)?);
    }
    Ok(records)
}

/// Standard KITTI object layout helpers relative to a dataset root.
pub fn velodyne_path(root: &Path, frame_id: &str) -> PathBuf {
    root.join("velodyne").join(format!("{frame_id}.bin"))
}

pub fn label_path(root: &Path, frame_id: &str) -> PathBuf {
    root.join("label_2").join(format!("{frame_id}.txt"))
}

pub fn calib_path(root: &Path, frame_id: &str) -> PathBuf {
    root.join("calib").join(format!("{frame_id}.txt"))
}

/// Frame ids present in a directory of `.bin` or `.txt` files, sorted.
pub fn list_frame_ids(dir: &Path) -> Result<Vec<String>, DatasetError> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
        let entry = entry.map_err(|e| DatasetError::io(dir, e))?;
        let path = entry.path();
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("txt") => {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
            _ => {}
        }
    }
    ids.sort();
    ids.dedup();
    Ok(ids)
}

fn mat3_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat3_apply(a: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

fn mat3_invert(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    Some([
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ])
}

fn is_orthonormal(m: &[[f64; 3]; 3], tol: f64) -> bool {
    let t = [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ];
    let prod = mat3_mul(&t, m);
    for (i, row) in prod.iter().enumerate() {
        for (j, value) in row.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (value - expect).abs() > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn origin() -> PathBuf {
        PathBuf::from("<memory>")
    }

    #[test]
    fn velodyne_single_point() {
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let read = parse_velodyne_bytes(&bytes, &origin()).unwrap();
        assert_eq!(read.cloud.len(), 1);
        assert_eq!(read.cloud.point(0), [1.0, 2.0, 3.0]);
        assert_eq!(read.cloud.intensity(0), 0.5);
        assert_eq!(read.dropped_non_finite, 0);
    }

    #[test]
    fn velodyne_empty_file() {
        let read = parse_velodyne_bytes(&[], &origin()).unwrap();
        assert!(read.cloud.is_empty());
    }

    #[test]
    fn velodyne_truncated_record() {
        let err = parse_velodyne_bytes(&[0u8; 17], &origin()).unwrap_err();
        assert!(matches!(err, DatasetError::TruncatedPointRecord { len: 17, .. }));
    }

    #[test]
    fn velodyne_nan_points_dropped_and_counted() {
        let mut bytes = Vec::new();
        for v in [f32::NAN, 2.0, 3.0, 0.5, 1.0, 2.0, 3.0, 0.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let read = parse_velodyne_bytes(&bytes, &origin()).unwrap();
        assert_eq!(read.cloud.len(), 1);
        assert_eq!(read.dropped_non_finite, 1);
    }

    #[test]
    fn label_line_with_15_fields() {
        let line = "Car 0.10 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59";
        let labels = parse_label_str(line, &origin()).unwrap();
        assert_eq!(labels.len(), 1);
        let l = &labels[0];
        assert_eq!(l.class_name, "Car");
        assert!((l.truncation - 0.10).abs() < 1e-12);
        assert_eq!(l.occlusion, 0);
        assert_eq!(l.dims_cam, [1.65, 1.67, 3.64]);
        assert_eq!(l.loc_cam, [-0.65, 1.71, 46.70]);
        assert!(l.score.is_none());
    }

    #[test]
    fn dont_care_sentinels() {
        let line = "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10";
        let labels = parse_label_str(line, &origin()).unwrap();
        let l = &labels[0];
        assert!(l.is_dont_care());
        assert_eq!(l.occlusion, -1);
        assert_eq!(l.dims_cam, [-1.0, -1.0, -1.0]);
    }

    #[test]
    fn empty_label_file() {
        assert!(parse_label_str("", &origin()).unwrap().is_empty());
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let text = "Car 0.0 0 0 0 0 0 0 1 1 1 0 0 0 0\nCar 1 2 3";
        let err = parse_label_str(text, &origin()).unwrap_err();
        assert!(matches!(err, DatasetError::LabelFieldCount { line: 2, count: 4, .. }));
    }

    #[test]
    fn unparsable_number_reports_field() {
        let text = "Car zero 0 0 0 0 0 0 1 1 1 0 0 0 0";
        let err = parse_label_str(text, &origin()).unwrap_err();
        assert!(
            matches!(err, DatasetError::LabelParse { line: 1, field: "truncated", .. }),
            "{err:?}"
        );
    }

    #[test]
    fn difficulty_thresholds() {
        let mut label = KittiLabel {
            class_name: "Car".into(),
            truncation: 0.1,
            occlusion: 0,
            alpha: 0.0,
            bbox2d: [0.0, 0.0, 10.0, 45.0],
            dims_cam: [1.5, 1.6, 3.9],
            loc_cam: [0.0, 1.0, 20.0],
            ry: 0.0,
            score: None,
        };
        assert_eq!(difficulty_of(&label), Difficulty::Easy);
        label.bbox2d[3] = 30.0;
        label.occlusion = 1;
        label.truncation = 0.2;
        assert_eq!(difficulty_of(&label), Difficulty::Moderate);
        label.occlusion = 2;
        label.truncation = 0.45;
        assert_eq!(difficulty_of(&label), Difficulty::Hard);
        label.bbox2d[3] = 20.0;
        assert_eq!(difficulty_of(&label), Difficulty::Ignored);
    }

    #[test]
    fn camera_box_to_lidar_canonical() {
        // ry = 0, canonical permutation: yaw = -pi/2 and the center rises
        // by h/2 along +z in the LiDAR frame.
        let calib = CalibBundle::canonical();
        let label = KittiLabel {
            class_name: "Car".into(),
            truncation: 0.0,
            occlusion: 0,
            alpha: 0.0,
            bbox2d: [0.0, 0.0, 50.0, 50.0],
            dims_cam: [2.0, 1.6, 3.9],
            loc_cam: [0.0, 0.0, 0.0],
            ry: 0.0,
            score: None,
        };
        let b = camera_box_to_lidar(&label, &calib).unwrap();
        assert!((b.yaw + FRAC_PI_2).abs() < 1e-12);
        // bottom center at camera origin = lidar origin; center is 1 m up.
        assert!((b.cx - 0.0).abs() < 1e-12);
        assert!((b.cy - 0.0).abs() < 1e-12);
        assert!((b.cz - 1.0).abs() < 1e-12);
        assert_eq!((b.l, b.w, b.h), (3.9, 1.6, 2.0));
    }

    #[test]
    fn camera_lidar_round_trip() {
        let calib = CalibBundle::canonical();
        let cam = CameraFrameBox {
            loc: [2.5, 1.2, 31.0],
            h: 1.52,
            w: 1.63,
            l: 3.88,
            ry: 0.71,
        };
        let b = camera_frame_box_to_lidar(&cam, &calib).unwrap();
        let back = lidar_box_to_camera(&b, &calib);
        assert!((back.loc[0] - cam.loc[0]).abs() < 1e-9);
        assert!((back.loc[1] - cam.loc[1]).abs() < 1e-9);
        assert!((back.loc[2] - cam.loc[2]).abs() < 1e-9);
        assert!((back.ry - cam.ry).abs() < 1e-9);
    }

    #[test]
    fn calib_parse_round_trip() {
        let calib = CalibBundle::canonical();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000000.txt");
        write_calib_file(&calib, &path).unwrap();
        let parsed = parse_calib_file(&path).unwrap();
        assert_eq!(parsed, calib);
    }

    #[test]
    fn calib_missing_key() {
        let err = parse_calib_str("P2: 1 0 0 0 0 1 0 0 0 0 1 0\n", &origin()).unwrap_err();
        assert!(matches!(err, DatasetError::CalibMissingKey { key: "R0_rect", .. }));
    }

    #[test]
    fn calib_orthonormality_enforced() {
        let text = "P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 2 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0\n";
        let err = parse_calib_str(text, &origin()).unwrap_err();
        assert!(matches!(err, DatasetError::CalibNotOrthonormal { key: "R0_rect", .. }));
    }

    #[test]
    fn detection_file_round_trip_one_record() {
        let calib = CalibBundle::canonical();
        let record = DetectionRecord {
            frame_id: "000007".into(),
            box3d: Box3D::new(12.3, -4.5, -0.7, 3.9, 1.6, 1.5, 0.42),
            class_name: "Car".into(),
            score: 0.91,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000007.txt");
        write_detection_file(std::slice::from_ref(&record), &calib, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.split_whitespace().count(), 16);
        let back = read_detection_file(&path, &calib, "000007").unwrap();
        assert_eq!(back.len(), 1);
        let b = &back[0].box3d;
        for (got, want) in [
            (b.cx, record.box3d.cx),
            (b.cy, record.box3d.cy),
            (b.cz, record.box3d.cz),
            (b.l, record.box3d.l),
            (b.w, record.box3d.w),
            (b.h, record.box3d.h),
        ] {
            assert!((got - want).abs() <= 5e-7, "{got} vs {want}");
        }
        assert!(wrap_angle(b.yaw - record.box3d.yaw).abs() <= 5e-7);
        assert!((back[0].score - record.score).abs() <= 5e-7);
    }

    #[test]
    fn dont_care_lines_skipped_when_reading_detections() {
        let calib = CalibBundle::canonical();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000000.txt");
        let text = "DontCare -1 -1 -10 500 170 590 190 -1 -1 -1 -1000 -1000 -1000 -10\n";
        fs::write(&path, text).unwrap();
        let records = read_detection_file(&path, &calib, "000000").unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn negative_dims_rejected_by_conversion() {
        let calib = CalibBundle::canonical();
        let cam = CameraFrameBox { loc: [0.0, 0.0, 10.0], h: -1.0, w: 1.6, l: 3.9, ry: 0.0 };
        assert!(matches!(
            camera_frame_box_to_lidar(&cam, &calib),
            Err(DatasetError::InvalidDimensions { .. })
        ));
    }

    #[test]
    fn empty_detection_list_writes_empty_file() {
        let calib = CalibBundle::canonical();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000001.txt");
        write_detection_file(&[], &calib, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "");
    }
}
