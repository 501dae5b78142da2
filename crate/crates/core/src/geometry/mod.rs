//! Oriented-box and point geometry.
//!
//! Boxes rotate about the world Z axis only (the yaw convention of
//! automotive LiDAR datasets), which keeps every operation here closed
//! form: local-frame transforms, inclusive point containment, smallest
//! aligned enclosing boxes, BEV/3D IoU via convex clipping, and the
//! global flip/scale/rotate augmentation transforms.

mod iou;
mod polygon;

pub use iou::{bev_intersection_area, iou_3d, iou_bev};
pub use polygon::BevPolygon;

use serde::{Deserialize, Serialize};

/// On-boundary classification tolerance for point containment, in meters.
///
/// A point constructed *on* a face or corner (e.g. by rotating exact corner
/// coordinates) must still count as inside; strict comparisons would drop it
/// to floating-point noise.
pub(crate) const CONTAIN_EPS: f64 = 1e-9;

/// Wraps an angle to the half-open interval (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle % TAU;
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}

/// Oriented 3D box: geometric center, extents along its local axes, and a
/// rotation about world Z.
///
/// `l` runs along local X (heading), `w` along local Y, `h` along Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
}

impl Box3D {
    pub fn new(cx: f64, cy: f64, cz: f64, l: f64, w: f64, h: f64, yaw: f64) -> Self {
        debug_assert!(l >= 0.0 && w >= 0.0 && h >= 0.0, "negative box extent");
        Self { cx, cy, cz, l, w, h, yaw }
    }

    pub fn center(&self) -> [f64; 3] {
        [self.cx, self.cy, self.cz]
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    /// True when any extent is zero (e.g. the enclosing box of no points).
    pub fn is_degenerate(&self) -> bool {
        self.l == 0.0 || self.w == 0.0 || self.h == 0.0
    }

    /// Yaw is stored as ingested; this returns the same box with yaw
    /// normalized to (−π, π].
    pub fn canonicalized(&self) -> Self {
        Self { yaw: wrap_angle(self.yaw), ..*self }
    }

    /// World point into this box's local frame.
    pub fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let (sin, cos) = self.yaw.sin_cos();
        let dx = p[0] - self.cx;
        let dy = p[1] - self.cy;
        [cos * dx + sin * dy, -sin * dx + cos * dy, p[2] - self.cz]
    }

    /// Local-frame point back into world coordinates.
    pub fn to_world(&self, p: [f64; 3]) -> [f64; 3] {
        let (sin, cos) = self.yaw.sin_cos();
        [
            self.cx + cos * p[0] - sin * p[1],
            self.cy + sin * p[0] + cos * p[1],
            self.cz + p[2],
        ]
    }

    /// Inclusive containment: points on a face count as inside.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let local = self.to_local(p);
        local[0].abs() <= 0.5 * self.l + CONTAIN_EPS
            && local[1].abs() <= 0.5 * self.w + CONTAIN_EPS
            && local[2].abs() <= 0.5 * self.h + CONTAIN_EPS
    }

    /// BEV footprint corners, counter-clockwise.
    pub fn corners_bev(&self) -> [[f64; 2]; 4] {
        let hl = 0.5 * self.l;
        let hw = 0.5 * self.w;
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        let (sin, cos) = self.yaw.sin_cos();
        local.map(|[x, y]| [self.cx + cos * x - sin * y, self.cy + sin * x + cos * y])
    }

    pub fn bev_polygon(&self) -> BevPolygon {
        BevPolygon::new(self.corners_bev().to_vec())
    }

    pub fn bev_area(&self) -> f64 {
        self.l * self.w
    }

    /// Vertical span as (bottom, top).
    pub fn z_interval(&self) -> (f64, f64) {
        (self.cz - 0.5 * self.h, self.cz + 0.5 * self.h)
    }
}

/// Columnar point set in the sensor frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    intensity: Vec<f64>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            x: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            intensity: Vec::with_capacity(n),
        }
    }

    /// Builds a cloud from coordinate columns with zero intensities.
    ///
    /// Panics if the columns disagree in length.
    pub fn from_xyz(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert_eq!(x.len(), z.len());
        let intensity = vec![0.0; x.len()];
        Self { x, y, z, intensity }
    }

    pub fn push(&mut self, x: f64, y: f64, z: f64, intensity: f64) {
        self.x.push(x);
        self.y.push(y);
        self.z.push(z);
        self.intensity.push(intensity);
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 3] {
        [self.x[i], self.y[i], self.z[i]]
    }

    pub fn intensity(&self, i: usize) -> f64 {
        self.intensity[i]
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn zs(&self) -> &[f64] {
        &self.z
    }

    pub fn iter_points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Rotates and translates every point into the box's local frame.
///
/// Containment in the box becomes a per-axis half-extent test on the output.
pub fn to_local_frame(b: &Box3D, points: &PointCloud) -> PointCloud {
    let mut out = PointCloud::with_capacity(points.len());
    for i in 0..points.len() {
        let [x, y, z] = b.to_local(points.point(i));
        out.push(x, y, z, points.intensity(i));
    }
    out
}

/// Indices of points inside the box (boundary inclusive), ascending.
pub fn points_in_box(b: &Box3D, points: &PointCloud) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| b.contains(points.point(i)))
        .collect()
}

/// Smallest box aligned with `b` (same yaw) enclosing the selected points.
///
/// The result is clamped into `b`, so it never exceeds the source box even
/// when boundary points carry containment-epsilon noise. An empty selection
/// yields a degenerate zero-extent box at the center of `b`.
pub fn smallest_enclosing_aligned_box(b: &Box3D, points: &PointCloud, indices: &[usize]) -> Box3D {
    if indices.is_empty() {
        return Box3D::new(b.cx, b.cy, b.cz, 0.0, 0.0, 0.0, b.yaw);
    }
    let half = [0.5 * b.l, 0.5 * b.w, 0.5 * b.h];
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for &i in indices {
        let local = b.to_local(points.point(i));
        for a in 0..3 {
            let v = local[a].clamp(-half[a], half[a]);
            min[a] = min[a].min(v);
            max[a] = max[a].max(v);
        }
    }
    let mid = b.to_world([
        0.5 * (min[0] + max[0]),
        0.5 * (min[1] + max[1]),
        0.5 * (min[2] + max[2]),
    ]);
    Box3D::new(
        mid[0],
        mid[1],
        mid[2],
        max[0] - min[0],
        max[1] - min[1],
        max[2] - min[2],
        b.yaw,
    )
}

/// Global augmentation transforms applied jointly to points and boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlobalTransform {
    /// Mirror across the XZ plane: y → −y, yaw → −yaw.
    Flip,
    /// Uniform scaling of coordinates and extents; factor must be positive.
    Scale(f64),
    /// Rotation about world Z by the given angle in radians.
    RotateZ(f64),
}

/// Applies a global transform to a cloud and a set of boxes together.
///
/// All three transforms preserve point–box containment relations.
pub fn apply_global_transform(
    points: &PointCloud,
    boxes: &[Box3D],
    transform: GlobalTransform,
) -> (PointCloud, Vec<Box3D>) {
    match transform {
        GlobalTransform::Flip => {
            let mut cloud = PointCloud::with_capacity(points.len());
            for i in 0..points.len() {
                let [x, y, z] = points.point(i);
                cloud.push(x, -y, z, points.intensity(i));
            }
            let boxes = boxes
                .iter()
                .map(|b| Box3D::new(b.cx, -b.cy, b.cz, b.l, b.w, b.h, -b.yaw))
                .collect();
            (cloud, boxes)
        }
        GlobalTransform::Scale(s) => {
            assert!(s > 0.0, "scale factor must be positive");
            let mut cloud = PointCloud::with_capacity(points.len());
            for i in 0..points.len() {
                let [x, y, z] = points.point(i);
                cloud.push(s * x, s * y, s * z, points.intensity(i));
            }
            let boxes = boxes
                .iter()
                .map(|b| Box3D::new(s * b.cx, s * b.cy, s * b.cz, s * b.l, s * b.w, s * b.h, b.yaw))
                .collect();
            (cloud, boxes)
        }
        GlobalTransform::RotateZ(theta) => {
            let (sin, cos) = theta.sin_cos();
            let mut cloud = PointCloud::with_capacity(points.len());
            for i in 0..points.len() {
                let [x, y, z] = points.point(i);
                cloud.push(cos * x - sin * y, sin * x + cos * y, z, points.intensity(i));
            }
            let boxes = boxes
                .iter()
                .map(|b| {
                    Box3D::new(
                        cos * b.cx - sin * b.cy,
                        sin * b.cx + cos * b.cy,
                        b.cz,
                        b.l,
                        b.w,
                        b.h,
                        b.yaw + theta,
                    )
                })
                .collect();
            (cloud, boxes)
        }
    }
}
