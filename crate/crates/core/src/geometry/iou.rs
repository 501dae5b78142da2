//! Rotated-box IoU in the BEV plane and in 3D.
//!
//! Rotation is about Z only, so the 3D intersection factorizes into the
//! clipped BEV footprint area times the Z-interval overlap.

use super::polygon::SLIVER_AREA_EPS;
use super::Box3D;

/// Intersection area of the two yaw-rotated BEV footprints.
///
/// Clipping slivers below 1e-12 m² count as zero; the result is clamped to
/// `min(area(a), area(b))` so rounding never produces an impossible overlap.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let pa = a.bev_polygon();
    let pb = b.bev_polygon();
    let inter = pa.clip(&pb).area();
    if inter < SLIVER_AREA_EPS {
        return 0.0;
    }
    inter.min(a.bev_area()).min(b.bev_area())
}

/// BEV IoU of two yaw-rotated boxes; symmetric, in [0, 1].
///
/// Returns 0 when both footprints have zero area.
pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    let area_a = a.bev_area();
    let area_b = b.bev_area();
    let inter = bev_intersection_area(a, b);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// 3D IoU of two yaw-rotated boxes; symmetric, in [0, 1].
///
/// Returns 0 when both volumes are zero.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let (a_lo, a_hi) = a.z_interval();
    let (b_lo, b_hi) = b.z_interval();
    let z_overlap = (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0);
    let inter = bev_intersection_area(a, b) * z_overlap;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
