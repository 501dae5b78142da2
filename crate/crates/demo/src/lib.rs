//! Browser bindings for the interactive demo page.
//!
//! Every export takes a JSON request string and returns a JSON response
//! string; the page's JavaScript does all rendering. Keeping the boundary
//! at strings means the same functions compile and test natively.

use lidarkit::cascade::{experiment_iou_gain, ContractionRefiner, IdentityRefiner, Refiner};
use lidarkit::completeness::{pc_score, sparsity_level};
use lidarkit::geometry::{iou_3d, iou_bev, Box3D, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(value) => serde_json::to_string(&value).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(message) => error_json(&message),
    }
}

fn error_json(message: &str) -> String {
    serde_json::to_string(&serde_json::json!({ "error": message })).unwrap()
}

#[derive(Deserialize)]
struct BoxSpec {
    cx: f64,
    cy: f64,
    #[serde(default)]
    cz: f64,
    l: f64,
    w: f64,
    #[serde(default = "default_height")]
    h: f64,
    yaw: f64,
}

fn default_height() -> f64 {
    1.5
}

impl BoxSpec {
    fn to_box(&self) -> Result<Box3D, String> {
        if self.l <= 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err("box extents must be positive".into());
        }
        Ok(Box3D::new(self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw))
    }
}

#[derive(Deserialize)]
struct IouRequest {
    a: BoxSpec,
    b: BoxSpec,
}

#[derive(Serialize)]
struct IouResponse {
    a_polygon: Vec<[f64; 2]>,
    b_polygon: Vec<[f64; 2]>,
    intersection: Vec<[f64; 2]>,
    intersection_area: f64,
    iou_bev: f64,
    iou_3d: f64,
}

/// Two rotated boxes in, their BEV footprints, clipped intersection
/// polygon, and both IoU values out.
#[wasm_bindgen]
pub fn bev_iou_scene(request: &str) -> String {
    respond(bev_iou_scene_impl(request))
}

fn bev_iou_scene_impl(request: &str) -> Result<IouResponse, String> {
    let req: IouRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let a = req.a.to_box()?;
    let b = req.b.to_box()?;
    let intersection = a.bev_polygon().clip(&b.bev_polygon());
    Ok(IouResponse {
        a_polygon: a.corners_bev().to_vec(),
        b_polygon: b.corners_bev().to_vec(),
        intersection: intersection.vertices().to_vec(),
        intersection_area: intersection.area(),
        iou_bev: iou_bev(&a, &b),
        iou_3d: iou_3d(&a, &b),
    })
}

#[derive(Deserialize)]
struct CompletenessRequest {
    #[serde(rename = "box")]
    gt_box: BoxSpec,
    points: usize,
    /// Fraction of the box length the synthetic points cover, in (0, 1].
    coverage: f64,
    seed: u64,
}

#[derive(Serialize)]
struct CompletenessResponse {
    box_polygon: Vec<[f64; 2]>,
    enclosing_polygon: Vec<[f64; 2]>,
    points: Vec<[f64; 2]>,
    q: f64,
    point_count: usize,
    level: String,
}

/// Synthesizes a partial-coverage point cloud inside the box and scores
/// its completeness; returns BEV geometry for drawing.
#[wasm_bindgen]
pub fn completeness_scene(request: &str) -> String {
    respond(completeness_scene_impl(request))
}

fn completeness_scene_impl(request: &str) -> Result<CompletenessResponse, String> {
    let req: CompletenessRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let gt = req.gt_box.to_box()?;
    if !(req.coverage > 0.0 && req.coverage <= 1.0) {
        return Err("coverage must be in (0, 1]".into());
    }
    if req.points > 100_000 {
        return Err("too many points".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut cloud = PointCloud::new();
    // Points hug one side of the box, the way a sensor sees the near face.
    for _ in 0..req.points {
        let fx = rng.random_range(0.0..req.coverage);
        let local = [
            (fx - 0.5) * gt.l,
            rng.random_range(-0.5..0.5) * gt.w,
            rng.random_range(-0.5..0.5) * gt.h,
        ];
        let p = gt.to_world(local);
        cloud.push(p[0], p[1], p[2], 0.0);
    }
    let result = pc_score(&gt, &cloud).map_err(|e| e.to_string())?;
    let level = sparsity_level(result.score)
        .map(|l| l.name().to_string())
        .unwrap_or_else(|_| "invalid".into());
    Ok(CompletenessResponse {
        box_polygon: gt.corners_bev().to_vec(),
        enclosing_polygon: result.enclosing_box.corners_bev().to_vec(),
        points: cloud.iter_points().map(|p| [p[0], p[1]]).collect(),
        q: result.score,
        point_count: result.point_count,
        level,
    })
}

#[derive(Deserialize)]
struct CurveRequest {
    lambda: f64,
    sigma: f64,
    stages: Vec<usize>,
    grid: Vec<f64>,
    proposals: usize,
    seed: u64,
}

#[derive(Serialize)]
struct CurvePoint {
    input_iou: f64,
    stages: usize,
    mean_output_iou: f64,
}

/// Cascade gain curves (mean output IoU per input IoU and stage count)
/// for an identity or contraction refiner.
#[wasm_bindgen]
pub fn cascade_curve(request: &str) -> String {
    respond(cascade_curve_impl(request))
}

fn cascade_curve_impl(request: &str) -> Result<Vec<CurvePoint>, String> {
    let req: CurveRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.proposals == 0 || req.proposals > 5000 {
        return Err("proposals must be in 1..=5000".into());
    }
    if req.grid.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
        return Err("grid values must be in (0, 1]".into());
    }
    let gt = Box3D::new(0.0, 0.0, 0.0, 3.9, 1.6, 1.56, 0.0);
    let refiner: Box<dyn Refiner> = if req.lambda == 0.0 {
        Box::new(IdentityRefiner { confidence: 1.0 })
    } else if !(req.lambda > 0.0 && req.lambda <= 1.0) {
        return Err("lambda must be in [0, 1]".into());
    } else if req.sigma > 0.0 {
        Box::new(ContractionRefiner::with_jitter(req.lambda, req.sigma))
    } else {
        Box::new(ContractionRefiner::new(req.lambda))
    };
    let rows = experiment_iou_gain(
        refiner.as_ref(),
        &gt,
        &req.grid,
        &req.stages,
        req.proposals,
        req.seed,
    )
    .map_err(|e| e.to_string())?;
    Ok(rows
        .into_iter()
        .map(|r| CurvePoint {
            input_iou: r.input_iou,
            stages: r.stages,
            mean_output_iou: r.mean_output_iou,
        })
        .collect())
}
