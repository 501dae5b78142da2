//! Convex polygon clipping and area in the BEV (XY) plane.
//!
//! Sutherland–Hodgman against a convex clip polygon: one pass per clip
//! edge, O(n·m) total. Sufficient here because box footprints are convex
//! quads; the intersection of two quads has at most 8 vertices.

/// On-edge classification tolerance for clipping, in meters.
pub(crate) const EDGE_EPS: f64 = 1e-9;

/// Intersection areas below this are degenerate slivers and count as zero.
pub(crate) const SLIVER_AREA_EPS: f64 = 1e-12;

/// Convex polygon in the XY plane with counter-clockwise vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct BevPolygon {
    vertices: Vec<[f64; 2]>,
}

impl BevPolygon {
    /// Wraps a CCW vertex list. Vertex order is the caller's responsibility;
    /// `area` returns 0 for clockwise input rather than a negative value.
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area, clamped to be non-negative.
    pub fn area(&self) -> f64 {
        if self.vertices.len() < 3 {
            return 0.0;
        }
        let mut twice_area = 0.0;
        for i in 0..self.vertices.len() {
            let [x0, y0] = self.vertices[i];
            let [x1, y1] = self.vertices[(i + 1) % self.vertices.len()];
            twice_area += x0 * y1 - x1 * y0;
        }
        (0.5 * twice_area).max(0.0)
    }

    /// Clips this polygon against a convex CCW clip polygon.
    ///
    /// Points within `EDGE_EPS` outside a clip edge are classified as
    /// inside so that touching boundaries do not drop shared vertices.
    pub fn clip(&self, clip: &BevPolygon) -> BevPolygon {
        if self.is_empty() || clip.is_empty() {
            return BevPolygon::new(Vec::new());
        }
        let mut output = self.vertices.clone();
        let n = clip.vertices.len();
        for i in 0..n {
            if output.len() < 3 {
                return BevPolygon::new(Vec::new());
            }
            let a = clip.vertices[i];
            let b = clip.vertices[(i + 1) % n];
            output = clip_against_edge(&output, a, b);
        }
        dedupe_consecutive(&mut output);
        if output.len() < 3 {
            return BevPolygon::new(Vec::new());
        }
        BevPolygon::new(output)
    }
}

/// Signed distance proxy of `p` from the directed edge a→b (positive = left).
fn edge_side(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn clip_against_edge(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let side_cur = edge_side(a, b, cur);
        let side_next = edge_side(a, b, next);
        let cur_in = side_cur >= -EDGE_EPS;
        let next_in = side_next >= -EDGE_EPS;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            let denom = side_cur - side_next;
            if denom.abs() > f64::EPSILON {
                let t = side_cur / denom;
                out.push([
                    cur[0] + t * (next[0] - cur[0]),
                    cur[1] + t * (next[1] - cur[1]),
                ]);
            }
        }
    }
    out
}

fn dedupe_consecutive(vertices: &mut Vec<[f64; 2]>) {
    if vertices.len() < 2 {
        return;
    }
    let mut kept: Vec<[f64; 2]> = Vec::with_capacity(vertices.len());
    for &v in vertices.iter() {
        if let Some(&last) = kept.last() {
            if (v[0] - last[0]).abs() <= EDGE_EPS && (v[1] - last[1]).abs() <= EDGE_EPS {
                continue;
            }
        }
        kept.push(v);
    }
    if kept.len() >= 2 {
        let first = kept[0];
        let last = *kept.last().unwrap();
        if (first[0] - last[0]).abs() <= EDGE_EPS && (first[1] - last[1]).abs() <= EDGE_EPS {
            kept.pop();
        }
    }
    *vertices = kept;
}
