use super::{OrientedBox, Vec2};

/// Closed simple polygon; the closing edge from the last vertex back to the
/// first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    min: Vec2,
    max: Vec2,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &vertices {
            min = Vec2::new(min.x.min(v.x), min.y.min(v.y));
            max = Vec2::new(max.x.max(v.x), max.y.max(v.y));
        }
        Polygon { vertices, min, max }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area; positive for counter-clockwise vertex order.
    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.cross(b)).sum::<f64>() / 2.0
    }

    pub fn contains(&self, p: Vec2) -> bool {
        if p.x < self.min.x || p.x > self.max.x || p.y < self.min.y || p.y > self.max.y {
            return false;
        }
        point_in_polygon(p, &self.vertices)
    }

    /// Lower bound on the distance from `p` to the polygon (distance to its bounding box).
    fn bbox_distance(&self, p: Vec2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `fp` lies inside this polygon without touching its boundary.
    fn strictly_contains_box(&self, fp: &OrientedBox) -> bool {
        let corners = fp.corners();
        if !corners.iter().all(|&c| self.contains(c)) {
            return false;
        }
        for i in 0..4 {
            let (c0, c1) = (corners[i], corners[(i + 1) % 4]);
            if self.edges().any(|(a, b)| segments_intersect(a, b, c0, c1)) {
                return false;
            }
        }
        true
    }
}

/// Crossing-number point-in-polygon test over an implicitly closed ring.
pub fn point_in_polygon(p: Vec2, ring: &[Vec2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn orientation(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test; touching and collinear overlap count.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orientation(c, d, a);
    let d2 = orientation(c, d, b);
    let d3 = orientation(a, b, c);
    let d4 = orientation(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when no two edges of the ring meet except adjacent edges at their
/// shared vertex.
pub fn polygon_is_simple(ring: &[Vec2]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let edge = |i: usize| (ring[i], ring[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        if a == b {
            return false;
        }
        // adjacent edge must not fold back onto this one
        let (_, c) = edge((i + 1) % n);
        if orientation(a, b, c) == 0.0 && (c - b).dot(b - a) < 0.0 {
            return false;
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Union of lane polygons. Points are drivable when inside any member.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DrivableArea {
    polygons: Vec<Polygon>,
}

/// Perimeter sampling pitch for the coarse scan.
const COARSE_STEP: f64 = 0.005;
/// Pitch for the local refinement around the coarse maximum.
const FINE_STEP: f64 = 0.0001;

impl DrivableArea {
    pub fn new(polygons: Vec<Polygon>) -> Self {
        DrivableArea { polygons }
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    pub fn area_contains(&self, p: Vec2) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }

    /// Distance from `p` to the drivable area; 0 when inside.
    pub fn exit_distance(&self, p: Vec2) -> f64 {
        if self.area_contains(p) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for poly in &self.polygons {
            if poly.bbox_distance(p) < best {
                best = best.min(poly.boundary_distance(p));
            }
        }
        best
    }
}

/// How far the footprint pokes out of the drivable area, in meters.
///
/// Returns 0 when the footprint is fully inside. Otherwise probes corners and
/// edge midpoints, scans the perimeter at 5 mm, then refines around every
/// coarse sample that could still hold the maximum.
pub fn lane_violation_depth(fp: &OrientedBox, area: &DrivableArea) -> f64 {
    if area.polygons.iter().any(|p| p.strictly_contains_box(fp)) {
        return 0.0;
    }
    let corners = fp.corners();
    let mut samples: Vec<(usize, f64, f64)> = Vec::new();
    let mut best = 0.0f64;
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        let len = a.distance(b);
        let n = (len / COARSE_STEP).ceil().max(2.0) as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let d = area.exit_distance(a.lerp(b, t));
            best = best.max(d);
            samples.push((i, t, d));
        }
    }
    if best == 0.0 {
        return 0.0;
    }
    // exit distance is 1-Lipschitz along the perimeter, so the true maximum
    // lies within half a coarse step of a sample no lower than best - step/2
    for &(i, t, d) in &samples {
        if d < best - COARSE_STEP {
            continue;
        }
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        let len = a.distance(b);
        let half = COARSE_STEP / len;
        let n = (COARSE_STEP / FINE_STEP).ceil() as usize;
        for k in 0..=n {
            let tt = (t - half + 2.0 * half * k as f64 / n as f64).clamp(0.0, 1.0);
            best = best.max(area.exit_distance(a.lerp(b, tt)));
        }
    }
    best
}
