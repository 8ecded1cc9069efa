use serde::{Deserialize, Serialize};

use super::{wrap_angle, Vec2};
use crate::error::{Error, Result};

/// Which side of the polyline a point lies on, looking along its direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    On,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineProjection {
    /// Arc length of the closest point.
    pub arc_length: f64,
    /// Unsigned distance to the closest point.
    pub lateral_offset: f64,
    pub side: Side,
    pub segment_index: usize,
    pub closest: Vec2,
}

impl PolylineProjection {
    /// Lateral offset with left positive.
    pub fn signed_offset(&self) -> f64 {
        match self.side {
            Side::Left => self.lateral_offset,
            Side::Right => -self.lateral_offset,
            Side::On => 0.0,
        }
    }
}

/// Sequence of points with cached cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
    closed: bool,
}

impl Polyline {
    /// Builds an open polyline. Requires at least two points.
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        Self::build(points, false)
    }

    /// Builds a closed loop; the first point is implicitly revisited at the end
    /// if the last point does not already coincide with it.
    pub fn closed(mut points: Vec<Vec2>) -> Result<Self> {
        if let (Some(&first), Some(&last)) = (points.first(), points.last()) {
            if points.len() >= 2 && first.distance(last) > 1e-9 {
                points.push(first);
            }
        }
        Self::build(points, true)
    }

    fn build(points: Vec<Vec2>, closed: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Degenerate(format!(
                "polyline needs at least 2 points, got {}",
                points.len()
            )));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::Degenerate("polyline has zero total length".into()));
        }
        Ok(Polyline {
            points,
            cumulative,
            closed,
        })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    /// Normalizes `s` into `[0, length]`: wraps for closed loops, clamps otherwise.
    pub fn normalize_arc(&self, s: f64) -> f64 {
        let len = self.length();
        if self.closed {
            s.rem_euclid(len)
        } else {
            s.clamp(0.0, len)
        }
    }

    fn segment_at(&self, s: f64) -> usize {
        let idx = self.cumulative.partition_point(|&c| c <= s);
        idx.saturating_sub(1).min(self.segment_count() - 1)
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = self.normalize_arc(s);
        let i = self.segment_at(s);
        let seg_len = self.cumulative[i + 1] - self.cumulative[i];
        if seg_len <= 0.0 {
            return self.points[i];
        }
        self.points[i].lerp(self.points[i + 1], (s - self.cumulative[i]) / seg_len)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let s = self.normalize_arc(s);
        let mut i = self.segment_at(s);
        // skip zero-length segments
        while i + 1 < self.segment_count() && self.points[i] == self.points[i + 1] {
            i += 1;
        }
        (self.points[i + 1] - self.points[i]).angle()
    }

    fn project_segment(&self, point: Vec2, i: usize) -> (f64, Vec2, f64) {
        let a = self.points[i];
        let b = self.points[i + 1];
        let ab = b - a;
        let len2 = ab.dot(ab);
        let t = if len2 > 0.0 {
            ((point - a).dot(ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let closest = a + ab * t;
        (point.distance(closest), closest, t)
    }

    fn projection_on(&self, point: Vec2, i: usize) -> PolylineProjection {
        let (d, closest, t) = self.project_segment(point, i);
        let seg_len = self.cumulative[i + 1] - self.cumulative[i];
        let cross = (self.points[i + 1] - self.points[i]).cross(point - closest);
        let side = if cross > 0.0 {
            Side::Left
        } else if cross < 0.0 {
            Side::Right
        } else {
            Side::On
        };
        PolylineProjection {
            arc_length: self.cumulative[i] + t * seg_len,
            lateral_offset: d,
            side,
            segment_index: i,
            closest,
        }
    }
}

/// Closest point on `polyline` to `point`. Ties resolve to the smaller arc length.
pub fn project_onto_polyline(point: Vec2, polyline: &Polyline) -> Result<PolylineProjection> {
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..polyline.segment_count() {
        let (d, _, _) = polyline.project_segment(point, i);
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(polyline.projection_on(point, best.1))
}

/// Heading-aware projection: minimizes `distance + weight * (1 - cos(heading error))`.
///
/// Used by trackers on self-crossing paths, where the geometrically closest
/// segment near a crossing may belong to the other branch.
pub fn project_onto_polyline_aligned(
    point: Vec2,
    heading: f64,
    weight: f64,
    polyline: &Polyline,
) -> PolylineProjection {
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..polyline.segment_count() {
        let seg = polyline.points[i + 1] - polyline.points[i];
        if seg == Vec2::ZERO {
            continue;
        }
        let (d, _, _) = polyline.project_segment(point, i);
        let cost = d + weight * (1.0 - wrap_angle(seg.angle() - heading).cos());
        if cost < best.0 {
            best = (cost, i);
        }
    }
    polyline.projection_on(point, best.1)
}

/// Sum of consecutive Euclidean distances.
pub fn path_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}
