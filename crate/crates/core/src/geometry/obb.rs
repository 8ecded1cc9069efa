use super::Vec2;
use crate::model::{SigmaState, VehicleParams};

/// Rectangle with arbitrary orientation; the footprint of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec2,
    pub yaw: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedBox {
    pub fn new(center: Vec2, yaw: f64, half_length: f64, half_width: f64) -> Self {
        debug_assert!(half_length > 0.0 && half_width > 0.0);
        OrientedBox {
            center,
            yaw,
            half_length,
            half_width,
        }
    }

    /// Unit vectors along the length and width directions.
    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_angle(self.yaw);
        (u, u.perp())
    }

    /// Corners counter-clockwise, starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let l = u * self.half_length;
        let w = v * self.half_width;
        let c = self.center;
        [c + l + w, c - l + w, c - l - w, c + l - w]
    }

    /// Projection radius onto a unit `axis`.
    fn radius_along(&self, axis: Vec2) -> f64 {
        let (u, v) = self.axes();
        self.half_length * u.dot(axis).abs() + self.half_width * v.dot(axis).abs()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.half_length && d.dot(v).abs() <= self.half_width
    }
}

pub fn footprint(state: &SigmaState, params: &VehicleParams) -> OrientedBox {
    OrientedBox::new(
        state.position,
        state.yaw,
        params.length / 2.0,
        params.width / 2.0,
    )
}

/// Separating-axis distance between two rectangles.
///
/// Negative when the boxes overlap (magnitude is the minimum translation
/// distance), positive gap along the best separating axis otherwise. Touching
/// boxes return 0 and count as overlapping.
pub fn signed_separation(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (au, av) = a.axes();
    let (bu, bv) = b.axes();
    let d = b.center - a.center;

    let mut max_gap = f64::NEG_INFINITY;
    let mut min_overlap = f64::INFINITY;
    for axis in [au, av, bu, bv] {
        let overlap = a.radius_along(axis) + b.radius_along(axis) - d.dot(axis).abs();
        max_gap = max_gap.max(-overlap);
        min_overlap = min_overlap.min(overlap);
    }
    if max_gap > 0.0 {
        max_gap
    } else {
        -min_overlap
    }
}
