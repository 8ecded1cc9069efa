//! Mid-level trajectory follower: speed feedforward plus proportional speed
//! correction, and pure-pursuit steering correction toward a point a fixed
//! time ahead on the reference.

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::model::{ActionCmd, FollowerGains, SigmaState, VehicleParams};
use crate::planner::{ReferenceTrajectory, TrajectoryPoint};

const TIME_EPS: f64 = 1e-9;

/// Linear interpolation of the reference at time `t`, clamped to its span.
pub fn sample(traj: &ReferenceTrajectory, t: f64) -> TrajectoryPoint {
    let last = traj.points.len() - 1;
    let u = ((t - traj.t0) / traj.dt).max(0.0);
    let j = ((u + TIME_EPS).floor() as usize).min(last);
    let frac = u - j as f64;
    if j == last || frac <= TIME_EPS {
        return traj.points[j];
    }
    let (a, b) = (&traj.points[j], &traj.points[j + 1]);
    TrajectoryPoint {
        x: a.x + (b.x - a.x) * frac,
        y: a.y + (b.y - a.y) * frac,
        yaw: wrap_angle(a.yaw + wrap_angle(b.yaw - a.yaw) * frac),
        speed: a.speed + (b.speed - a.speed) * frac,
        steer: a.steer + (b.steer - a.steer) * frac,
    }
}

/// Unclamped pursuit steering from `(position, yaw)` toward `target`.
fn pursuit_angle(position: Vec2, yaw: f64, target: Vec2, params: &VehicleParams) -> f64 {
    let d = target - position;
    let dist = d.norm();
    if dist <= 1e-12 {
        return 0.0;
    }
    let alpha = wrap_angle(d.angle() - yaw);
    (2.0 * params.wheelbase * alpha.sin() / dist).atan()
}

/// Tracking command for `measured` against `traj` at time `now`.
///
/// On the reference (same position, yaw and speed as the sample at `now`)
/// the result equals the reference's own `(speed, steer)` one step ahead,
/// which reproduces the reference exactly under the vehicle model.
pub fn follow_step(
    measured: &SigmaState,
    traj: &ReferenceTrajectory,
    now: f64,
    params: &VehicleParams,
    gains: &FollowerGains,
) -> Result<ActionCmd> {
    let end = traj.end_time();
    if traj.points.len() < 2 || now < traj.t0 - TIME_EPS || now > end + TIME_EPS {
        return Err(Error::TrajectoryExpired {
            now,
            t0: traj.t0,
            end,
        });
    }
    let reference = sample(traj, now);
    let feedforward = sample(traj, now + traj.dt);
    let target = sample(traj, now + gains.lookahead_time).position();

    let correction = pursuit_angle(measured.position, measured.yaw, target, params)
        - pursuit_angle(reference.position(), reference.yaw, target, params);
    let steering =
        (feedforward.steer + correction).clamp(-params.max_steering, params.max_steering);
    let speed = feedforward.speed + gains.k_s * (reference.speed - measured.speed());
    Ok(ActionCmd::new(speed, steering))
}
