//! Kinematic bicycle model with actuation limits, and the conversions between
//! the lab's state list and the planner's state representation.
//!
//! The reference point is the geometric center, which coincides with the
//! center of gravity. Slip angle `beta = atan(l_r / l_wb * tan(steering))`;
//! the velocity vector points along `yaw + beta`.

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::model::{ActionCmd, CpmState, SigmaState, VehicleParams};

/// Slip angle at the center of gravity for a given steering angle.
pub fn slip_angle(steering: f64, params: &VehicleParams) -> f64 {
    (params.slip_ratio() * steering.tan()).atan()
}

pub fn map_cpm_to_sigma(s: &CpmState, params: &VehicleParams) -> SigmaState {
    let steering = params.max_steering * s.steering_normalized;
    let beta = slip_angle(steering, params);
    SigmaState::new(
        s.position,
        s.yaw,
        Vec2::from_angle(s.yaw + beta) * s.speed,
        steering,
    )
}

pub fn map_sigma_to_cpm(s: &SigmaState, params: &VehicleParams) -> CpmState {
    CpmState::new(
        s.position,
        s.yaw,
        s.speed(),
        s.steering / params.max_steering,
    )
}

/// Applies steering-rate, steering-lock, acceleration and speed limits to a
/// command, returning the `(speed, steering)` the vehicle will actually reach.
pub fn limit_command(
    s: &SigmaState,
    cmd: &ActionCmd,
    dt: f64,
    params: &VehicleParams,
) -> (f64, f64) {
    let rate = params.max_steering_rate * dt;
    let steering = cmd
        .steering
        .clamp(s.steering - rate, s.steering + rate)
        .clamp(-params.max_steering, params.max_steering);
    let v = s.speed();
    let speed = cmd
        .speed
        .clamp(v + params.min_accel * dt, v + params.max_accel * dt)
        .clamp(0.0, params.max_speed);
    (speed, steering)
}

/// One explicit-Euler step of the kinematic bicycle.
pub fn step_bicycle(
    s: &SigmaState,
    cmd: &ActionCmd,
    dt: f64,
    params: &VehicleParams,
) -> SigmaState {
    step_bicycle_substeps(s, cmd, dt, params, 1)
}

/// Limits are applied once for the whole `dt`; the position and yaw update is
/// split into `substeps` equal Euler substeps.
pub fn step_bicycle_substeps(
    s: &SigmaState,
    cmd: &ActionCmd,
    dt: f64,
    params: &VehicleParams,
    substeps: usize,
) -> SigmaState {
    let (speed, steering) = limit_command(s, cmd, dt, params);
    let beta = slip_angle(steering, params);
    let yaw_rate = speed / params.rear_wheelbase * beta.sin();
    let h = dt / substeps.max(1) as f64;
    let mut position = s.position;
    let mut yaw = s.yaw;
    for _ in 0..substeps.max(1) {
        position += Vec2::from_angle(yaw + beta) * (speed * h);
        yaw = wrap_angle(yaw + yaw_rate * h);
    }
    SigmaState::new(
        position,
        yaw,
        Vec2::from_angle(yaw + beta) * speed,
        steering,
    )
}

/// Maps a squashed policy output in `(-1, 1)^2` onto the command range:
/// speed in `[0, max_speed]`, steering in `[-max_steering, max_steering]`.
pub fn rescale_action(raw: [f64; 2], params: &VehicleParams) -> Result<ActionCmd> {
    for &value in &raw {
        if !(value > -1.0 && value < 1.0) {
            return Err(Error::ActionOutOfRange { value });
        }
    }
    Ok(ActionCmd::new(
        (raw[0] + 1.0) / 2.0 * params.max_speed,
        raw[1] * params.max_steering,
    ))
}

/// Inverse of [`rescale_action`], nudged strictly inside the open interval.
pub fn unscale_action(cmd: &ActionCmd, params: &VehicleParams) -> [f64; 2] {
    const LIMIT: f64 = 1.0 - 1e-12;
    [
        (2.0 * cmd.speed / params.max_speed - 1.0).clamp(-LIMIT, LIMIT),
        (cmd.steering / params.max_steering).clamp(-LIMIT, LIMIT),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn full_lock_denormalizes_to_31_degrees() {
        let s = map_cpm_to_sigma(&CpmState::new(Vec2::ZERO, 0.0, 0.0, 1.0), &params());
        assert!((s.steering - 0.54105).abs() < 1e-5);
        assert_eq!(s.steering, 31.0 * PI / 180.0);
    }

    #[test]
    fn zero_steering_has_zero_slip() {
        let s = map_cpm_to_sigma(&CpmState::new(Vec2::ZERO, 0.0, 0.5, 0.0), &params());
        assert_eq!(s.velocity, Vec2::new(0.5, 0.0));
    }

    #[test]
    fn slip_at_full_lock() {
        // frozen from atan(0.5 * tan(31 deg)) evaluated independently
        let beta = slip_angle(31.0 * PI / 180.0, &params());
        assert!((beta - 0.291_851_527_078_117_4).abs() < 1e-12, "{beta}");
    }

    #[test]
    fn velocity_is_rotated_into_global_frame() {
        let s = map_cpm_to_sigma(&CpmState::new(Vec2::ZERO, PI / 2.0, 1.0, 0.0), &params());
        assert!(s.velocity.x.abs() < 1e-15 && (s.velocity.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_mapping_boundaries() {
        let p = params();
        let rest = map_sigma_to_cpm(&SigmaState::at_rest(Vec2::ZERO, 0.0), &p);
        assert_eq!(rest.speed, 0.0);
        let lock = SigmaState::new(Vec2::ZERO, 0.0, Vec2::ZERO, -p.max_steering);
        assert_eq!(map_sigma_to_cpm(&lock, &p).steering_normalized, -1.0);
    }

    #[test]
    fn straight_line_step() {
        let s = SigmaState::new(Vec2::ZERO, 0.0, Vec2::new(0.75, 0.0), 0.0);
        let next = step_bicycle(&s, &ActionCmd::new(0.75, 0.0), 0.1, &params());
        assert!((next.position.x - 0.075).abs() < 1e-15);
        assert_eq!(next.position.y, 0.0);
        assert_eq!(next.yaw, 0.0);
    }

    #[test]
    fn acceleration_limit_from_rest() {
        let s = SigmaState::at_rest(Vec2::ZERO, 0.0);
        let next = step_bicycle(&s, &ActionCmd::new(1.0, 0.0), 0.1, &params());
        assert!((next.speed() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn steering_rate_limit() {
        let p = params();
        let s = SigmaState::at_rest(Vec2::ZERO, 0.0);
        let next = step_bicycle(&s, &ActionCmd::new(0.0, p.max_steering), 0.1, &p);
        assert!((next.steering - 9.0 * PI / 180.0).abs() < 1e-15);
    }

    #[test]
    fn rescale_examples() {
        let p = params();
        let cmd = rescale_action([0.0, 0.5], &p).unwrap();
        assert_eq!(cmd.speed, 0.5);
        assert!((cmd.steering - 0.27052).abs() < 1e-5);
        let top = rescale_action([1.0 - 1e-12, 0.0], &p).unwrap();
        assert!((top.speed - p.max_speed).abs() < 1e-11 && top.steering == 0.0);
        let bottom = rescale_action([-1.0 + 1e-12, -1.0 + 1e-12], &p).unwrap();
        assert!(bottom.speed.abs() < 1e-11 && (bottom.steering + p.max_steering).abs() < 1e-11);
        assert!(matches!(
            rescale_action([1.0, 0.0], &p),
            Err(Error::ActionOutOfRange { .. })
        ));
        assert!(rescale_action([0.0, f64::NAN], &p).is_err());
    }

    fn arb_state() -> impl Strategy<Value = SigmaState> {
        let max = params().max_steering;
        (-5.0..5.0f64, -5.0..5.0f64, -PI..PI, 0.0..1.0f64, -max..max).prop_map(
            |(x, y, yaw, v, steer)| {
                let beta = slip_angle(steer, &params());
                SigmaState::new(
                    Vec2::new(x, y),
                    yaw,
                    Vec2::from_angle(yaw + beta) * v,
                    steer,
                )
            },
        )
    }

    proptest! {
        #[test]
        fn limits_hold_after_any_step(
            s in arb_state(), u_v in -2.0..3.0f64, u_s in -2.0..2.0f64, dt in 0.001..0.5f64
        ) {
            let p = params();
            let next = step_bicycle(&s, &ActionCmd::new(u_v, u_s), dt, &p);
            prop_assert!(next.speed() >= 0.0);
            prop_assert!(next.speed() <= p.max_speed + 1e-12);
            prop_assert!(next.steering.abs() <= p.max_steering);
            prop_assert!((next.steering - s.steering).abs() <= p.max_steering_rate * dt + 1e-12);
        }

        #[test]
        fn cpm_round_trip(
            x in -10.0..10.0f64, y in -10.0..10.0f64, yaw in -PI..PI,
            v in 0.0..2.0f64, sn in -1.0..1.0f64
        ) {
            let p = params();
            let c = CpmState::new(Vec2::new(x, y), yaw, v, sn);
            let back = map_sigma_to_cpm(&map_cpm_to_sigma(&c, &p), &p);
            prop_assert_eq!(back.position, c.position);
            prop_assert!((back.yaw - c.yaw).abs() <= 1e-12);
            prop_assert!((back.speed - c.speed).abs() <= 1e-12);
            prop_assert!((back.steering_normalized - c.steering_normalized).abs() <= 1e-12);
        }

        #[test]
        fn zero_steering_keeps_heading(
            yaw in -PI..PI, v in 0.05..1.0f64, steps in 1usize..200
        ) {
            let p = params();
            let mut s = SigmaState::new(Vec2::ZERO, yaw, Vec2::from_angle(yaw) * v, 0.0);
            let mut travelled = 0.0;
            for _ in 0..steps {
                let next = step_bicycle(&s, &ActionCmd::new(v, 0.0), 0.1, &p);
                travelled += next.speed() * 0.1;
                s = next;
            }
            prop_assert!((s.yaw - wrap_angle(yaw)).abs() <= 1e-9);
            // collinear with initial heading
            prop_assert!(Vec2::from_angle(yaw).cross(s.position).abs() <= 1e-9);
            prop_assert!((s.position.norm() - travelled).abs() <= 1e-9);
        }
    }
}
