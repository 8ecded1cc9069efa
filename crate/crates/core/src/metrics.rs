//! Safety and performance metrics over a recorded run.
//!
//! * CRA-A: confirmed agent-agent collision events per 100 m of aggregate travel.
//! * CRA-L: distance driven with the footprint outside the drivable area
//!   (beyond a slack of 10 % of the vehicle width) per 100 m of travel.
//! * CD: mean lateral distance between agent centers and their reference paths.
//! * AS: mean speed.
//!
//! Collisions pass through a hysteresis filter: an overlap must persist for 3
//! consecutive steps to start an event and 5 consecutive clear steps end it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::RunRecord;
use crate::geometry::{
    lane_violation_depth, project_onto_polyline, signed_separation, OrientedBox, Vec2,
};
use crate::model::{CpmState, MapModel, VehicleParams};

/// Consecutive overlapping steps needed to confirm a collision.
pub const START_STEPS: usize = 3;
/// Consecutive clear steps needed to end a collision.
pub const END_STEPS: usize = 5;
/// Lane-violation slack as a fraction of vehicle width.
pub const LANE_SLACK_FRACTION: f64 = 0.1;

/// Streaming start/stop debouncer for one agent pair.
#[derive(Debug, Clone, Default)]
pub struct Hysteresis {
    active: bool,
    true_run: usize,
    false_run: usize,
    start: usize,
    last_true: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// Confirmed at the current step; the event began at `start`.
    Started { start: usize },
    /// Closed after enough clear steps; `end` is the last overlapping step.
    Ended { start: usize, end: usize },
}

impl Hysteresis {
    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn push(&mut self, step: usize, overlap: bool) -> Option<Transition> {
        if self.active {
            if overlap {
                self.false_run = 0;
                self.last_true = step;
            } else {
                self.false_run += 1;
                if self.false_run >= END_STEPS {
                    self.active = false;
                    self.true_run = 0;
                    return Some(Transition::Ended {
                        start: self.start,
                        end: self.last_true,
                    });
                }
            }
            return None;
        }
        if !overlap {
            self.true_run = 0;
            return None;
        }
        self.true_run += 1;
        if self.true_run >= START_STEPS {
            self.active = true;
            self.false_run = 0;
            self.start = step + 1 - self.true_run;
            self.last_true = step;
            return Some(Transition::Started { start: self.start });
        }
        None
    }

    /// Closes an event still open at the end of the run.
    pub fn finish(&self) -> Option<(usize, usize)> {
        self.active.then_some((self.start, self.last_true))
    }
}

/// `(start, end)` step pairs of confirmed events in one overlap series.
pub fn detect_events(series: &[bool]) -> Vec<(usize, usize)> {
    let mut h = Hysteresis::default();
    let mut events = Vec::new();
    for (t, &o) in series.iter().enumerate() {
        if let Some(Transition::Ended { start, end }) = h.push(t, o) {
            events.push((start, end));
        }
    }
    events.extend(h.finish());
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Agent indices, smaller first.
    pub agents: (usize, usize),
    pub start_step: usize,
    pub end_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub slack_fraction: f64,
    /// Drop teleport steps caused by collision resets from means and distances.
    pub exclude_reset_steps: bool,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            slack_fraction: LANE_SLACK_FRACTION,
            exclude_reset_steps: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub cra_a: f64,
    pub cra_l: f64,
    pub cd: f64,
    #[serde(rename = "as")]
    pub avg_speed: f64,
    pub total_distance: f64,
    pub events: Vec<CollisionEvent>,
}

pub fn state_footprint(s: &CpmState, params: &VehicleParams) -> OrientedBox {
    OrientedBox::new(s.position, s.yaw, params.length / 2.0, params.width / 2.0)
}

/// Footprints touching or overlapping count as a collision sample.
pub fn overlapping(a: &CpmState, b: &CpmState, params: &VehicleParams) -> bool {
    signed_separation(&state_footprint(a, params), &state_footprint(b, params)) <= 0.0
}

/// Overlap series for every unordered agent pair, in `(i, j)` lexicographic order.
pub fn overlap_series(record: &RunRecord) -> Vec<((usize, usize), Vec<bool>)> {
    let params = &record.config.vehicle;
    let n = record.n_agents();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let series = record
                .states
                .iter()
                .map(|row| overlapping(&row[i], &row[j], params))
                .collect();
            out.push(((i, j), series));
        }
    }
    out
}

pub fn detect_collision_events(record: &RunRecord) -> Vec<CollisionEvent> {
    let mut events: Vec<CollisionEvent> = overlap_series(record)
        .into_iter()
        .flat_map(|(pair, series)| {
            detect_events(&series)
                .into_iter()
                .map(move |(start_step, end_step)| CollisionEvent {
                    agents: pair,
                    start_step,
                    end_step,
                })
        })
        .collect();
    events.sort_by_key(|e| (e.start_step, e.agents));
    events
}

fn excluded(record: &RunRecord, step: usize, agent: usize, opts: &MetricOptions) -> bool {
    opts.exclude_reset_steps && record.is_reset(step, agent)
}

/// Per-step travel of one agent; entry `t - 1` is the distance from step `t - 1` to `t`,
/// or `None` when that segment is a reset teleport being excluded.
fn step_travel(record: &RunRecord, agent: usize, opts: &MetricOptions) -> Vec<Option<f64>> {
    (1..record.states.len())
        .map(|t| {
            (!excluded(record, t, agent, opts)).then(|| {
                record.states[t - 1][agent]
                    .position
                    .distance(record.states[t][agent].position)
            })
        })
        .collect()
}

/// Aggregate distance over all agents.
pub fn total_distance(record: &RunRecord, opts: &MetricOptions) -> f64 {
    (0..record.n_agents())
        .map(|i| {
            step_travel(record, i, opts)
                .into_iter()
                .flatten()
                .sum::<f64>()
        })
        .sum()
}

fn per_100m(numerator: f64, distance: f64, what: &str) -> Result<f64> {
    if distance.is_nan() || distance <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "{what}: total distance travelled is zero"
        )));
    }
    Ok(100.0 * numerator / distance)
}

pub fn cra_a(record: &RunRecord, opts: &MetricOptions) -> Result<f64> {
    let events = detect_collision_events(record);
    per_100m(events.len() as f64, total_distance(record, opts), "CRA-A")
}

/// Whether each logged state of `agent` pokes out of the drivable area beyond the slack.
pub fn lane_violations(record: &RunRecord, map: &MapModel, agent: usize, slack: f64) -> Vec<bool> {
    let params = &record.config.vehicle;
    record
        .states
        .iter()
        .map(|row| {
            let fp = state_footprint(&row[agent], params);
            lane_violation_depth(&fp, map.drivable_area()) > slack
        })
        .collect()
}

pub fn cra_l(record: &RunRecord, map: &MapModel, opts: &MetricOptions) -> Result<f64> {
    let slack = opts.slack_fraction * record.config.vehicle.width;
    let mut violating = 0.0;
    for agent in 0..record.n_agents() {
        let flags = lane_violations(record, map, agent, slack);
        for (k, d) in step_travel(record, agent, opts).into_iter().enumerate() {
            if let Some(d) = d {
                if flags[k + 1] {
                    violating += d;
                }
            }
        }
    }
    per_100m(violating, total_distance(record, opts), "CRA-L")
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn included_states<'a>(
    record: &'a RunRecord,
    opts: &'a MetricOptions,
) -> impl Iterator<Item = (usize, &'a CpmState)> + 'a {
    record.states.iter().enumerate().flat_map(move |(t, row)| {
        row.iter()
            .enumerate()
            .filter(move |(i, _)| !excluded(record, t, *i, opts))
    })
}

pub fn centerline_deviation(
    record: &RunRecord,
    map: &MapModel,
    opts: &MetricOptions,
) -> Result<f64> {
    let mut paths = Vec::with_capacity(record.n_agents());
    for name in &record.reference_paths {
        let rp = map.reference_path(name).ok_or_else(|| {
            Error::UndefinedMetric(format!("CD: map has no reference path {name:?}"))
        })?;
        paths.push(&rp.polyline);
    }
    let mut offsets = Vec::new();
    for (i, s) in included_states(record, opts) {
        offsets.push(project_onto_polyline(s.position, paths[i])?.lateral_offset);
    }
    Ok(mean(offsets.into_iter()))
}

pub fn average_speed(record: &RunRecord, opts: &MetricOptions) -> f64 {
    mean(included_states(record, opts).map(|(_, s)| s.speed))
}

pub fn evaluate(record: &RunRecord, map: &MapModel, opts: &MetricOptions) -> Result<RunMetrics> {
    let events = detect_collision_events(record);
    let distance = total_distance(record, opts);
    Ok(RunMetrics {
        cra_a: per_100m(events.len() as f64, distance, "CRA-A")?,
        cra_l: cra_l(record, map, opts)?,
        cd: centerline_deviation(record, map, opts)?,
        avg_speed: average_speed(record, opts),
        total_distance: distance,
        events,
    })
}

/// Positions of one agent over the run.
pub fn agent_positions(record: &RunRecord, agent: usize) -> Vec<Vec2> {
    record
        .states
        .iter()
        .map(|row| row[agent].position)
        .collect()
}
