//! Acceptance gate. Each test checks one criterion at its stated tolerance and
//! prints a single `ACCEPTANCE <name>: PASS|FAIL` line to stderr before asserting.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tickbench_core::bench::{
    aggregate, build_report, format_cell, run_matrix, write_results, AggregateStats, BenchMatrix,
    Environment,
};
use tickbench_core::dynamics::{
    map_cpm_to_sigma, map_sigma_to_cpm, slip_angle, step_bicycle, step_bicycle_substeps,
};
use tickbench_core::executor::RunRecord;
use tickbench_core::geometry::{signed_separation, OrientedBox, Vec2};
use tickbench_core::metrics::{detect_collision_events, CollisionEvent};
use tickbench_core::model::{
    ActionCmd, CpmState, DisturbanceProfile, ExecutionMode, MapModel, RunConfig, SigmaState,
    VehicleParams,
};
use tickbench_core::planner::{generate_trajectory, PlanRequest};
use tickbench_core::policy::{Policy, PolicyInput, RandomPolicy};

// Written to the raw stderr handle, which the test harness does not capture,
// so verdicts show up in a plain `cargo test` run.
fn report_line(line: String) {
    use std::io::Write;
    let _ = std::io::stderr().write_all(format!("{line}\n").as_bytes());
}

fn verdict(name: &str, pass: bool, detail: String) {
    report_line(format!(
        "ACCEPTANCE {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    ));
    assert!(pass, "{name}: {detail}");
}

/// For a criterion whose reference value cannot be met by a faithful
/// implementation: the verdict line still reports FAIL, and the test asserts
/// the failure persists so a silent change in behavior gets noticed.
fn known_failure(name: &str, pass: bool, detail: String) {
    report_line(format!(
        "ACCEPTANCE {name}: {} ({detail}) [known failure]",
        if pass { "PASS" } else { "FAIL" }
    ));
    assert!(
        !pass,
        "{name} now passes; drop the known-failure marker: {detail}"
    );
}

// ---------------------------------------------------------------- hysteresis

/// Reference automaton written from the rule text, over run lengths rather
/// than per-step counters: an event starts at the first step of a run of >= 3
/// overlaps, survives clear gaps shorter than 5, and ends at the last overlap
/// before a clear run of >= 5 (or at the last overlap of the sequence).
fn oracle_events(seq: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < seq.len() {
        let j = (i..seq.len())
            .find(|&k| seq[k] != seq[i])
            .unwrap_or(seq.len());
        runs.push((seq[i], i, j - i));
        i = j;
    }
    let mut events = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    for (value, start, len) in runs {
        match (open, value) {
            (None, true) if len >= 3 => open = Some((start, start + len - 1)),
            (Some((s, _)), true) => open = Some((s, start + len - 1)),
            (Some(ev), false) if len >= 5 => {
                events.push(ev);
                open = None;
            }
            _ => {}
        }
    }
    events.extend(open);
    events
}

fn pair_record(seq: &[bool], base: &RunRecord) -> RunRecord {
    let far = CpmState::new(Vec2::new(1.0, 0.0), 0.0, 0.0, 0.0);
    let near = CpmState::new(Vec2::new(0.1, 0.0), 0.0, 0.0, 0.0);
    let origin = CpmState::new(Vec2::ZERO, 0.0, 0.0, 0.0);
    let mut rec = base.clone();
    rec.states = seq
        .iter()
        .map(|&o| vec![origin, if o { near } else { far }])
        .collect();
    rec.actions = vec![vec![ActionCmd::default(); 2]; seq.len().saturating_sub(1)];
    rec
}

fn as_pairs(events: &[CollisionEvent]) -> Vec<(usize, usize)> {
    events.iter().map(|e| (e.start_step, e.end_step)).collect()
}

#[test]
fn hysteresis_oracle() {
    let started = Instant::now();
    let base = RunRecord {
        config: RunConfig {
            n_agent: 2,
            ..RunConfig::default()
        },
        reference_paths: vec!["p".into(), "p".into()],
        states: vec![],
        actions: vec![],
        resets: vec![],
        wall_clock: Default::default(),
    };
    let mut checked = 0;
    let mut mismatches = 0;
    for len in 1..=12 {
        for bits in 0u32..(1 << len) {
            let seq: Vec<bool> = (0..len).map(|k| bits >> k & 1 == 1).collect();
            if as_pairs(&detect_collision_events(&pair_record(&seq, &base))) != oracle_events(&seq)
            {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        // bursty sequences so that all thresholds are exercised
        let p: f64 = rng.random_range(0.1..0.9);
        let seq: Vec<bool> = (0..200).map(|_| rng.random_bool(p)).collect();
        if as_pairs(&detect_collision_events(&pair_record(&seq, &base))) != oracle_events(&seq) {
            mismatches += 1;
        }
        checked += 1;
    }
    let elapsed = started.elapsed();
    verdict(
        "hysteresis_oracle",
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{checked} sequences, {mismatches} mismatches, {elapsed:.2?}"),
    );
}

// ------------------------------------------------------------------ geometry

/// Point-in-rectangle in the box's own frame, independent of the library.
fn inside(b: &OrientedBox, p: Vec2) -> bool {
    let d = p - b.center;
    let (s, c) = b.yaw.sin_cos();
    let lx = d.x * c + d.y * s;
    let ly = -d.x * s + d.y * c;
    lx.abs() <= b.half_length && ly.abs() <= b.half_width
}

fn boundary_samples(b: &OrientedBox, step: f64) -> Vec<Vec2> {
    let corners = b.corners();
    let mut pts = Vec::new();
    for k in 0..4 {
        let (a, c) = (corners[k], corners[(k + 1) % 4]);
        let n = ((c - a).norm() / step).ceil() as usize;
        pts.extend((0..n).map(|i| a.lerp(c, i as f64 / n as f64)));
    }
    pts
}

fn monte_carlo_overlap(a: &OrientedBox, b: &OrientedBox, rng: &mut ChaCha8Rng) -> bool {
    let interior = |x: &OrientedBox, rng: &mut ChaCha8Rng| {
        let (s, c) = x.yaw.sin_cos();
        let u = rng.random_range(-x.half_length..=x.half_length);
        let v = rng.random_range(-x.half_width..=x.half_width);
        x.center + Vec2::new(u * c - v * s, u * s + v * c)
    };
    for _ in 0..2000 {
        if inside(b, interior(a, rng)) || inside(a, interior(b, rng)) {
            return true;
        }
    }
    boundary_samples(a, 1e-4).into_iter().any(|p| inside(b, p))
        || boundary_samples(b, 1e-4).into_iter().any(|p| inside(a, p))
}

#[test]
fn geometry_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random_box = |rng: &mut ChaCha8Rng| {
        OrientedBox::new(
            Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.random_range(0.02..0.3),
            rng.random_range(0.02..0.15),
        )
    };
    let (mut pairs, mut agree, mut overlapping) = (0, 0, 0);
    while pairs < 500 {
        let a = random_box(&mut rng);
        let b = random_box(&mut rng);
        let sep = signed_separation(&a, &b);
        if sep.abs() <= 1e-3 {
            continue;
        }
        pairs += 1;
        let mc = monte_carlo_overlap(&a, &b, &mut rng);
        overlapping += mc as usize;
        agree += ((sep < 0.0) == mc) as usize;
    }
    let elapsed = started.elapsed();
    verdict(
        "geometry_oracle",
        agree == pairs && elapsed < Duration::from_secs(30),
        format!("{agree}/{pairs} agree ({overlapping} overlapping), {elapsed:.2?}"),
    );
}

// ------------------------------------------------------------------ dynamics

/// Algebraic least-squares circle fit; returns (center, radius).
fn fit_circle(points: &[Vec2]) -> (Vec2, f64) {
    // x^2 + y^2 + D x + E y + F = 0, normal equations solved by Cramer's rule
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for p in points {
        let row = [p.x, p.y, 1.0];
        let rhs = -(p.x * p.x + p.y * p.y);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            r[i] += row[i] * rhs;
        }
    }
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d0 = det(m);
    let solve = |k: usize| {
        let mut a = m;
        for i in 0..3 {
            a[i][k] = r[i];
        }
        det(a) / d0
    };
    let (d, e, f) = (solve(0), solve(1), solve(2));
    let center = Vec2::new(-d / 2.0, -e / 2.0);
    (
        center,
        (center.x * center.x + center.y * center.y - f).sqrt(),
    )
}

#[test]
fn dynamics_turning_radius_and_heading_drift() {
    let params = VehicleParams::default();
    let sigma = 31.0 * std::f64::consts::PI / 180.0;
    let dt = 0.01;
    let cmd = ActionCmd::new(0.5, sigma);
    let beta = slip_angle(sigma, &params);
    let mut s = SigmaState::new(Vec2::ZERO, 0.0, Vec2::from_angle(beta) * 0.5, sigma);
    let mut rear = Vec::new();
    let mut cg = Vec::new();
    for _ in 0..2000 {
        s = step_bicycle(&s, &cmd, dt, &params);
        rear.push(s.position - Vec2::from_angle(s.yaw) * params.rear_wheelbase);
        cg.push(s.position);
    }
    let expected = params.wheelbase / sigma.tan();
    let (_, r_rear) = fit_circle(&rear);
    let (_, r_cg) = fit_circle(&cg);
    let rel = (r_rear - expected).abs() / expected;

    let mut s = SigmaState::new(Vec2::ZERO, 0.7, Vec2::from_angle(0.7) * 0.5, 0.0);
    for _ in 0..10_000 {
        s = step_bicycle(&s, &ActionCmd::new(0.5, 0.0), dt, &params);
    }
    let drift = (s.yaw - 0.7).abs();
    verdict(
        "dynamics",
        rel < 0.02 && drift < 1e-9,
        format!(
            "rear-axle radius {r_rear:.5} vs l_wb/tan(sigma) {expected:.5} ({:.3}%), CG radius {r_cg:.5}, heading drift {drift:e}",
            rel * 100.0
        ),
    );
}

// ------------------------------------------------------------------- planner

/// Holds one random action for the whole control horizon.
struct Fixed([f64; 2]);

impl Policy for Fixed {
    fn act(&self, _: &mut PolicyInput<'_>) -> tickbench_core::Result<[f64; 2]> {
        Ok(self.0)
    }
}

#[test]
fn planner_contract() {
    let map = MapModel::bundled_loop_intersection();
    let rp = &map.reference_paths()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut violations = Vec::new();
    for case in 0..1000 {
        let h_p = rng.random_range(2..=12);
        let h_c = rng.random_range(1..h_p);
        let cfg = RunConfig {
            h_c,
            h_p,
            ..RunConfig::default()
        };
        let params = cfg.vehicle;
        let n = rng.random_range(1..=4);
        let states: Vec<SigmaState> = (0..n)
            .map(|_| {
                let s = rng.random_range(0.0..rp.polyline.length());
                let yaw = rp.polyline.heading_at(s) + rng.random_range(-0.5..0.5);
                let steer = rng.random_range(-params.max_steering..params.max_steering);
                let speed = rng.random_range(0.0..params.max_speed);
                let st = CpmState::new(
                    rp.polyline.point_at(s),
                    yaw,
                    speed,
                    steer / params.max_steering,
                );
                map_cpm_to_sigma(&st, &params)
            })
            .collect();
        let req = PlanRequest {
            ego_index: rng.random_range(0..n),
            states: &states,
            map: &map,
            reference_path: rp,
            cfg: &cfg,
            t0: 0.0,
        };
        let mut policy_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let traj = if case % 2 == 0 {
            generate_trajectory(&RandomPolicy, &req, &mut policy_rng)
        } else {
            let fixed = Fixed([rng.random_range(-0.99..0.99), rng.random_range(-0.99..0.99)]);
            generate_trajectory(&fixed, &req, &mut policy_rng)
        }
        .unwrap();
        let a = &traj.actions;
        let mut ok = a.len() == h_p && traj.states.len() == h_p + 1;
        ok &= (h_c..h_p).all(|j| a[j].speed == a[h_c - 1].speed);
        ok &= (h_c..h_p).all(|j| a[j].steering.abs() <= a[j - 1].steering.abs());
        ok &= a[h_p - 1].steering == 0.0;
        ok &= (0..h_p).all(|j| {
            step_bicycle_substeps(
                &traj.states[j],
                &a[j],
                cfg.dt,
                &params,
                cfg.integrator_substeps,
            ) == traj.states[j + 1]
        });
        if !ok {
            violations.push(case);
        }
    }
    verdict(
        "planner_contract",
        violations.is_empty(),
        format!("1000 cases, violations at {violations:?}"),
    );
}

// ------------------------------------------------------------- state mapping

#[test]
fn state_mapping_round_trip() {
    let params = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = CpmState::new(
            Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.random_range(0.0..1.0),
            rng.random_range(-1.0..=1.0),
        );
        let back = map_sigma_to_cpm(&map_cpm_to_sigma(&s, &params), &params);
        let err = [
            back.position.x - s.position.x,
            back.position.y - s.position.y,
            back.yaw - s.yaw,
            back.speed - s.speed,
            back.steering_normalized - s.steering_normalized,
        ]
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
        worst = worst.max(err);
    }
    verdict(
        "state_mapping_round_trip",
        worst <= 1e-12,
        format!("max error {worst:e} over 1000 states"),
    );
}

#[test]
fn state_mapping_slip_angle_value() {
    let params = VehicleParams::default();
    let beta = slip_angle(params.max_steering, &params);
    // independent evaluation of atan(l_r / l_wb * tan 31deg) with l_r / l_wb = 1/2
    let derived = (0.5 * 31f64.to_radians().tan()).atan();
    assert!((derived - 0.291_851_5).abs() < 1e-7);
    assert!((beta - derived).abs() < 1e-12, "{beta} vs {derived}");
    known_failure(
        "state_mapping_slip_angle_value",
        (beta - 0.2915).abs() <= 1e-4,
        format!(
            "beta(31 deg) = {beta:.7} rad, reference 0.2915 +- 1e-4, off by {:.2e}; \
             the reference is inconsistent with the slip-angle formula",
            (beta - 0.2915).abs()
        ),
    );
}

// ---------------------------------------------------------------- end to end

fn desk_matrix(map: &MapModel, envs: &[(&str, ExecutionMode)]) -> BenchMatrix {
    let mut m = BenchMatrix::desk_default(map).unwrap();
    m.environments = envs
        .iter()
        .map(|&(name, mode)| Environment {
            name: name.into(),
            mode,
            disturbance: DisturbanceProfile::preset(name).unwrap(),
        })
        .collect();
    m
}

fn column(
    run: &tickbench_core::bench::BenchRun,
    env: usize,
    f: fn(&tickbench_core::RunMetrics) -> f64,
) -> AggregateStats {
    let values: Vec<f64> = run.results.environments[env]
        .successful()
        .map(|(_, m)| f(m))
        .collect();
    aggregate(&values).unwrap()
}

#[test]
fn end_to_end_desk_benchmark() {
    let map = MapModel::bundled_loop_intersection();
    let matrix = desk_matrix(&map, &[("sim", ExecutionMode::Direct)]);
    let started = Instant::now();
    let run = run_matrix(&matrix, &map).unwrap();
    let elapsed = started.elapsed();
    let env = &run.results.environments[0];
    let failed = env.failed().count();
    let n = env.successful().count();
    let cra_a = column(&run, 0, |m| m.cra_a);
    let cra_l = column(&run, 0, |m| m.cra_l);
    let cd = column(&run, 0, |m| m.cd);
    let avg = column(&run, 0, |m| m.avg_speed);
    let max_cra_a = env.successful().map(|(_, m)| m.cra_a).fold(0.0, f64::max);
    let pass = n == 27
        && failed == 0
        && max_cra_a == 0.0
        && cra_l.mean < 5.0
        && cd.mean < 0.05
        && (avg.mean - 0.75).abs() / 0.75 <= 0.05
        && elapsed < Duration::from_secs(60);
    verdict(
        "end_to_end_desk_benchmark",
        pass,
        format!(
            "{n} runs ({failed} failed) in {elapsed:.2?}: CRA-A {} | CRA-L {} | CD {} | AS {}",
            format_cell(&cra_a, 2),
            format_cell(&cra_l, 2),
            format_cell(&cd, 3),
            format_cell(&avg, 3)
        ),
    );
}

#[test]
fn realism_tier_direction() {
    let map = MapModel::bundled_loop_intersection();
    let matrix = desk_matrix(
        &map,
        &[
            ("sim", ExecutionMode::Direct),
            ("lab", ExecutionMode::Follow),
        ],
    );
    let run = run_matrix(&matrix, &map).unwrap();
    let (cd_sim, cd_lab) = (column(&run, 0, |m| m.cd), column(&run, 1, |m| m.cd));
    let (l_sim, l_lab) = (column(&run, 0, |m| m.cra_l), column(&run, 1, |m| m.cra_l));
    verdict(
        "realism_tier_direction",
        cd_lab.mean >= cd_sim.mean && l_lab.mean >= l_sim.mean,
        format!(
            "CD sim {:.4} -> lab {:.4}; CRA-L sim {:.3} -> lab {:.3}",
            cd_sim.mean, cd_lab.mean, l_sim.mean, l_lab.mean
        ),
    );
}

// ---------------------------------------------------------------- determinism

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn determinism_byte_identical_results() {
    let map = MapModel::bundled_loop_intersection();
    let matrix = BenchMatrix::desk_default(&map).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let run = run_matrix(&matrix, &map).unwrap();
        write_results(d.path(), &matrix, &run).unwrap();
    }
    let (a, b) = (snapshot(dirs[0].path()), snapshot(dirs[1].path()));
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    verdict(
        "determinism_byte_identical_results",
        a.len() == b.len() && differing.is_empty() && a.len() > 2,
        format!("{} files, {} differ", a.len(), differing.len()),
    );
}

// ---------------------------------------------------------------- aggregation

#[test]
fn aggregation_formatting_and_iqm() {
    let cell = format_cell(
        &AggregateStats {
            mean: 0.37,
            std: 1.33,
            iqm: 0.47,
            n: 27,
        },
        2,
    );
    let iqm = aggregate(&[1., 2., 3., 4., 5., 6., 7., 8.]).unwrap().iqm;
    // report numbers equal aggregates recomputed from raw per-run metrics
    let map = MapModel::bundled_loop_intersection();
    let mut m = desk_matrix(&map, &[("sim", ExecutionMode::Direct)]);
    m.config.steps = 30;
    let run = run_matrix(&m, &map).unwrap();
    let report = build_report(&run.results).unwrap();
    let recomputed = column(&run, 0, |m| m.cd);
    verdict(
        "aggregation_formatting_and_iqm",
        cell == "0.37 ± 1.33 (0.47)" && iqm == 4.5 && report.rows[0].cd == Some(recomputed),
        format!("cell {cell:?}, IQM([1..8]) = {iqm}"),
    );
}
