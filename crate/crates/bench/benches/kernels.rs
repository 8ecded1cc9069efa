use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tickbench_core::dynamics::step_bicycle;
use tickbench_core::executor::{resolve_placements, stream, StreamPurpose};
use tickbench_core::geometry::{lane_violation_depth, signed_separation, OrientedBox};
use tickbench_core::planner::PlanRequest;
use tickbench_core::{
    generate_trajectory, run_episode, ActionCmd, InProcessPlanner, MapModel, PurePursuitPolicy,
    RunConfig, SigmaState, Vec2,
};

fn geometry(c: &mut Criterion) {
    let a = OrientedBox::new(Vec2::new(0.0, 0.0), 0.3, 0.11, 0.0535);
    let b = OrientedBox::new(Vec2::new(0.15, 0.08), -0.9, 0.11, 0.0535);
    c.bench_function("signed_separation", |bench| {
        bench.iter(|| signed_separation(black_box(&a), black_box(&b)))
    });

    let map = MapModel::bundled_loop_intersection();
    let line = &map.reference_paths()[0].polyline;
    let p = line.point_at(1.0) + Vec2::new(0.0, 0.12);
    let fp = OrientedBox::new(p, line.heading_at(1.0) + 0.4, 0.11, 0.0535);
    c.bench_function("lane_violation_depth", |bench| {
        bench.iter(|| lane_violation_depth(black_box(&fp), map.drivable_area()))
    });
}

fn dynamics(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let s = SigmaState::new(Vec2::new(0.0, 0.0), 0.2, Vec2::new(0.7, 0.1), 0.1);
    let cmd = ActionCmd {
        speed: 0.75,
        steering: 0.3,
    };
    c.bench_function("step_bicycle", |bench| {
        bench.iter(|| step_bicycle(black_box(&s), black_box(&cmd), cfg.dt, &cfg.vehicle))
    });
}

fn planning(c: &mut Criterion) {
    let map = MapModel::bundled_loop_intersection();
    let cfg = RunConfig::default();
    let (states, names) = resolve_placements(&cfg, &map).unwrap();
    let path = map.reference_path(&names[0]).unwrap();
    let policy = PurePursuitPolicy::default();
    let req = PlanRequest {
        ego_index: 0,
        states: &states,
        map: &map,
        reference_path: path,
        cfg: &cfg,
        t0: 0.0,
    };
    c.bench_function("generate_trajectory", |bench| {
        let mut rng = stream(0, StreamPurpose::Policy, 0);
        bench.iter(|| generate_trajectory(&policy, black_box(&req), &mut rng).unwrap())
    });

    let mut group = c.benchmark_group("episode");
    group.sample_size(10);
    group.bench_function("run_episode_180_steps", |bench| {
        bench.iter(|| {
            let mut planner = InProcessPlanner::new(&policy);
            run_episode(&cfg, &map, &mut planner).unwrap()
        })
    });
    group.finish();
}

criterion_group!(kernels, geometry, dynamics, planning);
criterion_main!(kernels);
