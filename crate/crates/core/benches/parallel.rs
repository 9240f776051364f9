//! Data-parallel workloads, benched under whichever feature set the build
//! was given.  Criterion keys its saved baseline by benchmark id, so
//!
//! ```text
//! cargo bench -p wavelab                          # rayon path (default)
//! cargo bench -p wavelab --no-default-features    # sequential fallback
//! ```
//!
//! prints the second run's slowdown/speedup against the first directly.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use wavelab::functionals::{hardy_sobolev_max_ratio, monotonicity_report};
use wavelab::model::EquationSpec;
use wavelab::radial_solver::{blowup_graph, evolve, RadialGrid, RadialState, SolveControls};
use wavelab::similarity::{evolve_w, WControls};
use wavelab::solitons::{decompose, synthetic_decomposition_frame};
use wavelab::ygrid::YGrid;

fn bench_blowup_graph(c: &mut Criterion) {
    let spec = EquationSpec::pure_power(3.0, 1).unwrap();
    let grid = RadialGrid::new(0.0, 4.0, 201, 1).unwrap();
    let init = RadialState::new(vec![1.0; grid.n], vec![0.0; grid.n]);
    let controls = SolveControls {
        blowup_threshold: 1e4,
        target_slices: 400,
        ..Default::default()
    };
    let traj = evolve(&spec, &grid, &init, &controls).unwrap();
    let mut group = c.benchmark_group("blowup_graph");
    group.sample_size(20);
    group.bench_function("radii_201", |b| b.iter(|| blowup_graph(&traj, 50.0)));
    group.finish();
}

fn bench_hardy_sobolev(c: &mut Criterion) {
    let grid = YGrid::clustered(401, 1e-3).unwrap();
    let mut group = c.benchmark_group("hardy_sobolev");
    group.sample_size(20);
    group.bench_function("n401_draws200", |b| {
        b.iter(|| hardy_sobolev_max_ratio(&grid, 3.0, 200, 7))
    });
    group.finish();
}

fn bench_decompose(c: &mut Criterion) {
    let grid = Arc::new(YGrid::clustered(513, 1e-4).unwrap());
    let frame = synthetic_decomposition_frame(grid, 3.0, 1, &[-2.5, 0.0, 2.5], 3.0);
    let mut group = c.benchmark_group("decompose");
    group.sample_size(10);
    group.bench_function("k3_n513", |b| b.iter(|| decompose(&frame, 3.0, 4)));
    group.finish();
}

fn bench_monotonicity(c: &mut Criterion) {
    let spec = EquationSpec::pure_power(3.0, 1).unwrap();
    let grid = Arc::new(YGrid::clustered(129, 1e-3).unwrap());
    let w0: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&y| 0.3 * (std::f64::consts::FRAC_PI_2 * y).cos())
        .collect();
    let ws0 = vec![0.0; grid.n()];
    let wt = evolve_w(&spec, grid, 2.0, 1.0, &w0, &ws0, 0.0, 2.0, &WControls::default())
        .unwrap();
    let mut group = c.benchmark_group("monotonicity");
    group.sample_size(20);
    group.bench_function("slab_frames", |b| b.iter(|| monotonicity_report(&wt, None)));
    group.finish();
}

criterion_group!(
    benches,
    bench_blowup_graph,
    bench_hardy_sobolev,
    bench_decompose,
    bench_monotonicity
);
criterion_main!(benches);
