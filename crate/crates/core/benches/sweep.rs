//! Parallel against single-worker execution of the two hot loops: an indicator
//! series (parallel over h) and a probe sweep (parallel over probes).
//!
//! `cargo bench --no-default-features` runs the same groups on the sequential build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use slabprobe::geometry::{CavityShape, MeshOptions, SlabGeometry};
use slabprobe::indicator::{compute_series, BisectionOptions, IndicatorOptions, Probe};
use slabprobe::probe::{DataMode, GammaField, HGrid};
use slabprobe::reconstruct::{sweep, ProbeSet};
use slabprobe::{par, Scene};

fn scene(probes: &ProbeSet) -> Scene {
    let slab = SlabGeometry::new(0.0, 1.0, 2.5).unwrap();
    let cavity = CavityShape::Disc { center: [0.0, 0.5], radius: 0.2 };
    let mesh = MeshOptions {
        target_edge: 0.08,
        grading: 0.03,
        min_edge: 0.003,
        grading_centers: probes.points(),
        ..MeshOptions::default()
    };
    Scene::build(slab, Some(cavity), GammaField::default(), &mesh).unwrap()
}

fn workers() -> Vec<(&'static str, usize)> {
    vec![("single", 1), ("pool", 0)]
}

fn bench_series(c: &mut Criterion) {
    let probes = ProbeSet::explicit(&[[0.0, 1.2]]);
    let scene = scene(&probes);
    let grid = HGrid::range(2, 0.5, 2, 9).unwrap();
    let opts = IndicatorOptions::default();
    let probe = Probe::new(0, [0.0, 1.2]);
    let mut g = c.benchmark_group("indicator_series");
    g.sample_size(10);
    for (name, w) in workers() {
        g.bench_function(BenchmarkId::new(name, par::is_parallel()), |b| {
            b.iter(|| par::with_workers(w, || compute_series(&scene, &probe, 0.5, &grid, DataMode::Localized, &opts)))
        });
    }
    g.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let probes = ProbeSet::line([-0.2, 1.2], [0.2, 1.2], 3).unwrap();
    let scene = scene(&probes);
    let grid = HGrid::range(2, 0.5, 2, 9).unwrap();
    let bis = BisectionOptions { tol: 0.02, ..BisectionOptions::default() };
    let opts = IndicatorOptions::default();
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for (name, w) in workers() {
        g.bench_function(BenchmarkId::new(name, par::is_parallel()), |b| {
            b.iter(|| par::with_workers(w, || sweep(&scene, &probes, &grid, &bis, &opts)))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_series, bench_sweep);
criterion_main!(benches);
