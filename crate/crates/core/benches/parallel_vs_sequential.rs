//! Parallel-vs-sequential comparison for the two data-parallel hot loops:
//! band structures over a k-grid and kernel decay tables over separations.
//!
//! With the default `parallel` feature the library maps over the ambient
//! rayon pool; the "sequential" groups below run the same code inside a
//! one-thread pool, so one binary measures both configurations. Building
//! with `--no-default-features` removes rayon entirely and the two groups
//! coincide.

use criterion::{criterion_group, criterion_main, Criterion};
use std::time::Duration;

use antidot_core::kernel::decay_report;
use antidot_core::model::{Dispersion, Params, Potential};
use antidot_core::spectrum::band_structure;

fn one_thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool")
}

fn bench_band_structure(c: &mut Criterion) {
    let disp = Dispersion::dirac();
    let pot = Potential::square(1.0, [0.0, 0.0, 1.0]).unwrap();
    let params = Params::new(0.1, 0.2).unwrap();
    let mut group = c.benchmark_group("band_structure_n4_k8");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    group.bench_function("parallel", |b| {
        b.iter(|| band_structure(&disp, &pot, &params, 4, 8).unwrap())
    });
    let pool = one_thread_pool();
    group.bench_function("sequential", |b| {
        b.iter(|| pool.install(|| band_structure(&disp, &pot, &params, 4, 8).unwrap()))
    });
    group.finish();
}

fn bench_kernel_decay(c: &mut Criterion) {
    let disp = Dispersion::dirac();
    let radii = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 4.0];
    let mut group = c.benchmark_group("kernel_decay_7_radii");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    group.bench_function("parallel", |b| {
        b.iter(|| decay_report(&disp, &radii, 1e-3).unwrap())
    });
    let pool = one_thread_pool();
    group.bench_function("sequential", |b| {
        b.iter(|| pool.install(|| decay_report(&disp, &radii, 1e-3).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_band_structure, bench_kernel_decay);
criterion_main!(benches);
