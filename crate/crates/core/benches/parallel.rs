//! Data-parallel vs sequential fan-out of independent trajectories.
//! Build with `--no-default-features` to make `par::map` itself sequential.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pullback_core::attractor::initial_samples;
use pullback_core::driving::{BasePoint, Driver, Term};
use pullback_core::dynamics::{evolve, ProblemSpec};
use pullback_core::par;

fn fan_out(c: &mut Criterion) {
    let d = Driver::trig_poly(vec![Term::new(0.5, 1.0, 0.0), Term::new(0.5, 2f64.sqrt(), 0.0)]);
    let spec = ProblemSpec::desk(d).unwrap();
    let samples = initial_samples(&spec.basis, 4.0, 16, 11);
    let run = |z: &pullback_core::spatial::State| evolve(&spec, BasePoint::new(0.0), z, 5.0).unwrap();

    let mut group = c.benchmark_group("evolve_16x5");
    group.sample_size(10);
    group.bench_function(if par::is_parallel() { "rayon" } else { "map_fallback" }, |b| {
        b.iter(|| black_box(par::map(&samples, run)))
    });
    group.bench_function("sequential", |b| b.iter(|| black_box(par::map_seq(&samples, run))));
    group.finish();
}

criterion_group!(benches, fan_out);
criterion_main!(benches);
