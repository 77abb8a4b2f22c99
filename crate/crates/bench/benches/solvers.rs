use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stackseek_core::scenarios::{build_energy_community, build_monotone_testbed, EnergyConfig, TestbedConfig};
use stackseek_core::vi::{project_polyhedron, PolyhedralProjector};
use stackseek_core::{seek, solve_regularized, DVector, ScheduleParams, SeekOptions, ViSolveParams};

fn projection(c: &mut Criterion) {
    let e = build_energy_community(EnergyConfig::default()).unwrap();
    let region = e.problem().game().region();
    let z = DVector::from_fn(region.dim(), |i, _| ((i * 7919) % 13) as f64 * 0.3 - 1.5);

    c.bench_function("project_energy_cold", |b| {
        b.iter(|| project_polyhedron(black_box(&z), region, 1e-10).unwrap())
    });
    c.bench_function("project_energy_warm", |b| {
        let mut proj = PolyhedralProjector::new(region);
        proj.project(&z, 1e-10).unwrap();
        let nudged = z.map(|v| v + 1e-3);
        b.iter(|| proj.project(black_box(&nudged), 1e-10).unwrap())
    });
}

fn regularized_solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_regularized");
    let t = build_monotone_testbed(TestbedConfig {
        pairs: 8,
        y0: vec![1.0],
        ..Default::default()
    })
    .unwrap();
    let p = t.problem();
    for beta in [1e-1, 1e-2] {
        group.bench_with_input(BenchmarkId::new("testbed_8_pairs", beta), &beta, |b, &beta| {
            b.iter(|| solve_regularized(p.game(), p.phi(), beta, p.y0(), &ViSolveParams::default()).unwrap())
        });
    }

    let e = build_energy_community(EnergyConfig::default()).unwrap();
    let p = e.problem();
    let params = ViSolveParams::default().with_tol(1e-6);
    group.sample_size(10);
    group.bench_function("energy_default", |b| {
        b.iter(|| solve_regularized(p.game(), p.phi(), 0.1, p.y0(), &params).unwrap())
    });
    group.finish();
}

fn short_seek(c: &mut Criterion) {
    let t = build_monotone_testbed(TestbedConfig::default()).unwrap();
    let p = t.problem();
    let params = ScheduleParams::new(1.0 / 6.0, 0.5, 1.0, 1.0, 1).unwrap();
    let opts = SeekOptions::default();
    c.bench_function("seek_testbed_100", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            seek(p, &params, 100, &mut rng, &opts).unwrap()
        })
    });
}

criterion_group!(benches, projection, regularized_solves, short_seek);
criterion_main!(benches);
