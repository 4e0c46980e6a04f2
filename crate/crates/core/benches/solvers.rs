use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use janus_core::integrate::simulate;
use janus_core::synth::reference_schedule;
use janus_core::{
    presets, ControlSchedule, Execution, Method, NoiseConfig, ParticleParams, ParticleSetup, SolverConfig,
};
use nalgebra::Vector2;
use std::hint::black_box;

fn swarm(n: usize, schedule: &ControlSchedule) -> Vec<ParticleSetup> {
    (0..n)
        .map(|i| {
            let f = presets::F_OVER_M[i % 3];
            let phi = presets::PHI[i % 3];
            let p = ParticleParams::from_f_over_m(format!("p{i}"), presets::MASS, presets::RADIUS, f, phi).unwrap();
            let x = (i as f64 * 7.0) % 100.0 - 50.0;
            ParticleSetup::at_rest(p, Vector2::new(x, 0.0) * 1e-6, schedule)
        })
        .collect()
}

fn config(method: Method, execution: Execution) -> SolverConfig {
    SolverConfig {
        method,
        execution,
        noise: NoiseConfig {
            enabled: true,
            seed: 1,
            ..NoiseConfig::default()
        },
        ..SolverConfig::default()
    }
}

fn execution(c: &mut Criterion) {
    let schedule = reference_schedule();
    let fluid = presets::fluid();
    let mut group = c.benchmark_group("reduced_execution");
    for n in [16usize, 256, 2048] {
        let particles = swarm(n, &schedule);
        for exec in [Execution::Sequential, Execution::Parallel] {
            let cfg = config(Method::ReducedEuler, exec);
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), n), &particles, |b, ps| {
                b.iter(|| simulate(black_box(ps), &fluid, &schedule, &cfg).unwrap())
            });
        }
    }
    group.finish();

    let mut group = c.benchmark_group("full_execution");
    group.sample_size(10);
    let particles = swarm(16, &schedule);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = config(Method::FullStiff, exec);
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| simulate(black_box(&particles), &fluid, &schedule, &cfg).unwrap())
        });
    }
    group.finish();
}

fn models(c: &mut Criterion) {
    let schedule = reference_schedule();
    let fluid = presets::fluid();
    let particles = swarm(3, &schedule);
    let mut group = c.benchmark_group("model");
    group.sample_size(20);
    for method in [Method::ReducedEuler, Method::FullStiff] {
        let cfg = SolverConfig {
            noise: NoiseConfig::default(),
            ..config(method, Execution::Sequential)
        };
        group.bench_function(format!("{method:?}"), |b| {
            b.iter(|| simulate(black_box(&particles), &fluid, &schedule, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, execution, models);
criterion_main!(benches);
