use janus_core::dynamics::{derived_constants, FullModel};
use janus_core::estimate::rmse;
use janus_core::integrate::{
    advance_full, bench_compare, simulate, simulate_full_with_stats, stiff::Rosenbrock23, stiff::Tolerances,
};
use janus_core::magnetics::FieldCommand;
use janus_core::synth::reference_scenario;
use janus_core::{
    presets, ControlSchedule, Execution, Method, ParticleParams, ParticleSetup, ParticleState, PhysicalConstants,
    SolverConfig,
};
use nalgebra::Vector2;

fn quiet() -> SolverConfig {
    SolverConfig {
        execution: Execution::Sequential,
        ..SolverConfig::default()
    }
}

fn particle(f_over_m: f64, phi: f64) -> ParticleParams {
    ParticleParams::from_f_over_m("p", presets::MASS, presets::RADIUS, f_over_m, phi).unwrap()
}

#[test]
fn full_model_reaches_95_percent_in_three_tau() {
    let fluid = presets::fluid();
    let p = particle(1.0, 0.3);
    let dc = derived_constants(&p, &fluid, &PhysicalConstants::default()).unwrap();
    let model = FullModel::new(&p, &fluid).unwrap();
    let schedule = ControlSchedule::constant(FieldCommand::new(0.0, 1e-3).unwrap(), 1e-3).unwrap();
    let solver = Rosenbrock23::new(Tolerances { rel: 1e-8, abs: 1e-14 }).unwrap();
    let y0 = FullModel::pack(&ParticleState::at_rest(Vector2::zeros(), 0.3));

    let times: Vec<f64> = (1..=400).map(|k| k as f64 * 0.05e-6).collect();
    let (_, outs, _) = advance_full(&model, &schedule, &solver, 0.0, y0, 20e-6, &times).unwrap();
    let hit = times
        .iter()
        .zip(&outs)
        .find(|(_, y)| Vector2::new(y[2], y[3]).norm() >= 0.95 * dc.v_ss)
        .map(|(t, _)| *t)
        .unwrap();
    assert!((hit - 11.16e-6).abs() <= 0.05 * 11.16e-6, "95% reached at {hit:e}");
}

#[test]
fn full_model_settles_at_equilibrium() {
    let fluid = presets::fluid();
    let p = particle(1.18, 2.64);
    let dc = derived_constants(&p, &fluid, &PhysicalConstants::default()).unwrap();
    let field = FieldCommand::new(0.7, 1e-3).unwrap();
    let schedule = ControlSchedule::constant(field, 0.5).unwrap();
    let setup = ParticleSetup::at_rest(p, Vector2::zeros(), &schedule);
    let (traj, _) =
        simulate_full_with_stats(&setup, &fluid, &schedule, &quiet().with_method(Method::FullStiff)).unwrap();
    let a = traj.position_at(0.4).unwrap();
    let b = traj.position_at(0.5).unwrap();
    let v = (b - a) / 0.1;
    assert!((v.norm() - dc.v_ss).abs() < 1e-4 * dc.v_ss);
    let heading = v.y.atan2(v.x);
    assert!((heading - (0.7 + 2.64)).abs() < 1e-4 || (heading - (0.7 + 2.64 - std::f64::consts::TAU)).abs() < 1e-4);
}

#[test]
fn tightening_tolerance_converges() {
    let sc = reference_scenario(0).unwrap();
    let run = |rel: f64, abs: f64| {
        let cfg = SolverConfig {
            rel_tol: rel,
            abs_tol: abs,
            ..quiet()
        }
        .with_method(Method::FullStiff);
        simulate_full_with_stats(&sc.particles[0], &sc.fluid, &sc.schedule, &cfg)
            .unwrap()
            .0
    };
    let reference = run(1e-9, 1e-12);
    let coarse = rmse(&run(1e-4, 1e-8), &reference).unwrap();
    let fine = rmse(&run(1e-7, 1e-11), &reference).unwrap();
    assert!(fine <= coarse, "fine {fine:e} coarse {coarse:e}");
    assert!(fine < 1e-9, "fine {fine:e}");
}

#[test]
fn reduced_straight_line_distance() {
    let fluid = presets::fluid();
    let schedule = ControlSchedule::constant(FieldCommand::new(0.0, 1e-3).unwrap(), 10.0).unwrap();
    let setup = ParticleSetup::at_rest(particle(1.0, 0.0), Vector2::zeros(), &schedule);
    let traj = simulate(&[setup], &fluid, &schedule, &quiet()).unwrap().remove(0);
    let end = traj.last().unwrap().position;
    assert!((end.x - 37.15e-6).abs() < 0.01e-6, "{}", end.x);
    assert!(end.y.abs() < 1e-18);
}

#[test]
fn zero_duration_returns_initial_state() {
    let fluid = presets::fluid();
    let schedule = ControlSchedule::constant(FieldCommand::new(0.0, 1e-3).unwrap(), 0.0).unwrap();
    let setup = ParticleSetup::at_rest(particle(1.0, 0.0), Vector2::new(1e-6, 2e-6), &schedule);
    for m in [Method::ReducedEuler, Method::FullStiff] {
        let t = simulate(std::slice::from_ref(&setup), &fluid, &schedule, &quiet().with_method(m))
            .unwrap()
            .remove(0);
        assert_eq!(t.len(), 1);
        assert_eq!(t.samples[0].position, Vector2::new(1e-6, 2e-6));
    }
}

#[test]
fn reduced_and_full_agree_on_reference_scenario() {
    let sc = reference_scenario(0).unwrap();
    let rep = bench_compare(&sc.particles, &sc.fluid, &sc.schedule, 1, &quiet()).unwrap();
    assert_eq!(rep.rmse_per_particle.len(), 3);
    assert!(rep.rmse_between < 0.1e-6, "{:?}", rep.rmse_per_particle);
    assert!(rep.runtime_reduced <= rep.runtime_full);
}

#[test]
fn seeded_runs_are_deterministic_and_parallel_matches_sequential() {
    let sc = reference_scenario(11).unwrap();
    for m in [Method::ReducedEuler, Method::FullStiff] {
        let seq = SolverConfig {
            execution: Execution::Sequential,
            ..sc.solver
        }
        .with_method(m);
        let par = SolverConfig {
            execution: Execution::Parallel,
            ..sc.solver
        }
        .with_method(m);
        let a = simulate(&sc.particles, &sc.fluid, &sc.schedule, &seq).unwrap();
        let b = simulate(&sc.particles, &sc.fluid, &sc.schedule, &seq).unwrap();
        let c = simulate(&sc.particles, &sc.fluid, &sc.schedule, &par).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}

#[test]
fn noise_stream_does_not_depend_on_particle_order() {
    let sc = reference_scenario(5).unwrap();
    let a = simulate(&sc.particles, &sc.fluid, &sc.schedule, &sc.solver).unwrap();
    let mut rev = sc.particles.clone();
    rev.reverse();
    let b = simulate(&rev, &sc.fluid, &sc.schedule, &sc.solver).unwrap();
    assert_eq!(a[0], b[2]);
}
