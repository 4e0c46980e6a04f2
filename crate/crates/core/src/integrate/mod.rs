//! Time integration of both particle models over a control schedule, and the
//! cost/accuracy comparison between them.

pub mod stiff;

use std::time::Instant;

use nalgebra::{Matrix6, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    aligned_heading, brownian_increment, derived_constants, reduced_velocity, DerivedConstants, FullModel, FullState,
};
use crate::error::{Error, Result};
use crate::estimate::rmse;
use crate::magnetics::FieldCommand;
use crate::parallel::{self, Execution};
use crate::params::{wrap_angle, FluidParams, ParticleParams, ParticleState, PhysicalConstants};
use crate::rng::{particle_stream, Stream};
use crate::schedule::ControlSchedule;
use crate::trajectory::{Sample, Trajectory};
use stiff::{Rosenbrock23, StepStats, StiffSystem, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FullStiff,
    ReducedEuler,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_stiff" | "full" => Ok(Method::FullStiff),
            "reduced_euler" | "reduced" => Ok(Method::ReducedEuler),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Brownian noise settings. Diffusion coefficients default to
/// Stokes-Einstein at `temperature`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub seed: u64,
    pub temperature: f64,
    pub d_t: Option<f64>,
    pub d_r: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            seed: 0,
            temperature: crate::params::DEFAULT_TEMPERATURE,
            d_t: None,
            d_r: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Reduced-model step, s.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Sampling interval of the returned trajectories (and the
    /// Euler-Maruyama noise step), s.
    pub output_dt: f64,
    pub noise: NoiseConfig,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::ReducedEuler,
            dt: 0.02,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            output_dt: 0.02,
            noise: NoiseConfig::default(),
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("dt", self.dt)?;
        pos("rel_tol", self.rel_tol)?;
        pos("abs_tol", self.abs_tol)?;
        pos("output_dt", self.output_dt)?;
        pos("temperature", self.noise.temperature)?;
        for (name, d) in [("d_t", self.noise.d_t), ("d_r", self.noise.d_r)] {
            if let Some(d) = d {
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::Config(format!("{name} must be >= 0, got {d}")));
                }
            }
        }
        Ok(())
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
        }
    }

    /// Derived constants with the noise configuration's diffusion overrides.
    pub fn constants_for(&self, params: &ParticleParams, fluid: &FluidParams) -> Result<DerivedConstants> {
        let consts = PhysicalConstants::at_temperature(self.noise.temperature)?;
        let mut dc = derived_constants(params, fluid, &consts)?;
        if let Some(d) = self.noise.d_t {
            dc.d_t = d;
        }
        if let Some(d) = self.noise.d_r {
            dc.d_r = d;
        }
        Ok(dc)
    }
}

/// A particle and where it starts. `initial.time` is the start time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSetup {
    pub params: ParticleParams,
    pub initial: ParticleState,
}

impl ParticleSetup {
    /// At rest at `position` (m), field-aligned under the schedule's first
    /// command.
    pub fn at_rest(params: ParticleParams, position: Vector2<f64>, schedule: &ControlSchedule) -> Self {
        let heading = aligned_heading(&params, &schedule.command_at(0.0));
        Self {
            initial: ParticleState::at_rest(position, heading),
            params,
        }
    }
}

/// Sample times `t0, t0 + Δ, …` up to and including `t_end`.
pub fn output_grid(t0: f64, t_end: f64, output_dt: f64) -> Vec<f64> {
    if t_end <= t0 {
        return vec![t0];
    }
    let n = ((t_end - t0) / output_dt - 1e-9).ceil().max(1.0) as usize;
    let mut ts: Vec<f64> = (0..n).map(|k| t0 + k as f64 * output_dt).collect();
    ts.push(t_end);
    ts
}

fn check_start(setup: &ParticleSetup, schedule: &ControlSchedule) -> Result<()> {
    let t0 = setup.initial.time;
    if !(t0 >= 0.0 && t0 <= schedule.duration()) {
        return Err(Error::Schedule(format!(
            "particle '{}' starts at t = {t0}, outside the schedule [0, {}]",
            setup.params.label,
            schedule.duration()
        )));
    }
    if !setup.initial.is_finite() {
        return Err(Error::Domain(format!(
            "particle '{}' has a non-finite initial state",
            setup.params.label
        )));
    }
    Ok(())
}

/// Simulates every particle with the configured method.
pub fn simulate(
    particles: &[ParticleSetup],
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    config: &SolverConfig,
) -> Result<Vec<Trajectory>> {
    match config.method {
        Method::ReducedEuler => simulate_reduced(particles, fluid, schedule, config),
        Method::FullStiff => simulate_full(particles, fluid, schedule, config),
    }
}

/// First-order model ṗ = v_ss·R_φ·u(t), stepped with forward Euler. Steps
/// never straddle a command switch, so noise-free motion is exact.
pub fn simulate_reduced(
    particles: &[ParticleSetup],
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    config: &SolverConfig,
) -> Result<Vec<Trajectory>> {
    if config.method != Method::ReducedEuler {
        return Err(Error::Config("simulate_reduced requires method reduced_euler".into()));
    }
    config.validate()?;
    fluid.validate()?;
    parallel::map(particles, config.execution, |p| reduced_one(p, fluid, schedule, config))
        .into_iter()
        .collect()
}

fn reduced_one(
    setup: &ParticleSetup,
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let grid = output_grid(setup.initial.time, schedule.duration(), config.output_dt);
    reduced_on_grid(setup, fluid, schedule, config, &grid)
}

/// Reduced-model run of one particle sampled at the given times (ascending,
/// starting at the particle's start time and ending within the schedule).
/// Noise, when enabled, is applied once per grid interval.
pub fn simulate_reduced_on_grid(
    setup: &ParticleSetup,
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    config: &SolverConfig,
    grid: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    fluid.validate()?;
    match (grid.first(), grid.last()) {
        (Some(&a), Some(&b)) if a == setup.initial.time && b <= schedule.duration() => {}
        _ => {
            return Err(Error::Schedule(format!(
                "sample grid for '{}' must start at its start time and end within the schedule",
                setup.params.label
            )))
        }
    }
    reduced_on_grid(setup, fluid, schedule, config, grid)
}

fn reduced_on_grid(
    setup: &ParticleSetup,
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    config: &SolverConfig,
    grid: &[f64],
) -> Result<Trajectory> {
    check_start(setup, schedule)?;
    let params = &setup.params;
    let dc = config.constants_for(params, fluid)?;
    let mut rng = particle_stream(config.noise.seed, &params.label);

    // velocity per segment, computed once
    let velocities = schedule
        .segments()
        .iter()
        .map(|s| reduced_velocity(params, fluid, &s.command))
        .collect::<Result<Vec<_>>>()?;

    let mut p = setup.initial.position;
    let mut samples = Vec::with_capacity(grid.len());
    samples.push(Sample {
        time: grid[0],
        position: p,
        heading: Some(aligned_heading(params, &schedule.command_at(grid[0]))),
    });
    for w in grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let mut t = ta;
        while t < tb {
            let seg = schedule.segment_index(t);
            let stop = schedule.segment_end(seg).min(tb).min(t + config.dt);
            p += velocities[seg] * (stop - t);
            t = stop;
        }
        if config.noise.enabled {
            // The heading increment is drawn to keep the stream aligned with
            // the full model; alignment absorbs it between samples.
            let (dp, _) = brownian_increment(&dc, tb - ta, &mut rng)?;
            p += dp;
        }
        samples.push(Sample {
            time: tb,
            position: p,
            heading: Some(aligned_heading(params, &schedule.command_at(tb))),
        });
    }
    Trajectory::new(params.label.clone(), samples)
}

struct FieldSystem<'a> {
    model: &'a FullModel,
    field: FieldCommand,
}

impl StiffSystem<6> for FieldSystem<'_> {
    fn rhs(&self, y: &FullState) -> FullState {
        self.model.rhs(y, &self.field)
    }

    fn jacobian(&self, y: &FullState) -> Matrix6<f64> {
        self.model.jacobian(y, &self.field)
    }
}

/// Integrates the noise-free full model from `t0` to `t1` under the
/// schedule, restarting at every command switch. Returns the end state, the
/// states at `outputs` (ascending, within `(t0, t1]`), and step statistics.
pub fn advance_full(
    model: &FullModel,
    schedule: &ControlSchedule,
    solver: &Rosenbrock23,
    t0: f64,
    y0: FullState,
    t1: f64,
    outputs: &[f64],
) -> Result<(FullState, Vec<FullState>, StepStats)> {
    let mut y = y0;
    let mut t = t0;
    let mut out = Vec::with_capacity(outputs.len());
    let mut stats = StepStats::default();
    let mut next = 0;
    let mut hint = None;
    while t < t1 {
        let seg = schedule.segment_index(t);
        let stop = schedule.segment_end(seg).min(t1);
        let stop = if stop <= t { t1 } else { stop };
        let end = outputs[next..].partition_point(|&o| o <= stop) + next;
        let sys = FieldSystem {
            model,
            field: schedule.segments()[seg].command,
        };
        let sol = solver.integrate(&sys, t, y, stop, &outputs[next..end], hint)?;
        out.extend(sol.outputs);
        stats += sol.stats;
        next = end;
        y = sol.y_end;
        t = stop;
        // a switch excites fresh transients; only reuse the step within a segment
        hint = if schedule.segment_index(stop) == seg {
            Some(sol.last_step)
        } else {
            None
        };
    }
    Ok((y, out, stats))
}

/// Full inertial model (Stokes drag, propulsion along the body heading,
/// magnetic alignment torque) with the adaptive Rosenbrock integrator.
/// With noise on, Brownian kicks are applied to position and heading at
/// every output step.
pub fn simulate_full(
    particles: &[ParticleSetup],
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    config: &SolverConfig,
) -> Result<Vec<Trajectory>> {
    if config.method != Method::FullStiff {
        return Err(Error::Config("simulate_full requires method full_stiff".into()));
    }
    config.validate()?;
    fluid.validate()?;
    parallel::map(particles, config.execution, |p| {
        full_one(p, fluid, schedule, config).map(|(t, _)| t)
    })
    .into_iter()
    .collect()
}

/// Full-model run of a single particle, also returning solver statistics.
pub fn simulate_full_with_stats(
    setup: &ParticleSetup,
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    config: &SolverConfig,
) -> Result<(Trajectory, StepStats)> {
    config.validate()?;
    full_one(setup, fluid, schedule, config)
}

fn full_one(
    setup: &ParticleSetup,
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    config: &SolverConfig,
) -> Result<(Trajectory, StepStats)> {
    check_start(setup, schedule)?;
    let params = &setup.params;
    let model = FullModel::new(params, fluid)?;
    let solver = Rosenbrock23::new(config.tolerances())?;
    let grid = output_grid(setup.initial.time, schedule.duration(), config.output_dt);
    let y0 = FullModel::pack(&setup.initial);
    let sample = |t: f64, y: &FullState| Sample {
        time: t,
        position: Vector2::new(y[0], y[1]),
        heading: Some(wrap_angle(y[4])),
    };

    let mut samples = Vec::with_capacity(grid.len());
    samples.push(sample(grid[0], &y0));
    let mut stats = StepStats::default();
    if !config.noise.enabled {
        let t_end = *grid.last().expect("grid is never empty");
        let (_, outs, st) = advance_full(&model, schedule, &solver, grid[0], y0, t_end, &grid[1..])?;
        stats += st;
        samples.extend(grid[1..].iter().zip(&outs).map(|(&t, y)| sample(t, y)));
    } else {
        let dc = config.constants_for(params, fluid)?;
        let mut rng: Stream = particle_stream(config.noise.seed, &params.label);
        let mut y = y0;
        for w in grid.windows(2) {
            let (y_end, _, st) = advance_full(&model, schedule, &solver, w[0], y, w[1], &[])?;
            stats += st;
            y = y_end;
            let (dp, dth) = brownian_increment(&dc, w[1] - w[0], &mut rng)?;
            y[0] += dp.x;
            y[1] += dp.y;
            y[4] += dth;
            samples.push(sample(w[1], &y));
        }
    }
    Ok((Trajectory::new(params.label.clone(), samples)?, stats))
}

/// Wall-clock and accuracy comparison of the two models on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// Mean runtime of the full model, s.
    pub runtime_full: f64,
    /// Mean runtime of the reduced model, s.
    pub runtime_reduced: f64,
    /// Mean over particles of the full-vs-reduced position RMSE, m.
    pub rmse_between: f64,
    pub rmse_per_particle: Vec<f64>,
    pub timings_full: Vec<f64>,
    pub timings_reduced: Vec<f64>,
    pub reps: usize,
}

/// Runs both models `reps` times on the same noise-free scenario.
pub fn bench_compare(
    particles: &[ParticleSetup],
    fluid: &FluidParams,
    schedule: &ControlSchedule,
    reps: usize,
    base: &SolverConfig,
) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let quiet = SolverConfig {
        noise: NoiseConfig {
            enabled: false,
            ..base.noise
        },
        ..*base
    };
    let full_cfg = quiet.with_method(Method::FullStiff);
    let red_cfg = quiet.with_method(Method::ReducedEuler);

    let mut timings_full = Vec::with_capacity(reps);
    let mut timings_reduced = Vec::with_capacity(reps);
    let mut last_full = Vec::new();
    let mut last_red = Vec::new();
    for _ in 0..reps {
        let start = Instant::now();
        last_full = simulate_full(particles, fluid, schedule, &full_cfg)?;
        timings_full.push(start.elapsed().as_secs_f64());
        let start = Instant::now();
        last_red = simulate_reduced(particles, fluid, schedule, &red_cfg)?;
        timings_reduced.push(start.elapsed().as_secs_f64());
    }
    let rmse_per_particle = last_full
        .iter()
        .zip(&last_red)
        .map(|(f, r)| rmse(f, r))
        .collect::<Result<Vec<_>>>()?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(BenchReport {
        runtime_full: mean(&timings_full),
        runtime_reduced: mean(&timings_reduced),
        rmse_between: if rmse_per_particle.is_empty() {
            0.0
        } else {
            mean(&rmse_per_particle)
        },
        rmse_per_particle,
        timings_full,
        timings_reduced,
        reps,
    })
}
