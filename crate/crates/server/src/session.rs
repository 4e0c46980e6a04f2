//! One steering session: a set of particles under a single global field,
//! advanced in fixed ticks and driven by protocol messages.

use std::f64::consts::PI;

use janus_core::dynamics::{aligned_heading, brownian_increment, reduced_velocity, DerivedConstants, FullModel};
use janus_core::formats::{write_tracks, Scenario};
use janus_core::integrate::advance_full;
use janus_core::integrate::stiff::{Rosenbrock23, Tolerances};
use janus_core::params::wrap_angle;
use janus_core::rng::{auxiliary_stream, particle_stream, Stream};
use janus_core::units::{m_to_um, mt_to_t, t_to_mt, um_to_m};
use janus_core::{
    presets, ControlSchedule, FieldCommand, FluidParams, Method, ParticleParams, ParticleSetup, ParticleState, Sample,
    SolverConfig, Trajectory,
};
use nalgebra::Vector2;
use rand::Rng;

use crate::error::{Result, ServerError};
use crate::protocol::{parse_client, ClientMessage, ErrorReason, FieldView, ParticleView, PhiSpec, ServerMessage};

pub const DEFAULT_TICK_RATE: f64 = 30.0;
/// Full-model sessions stay within the tick budget up to this many particles.
pub const MAX_FULL_PARTICLES: usize = 10;
/// F/m given to spawned particles that do not specify one, m/s².
pub const DEFAULT_SPAWN_F_OVER_M: f64 = 1.18;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub particles: Vec<ParticleSetup>,
    pub fluid: FluidParams,
    pub field: FieldCommand,
    /// Hz
    pub tick_rate: f64,
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    pub seed: u64,
    pub noise: bool,
    /// Method, tolerances and noise temperature/overrides.
    pub solver: SolverConfig,
}

impl SessionConfig {
    /// Particles, fluid, seed, method and noise taken from a scenario; the
    /// initial field is the schedule's first command.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self {
            particles: scenario.particles.clone(),
            fluid: scenario.fluid,
            field: scenario.schedule.command_at(0.0),
            tick_rate: DEFAULT_TICK_RATE,
            time_scale: 1.0,
            seed: scenario.seed,
            noise: scenario.solver.noise.enabled,
            solver: scenario.solver,
        }
    }

    /// The three reference particles at rest around the origin, field along
    /// +x at 1 mT, noise off.
    pub fn reference(seed: u64) -> Result<Self> {
        let field = FieldCommand::new(0.0, 1e-3)?;
        let starts = [(-40.0, -10.0), (0.0, 30.0), (40.0, -10.0)];
        let schedule = ControlSchedule::constant(field, 0.0)?;
        let particles = presets::particles()?
            .into_iter()
            .zip(starts)
            .map(|(p, (x, y))| ParticleSetup::at_rest(p, Vector2::new(um_to_m(x), um_to_m(y)), &schedule))
            .collect();
        Ok(Self {
            particles,
            fluid: presets::fluid(),
            field,
            tick_rate: DEFAULT_TICK_RATE,
            time_scale: 1.0,
            seed,
            noise: false,
            solver: SolverConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tick rate", self.tick_rate), ("time scale", self.time_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ServerError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.solver.method == Method::FullStiff && self.particles.len() > MAX_FULL_PARTICLES {
            return Err(ServerError::Config(format!(
                "full-model sessions are limited to {MAX_FULL_PARTICLES} particles, scenario has {}",
                self.particles.len()
            )));
        }
        self.solver.validate()?;
        self.fluid.validate()?;
        Ok(())
    }

    /// Simulated seconds per tick.
    pub fn tick_dt(&self) -> f64 {
        self.time_scale / self.tick_rate
    }
}

#[derive(Debug, Clone)]
struct Live {
    params: ParticleParams,
    state: ParticleState,
    constants: DerivedConstants,
    model: Option<FullModel>,
    rng: Stream,
}

#[derive(Debug, Clone, Default)]
struct Recording {
    tracks: Vec<(String, Vec<Sample>)>,
}

impl Recording {
    fn push(&mut self, id: &str, sample: Sample) {
        let idx = match self.tracks.iter().position(|(l, _)| l == id) {
            Some(i) => i,
            None => {
                self.tracks.push((id.to_string(), Vec::new()));
                self.tracks.len() - 1
            }
        };
        let samples = &mut self.tracks[idx].1;
        match samples.last_mut() {
            Some(last) if last.time >= sample.time => *last = sample,
            _ => samples.push(sample),
        }
    }

    fn to_csv(&self) -> Result<String> {
        let tracks = self
            .tracks
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(l, s)| Trajectory::new(l.clone(), s.clone()))
            .collect::<janus_core::Result<Vec<_>>>()?;
        let mut buf = Vec::new();
        write_tracks(&mut buf, &tracks)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    solver: Rosenbrock23,
    particles: Vec<Live>,
    field: FieldCommand,
    ticks: u64,
    paused: bool,
    noise: bool,
    spawn_rng: Stream,
    spawned: u64,
    recording: Option<Recording>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let solver = Rosenbrock23::new(Tolerances {
            rel: config.solver.rel_tol,
            abs: config.solver.abs_tol,
        })?;
        let mut s = Self {
            solver,
            particles: Vec::new(),
            field: config.field,
            ticks: 0,
            paused: false,
            noise: config.noise,
            spawn_rng: auxiliary_stream(config.seed, "spawn"),
            spawned: 0,
            recording: None,
            config,
        };
        s.restore()?;
        Ok(s)
    }

    fn restore(&mut self) -> Result<()> {
        self.field = self.config.field;
        self.ticks = 0;
        self.paused = false;
        self.noise = self.config.noise;
        self.spawn_rng = auxiliary_stream(self.config.seed, "spawn");
        self.spawned = 0;
        self.recording = None;
        self.particles.clear();
        for setup in self.config.particles.clone() {
            let state = ParticleState {
                time: 0.0,
                ..setup.initial
            };
            self.add(setup.params, state)?;
        }
        Ok(())
    }

    fn add(&mut self, params: ParticleParams, state: ParticleState) -> Result<()> {
        let constants = self.config.solver.constants_for(&params, &self.config.fluid)?;
        let model = match self.config.solver.method {
            Method::FullStiff => Some(FullModel::new(&params, &self.config.fluid)?),
            Method::ReducedEuler => None,
        };
        self.particles.push(Live {
            rng: particle_stream(self.config.seed, &params.label),
            params,
            state,
            constants,
            model,
        });
        Ok(())
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Simulation clock, s.
    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.config.tick_dt()
    }

    pub fn field(&self) -> FieldCommand {
        self.field
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn noise_enabled(&self) -> bool {
        self.noise
    }

    pub fn is_recording(&self) -> bool {
        self.recording.is_some()
    }

    pub fn particle_ids(&self) -> Vec<&str> {
        self.particles.iter().map(|p| p.params.label.as_str()).collect()
    }

    pub fn phi_of(&self, id: &str) -> Option<f64> {
        self.particles
            .iter()
            .find(|p| p.params.label == id)
            .map(|p| p.params.dipole_offset_phi)
    }

    pub fn snapshot(&self) -> ServerMessage {
        ServerMessage::State {
            t: self.time(),
            paused: self.paused,
            field: FieldView {
                angle_rad: self.field.angle,
                magnitude_mT: t_to_mt(self.field.magnitude),
            },
            particles: self
                .particles
                .iter()
                .map(|p| ParticleView {
                    id: p.params.label.clone(),
                    x_um: m_to_um(p.state.position.x),
                    y_um: m_to_um(p.state.position.y),
                    theta_rad: p.state.heading,
                })
                .collect(),
        }
    }

    fn sample(p: &Live, time: f64) -> Sample {
        Sample {
            time,
            position: p.state.position,
            heading: Some(p.state.heading),
        }
    }

    /// Advances one tick unless paused and returns the state broadcast. A
    /// paused tick moves nothing, but reduced-model headings still snap to
    /// the active field since they carry no dynamics of their own.
    pub fn tick(&mut self) -> Result<ServerMessage> {
        if self.paused {
            for p in self.particles.iter_mut().filter(|p| p.model.is_none()) {
                p.state.heading = aligned_heading(&p.params, &self.field);
            }
        } else {
            let t0 = self.time();
            let t1 = (self.ticks + 1) as f64 * self.config.tick_dt();
            let field = self.field;
            let fluid = self.config.fluid;
            let noise = self.noise;
            for p in &mut self.particles {
                advance(p, &fluid, &field, &self.solver, t0, t1, noise)?;
            }
            self.ticks += 1;
            if let Some(rec) = &mut self.recording {
                for p in &self.particles {
                    rec.push(&p.params.label, Self::sample(p, t1));
                }
            }
        }
        Ok(self.snapshot())
    }

    /// Decodes and applies one raw line.
    pub fn handle_line(&mut self, line: &str) -> Vec<ServerMessage> {
        match parse_client(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![e],
        }
    }

    /// Applies one message. Rejected messages leave the session unchanged.
    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        let kind = msg.kind();
        let invalid = |m: String| vec![ServerMessage::error(ErrorReason::Validation, m, kind)];
        match msg {
            ClientMessage::SetField {
                angle_rad,
                magnitude_mT,
            } => {
                let magnitude = magnitude_mT.map(mt_to_t).unwrap_or(self.field.magnitude);
                if !(magnitude.is_finite() && magnitude > 0.0) {
                    return invalid(format!(
                        "field magnitude must be positive, got {} mT",
                        t_to_mt(magnitude)
                    ));
                }
                match FieldCommand::new(angle_rad, magnitude) {
                    Ok(f) => self.field = f,
                    Err(e) => return invalid(e.to_string()),
                }
            }
            ClientMessage::Spawn {
                id,
                phi_rad,
                x_um,
                y_um,
                f_over_m,
            } => {
                return match self.spawn(id, phi_rad, x_um, y_um, f_over_m) {
                    Ok(id) => vec![ServerMessage::Ack {
                        of: kind.into(),
                        id: Some(id),
                    }],
                    Err(e) => invalid(e.to_string()),
                };
            }
            ClientMessage::Remove { id } => {
                let Some(i) = self.particles.iter().position(|p| p.params.label == id) else {
                    return invalid(format!("no particle '{id}'"));
                };
                self.particles.remove(i);
            }
            ClientMessage::Pause => self.paused = true,
            ClientMessage::Resume => self.paused = false,
            ClientMessage::Reset => {
                if let Err(e) = self.restore() {
                    return invalid(e.to_string());
                }
            }
            ClientMessage::RecordStart => {
                if self.recording.is_some() {
                    return invalid("already recording".into());
                }
                let mut rec = Recording::default();
                let t = self.time();
                for p in &self.particles {
                    rec.push(&p.params.label, Self::sample(p, t));
                }
                self.recording = Some(rec);
            }
            ClientMessage::RecordStop => {
                let Some(rec) = self.recording.take() else {
                    return invalid("not recording".into());
                };
                return match rec.to_csv() {
                    Ok(csv) => vec![ServerMessage::Recording { csv }],
                    Err(e) => vec![ServerMessage::error(ErrorReason::Validation, e.to_string(), kind)],
                };
            }
            ClientMessage::SetNoise { enabled } => self.noise = enabled,
        }
        vec![ServerMessage::ack(kind)]
    }

    fn spawn(
        &mut self,
        id: Option<String>,
        phi: PhiSpec,
        x_um: Option<f64>,
        y_um: Option<f64>,
        f_over_m: Option<f64>,
    ) -> Result<String> {
        if self.config.solver.method == Method::FullStiff && self.particles.len() >= MAX_FULL_PARTICLES {
            return Err(ServerError::Config(format!(
                "full-model sessions are limited to {MAX_FULL_PARTICLES} particles"
            )));
        }
        if let Some(id) = &id {
            if id.is_empty() || self.particles.iter().any(|p| &p.params.label == id) {
                return Err(ServerError::Config(format!(
                    "particle id '{id}' is empty or already in use"
                )));
            }
        }
        let position = Vector2::new(um_to_m(x_um.unwrap_or(0.0)), um_to_m(y_um.unwrap_or(0.0)));
        if !(position.x.is_finite() && position.y.is_finite()) {
            return Err(ServerError::Config("spawn position must be finite".into()));
        }
        let label = id.unwrap_or_else(|| self.next_id());
        let f_over_m = f_over_m.unwrap_or(DEFAULT_SPAWN_F_OVER_M);
        let explicit = match phi {
            PhiSpec::Value(v) => Some(v),
            PhiSpec::Keyword(k) if k == "random" => None,
            PhiSpec::Keyword(k) => {
                return Err(ServerError::Config(format!(
                    "phi_rad must be a number or \"random\", got \"{k}\""
                )))
            }
        };
        // Validate before drawing so a rejected spawn does not shift the
        // random sequence.
        let mut params = ParticleParams::from_f_over_m(
            label.clone(),
            presets::MASS,
            presets::RADIUS,
            f_over_m,
            explicit.unwrap_or(0.0),
        )?;
        if explicit.is_none() {
            let phi = self.spawn_rng.random_range(-PI..PI);
            params = ParticleParams::from_f_over_m(label.clone(), presets::MASS, presets::RADIUS, f_over_m, phi)?;
        }
        let heading = aligned_heading(&params, &self.field);
        let state = ParticleState {
            time: self.time(),
            ..ParticleState::at_rest(position, heading)
        };
        self.add(params, state)?;
        self.spawned += 1;
        if let Some(rec) = &mut self.recording {
            let p = self.particles.last().expect("just added");
            rec.push(&label, Self::sample(p, self.ticks as f64 * self.config.tick_dt()));
        }
        Ok(label)
    }

    fn next_id(&self) -> String {
        let mut k = self.spawned + 1;
        loop {
            let id = format!("s{k}");
            if !self.particles.iter().any(|p| p.params.label == id) {
                return id;
            }
            k += 1;
        }
    }
}

fn advance(
    p: &mut Live,
    fluid: &FluidParams,
    field: &FieldCommand,
    solver: &Rosenbrock23,
    t0: f64,
    t1: f64,
    noise: bool,
) -> Result<()> {
    let dt = t1 - t0;
    match &p.model {
        None => {
            let v = reduced_velocity(&p.params, fluid, field)?;
            p.state.position += v * dt;
            p.state.velocity = v;
            p.state.heading = aligned_heading(&p.params, field);
            p.state.angular_velocity = 0.0;
            if noise {
                let (dp, _) = brownian_increment(&p.constants, dt, &mut p.rng)?;
                p.state.position += dp;
            }
        }
        Some(model) => {
            let schedule = ControlSchedule::constant(*field, t1)?;
            let (mut y, _, _) = advance_full(model, &schedule, solver, t0, FullModel::pack(&p.state), t1, &[])?;
            if noise {
                let (dp, dth) = brownian_increment(&p.constants, dt, &mut p.rng)?;
                y[0] += dp.x;
                y[1] += dp.y;
                y[4] += dth;
            }
            p.state = FullModel::unpack(&y, t1);
            p.state.heading = wrap_angle(p.state.heading);
        }
    }
    p.state.time = t1;
    Ok(())
}
