//! Synthetic ground-truth datasets: noisy reduced-model tracks generated from
//! known parameters, for exercising the estimators end to end.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::derived_constants;
use crate::error::Result;
use crate::estimate::{FitWindow, ReplayDataset, WindowMap};
use crate::formats::Scenario;
use crate::integrate::{simulate, NoiseConfig, ParticleSetup, SolverConfig};
use crate::magnetics::FieldCommand;
use crate::params::PhysicalConstants;
use crate::presets;
use crate::schedule::{ControlSchedule, Segment};
use crate::trajectory::Trajectory;
use crate::units::m_to_um;

/// 15 s, three 5 s segments of constant 1 mT field at 0, π/2 and −π/4.
pub fn reference_schedule() -> ControlSchedule {
    let seg = |t: f64, a: f64| Segment {
        t_start: t,
        command: FieldCommand::new(a, 1e-3).expect("valid command"),
    };
    ControlSchedule::new(vec![seg(0.0, 0.0), seg(5.0, PI / 2.0), seg(10.0, -PI / 4.0)], 15.0).expect("valid schedule")
}

/// The three reference particles spread across the workspace, with
/// Stokes-Einstein noise at 298 K.
pub fn reference_scenario(seed: u64) -> Result<Scenario> {
    let schedule = reference_schedule();
    let starts = [(-40.0, -10.0), (0.0, 30.0), (40.0, -10.0)];
    let particles = presets::particles()?
        .into_iter()
        .zip(starts)
        .map(|(p, (x, y))| ParticleSetup::at_rest(p, Vector2::new(x, y) * 1e-6, &schedule))
        .collect();
    Ok(Scenario {
        particles,
        fluid: presets::fluid(),
        schedule,
        solver: SolverConfig {
            noise: NoiseConfig {
                enabled: true,
                seed,
                ..NoiseConfig::default()
            },
            ..SolverConfig::default()
        },
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub particle_id: String,
    pub f_over_m_m_s2: f64,
    pub phi_rad: f64,
    pub v_ss_um_s: f64,
    pub x0_um: f64,
    pub y0_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub particles: Vec<TruthRow>,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub tracks: Vec<Trajectory>,
    pub truth: Truth,
    pub schedule: ControlSchedule,
    /// The first constant-command segment for every particle.
    pub windows: WindowMap,
}

/// Simulates the scenario (with its own method and noise settings) and
/// packages the result as a dataset with ground truth.
pub fn generate(scenario: &Scenario) -> Result<SynthDataset> {
    let tracks = simulate(
        &scenario.particles,
        &scenario.fluid,
        &scenario.schedule,
        &scenario.solver,
    )?;
    let consts = PhysicalConstants::at_temperature(scenario.solver.noise.temperature)?;
    let particles = scenario
        .particles
        .iter()
        .map(|p| {
            let dc = derived_constants(&p.params, &scenario.fluid, &consts)?;
            Ok(TruthRow {
                particle_id: p.params.label.clone(),
                f_over_m_m_s2: dc.v_ss * scenario.fluid.translational_drag(p.params.radius) / p.params.mass,
                phi_rad: p.params.dipole_offset_phi,
                v_ss_um_s: m_to_um(dc.v_ss),
                x0_um: m_to_um(p.initial.position.x),
                y0_um: m_to_um(p.initial.position.y),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let window = FitWindow::new(0.0, scenario.schedule.segment_end(0))?;
    let windows = scenario
        .particles
        .iter()
        .map(|p| (p.params.label.clone(), window))
        .collect();
    Ok(SynthDataset {
        tracks,
        truth: Truth {
            seed: scenario.seed,
            particles,
        },
        schedule: scenario.schedule.clone(),
        windows,
    })
}

impl SynthDataset {
    /// Replay input using the standard mass, radius and fluid.
    pub fn replay_dataset(&self) -> ReplayDataset {
        ReplayDataset {
            references: self.tracks.clone(),
            schedule: self.schedule.clone(),
            windows: self.windows.clone(),
            mass: presets::MASS,
            radius: presets::RADIUS,
            fluid: presets::fluid(),
        }
    }
}
