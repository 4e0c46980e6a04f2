//! Simulation and parameter estimation for catalytic Janus microparticles
//! steered by a single global magnetic field.
//!
//! Two particle models are provided: the full inertial model (Stokes drag,
//! catalytic propulsion, magnetic alignment torque) integrated with an
//! adaptive stiff solver, and the reduced first-order model in which each
//! particle moves at terminal velocity along the field direction rotated by
//! its dipole offset φ. All quantities are SI internally; see [`units`] for
//! the boundary conversions.

// Range checks are written as `!(x > lo)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod formats;
pub mod integrate;
pub mod magnetics;
pub mod parallel;
pub mod params;
pub mod presets;
pub mod rng;
pub mod schedule;
pub mod synth;
pub mod trajectory;
pub mod units;

pub use error::{Error, Result};
pub use integrate::{Method, NoiseConfig, ParticleSetup, SolverConfig};
pub use magnetics::FieldCommand;
pub use parallel::Execution;
pub use params::{FluidParams, ParticleParams, ParticleState, PhysicalConstants};
pub use schedule::ControlSchedule;
pub use trajectory::{Sample, Trajectory};
