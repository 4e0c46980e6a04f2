//! Force and torque laws, the full inertial model, the reduced first-order
//! model, and the derived time constants and diffusion coefficients.

use nalgebra::{Matrix6, Vector2, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetics::{dipole_angle, magnetic_torque, FieldCommand};
use crate::params::{FluidParams, ParticleParams, ParticleState, PhysicalConstants};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// m/(6πηr), s
    pub tau_linear: f64,
    /// I/(8πηr³), s
    pub tau_rot: f64,
    /// F/(6πηr), m/s
    pub v_ss: f64,
    /// Translational diffusion coefficient, m²/s
    pub d_t: f64,
    /// Rotational diffusion coefficient, rad²/s
    pub d_r: f64,
}

/// Stochastic force and torque acting on a particle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub translational: Vector2<f64>,
    pub rotational: f64,
    pub enabled: bool,
    pub seed: u64,
}

impl Disturbance {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn force(&self) -> Vector2<f64> {
        if self.enabled {
            self.translational
        } else {
            Vector2::zeros()
        }
    }

    pub fn torque(&self) -> f64 {
        if self.enabled {
            self.rotational
        } else {
            0.0
        }
    }
}

/// Stokes drag −6πηr·v, N.
pub fn drag_force(v: &Vector2<f64>, fluid: &FluidParams, radius: f64) -> Vector2<f64> {
    -fluid.translational_drag(radius) * v
}

/// Stokes drag torque −8πηr³·ω, N·m.
pub fn drag_torque(omega: f64, fluid: &FluidParams, radius: f64) -> f64 {
    -fluid.rotational_drag(radius) * omega
}

/// Magnitude of the catalytic propulsion force, N.
pub fn propulsion_magnitude(params: &ParticleParams, fluid: &FluidParams) -> Result<f64> {
    match (params.propulsion_force, fluid.propulsion_gain) {
        (Some(f), _) => Ok(f),
        (None, Some(k)) => Ok(k * fluid.peroxide_concentration),
        (None, None) => Err(Error::Config(format!(
            "particle '{}': no propulsion force and no fluid propulsion gain",
            params.label
        ))),
    }
}

/// Propulsion force along the body heading, N.
pub fn propulsion_force(params: &ParticleParams, fluid: &FluidParams, heading: f64) -> Result<Vector2<f64>> {
    let f = propulsion_magnitude(params, fluid)?;
    Ok(f * Vector2::new(heading.cos(), heading.sin()))
}

pub fn derived_constants(
    params: &ParticleParams,
    fluid: &FluidParams,
    consts: &PhysicalConstants,
) -> Result<DerivedConstants> {
    params.validate()?;
    fluid.validate()?;
    let ct = fluid.translational_drag(params.radius);
    let cr = fluid.rotational_drag(params.radius);
    let f = propulsion_magnitude(params, fluid)?;
    let kt = consts.thermal_energy();
    Ok(DerivedConstants {
        tau_linear: params.mass / ct,
        tau_rot: params.moment_of_inertia() / cr,
        v_ss: f / ct,
        d_t: kt / ct,
        d_r: kt / cr,
    })
}

/// Coefficients of the inertial model for one particle, precomputed so the
/// integrator's right-hand side never fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullModel {
    pub mass: f64,
    pub inertia: f64,
    pub translational_drag: f64,
    pub rotational_drag: f64,
    pub propulsion: f64,
    pub dipole_moment: f64,
    pub phi: f64,
}

/// State layout used by the full model: `[x, y, vx, vy, θ, ω]`.
pub type FullState = Vector6<f64>;

impl FullModel {
    pub fn new(params: &ParticleParams, fluid: &FluidParams) -> Result<Self> {
        params.validate()?;
        fluid.validate()?;
        Ok(Self {
            mass: params.mass,
            inertia: params.moment_of_inertia(),
            translational_drag: fluid.translational_drag(params.radius),
            rotational_drag: fluid.rotational_drag(params.radius),
            propulsion: propulsion_magnitude(params, fluid)?,
            dipole_moment: params.dipole_moment,
            phi: params.dipole_offset_phi,
        })
    }

    pub fn pack(state: &ParticleState) -> FullState {
        Vector6::new(
            state.position.x,
            state.position.y,
            state.velocity.x,
            state.velocity.y,
            state.heading,
            state.angular_velocity,
        )
    }

    pub fn unpack(y: &FullState, time: f64) -> ParticleState {
        ParticleState {
            position: Vector2::new(y[0], y[1]),
            velocity: Vector2::new(y[2], y[3]),
            heading: y[4],
            angular_velocity: y[5],
            time,
        }
    }

    /// Time derivative of the packed state under a constant field, no noise.
    pub fn rhs(&self, y: &FullState, field: &FieldCommand) -> FullState {
        let th = y[4];
        let (s, c) = th.sin_cos();
        let misalign = field.angle - (th - self.phi);
        let torque = self.dipole_moment * field.magnitude * misalign.sin() - self.rotational_drag * y[5];
        Vector6::new(
            y[2],
            y[3],
            (self.propulsion * c - self.translational_drag * y[2]) / self.mass,
            (self.propulsion * s - self.translational_drag * y[3]) / self.mass,
            y[5],
            torque / self.inertia,
        )
    }

    pub fn jacobian(&self, y: &FullState, field: &FieldCommand) -> Matrix6<f64> {
        let th = y[4];
        let (s, c) = th.sin_cos();
        let misalign = field.angle - (th - self.phi);
        let kt = self.translational_drag / self.mass;
        let mut j = Matrix6::zeros();
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j[(2, 2)] = -kt;
        j[(2, 4)] = -self.propulsion * s / self.mass;
        j[(3, 3)] = -kt;
        j[(3, 4)] = self.propulsion * c / self.mass;
        j[(4, 5)] = 1.0;
        j[(5, 4)] = -self.dipole_moment * field.magnitude * misalign.cos() / self.inertia;
        j[(5, 5)] = -self.rotational_drag / self.inertia;
        j
    }
}

/// Linear and angular acceleration of the full model (magnetic force and
/// propulsion torque are neglected).
pub fn full_accel(
    state: &ParticleState,
    params: &ParticleParams,
    fluid: &FluidParams,
    field: &FieldCommand,
    dist: &Disturbance,
) -> Result<(Vector2<f64>, f64)> {
    let f = propulsion_force(params, fluid, state.heading)?
        + drag_force(&state.velocity, fluid, params.radius)
        + dist.force();
    let t = magnetic_torque(params, state.heading, field)
        + drag_torque(state.angular_velocity, fluid, params.radius)
        + dist.torque();
    Ok((f / params.mass, t / params.moment_of_inertia()))
}

/// Heading the reduced model assigns under `field`: field angle + φ.
pub fn aligned_heading(params: &ParticleParams, field: &FieldCommand) -> f64 {
    crate::params::wrap_angle(field.angle + params.dipole_offset_phi)
}

/// Terminal velocity v_ss·R_φ·u, m/s.
pub fn reduced_velocity(params: &ParticleParams, fluid: &FluidParams, field: &FieldCommand) -> Result<Vector2<f64>> {
    let v_ss = propulsion_magnitude(params, fluid)? / fluid.translational_drag(params.radius);
    let a = field.angle + params.dipole_offset_phi;
    Ok(v_ss * Vector2::new(a.cos(), a.sin()))
}

/// Overdamped Brownian increments over `dt`: each position component has
/// variance 2·D_t·dt, the heading 2·D_r·dt. Always consumes exactly three
/// normal draws so streams stay aligned regardless of the coefficients.
pub fn brownian_increment<R: Rng + ?Sized>(dc: &DerivedConstants, dt: f64, rng: &mut R) -> Result<(Vector2<f64>, f64)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    let zt: f64 = rng.sample(StandardNormal);
    let sp = (2.0 * dc.d_t * dt).sqrt();
    let sr = (2.0 * dc.d_r * dt).sqrt();
    Ok((Vector2::new(sp * zx, sp * zy), sr * zt))
}

/// Angle between the dipole axis and the field, wrapped to (−π, π].
pub fn heading_error(params: &ParticleParams, heading: f64, field: &FieldCommand) -> f64 {
    crate::params::wrap_angle(dipole_angle(params, heading) - field.angle)
}
