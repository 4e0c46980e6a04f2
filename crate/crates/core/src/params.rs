//! Physical constants and the immutable descriptions of particles, fluid and
//! kinematic state.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 4.0e-7 * PI;
/// Boltzmann constant, J/K (exact SI value).
pub const K_B: f64 = 1.380649e-23;
pub const DEFAULT_TEMPERATURE: f64 = 298.0;

/// Dipole moment used when a particle description leaves it unspecified, A·m².
/// At 1 mT this relaxes heading errors with a time constant of a few
/// milliseconds for a 4.6 µm sphere in water-like fluid.
pub const DEFAULT_DIPOLE_MOMENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub mu0: f64,
    pub k_b: f64,
    pub temperature: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            mu0: MU0,
            k_b: K_B,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl PhysicalConstants {
    pub fn at_temperature(temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::Domain(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self {
            temperature,
            ..Self::default()
        })
    }

    /// Thermal energy kB·T, J.
    pub fn thermal_energy(&self) -> f64 {
        self.k_b * self.temperature
    }
}

/// Physical description of one Janus particle. All values SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleParams {
    pub label: String,
    /// kg
    pub mass: f64,
    /// m
    pub radius: f64,
    /// Magnitude of the catalytic propulsion force, N. `None` defers to the
    /// fluid's gain × peroxide concentration.
    pub propulsion_force: Option<f64>,
    /// Angle from the field-aligned (dipole) axis to the propulsion axis, rad,
    /// counterclockwise positive.
    pub dipole_offset_phi: f64,
    /// A·m²
    pub dipole_moment: f64,
}

impl ParticleParams {
    /// Builds validated parameters; `phi` is normalized to (−π, π].
    pub fn new(
        label: impl Into<String>,
        mass: f64,
        radius: f64,
        propulsion_force: Option<f64>,
        phi: f64,
        dipole_moment: f64,
    ) -> Result<Self> {
        let p = Self {
            label: label.into(),
            mass,
            radius,
            propulsion_force,
            dipole_offset_phi: normalize_angle(phi)?,
            dipole_moment,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters specified through the propulsive acceleration F/m (m/s²),
    /// the form in which propulsion is usually reported.
    pub fn from_f_over_m(label: impl Into<String>, mass: f64, radius: f64, f_over_m: f64, phi: f64) -> Result<Self> {
        Self::new(label, mass, radius, Some(f_over_m * mass), phi, DEFAULT_DIPOLE_MOMENT)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "particle '{}': {name} must be positive and finite, got {v}",
                    self.label
                )))
            }
        };
        positive("mass", self.mass)?;
        positive("radius", self.radius)?;
        positive("dipole_moment", self.dipole_moment)?;
        if let Some(f) = self.propulsion_force {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::Domain(format!(
                    "particle '{}': propulsion_force must be >= 0, got {f}",
                    self.label
                )));
            }
        }
        if !self.dipole_offset_phi.is_finite() || self.dipole_offset_phi <= -PI || self.dipole_offset_phi > PI {
            return Err(Error::Domain(format!(
                "particle '{}': dipole_offset_phi must lie in (-pi, pi], got {}",
                self.label, self.dipole_offset_phi
            )));
        }
        Ok(())
    }

    pub fn moment_of_inertia(&self) -> f64 {
        0.4 * self.mass * self.radius * self.radius
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    /// Dynamic viscosity η, Pa·s.
    pub viscosity: f64,
    /// H₂O₂ fraction in [0, 1].
    pub peroxide_concentration: f64,
    /// Propulsion force per unit concentration, N.
    pub propulsion_gain: Option<f64>,
}

impl FluidParams {
    pub fn new(viscosity: f64, peroxide_concentration: f64, propulsion_gain: Option<f64>) -> Result<Self> {
        let f = Self {
            viscosity,
            peroxide_concentration,
            propulsion_gain,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.viscosity.is_finite() && self.viscosity > 0.0) {
            return Err(Error::Domain(format!(
                "viscosity must be positive, got {}",
                self.viscosity
            )));
        }
        if !(0.0..=1.0).contains(&self.peroxide_concentration) {
            return Err(Error::Domain(format!(
                "peroxide_concentration must lie in [0, 1], got {}",
                self.peroxide_concentration
            )));
        }
        if let Some(k) = self.propulsion_gain {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::Domain(format!("propulsion_gain must be >= 0, got {k}")));
            }
        }
        Ok(())
    }

    /// Translational Stokes drag coefficient 6πηr, N·s/m.
    pub fn translational_drag(&self, radius: f64) -> f64 {
        6.0 * PI * self.viscosity * radius
    }

    /// Rotational Stokes drag coefficient 8πηr³, N·m·s.
    pub fn rotational_drag(&self, radius: f64) -> f64 {
        8.0 * PI * self.viscosity * radius.powi(3)
    }
}

/// Planar kinematic state of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    /// Propulsion-axis angle from the workspace x axis, rad.
    pub heading: f64,
    pub angular_velocity: f64,
    pub time: f64,
}

impl ParticleState {
    pub fn at_rest(position: Vector2<f64>, heading: f64) -> Self {
        Self {
            position,
            velocity: Vector2::zeros(),
            heading,
            angular_velocity: 0.0,
            time: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite())
            && self.heading.is_finite()
            && self.angular_velocity.is_finite()
            && self.time.is_finite()
    }
}

/// Moment of inertia of a uniform solid sphere, (2/5)·m·r².
pub fn moment_of_inertia(mass: f64, radius: f64) -> Result<f64> {
    check_positive("mass", mass)?;
    check_positive("radius", radius)?;
    Ok(0.4 * mass * radius * radius)
}

pub fn particle_volume(radius: f64) -> Result<f64> {
    check_positive("radius", radius)?;
    Ok(4.0 / 3.0 * PI * radius.powi(3))
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(angle: f64) -> Result<f64> {
    if !angle.is_finite() {
        return Err(Error::Domain(format!("angle must be finite, got {angle}")));
    }
    Ok(wrap_angle(angle))
}

/// Infallible form of [`normalize_angle`] for angles already known finite.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = angle.rem_euclid(two_pi); // [0, 2π)
    if a > PI {
        a -= two_pi;
    }
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if a <= -PI {
        a += two_pi;
    }
    a
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}
