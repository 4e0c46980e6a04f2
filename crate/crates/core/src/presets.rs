//! Reference parameter set for the three-particle steering experiment:
//! polystyrene Janus spheres in peroxide solution.

use crate::error::Result;
use crate::params::{FluidParams, ParticleParams};

/// 0.401 ng
pub const MASS: f64 = 0.401e-12;
/// 4.6 µm
pub const RADIUS: f64 = 4.6e-6;
/// 1.245 cP
pub const VISCOSITY: f64 = 1.245e-3;
/// Fitted propulsive accelerations F/m, m/s².
pub const F_OVER_M: [f64; 3] = [1.00, 1.18, 1.34];
/// Fitted dipole offsets φ, rad.
pub const PHI: [f64; 3] = [-1.09, 3.82, 2.64];

pub fn fluid() -> FluidParams {
    FluidParams {
        viscosity: VISCOSITY,
        peroxide_concentration: 0.1,
        propulsion_gain: None,
    }
}

/// The three reference particles labelled `p1`, `p2`, `p3`.
pub fn particles() -> Result<Vec<ParticleParams>> {
    F_OVER_M
        .iter()
        .zip(PHI.iter())
        .enumerate()
        .map(|(i, (&a, &phi))| ParticleParams::from_f_over_m(format!("p{}", i + 1), MASS, RADIUS, a, phi))
        .collect()
}
