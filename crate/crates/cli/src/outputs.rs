//! Report documents written by the commands, in file units.

use janus_core::dynamics::DerivedConstants;
use janus_core::estimate::{FitResult, ReplayMode, ReplayReport};
use janus_core::integrate::BenchReport;
use janus_core::units::m_to_um;
use janus_core::Method;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ParticleSummary {
    pub id: String,
    pub tau_linear_s: f64,
    pub tau_rot_s: f64,
    pub v_ss_um_s: f64,
    #[serde(rename = "D_t_m2_s")]
    pub d_t: f64,
    #[serde(rename = "D_r_rad2_s")]
    pub d_r: f64,
    pub x_end_um: f64,
    pub y_end_um: f64,
}

impl ParticleSummary {
    pub fn new(id: &str, dc: &DerivedConstants, end: nalgebra::Vector2<f64>) -> Self {
        Self {
            id: id.to_string(),
            tau_linear_s: dc.tau_linear,
            tau_rot_s: dc.tau_rot,
            v_ss_um_s: m_to_um(dc.v_ss),
            d_t: dc.d_t,
            d_r: dc.d_r,
            x_end_um: m_to_um(end.x),
            y_end_um: m_to_um(end.y),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimSummary {
    pub method: Method,
    pub seed: u64,
    pub noise: bool,
    pub duration_s: f64,
    pub particles: Vec<ParticleSummary>,
}

pub const SKIPPED_NO_WINDOW: &str = "skipped: no window";

#[derive(Debug, Serialize)]
pub struct FitRow {
    pub particle_id: String,
    pub status: String,
    pub t0_s: Option<f64>,
    pub t1_s: Option<f64>,
    pub v_ss_um_s: Option<f64>,
    #[serde(rename = "F_N")]
    pub f_n: Option<f64>,
    pub f_over_m_m_s2: Option<f64>,
    pub phi_rad: Option<f64>,
    pub residual_rms_um: Option<f64>,
}

impl FitRow {
    pub fn fitted(fit: &FitResult) -> Self {
        Self {
            particle_id: fit.label.clone(),
            status: "ok".into(),
            t0_s: Some(fit.fit_window.t0),
            t1_s: Some(fit.fit_window.t1),
            v_ss_um_s: Some(m_to_um(fit.v_ss_hat)),
            f_n: Some(fit.f_hat),
            f_over_m_m_s2: Some(fit.f_over_m_hat),
            phi_rad: Some(fit.phi_hat),
            residual_rms_um: Some(m_to_um(fit.residual_rms)),
        }
    }

    pub fn failed(id: &str, status: String) -> Self {
        Self {
            particle_id: id.to_string(),
            status,
            t0_s: None,
            t1_s: None,
            v_ss_um_s: None,
            f_n: None,
            f_over_m_m_s2: None,
            phi_rad: None,
            residual_rms_um: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CompareParticle {
    pub id: String,
    pub phi_rad: Option<f64>,
    pub f_over_m_m_s2: Option<f64>,
    pub rmse_um: Option<f64>,
    pub transient_distance_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub mode: ReplayMode,
    pub mean_rmse_um: f64,
    pub particles: Vec<CompareParticle>,
    pub notes: Vec<String>,
}

impl From<&ReplayReport> for CompareReport {
    fn from(r: &ReplayReport) -> Self {
        Self {
            mode: r.mode,
            mean_rmse_um: m_to_um(r.mean_rmse),
            particles: r
                .particles
                .iter()
                .map(|p| CompareParticle {
                    id: p.label.clone(),
                    phi_rad: p.phi,
                    f_over_m_m_s2: p.f_over_m,
                    rmse_um: p.rmse.map(m_to_um),
                    transient_distance_nm: p.transient_distance.map(|d| d * 1e9),
                    error: p.error.clone(),
                })
                .collect(),
            notes: r.notes.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BenchOutput {
    pub reps: usize,
    pub particles: usize,
    pub runtime_full: f64,
    pub runtime_reduced: f64,
    pub rmse_between: f64,
    pub rmse_between_um: f64,
    pub rmse_per_particle_um: Vec<f64>,
    pub units: BenchUnits,
}

#[derive(Debug, Serialize)]
pub struct BenchUnits {
    pub runtime_full: &'static str,
    pub runtime_reduced: &'static str,
    pub rmse_between: &'static str,
}

impl BenchOutput {
    pub fn new(r: &BenchReport, particles: usize) -> Self {
        Self {
            reps: r.reps,
            particles,
            runtime_full: r.runtime_full,
            runtime_reduced: r.runtime_reduced,
            rmse_between: r.rmse_between,
            rmse_between_um: m_to_um(r.rmse_between),
            rmse_per_particle_um: r.rmse_per_particle.iter().copied().map(m_to_um).collect(),
            units: BenchUnits {
                runtime_full: "s",
                runtime_reduced: "s",
                rmse_between: "m",
            },
        }
    }
}
