//! File formats: scenario JSON, reference-trajectory CSV and overlay CSV.
//! Files carry micro-scale units (µm, ng, cP, mT); conversion to SI happens
//! here and nowhere else.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::aligned_heading;
use crate::error::{Error, Result};
use crate::integrate::{Method, NoiseConfig, ParticleSetup, SolverConfig};
use crate::params::{FluidParams, ParticleParams, ParticleState, DEFAULT_DIPOLE_MOMENT, DEFAULT_TEMPERATURE};
use crate::schedule::{ControlSchedule, ScheduleFile};
use crate::trajectory::{Sample, Trajectory};
use crate::units::{cp_to_pa_s, kg_to_ng, m_to_um, ng_to_kg, pa_s_to_cp, um_to_m};

pub const TRACK_COLUMNS: [&str; 4] = ["time_s", "particle_id", "x_um", "y_um"];
pub const HEADING_COLUMN: &str = "theta_rad";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleEntry {
    pub label: String,
    pub mass_ng: f64,
    pub radius_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_over_m_m_s2: Option<f64>,
    #[serde(default, rename = "propulsion_force_N", skip_serializing_if = "Option::is_none")]
    pub propulsion_force_n: Option<f64>,
    pub phi_rad: f64,
    #[serde(default, rename = "dipole_moment_Am2", skip_serializing_if = "Option::is_none")]
    pub dipole_moment_am2: Option<f64>,
    #[serde(default)]
    pub x_um: f64,
    #[serde(default)]
    pub y_um: f64,
    /// Initial heading; defaults to the field-aligned heading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rad: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidEntry {
    #[serde(rename = "viscosity_cP")]
    pub viscosity_cp: f64,
    #[serde(default)]
    pub peroxide_concentration: f64,
    #[serde(default, rename = "propulsion_gain_N", skip_serializing_if = "Option::is_none")]
    pub propulsion_gain_n: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseEntry {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_temperature", rename = "temperature_K")]
    pub temperature_k: f64,
    #[serde(default, rename = "D_t_m2_s", skip_serializing_if = "Option::is_none")]
    pub d_t: Option<f64>,
    #[serde(default, rename = "D_r_rad2_s", skip_serializing_if = "Option::is_none")]
    pub d_r: Option<f64>,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

impl Default for NoiseEntry {
    fn default() -> Self {
        Self {
            enabled: false,
            temperature_k: DEFAULT_TEMPERATURE,
            d_t: None,
            d_r: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_dt")]
    pub output_dt_s: f64,
    #[serde(default)]
    pub noise: NoiseEntry,
}

fn default_method() -> Method {
    Method::ReducedEuler
}
fn default_dt() -> f64 {
    0.02
}
fn default_rel_tol() -> f64 {
    1e-6
}
fn default_abs_tol() -> f64 {
    1e-9
}

impl Default for SolverEntry {
    fn default() -> Self {
        Self {
            method: default_method(),
            dt_s: default_dt(),
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            output_dt_s: default_dt(),
            noise: NoiseEntry::default(),
        }
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub particles: Vec<ParticleEntry>,
    pub fluid: FluidEntry,
    pub schedule: ScheduleFile,
    #[serde(default)]
    pub solver: SolverEntry,
    #[serde(default)]
    pub seed: u64,
}

/// A validated scenario in SI units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub particles: Vec<ParticleSetup>,
    pub fluid: FluidParams,
    pub schedule: ControlSchedule,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Self::try_from(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScenarioFile::from(self))?)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.solver.noise.seed = seed;
        self
    }

    pub fn params(&self) -> Vec<ParticleParams> {
        self.particles.iter().map(|p| p.params.clone()).collect()
    }
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        if f.particles.is_empty() {
            return Err(Error::Config("scenario has no particles".into()));
        }
        let schedule = ControlSchedule::try_from(f.schedule)?;
        let fluid = FluidParams::new(
            cp_to_pa_s(f.fluid.viscosity_cp),
            f.fluid.peroxide_concentration,
            f.fluid.propulsion_gain_n,
        )?;
        let mut seen = std::collections::HashSet::new();
        let particles = f
            .particles
            .iter()
            .map(|e| {
                if !seen.insert(e.label.clone()) {
                    return Err(Error::Config(format!("duplicate particle label '{}'", e.label)));
                }
                let mass = ng_to_kg(e.mass_ng);
                let force = match (e.f_over_m_m_s2, e.propulsion_force_n) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(format!(
                            "particle '{}': give f_over_m_m_s2 or propulsion_force_N, not both",
                            e.label
                        )))
                    }
                    (Some(a), None) => Some(a * mass),
                    (None, f) => f,
                };
                let params = ParticleParams::new(
                    e.label.clone(),
                    mass,
                    um_to_m(e.radius_um),
                    force,
                    e.phi_rad,
                    e.dipole_moment_am2.unwrap_or(DEFAULT_DIPOLE_MOMENT),
                )?;
                let heading = e
                    .theta_rad
                    .unwrap_or_else(|| aligned_heading(&params, &schedule.command_at(0.0)));
                Ok(ParticleSetup {
                    initial: ParticleState::at_rest(Vector2::new(um_to_m(e.x_um), um_to_m(e.y_um)), heading),
                    params,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let solver = SolverConfig {
            method: f.solver.method,
            dt: f.solver.dt_s,
            rel_tol: f.solver.rel_tol,
            abs_tol: f.solver.abs_tol,
            output_dt: f.solver.output_dt_s,
            noise: NoiseConfig {
                enabled: f.solver.noise.enabled,
                seed: f.seed,
                temperature: f.solver.noise.temperature_k,
                d_t: f.solver.noise.d_t,
                d_r: f.solver.noise.d_r,
            },
            execution: Default::default(),
        };
        solver.validate()?;
        Ok(Self {
            particles,
            fluid,
            schedule,
            solver,
            seed: f.seed,
        })
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        Self {
            particles: s
                .particles
                .iter()
                .map(|p| ParticleEntry {
                    label: p.params.label.clone(),
                    mass_ng: kg_to_ng(p.params.mass),
                    radius_um: m_to_um(p.params.radius),
                    f_over_m_m_s2: p.params.propulsion_force.map(|f| f / p.params.mass),
                    propulsion_force_n: None,
                    phi_rad: p.params.dipole_offset_phi,
                    dipole_moment_am2: Some(p.params.dipole_moment),
                    x_um: m_to_um(p.initial.position.x),
                    y_um: m_to_um(p.initial.position.y),
                    theta_rad: Some(p.initial.heading),
                })
                .collect(),
            fluid: FluidEntry {
                viscosity_cp: pa_s_to_cp(s.fluid.viscosity),
                peroxide_concentration: s.fluid.peroxide_concentration,
                propulsion_gain_n: s.fluid.propulsion_gain,
            },
            schedule: ScheduleFile::from(&s.schedule),
            solver: SolverEntry {
                method: s.solver.method,
                dt_s: s.solver.dt,
                rel_tol: s.solver.rel_tol,
                abs_tol: s.solver.abs_tol,
                output_dt_s: s.solver.output_dt,
                noise: NoiseEntry {
                    enabled: s.solver.noise.enabled,
                    temperature_k: s.solver.noise.temperature,
                    d_t: s.solver.noise.d_t,
                    d_r: s.solver.noise.d_r,
                },
            },
            seed: s.seed,
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse(format!("missing column '{name}' in CSV header")))
}

fn parse_field(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse::<f64>().map_err(|_| {
        Error::Parse(format!(
            "line {line}: column '{name}': cannot parse '{raw}' as a number"
        ))
    })
}

/// Reads reference tracks (`time_s,particle_id,x_um,y_um[,theta_rad]`).
/// Particles are returned in order of first appearance, each sorted by time.
pub fn read_tracks<R: Read>(reader: R) -> Result<Vec<Trajectory>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let it = column(&headers, "time_s")?;
    let ip = column(&headers, "particle_id")?;
    let ix = column(&headers, "x_um")?;
    let iy = column(&headers, "y_um")?;
    let ih = headers.iter().position(|h| h.trim() == HEADING_COLUMN);

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Sample>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec.get(ip).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Parse(format!("line {line}: empty particle_id")));
        }
        let heading = match ih {
            Some(i) if !rec.get(i).unwrap_or("").is_empty() => Some(parse_field(&rec, i, HEADING_COLUMN, line)?),
            _ => None,
        };
        let sample = Sample {
            time: parse_field(&rec, it, "time_s", line)?,
            position: Vector2::new(
                um_to_m(parse_field(&rec, ix, "x_um", line)?),
                um_to_m(parse_field(&rec, iy, "y_um", line)?),
            ),
            heading,
        };
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(sample);
    }
    order
        .into_iter()
        .map(|id| {
            let mut samples = groups.remove(&id).expect("every ordered id has a group");
            samples.sort_by(|a, b| a.time.total_cmp(&b.time));
            Trajectory::new(id, samples).map_err(|e| Error::Parse(e.to_string()))
        })
        .collect()
}

pub fn load_tracks(path: &Path) -> Result<Vec<Trajectory>> {
    read_tracks(std::fs::File::open(path)?)
}

/// Writes tracks in the reference schema, plus `theta_rad` when every sample
/// carries a heading.
pub fn write_tracks<W: Write>(writer: W, tracks: &[Trajectory]) -> Result<()> {
    let with_heading = tracks.iter().all(|t| t.samples.iter().all(|s| s.heading.is_some()));
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = TRACK_COLUMNS.to_vec();
    if with_heading {
        header.push(HEADING_COLUMN);
    }
    w.write_record(&header)?;
    for t in tracks {
        for s in &t.samples {
            let mut row = vec![
                s.time.to_string(),
                t.label.clone(),
                m_to_um(s.position.x).to_string(),
                m_to_um(s.position.y).to_string(),
            ];
            if with_heading {
                row.push(s.heading.unwrap_or(f64::NAN).to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_tracks(path: &Path, tracks: &[Trajectory]) -> Result<()> {
    write_tracks(std::fs::File::create(path)?, tracks)
}

/// Simulated and reference positions side by side on the reference clock:
/// `time_s,particle_id,x_sim_um,y_sim_um,x_ref_um,y_ref_um`.
pub fn write_overlay<W: Write>(writer: W, pairs: &[(&Trajectory, &Trajectory)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time_s", "particle_id", "x_sim_um", "y_sim_um", "x_ref_um", "y_ref_um"])?;
    for (sim, reference) in pairs {
        for r in &reference.samples {
            let Some(p) = sim.position_at(r.time) else { continue };
            w.write_record([
                r.time.to_string(),
                reference.label.clone(),
                m_to_um(p.x).to_string(),
                m_to_um(p.y).to_string(),
                m_to_um(r.position.x).to_string(),
                m_to_um(r.position.y).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const SCENARIO: &str = r#"{
        "particles": [
            {"label": "p1", "mass_ng": 0.401, "radius_um": 4.6, "f_over_m_m_s2": 1.0, "phi_rad": -1.09, "x_um": -40, "y_um": 0},
            {"label": "p2", "mass_ng": 0.401, "radius_um": 4.6, "propulsion_force_N": 4.7e-13, "phi_rad": 3.82}
        ],
        "fluid": {"viscosity_cP": 1.245, "peroxide_concentration": 0.1},
        "schedule": {"duration_s": 15, "segments": [{"t_start_s": 0, "angle_rad": 0, "magnitude_mT": 1}]},
        "solver": {"method": "full_stiff", "noise": {"enabled": true}},
        "seed": 9
    }"#;

    #[test]
    fn scenario_parses_to_si() {
        let s = Scenario::from_json(SCENARIO).unwrap();
        assert_eq!(s.particles.len(), 2);
        let p1 = &s.particles[0];
        assert!((p1.params.mass - 0.401e-12).abs() < 1e-24);
        assert!((p1.params.propulsion_force.unwrap() - 0.401e-12).abs() < 1e-24);
        assert!((p1.initial.position.x + 40e-6).abs() < 1e-18);
        assert!((s.particles[1].params.dipole_offset_phi - (3.82 - 2.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!((s.fluid.viscosity - 1.245e-3).abs() < 1e-15);
        assert_eq!(s.solver.method, Method::FullStiff);
        assert!(s.solver.noise.enabled);
        assert_eq!(s.solver.noise.seed, 9);
        assert_eq!(s.solver.dt, 0.02);

        let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back.particles.len(), 2);
        assert!((back.particles[1].params.propulsion_force.unwrap() - 4.7e-13).abs() < 1e-25);
    }

    #[test]
    fn scenario_errors() {
        let unknown = SCENARIO.replace("\"seed\": 9", "\"seed\": 9, \"colour\": 1");
        let err = Scenario::from_json(&unknown).unwrap_err();
        assert!(
            matches!(err, Error::Parse(ref m) if m.contains("colour") && m.contains("line")),
            "{err}"
        );
        let empty = r#"{"particles": [], "fluid": {"viscosity_cP": 1}, "schedule": {"duration_s": 1, "segments": [{"t_start_s": 0, "angle_rad": 0, "magnitude_mT": 1}]}}"#;
        assert!(matches!(Scenario::from_json(empty), Err(Error::Config(ref m)) if m.contains("no particles")));
        let both = SCENARIO.replace(
            "\"propulsion_force_N\": 4.7e-13",
            "\"propulsion_force_N\": 4.7e-13, \"f_over_m_m_s2\": 1",
        );
        assert!(Scenario::from_json(&both).is_err());
        let dup = SCENARIO.replace("\"label\": \"p2\"", "\"label\": \"p1\"");
        assert!(Scenario::from_json(&dup).is_err());
    }

    #[test]
    fn track_csv_header_errors() {
        let csv = "time_s,particle_id,x_um\n0,a,1\n";
        let err = read_tracks(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("y_um")), "{err}");
        let bad = "time_s,particle_id,x_um,y_um\n0,a,1,oops\n";
        assert!(matches!(read_tracks(bad.as_bytes()), Err(Error::Parse(ref m)) if m.contains("line 2")));
    }

    #[test]
    fn track_csv_groups_and_sorts() {
        let csv = "particle_id,time_s,x_um,y_um,extra\nb,0.1,1,2,x\na,0.0,0,0,x\nb,0.0,0,1,x\na,0.1,3,4,x\n";
        let t = read_tracks(csv.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].label, "b");
        assert_eq!(t[0].samples[0].time, 0.0);
        assert!((t[1].samples[1].position.y - 4e-6).abs() < 1e-18);
        assert!(t[0].samples[0].heading.is_none());
    }

    proptest! {
        #[test]
        fn tracks_write_read_identity(
            pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -3.1f64..3.1), 1..40),
            dt in 1e-3f64..1.0,
        ) {
            let samples: Vec<Sample> = pts.iter().enumerate().map(|(k, &(x, y, h))| Sample {
                time: k as f64 * dt,
                position: Vector2::new(x * 1e-6, y * 1e-6),
                heading: Some(h),
            }).collect();
            let t = Trajectory::new("p", samples).unwrap();
            let mut buf = Vec::new();
            write_tracks(&mut buf, std::slice::from_ref(&t)).unwrap();
            let back = read_tracks(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), 1);
            for (a, b) in t.samples.iter().zip(&back[0].samples) {
                prop_assert_eq!(a.time, b.time);
                prop_assert!((a.position - b.position).norm() <= 1e-9 * a.position.norm().max(1e-12));
                prop_assert_eq!(a.heading, b.heading);
            }
        }
    }
}
