use std::fmt;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use janus_core::estimate::{
    fit_particle, replay_with_tracks, windows_from_json, windows_to_json, ReplayDataset, ReplayMode,
};
use janus_core::formats::{load_tracks, save_tracks, write_overlay, Scenario, ScenarioFile};
use janus_core::integrate::{bench_compare, simulate};
use janus_core::synth::{generate, reference_scenario};
use janus_core::units::{cp_to_pa_s, m_to_um, ng_to_kg, um_to_m};
use janus_core::{ControlSchedule, FluidParams, Method, Trajectory};
use janus_server::{serve, ServeOptions, SessionConfig};
use serde::Serialize;

use crate::outputs::{BenchOutput, CompareReport, FitRow, ParticleSummary, SimSummary, SKIPPED_NO_WINDOW};
use crate::{Cli, Command, FitConstants, MethodArg, ModeArg};

/// An invocation that parsed but cannot be honoured as given.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        out: cli.out.clone(),
        quiet: cli.quiet,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Simulate {
            scenario,
            method,
            no_noise,
        } => simulate_cmd(&ctx, scenario, *method, *no_noise),
        Command::Fit {
            tracks,
            schedule,
            windows,
            constants,
        } => fit_cmd(&ctx, tracks, schedule, windows, constants),
        Command::Compare {
            tracks,
            schedule,
            windows,
            mode,
            constants,
        } => compare_cmd(&ctx, tracks, schedule, windows, *mode, constants),
        Command::Bench { scenario, reps } => bench_cmd(&ctx, scenario.as_deref(), *reps),
        Command::Synth { params, no_noise } => synth_cmd(&ctx, params.as_deref(), *no_noise),
        Command::Serve {
            port,
            scenario,
            time_scale,
            tick_rate,
            max_connections,
            record,
        } => serve_cmd(
            &ctx,
            *port,
            scenario.as_deref(),
            *time_scale,
            *tick_rate,
            *max_connections,
            *record,
        ),
    }
}

struct Ctx {
    out: PathBuf,
    quiet: bool,
    seed: Option<u64>,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name)?;
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        self.say(format!("wrote {}", p.display()));
        Ok(p)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn write_tracks(&self, name: &str, tracks: &[Trajectory]) -> Result<PathBuf> {
        let p = self.path(name)?;
        save_tracks(&p, tracks).with_context(|| format!("writing {}", p.display()))?;
        self.say(format!("wrote {}", p.display()));
        Ok(p)
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("reading scenario {}", path.display()))
}

fn simulate_cmd(ctx: &Ctx, path: &Path, method: Option<MethodArg>, no_noise: bool) -> Result<()> {
    let mut sc = load_scenario(path)?;
    if let Some(seed) = ctx.seed {
        sc = sc.with_seed(seed);
    }
    if let Some(m) = method {
        sc.solver.method = match m {
            MethodArg::Full => Method::FullStiff,
            MethodArg::Reduced => Method::ReducedEuler,
        };
    }
    if no_noise {
        sc.solver.noise.enabled = false;
    }
    let tracks = simulate(&sc.particles, &sc.fluid, &sc.schedule, &sc.solver)?;
    let particles = sc
        .particles
        .iter()
        .zip(&tracks)
        .map(|(p, t)| {
            let dc = sc.solver.constants_for(&p.params, &sc.fluid)?;
            let end = t.last().map(|s| s.position).unwrap_or(p.initial.position);
            Ok(ParticleSummary::new(&p.params.label, &dc, end))
        })
        .collect::<Result<Vec<_>>>()?;
    ctx.write_tracks("trajectories.csv", &tracks)?;
    ctx.write_json(
        "summary.json",
        &SimSummary {
            method: sc.solver.method,
            seed: sc.seed,
            noise: sc.solver.noise.enabled,
            duration_s: sc.schedule.duration(),
            particles,
        },
    )?;
    Ok(())
}

struct FitInputs {
    tracks: Vec<Trajectory>,
    schedule: ControlSchedule,
    windows: janus_core::estimate::WindowMap,
    mass: f64,
    radius: f64,
    fluid: FluidParams,
}

fn fit_inputs(tracks: &Path, schedule: &Path, windows: &Path, c: &FitConstants) -> Result<FitInputs> {
    let tracks_v = load_tracks(tracks).with_context(|| format!("reading tracks {}", tracks.display()))?;
    let schedule_v =
        ControlSchedule::load_json(schedule).with_context(|| format!("reading schedule {}", schedule.display()))?;
    let text = fs::read_to_string(windows).with_context(|| format!("reading windows {}", windows.display()))?;
    let windows_v = windows_from_json(&text).with_context(|| format!("reading windows {}", windows.display()))?;
    let fluid = FluidParams::new(cp_to_pa_s(c.viscosity_cp), 0.0, None)?;
    let mass = ng_to_kg(c.mass_ng);
    let radius = um_to_m(c.radius_um);
    if !(mass > 0.0 && radius > 0.0) {
        return Err(Usage("--mass-ng and --radius-um must be positive".into()).into());
    }
    Ok(FitInputs {
        tracks: tracks_v,
        schedule: schedule_v,
        windows: windows_v,
        mass,
        radius,
        fluid,
    })
}

fn fit_cmd(ctx: &Ctx, tracks: &Path, schedule: &Path, windows: &Path, c: &FitConstants) -> Result<()> {
    let inp = fit_inputs(tracks, schedule, windows, c)?;
    let rows: Vec<FitRow> = inp
        .tracks
        .iter()
        .map(|t| match inp.windows.get(&t.label) {
            None => FitRow::failed(&t.label, SKIPPED_NO_WINDOW.into()),
            Some(w) => match fit_particle(t, &inp.schedule, w, inp.mass, inp.radius, &inp.fluid) {
                Ok(fit) => FitRow::fitted(&fit),
                Err(e) => FitRow::failed(&t.label, format!("error: {e}")),
            },
        })
        .collect();
    let p = ctx.path("fit.csv")?;
    let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    ctx.say(format!("wrote {}", p.display()));
    ctx.write_json("fit.json", &rows)?;
    ctx.say(format!(
        "{:<10} {:>10} {:>12} {:>10}  status",
        "particle", "phi_rad", "F/m m/s^2", "v_ss um/s"
    ));
    for r in &rows {
        let f = |v: Option<f64>, d: usize| v.map_or("-".to_string(), |v| format!("{v:.d$}"));
        ctx.say(format!(
            "{:<10} {:>10} {:>12} {:>10}  {}",
            r.particle_id,
            f(r.phi_rad, 4),
            f(r.f_over_m_m_s2, 4),
            f(r.v_ss_um_s, 3),
            r.status
        ));
    }
    Ok(())
}

fn compare_cmd(
    ctx: &Ctx,
    tracks: &Path,
    schedule: &Path,
    windows: &Path,
    mode: ModeArg,
    c: &FitConstants,
) -> Result<()> {
    let inp = fit_inputs(tracks, schedule, windows, c)?;
    let data = ReplayDataset {
        references: inp.tracks,
        schedule: inp.schedule,
        windows: inp.windows,
        mass: inp.mass,
        radius: inp.radius,
        fluid: inp.fluid,
    };
    let mode = match mode {
        ModeArg::Per => ReplayMode::PerParticleF,
        ModeArg::Mean => ReplayMode::MeanF,
    };
    let (report, sims) = replay_with_tracks(&data, mode, &janus_core::SolverConfig::default())?;
    ctx.write_json("report.json", &CompareReport::from(&report))?;
    let pairs: Vec<(&Trajectory, &Trajectory)> = sims
        .iter()
        .zip(&data.references)
        .filter_map(|(s, r)| s.as_ref().map(|s| (s, r)))
        .collect();
    let p = ctx.path("overlay.csv")?;
    write_overlay(fs::File::create(&p)?, &pairs)?;
    ctx.say(format!("wrote {}", p.display()));
    for part in &report.particles {
        match part.rmse {
            Some(r) => ctx.say(format!("{:<10} rmse {:.3} um", part.label, m_to_um(r))),
            None => ctx.say(format!(
                "{:<10} {}",
                part.label,
                part.error.as_deref().unwrap_or("no result")
            )),
        }
    }
    ctx.say(format!("mean rmse {:.3} um", m_to_um(report.mean_rmse)));
    Ok(())
}

fn scenario_or_reference(ctx: &Ctx, path: Option<&Path>) -> Result<Scenario> {
    let sc = match path {
        Some(p) => load_scenario(p)?,
        None => reference_scenario(ctx.seed.unwrap_or(0))?,
    };
    Ok(match ctx.seed {
        Some(s) => sc.with_seed(s),
        None => sc,
    })
}

fn bench_cmd(ctx: &Ctx, path: Option<&Path>, reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Usage("--reps must be at least 1".into()).into());
    }
    let sc = scenario_or_reference(ctx, path)?;
    let report = bench_compare(&sc.particles, &sc.fluid, &sc.schedule, reps, &sc.solver)?;
    let out = BenchOutput::new(&report, sc.particles.len());
    ctx.write_json("bench.json", &out)?;
    ctx.say(format!("{:<22} {:>14}", "model", "mean runtime s"));
    ctx.say(format!("{:<22} {:>14.6e}", "full (stiff)", out.runtime_full));
    ctx.say(format!("{:<22} {:>14.6e}", "reduced (Euler)", out.runtime_reduced));
    ctx.say(format!(
        "rmse between models {:.4} um over {} reps",
        out.rmse_between_um, reps
    ));
    Ok(())
}

fn synth_cmd(ctx: &Ctx, path: Option<&Path>, no_noise: bool) -> Result<()> {
    let mut sc = scenario_or_reference(ctx, path)?;
    if no_noise {
        sc.solver.noise.enabled = false;
    }
    let data = generate(&sc)?;
    ctx.write_tracks("tracks.csv", &data.tracks)?;
    ctx.write_json("truth.json", &data.truth)?;
    ctx.write("schedule.json", &(data.schedule.to_json()? + "\n"))?;
    ctx.write("windows.json", &(windows_to_json(&data.windows)? + "\n"))?;
    ctx.write_json("scenario.json", &ScenarioFile::from(&sc))?;
    Ok(())
}

fn serve_cmd(
    ctx: &Ctx,
    port: u16,
    scenario: Option<&Path>,
    time_scale: f64,
    tick_rate: f64,
    max_connections: Option<usize>,
    record: bool,
) -> Result<()> {
    if !(time_scale.is_finite() && time_scale > 0.0 && tick_rate.is_finite() && tick_rate > 0.0) {
        return Err(Usage("--time-scale and --tick-rate must be positive".into()).into());
    }
    let mut config = match scenario {
        Some(p) => SessionConfig::from_scenario(&load_scenario(p)?),
        None => SessionConfig::reference(0)?,
    };
    if let Some(s) = ctx.seed {
        config.seed = s;
    }
    config.time_scale = time_scale;
    config.tick_rate = tick_rate;
    config.validate()?;
    let transcript_dir = if record {
        fs::create_dir_all(&ctx.out)?;
        Some(ctx.out.clone())
    } else {
        None
    };
    let listener = TcpListener::bind(("127.0.0.1", port)).with_context(|| format!("binding port {port}"))?;
    ctx.say(format!("listening on {}", listener.local_addr()?));
    serve(
        listener,
        config,
        ServeOptions {
            max_connections,
            transcript_dir,
        },
    )?;
    Ok(())
}
