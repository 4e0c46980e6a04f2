use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn janus(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_janus"))
        .args(["--quiet", "--out"])
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--seed", "4"];
    args.extend_from_slice(extra);
    let o = janus(dir, &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_then_fit_recovers_parameters() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p, &["--no-noise"]);
    for f in [
        "tracks.csv",
        "truth.json",
        "schedule.json",
        "windows.json",
        "scenario.json",
    ] {
        assert!(p.join(f).exists(), "{f}");
    }
    let o = janus(
        p,
        &[
            "fit",
            arg(&p.join("tracks.csv")),
            arg(&p.join("schedule.json")),
            arg(&p.join("windows.json")),
        ],
    );
    assert!(o.status.success());
    let truth = json(&p.join("truth.json"));
    let fits = json(&p.join("fit.json"));
    for (t, f) in truth["particles"]
        .as_array()
        .unwrap()
        .iter()
        .zip(fits.as_array().unwrap())
    {
        assert_eq!(f["status"], "ok");
        assert!((t["phi_rad"].as_f64().unwrap() - f["phi_rad"].as_f64().unwrap()).abs() < 1e-9);
        assert!((t["f_over_m_m_s2"].as_f64().unwrap() - f["f_over_m_m_s2"].as_f64().unwrap()).abs() < 1e-9);
    }
    let csv = std::fs::read_to_string(p.join("fit.csv")).unwrap();
    assert!(csv.starts_with("particle_id,status,t0_s,t1_s,v_ss_um_s,F_N,f_over_m_m_s2,phi_rad,residual_rms_um"));
}

#[test]
fn noisy_fit_stays_within_statistical_spread() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p, &[]);
    let o = janus(
        p,
        &[
            "fit",
            arg(&p.join("tracks.csv")),
            arg(&p.join("schedule.json")),
            arg(&p.join("windows.json")),
        ],
    );
    assert!(o.status.success());
    let truth = json(&p.join("truth.json"));
    let fits = json(&p.join("fit.json"));
    for (t, f) in truth["particles"]
        .as_array()
        .unwrap()
        .iter()
        .zip(fits.as_array().unwrap())
    {
        // four standard deviations of the direction estimate for the slowest particle
        assert!((t["phi_rad"].as_f64().unwrap() - f["phi_rad"].as_f64().unwrap()).abs() < 0.16);
    }
}

#[test]
fn missing_window_marks_row_skipped() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p, &["--no-noise"]);
    std::fs::write(p.join("w2.json"), r#"{"p1": {"t0_s": 0, "t1_s": 5}}"#).unwrap();
    let o = janus(
        p,
        &[
            "fit",
            arg(&p.join("tracks.csv")),
            arg(&p.join("schedule.json")),
            arg(&p.join("w2.json")),
        ],
    );
    assert!(o.status.success());
    let fits = json(&p.join("fit.json"));
    let status: Vec<_> = fits
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["status"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(status, ["ok", "skipped: no window", "skipped: no window"]);
}

#[test]
fn compare_modes_and_overlay() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p, &[]);
    let owned: Vec<String> = ["tracks.csv", "schedule.json", "windows.json"]
        .iter()
        .map(|f| p.join(f).to_string_lossy().into_owned())
        .collect();
    let inputs: Vec<&str> = owned.iter().map(String::as_str).collect();
    let run = |mode: &str, out: &Path| {
        let mut a = vec!["compare"];
        a.extend_from_slice(&inputs);
        a.extend_from_slice(&["--mode", mode]);
        let o = janus(out, &a);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        json(&out.join("report.json"))
    };
    let per = run("per", &p.join("per"));
    let mean = run("mean", &p.join("mean"));
    assert_eq!(per["mode"], "per_particle_f");
    assert!(per["mean_rmse_um"].as_f64().unwrap() < mean["mean_rmse_um"].as_f64().unwrap());
    let overlay = std::fs::read_to_string(p.join("per/overlay.csv")).unwrap();
    assert!(overlay.starts_with("time_s,particle_id,x_sim_um,y_sim_um,x_ref_um,y_ref_um\n"));
    assert_eq!(overlay.lines().count(), 1 + 3 * 751);
}

#[test]
fn malformed_header_exits_3_naming_column() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p, &["--no-noise"]);
    std::fs::write(p.join("bad.csv"), "time_s,particle_id,x_um\n0,p1,0\n").unwrap();
    let o = janus(
        p,
        &[
            "compare",
            arg(&p.join("bad.csv")),
            arg(&p.join("schedule.json")),
            arg(&p.join("windows.json")),
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("y_um"));
}

#[test]
fn simulate_is_deterministic_and_reports_constants() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p, &[]);
    let sc = p.join("scenario.json");
    let a = janus(&p.join("a"), &["simulate", arg(&sc), "--seed", "12"]);
    let b = janus(&p.join("b"), &["simulate", arg(&sc), "--seed", "12"]);
    assert!(a.status.success() && b.status.success());
    let read = |s: &str| std::fs::read(p.join(s).join("trajectories.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let summary = json(&p.join("a/summary.json"));
    let tau = summary["particles"][0]["tau_linear_s"].as_f64().unwrap();
    assert!((tau - 3.7146e-6).abs() < 1e-9);
    assert_eq!(summary["seed"], 12);
}

#[test]
fn simulate_noise_free_segments_are_straight() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    synth(p, &[]);
    let o = janus(
        p,
        &[
            "simulate",
            arg(&p.join("scenario.json")),
            "--no-noise",
            "--method",
            "reduced",
        ],
    );
    assert!(o.status.success());
    let tracks = janus_core::formats::load_tracks(&p.join("trajectories.csv")).unwrap();
    assert_eq!(tracks.len(), 3);
    for t in &tracks {
        let seg = t.window(5.0, 10.0, 1e-9);
        let (a, b) = (seg[0].position, seg[seg.len() - 1].position);
        let dir = (b - a).normalize();
        for s in seg {
            let off = s.position - a;
            assert!((off.x * dir.y - off.y * dir.x).abs() < 1e-12);
        }
    }
}

#[test]
fn empty_scenario_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let sc = r#"{"particles": [], "fluid": {"viscosity_cP": 1.245},
                "schedule": {"duration_s": 1, "segments": [{"t_start_s": 0, "angle_rad": 0, "magnitude_mT": 1}]}}"#;
    std::fs::write(p.join("s.json"), sc).unwrap();
    let o = janus(p, &["simulate", arg(&p.join("s.json"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no particles"));
}

#[test]
fn bench_single_rep() {
    let d = tempfile::tempdir().unwrap();
    let o = janus(d.path(), &["bench", "--reps", "1"]);
    assert!(o.status.success());
    let b = json(&d.path().join("bench.json"));
    assert_eq!(b["reps"], 1);
    assert!(b["runtime_reduced"].as_f64().unwrap() <= b["runtime_full"].as_f64().unwrap());
    assert!(b["rmse_between_um"].as_f64().unwrap() < 0.1);
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(janus(d.path(), &["bench", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(janus(d.path(), &["teleport"]).status.code(), Some(2));
    assert_eq!(janus(d.path(), &["fit"]).status.code(), Some(2));
    assert_eq!(
        janus(d.path(), &["simulate", "x.json", "--method", "magic"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(janus(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn serve_answers_and_records() {
    let d = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_janus"))
        .args([
            "--out",
            arg(d.path()),
            "--seed",
            "5",
            "serve",
            "--port",
            "0",
            "--max-connections",
            "1",
            "--record",
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut out = BufReader::new(child.stdout.take().unwrap());
    let mut banner = String::new();
    out.read_line(&mut banner).unwrap();
    let addr = banner.trim().strip_prefix("listening on ").unwrap().to_string();
    let stream = TcpStream::connect(addr).unwrap();
    let mut w = stream.try_clone().unwrap();
    let mut r = BufReader::new(stream);
    writeln!(w, r#"{{"type":"pause"}}"#).unwrap();
    let mut got_ack = false;
    for _ in 0..50 {
        let mut l = String::new();
        r.read_line(&mut l).unwrap();
        if l.contains(r#""type":"ack""#) {
            got_ack = true;
            break;
        }
    }
    assert!(got_ack);
    drop(w);
    drop(r);
    assert!(child.wait().unwrap().success());
    let t = std::fs::read_to_string(d.path().join("session-1.jsonl")).unwrap();
    assert!(t.starts_with(r#"{"seed":5,"#));
}
