use std::fs;
use std::path::Path;

use lvpic::diagnostics::{hybrid_frequencies, Grid2, ScalarSeries, SCALARS_HEADER};
use lvpic::runner::sim::{read_fields, EX_LINE_FILE, FIELDS_FILE, MARKERS_FILE, OVERLAYS_FILE, SCALARS_FILE, SPECTRUM_FILE};
use lvpic::runner::{cli, SimConfig, Simulation};
use lvpic::Error;

fn small_config(dir: &Path, t_end: f64) -> String {
    format!(
        r#"[mapping]
kind = "cuboid"
lengths = [12.566370614359172, 1.0, 1.0]

[grid]
n_cells = [16, 1, 1]
degrees = [3, 1, 1]

[physics]
alpha = 1.0
eps = -1.0
v_th = 1.0

[model]
kind = "lvm"

[experiment]
kind = "landau"
delta = 1e-3
k_mode = 0.5

[time]
dt = 0.05
t_end = {t_end}

[particles]
per_cell = 50
seed = 3

[output]
dir = "{}"
save_every_steps = 2
save_fields = true
save_markers = true
"#,
        dir.display()
    )
}

fn run_cli(args: &[&str]) -> i32 {
    let mut all = vec!["lvpic"];
    all.extend_from_slice(args);
    cli(all)
}

#[test]
fn run_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, small_config(&out, 0.5)).unwrap();
    assert_eq!(run_cli(&["run", "--config", cfg.to_str().unwrap(), "--quiet"]), 0);

    let text = fs::read_to_string(out.join(SCALARS_FILE)).unwrap();
    assert_eq!(text.lines().next().unwrap(), SCALARS_HEADER);
    let series = ScalarSeries::read_csv(&out.join(SCALARS_FILE)).unwrap();
    assert_eq!(series.len(), 11);
    assert!(series.rel_energy_err[0].is_nan());
    assert!(series.rel_energy_err[1..].iter().all(|e| *e < 1e-10));
    assert!(series.div_b_inf.iter().all(|d| *d == 0.0));

    let line = Grid2::read(&out.join(EX_LINE_FILE)).unwrap();
    assert_eq!((line.n_rows, line.n_cols), (6, 16));
    assert!((line.d_row - 0.1).abs() < 1e-15);
    assert!((line.d_col - 12.566370614359172 / 16.0).abs() < 1e-15);
    // ∇·E = (α²/ε) δ cos(kx) with ε = −1 gives E_x(0) = −(δ/k) sin(kx).
    for j in 0..16 {
        let x = (j as f64 + 0.5) * line.d_col;
        let expect = -2e-3 * (0.5 * x).sin();
        assert!((line.at(0, j) - expect).abs() < 2e-5, "{j}: {} vs {expect}", line.at(0, j));
    }

    let (step, time, e1, b1) = read_fields(&out.join(FIELDS_FILE)).unwrap();
    assert_eq!(step, 10);
    assert!((time - 0.5).abs() < 1e-15);
    assert_eq!((e1.len(), b1.len()), (48, 48));
    assert!(out.join(MARKERS_FILE).exists());
    let echo = SimConfig::parse(&fs::read_to_string(out.join("config.echo.txt")).unwrap()).unwrap();
    assert_eq!(echo.particles.seed, 3);

    // Too short for any energy maximum.
    assert_eq!(run_cli(&["analyze", "damping", "--input", out.to_str().unwrap()]), 1);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let full = SimConfig::parse(&small_config(&tmp.path().join("full"), 1.0)).unwrap();
    let half = SimConfig::parse(&small_config(&tmp.path().join("half"), 0.5)).unwrap();
    let a = Simulation::new(full.clone()).unwrap().run(Some(&tmp.path().join("full")), false).unwrap();
    Simulation::new(half).unwrap().run(Some(&tmp.path().join("half")), false).unwrap();
    let mut resumed = Simulation::resume(full, &tmp.path().join("half")).unwrap();
    assert_eq!(resumed.step, 10);
    let b = resumed.run(Some(&tmp.path().join("rest")), false).unwrap();
    let n = a.series.len();
    assert_eq!(b.series.len(), 11);
    assert_eq!(a.series.time[n - 11], b.series.time[0]);
    assert_eq!(a.series.h_total[n - 11], b.series.h_total[0]);
    for k in 1..11 {
        assert_eq!(a.series.row(n - 11 + k), b.series.row(k), "row {k}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, small_config(&tmp.path().join("unused"), 0.3)).unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("t{k}"));
        let code = run_cli(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "--quiet",
        ]);
        assert_eq!(code, 0);
        outputs.push(fs::read(out.join(SCALARS_FILE)).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn seed_override_changes_markers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, small_config(&tmp.path().join("unused"), 0.1)).unwrap();
    let run = |seed: &str, name: &str| {
        let out = tmp.path().join(name);
        let args = ["run", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--seed", seed, "--quiet"];
        assert_eq!(run_cli(&args), 0);
        fs::read(out.join(SCALARS_FILE)).unwrap()
    };
    assert_ne!(run("3", "a"), run("4", "b"));
}

#[test]
fn cli_reports_usage_and_config_errors() {
    assert_eq!(run_cli(&["frobnicate"]), 2);
    assert_eq!(run_cli(&["run"]), 2);
    assert_eq!(run_cli(&["presets"]), 0);
    assert_eq!(run_cli(&["presets", "bernstein"]), 0);
    assert_eq!(run_cli(&["presets", "nope"]), 1);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = small_config(tmp.path(), 0.5).replace("dt = 0.05", "dt = 0.0");
    fs::write(&cfg, &text).unwrap();
    assert_eq!(run_cli(&["run", "--config", cfg.to_str().unwrap(), "--quiet"]), 1);
    match SimConfig::parse(&text) {
        Err(Error::Config { line: Some(l), .. }) => {
            assert_eq!(text.lines().nth(l - 1).unwrap().trim(), "dt = 0.0");
        }
        other => panic!("unexpected {other:?}"),
    }
    let missing = tmp.path().join("missing.toml");
    assert_eq!(run_cli(&["run", "--config", missing.to_str().unwrap()]), 1);
}

#[test]
fn spectrum_analysis_writes_grid_and_overlays() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let text = r#"[mapping]
kind = "cuboid"
lengths = [18.0, 0.8, 0.8]

[grid]
n_cells = [32, 1, 1]
degrees = [3, 1, 1]

[physics]
alpha = 1.0
eps = -1.0
v_th = 0.2
b0 = [0.0, 0.0, 1.0]

[model]
kind = "lvm"

[experiment]
kind = "bernstein"
noise_amplitude = 1e-4

[time]
dt = 0.25
t_end = 10.0

[particles]
per_cell = 10
seed = 1
"#;
    let config = SimConfig::parse(text).unwrap();
    Simulation::new(config).unwrap().run(Some(&out), false).unwrap();
    assert_eq!(run_cli(&["analyze", "spectrum", "--input", out.to_str().unwrap(), "--k-start", "1"]), 0);
    let spec = Grid2::read(&out.join(SPECTRUM_FILE)).unwrap();
    assert!(spec.n_rows > 0 && spec.n_cols > 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(OVERLAYS_FILE)).unwrap()).unwrap();
    let h = hybrid_frequencies(1.0, 1.0).unwrap();
    assert!((json["omega_l"].as_f64().unwrap() - h.omega_l).abs() < 1e-12);
    assert!((json["omega_r"].as_f64().unwrap() - h.omega_r).abs() < 1e-12);
    assert!((json["omega_l"].as_f64().unwrap() - 0.6180339887498949).abs() < 1e-9);
    assert_eq!(json["half_integer_lines"][0].as_f64().unwrap(), 0.5);
}
