//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`; pass criterion numbers
//! as arguments to run a subset.

#[path = "common/mod.rs"]
mod common;

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use lvpic::diagnostics::{fit_damping_rate, hamiltonian, hybrid_frequencies, ScalarSeries, DEFAULT_MAXIMA_WINDOW};
use lvpic::feec::solver::quadratic_form;
use lvpic::feec::DeRhamComplex;
use lvpic::geometry::MappingSpec;
use lvpic::markers::BackgroundSpec;
use lvpic::propagators::{step_coupling, step_lorentz_magnetic, step_maxwell, FieldState, SolverSettings};
use lvpic::runner::sim::{analyze_spectrum, SCALARS_FILE};
use lvpic::runner::{preset, ModelKind, SimConfig, Simulation};

const LANDAU_SLOPE: f64 = -0.3066;
/// A spectral maximum counts as visible when it stands this far above the
/// median power around it.
const MIN_PROMINENCE: f64 = 5.0;

type Outcome = Result<(bool, String), String>;

fn preset_config(name: &str) -> SimConfig {
    SimConfig::parse(preset(name).expect("preset exists")).expect("preset parses")
}

fn run(config: SimConfig) -> Result<ScalarSeries, String> {
    let mut sim = Simulation::new(config).map_err(|e| e.to_string())?;
    Ok(sim.run(None, false).map_err(|e| e.to_string())?.series)
}

fn max_step_error(series: &ScalarSeries) -> f64 {
    series.rel_energy_err.iter().skip(1).fold(0.0, |m, x| m.max(x.abs()))
}

fn desk_landau() -> SimConfig {
    let mut c = preset_config("landau-cartesian");
    c.particles.per_cell = 200;
    c
}

fn window_max(series: &ScalarSeries, t0: f64, t1: f64) -> f64 {
    series
        .time
        .iter()
        .zip(&series.h_e)
        .filter(|(t, _)| **t >= t0 - 1e-9 && **t <= t1 + 1e-9)
        .fold(0.0, |m, (_, e)| m.max(*e))
}

struct Landau {
    series: ScalarSeries,
}

fn criterion_1(l: &Landau) -> Outcome {
    let s = &l.series;
    let fit = fit_damping_rate(&s.time, &s.h_e, 6, DEFAULT_MAXIMA_WINDOW).map_err(|e| e.to_string())?;
    let ok = (fit.slope - LANDAU_SLOPE).abs() <= 0.05;
    let times: Vec<String> = fit.maxima.iter().map(|(t, _)| format!("{t:.2}")).collect();
    Ok((ok, format!("slope {:.4} (target {LANDAU_SLOPE} ± 0.05), maxima at t = [{}]", fit.slope, times.join(", "))))
}

fn criterion_2(l: &Landau) -> Outcome {
    let err = max_step_error(&l.series);
    Ok((err < 1e-9, format!("max per-step relative energy error {err:.3e} (bound 1e-9)")))
}

fn criterion_3() -> Outcome {
    let mut geometric = desk_landau();
    geometric.time.t_end = 200.0;
    let mut ddf = geometric.clone();
    ddf.model.kind = ModelKind::DirectDeltaF;
    ddf.model.maxwell = false;
    let g = run(geometric)?;
    let d = run(ddf)?;
    let ratio = |s: &ScalarSeries| window_max(s, 100.0, 200.0) / window_max(s, 20.0, 40.0);
    let (rg, rd) = (ratio(&g), ratio(&d));
    Ok((
        rg <= 10.0 && rd > 10.0,
        format!("late/early max field energy: geometric {rg:.3} (≤ 10), direct delta-f {rd:.3} (> 10)"),
    ))
}

fn criterion_4() -> Outcome {
    let mut c = desk_landau();
    c.model.kind = ModelKind::Lvm;
    c.time.t_end = 10.0;
    let s = run(c)?;
    let worst = s.div_b_inf.iter().fold(0.0f64, |m, x| m.max(*x));
    let grew = s.h_b.iter().any(|x| *x > 0.0);
    Ok((worst == 0.0, format!("max ‖Div b1‖∞ over {} samples = {worst:e} (b1 nonzero: {grew})", s.len())))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    let mut bad = Vec::new();
    for n1 in 1..=5 {
        for n2 in 1..=4 {
            for n3 in 1..=3 {
                for p1 in 1..=4.min(n1) {
                    for p2 in 1..=3.min(n2) {
                        for p3 in 1..=2.min(n3) {
                            let c = DeRhamComplex::periodic([n1, n2, n3], [p1, p2, p3]).map_err(|e| e.to_string())?;
                            let cg = c.curl() * c.grad();
                            let dc = c.div() * c.curl();
                            if cg.values().iter().chain(dc.values()).any(|v| *v != 0.0) {
                                bad.push(format!("{:?}/{:?}", [n1, n2, n3], [p1, p2, p3]));
                            }
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        bad.is_empty() && secs < 1.0,
        format!("{cases} grid/degree combinations, {} nonzero, {secs:.3} s", bad.len()),
    ))
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut dims = (0, 0);
    let mappings = [MappingSpec::cuboid([3.0, 2.0, 1.0]).unwrap(), colella()];
    for (k, mapping) in mappings.into_iter().enumerate() {
        let disc = small_disc(mapping, BackgroundSpec::default());
        let mut fields = random_fields(&disc, 10 + k as u64);
        dims.0 = dims.0.max(fields.e1.len());
        let (e_ref, b_ref) = dense_maxwell(&disc, &fields.e1, &fields.b1, 0.3);
        step_maxwell(&mut fields, &disc, 0.3).map_err(|e| e.to_string())?;
        worst = worst.max(rel_diff(&fields.e1, &e_ref)).max(rel_diff(&fields.b1, &b_ref));

        let mut fields = random_fields(&disc, 20 + k as u64);
        let mut batch = random_markers(&disc, 8, 30 + k as u64);
        dims.1 = dims.1.max(batch.len());
        let (e_ref, w_ref) = dense_coupling(&disc, &fields.e1, &batch, 0.4);
        step_coupling(&mut fields, &mut batch, &disc, 0.4).map_err(|e| e.to_string())?;
        worst = worst.max(rel_diff(&fields.e1, &e_ref)).max(rel_diff(&batch.w, &w_ref));
    }
    Ok((
        worst <= 1e-10 && dims.0 <= 64 && dims.1 <= 8,
        format!("N1 = {}, Np = {}, max relative deviation {worst:.3e} (bound 1e-10)", dims.0, dims.1),
    ))
}

fn criterion_7() -> Outcome {
    let tol = 1e-12;
    let mut disc = small_disc(colella(), BackgroundSpec::default());
    disc.solver = SolverSettings { tol, max_iter: 5000 };
    let field_energy = |f: &FieldState| {
        0.5 * quadratic_form(&disc.masses.m1, &f.e1) + 0.5 * quadratic_form(&disc.masses.m2, &f.b1)
    };
    let (mut worst_maxwell, mut worst_coupling) = (0.0f64, 0.0f64);
    for seed in 0..50 {
        let mut f = random_fields(&disc, 100 + seed);
        let h0 = field_energy(&f);
        step_maxwell(&mut f, &disc, 0.5).map_err(|e| e.to_string())?;
        worst_maxwell = worst_maxwell.max(((field_energy(&f) - h0) / h0).abs());

        let mut f = random_fields(&disc, 200 + seed);
        f.b1.iter_mut().for_each(|x| *x = 0.0);
        let mut batch = random_markers(&disc, 40, 300 + seed);
        let h0 = hamiltonian(&batch, &f, &disc.masses, &disc.phys).map_err(|e| e.to_string())?.total;
        step_coupling(&mut f, &mut batch, &disc, 0.5).map_err(|e| e.to_string())?;
        let h1 = hamiltonian(&batch, &f, &disc.masses, &disc.phys).map_err(|e| e.to_string())?.total;
        worst_coupling = worst_coupling.max(((h1 - h0) / h0).abs());
    }

    let mapping = MappingSpec::cuboid([3.0, 2.0, 1.5]).unwrap();
    let disc_b = small_disc(mapping, BackgroundSpec { n0: 1.0, b0: [0.3, -0.5, 1.1] });
    let b0 = disc_b.background_b().map_err(|e| e.to_string())?;
    let fields = random_fields(&disc_b, 5);
    let mut batch = random_markers(&disc_b, 2000, 6);
    let before = batch.v.clone();
    let h0 = hamiltonian(&batch, &fields, &disc_b.masses, &disc_b.phys).map_err(|e| e.to_string())?.total;
    step_lorentz_magnetic(&mut batch, &b0, &disc_b, 0.7);
    let h1 = hamiltonian(&batch, &fields, &disc_b.masses, &disc_b.phys).map_err(|e| e.to_string())?.total;
    let speed = |v: &[f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let worst_speed = before
        .iter()
        .zip(&batch.v)
        .map(|(a, b)| (speed(a) - speed(b)).abs() / speed(a).max(1.0))
        .fold(0.0f64, f64::max);
    let h_err = ((h1 - h0) / h0).abs();
    let ok = worst_maxwell <= 10.0 * tol && worst_coupling <= 10.0 * tol && worst_speed <= 1e-14 && h_err <= 1e-14;
    Ok((
        ok,
        format!(
            "50 states: maxwell {worst_maxwell:.2e}, coupling {worst_coupling:.2e} (bound {:.0e}); lorentz |v| {worst_speed:.2e}, H {h_err:.2e}",
            10.0 * tol
        ),
    ))
}

fn criterion_8() -> Outcome {
    let mut c = preset_config("landau-colella");
    c.grid.n_cells = [16, 16, 1];
    c.particles.per_cell = 100;
    let start = Instant::now();
    let s = run(c)?;
    let secs = start.elapsed().as_secs_f64();
    let fit = fit_damping_rate(&s.time, &s.h_e, 6, DEFAULT_MAXIMA_WINDOW).map_err(|e| e.to_string())?;
    let err = max_step_error(&s);
    Ok((
        (fit.slope - LANDAU_SLOPE).abs() <= 0.08 && err <= 1e-8 && secs < 900.0,
        format!("slope {:.4} (target {LANDAU_SLOPE} ± 0.08), max energy error {err:.3e} (bound 1e-8), {secs:.0} s", fit.slope),
    ))
}

fn criterion_9() -> Outcome {
    let mut c = preset_config("bernstein");
    c.mapping.lengths[0] = 72.0;
    c.grid.n_cells = [256, 1, 1];
    c.time.t_end = 500.0;
    c.particles.per_cell = 200;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    Simulation::new(c).and_then(|mut s| s.run(Some(dir.path()), false)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let (peaks, overlays) = analyze_spectrum(dir.path(), 4.0, 0.05).map_err(|e| e.to_string())?;
    let h = hybrid_frequencies(1.0, 1.0).map_err(|e| e.to_string())?;
    let consistent = (overlays.omega_l - h.omega_l).abs() < 1e-12 && (overlays.omega_r - h.omega_r).abs() < 1e-12;
    let mut ok = consistent && secs < 3600.0 && peaks.targets.len() == 2;
    let mut parts = Vec::new();
    for t in &peaks.targets {
        match &t.peak {
            Some(p) => {
                ok &= t.offset <= 0.05 && t.prominence >= MIN_PROMINENCE;
                parts.push(format!(
                    "ω {:.4}: peak {:.4} (offset {:.4}, prominence {:.1})",
                    t.target, p.omega, t.offset, t.prominence
                ));
            }
            None => {
                ok = false;
                parts.push(format!("ω {:.4}: no peak", t.target));
            }
        }
    }
    Ok((ok, format!("{}, {secs:.0} s", parts.join("; "))))
}

fn criterion_10() -> Outcome {
    let mut c = desk_landau();
    c.time.t_end = 3.0;
    c.model.kind = ModelKind::Lvm;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for (k, threads) in [1usize, 1, 4].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        let config = c.clone();
        pool.install(|| Simulation::new(config).and_then(|mut s| s.run(Some(&out), false)))
            .map_err(|e| e.to_string())?;
        files.push(fs::read(out.join(SCALARS_FILE)).map_err(|e| e.to_string())?);
    }
    let same = files.windows(2).all(|w| w[0] == w[1]);
    Ok((same, format!("scalars.csv byte-identical across 2 runs at 1 thread and 1 run at 4 threads: {same}")))
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut failures = 0;
    let mut report = |n: usize, outcome: Outcome, secs: f64| {
        let (ok, msg) = match outcome {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!("criterion {n:>2}: {} | {msg} [{secs:.1} s]", if ok { "PASS" } else { "FAIL" });
    };
    let timed = |f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let out = f();
        (out, start.elapsed().as_secs_f64())
    };

    if wanted(1) || wanted(2) {
        let (landau, secs) = {
            let start = Instant::now();
            (run(desk_landau()).map(|series| Landau { series }), start.elapsed().as_secs_f64())
        };
        for n in [1, 2] {
            if wanted(n) {
                let outcome = match &landau {
                    Ok(l) if n == 1 => criterion_1(l),
                    Ok(l) => criterion_2(l),
                    Err(e) => Err(e.clone()),
                };
                report(n, outcome, secs);
            }
        }
    }
    let rest: [(usize, &dyn Fn() -> Outcome); 8] = [
        (3, &criterion_3),
        (4, &criterion_4),
        (5, &criterion_5),
        (6, &criterion_6),
        (7, &criterion_7),
        (8, &criterion_8),
        (9, &criterion_9),
        (10, &criterion_10),
    ];
    for (n, f) in rest {
        if wanted(n) {
            let (outcome, secs) = timed(f);
            report(n, outcome, secs);
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
