//! Setup, time loop and output files of a run.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{InitField, PhaseRule, SimConfig};
use crate::diagnostics::{
    bernstein_roots, cold_plasma_modes, cvk_peak_offsets, CvkPeaks, dispersion_spectrum, hamiltonian, hybrid_frequencies,
    Energies, Grid2, ScalarSeries, SCALARS_HEADER,
};
use crate::error::{Error, Result};
use crate::feec::solver::spmv_alloc;
use crate::feec::{project_v0_dual, solve_poisson, DeRhamComplex, Space};
use crate::markers::{eval_f0, sample_markers, MarkerBatch, MARKER_CHUNK};
use crate::propagators::{compose_step, Discretization, FieldState, State, SubstepSchedule, Timings};

pub const FIELDS_MAGIC: &[u8; 8] = b"LVMFLD01";

pub const SCALARS_FILE: &str = "scalars.csv";
pub const EX_LINE_FILE: &str = "ex_line.bin";
pub const ECHO_FILE: &str = "config.echo.txt";
pub const FIELDS_FILE: &str = "fields.bin";
pub const MARKERS_FILE: &str = "markers.bin";
pub const SPECTRUM_FILE: &str = "spectrum.bin";
pub const OVERLAYS_FILE: &str = "overlays.json";

pub struct Simulation {
    pub config: SimConfig,
    pub disc: Discretization,
    pub schedule: SubstepSchedule,
    pub state: State,
    pub step: usize,
    pub timings: Timings,
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: SimConfig,
    pub series: ScalarSeries,
    pub ex_line: Grid2,
    pub timings: Timings,
    pub output_dir: Option<PathBuf>,
}

impl Simulation {
    /// Builds spaces and matrices, samples markers and sets initial fields.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.check()?;
        let mapping = config.mapping_spec()?;
        let phys = config.phys()?;
        let background = config.background();
        let complex = DeRhamComplex::periodic(config.grid.n_cells, config.grid.degrees)?;
        let disc = Discretization::new(complex, mapping, phys, background, config.solver())?;
        let mut markers = sample_markers(config.n_markers(), &disc.mapping, &phys, &background, config.particles.seed)?;
        init_weights(&config, &disc, &mut markers);
        let mut fields = FieldState::zeros(&disc.complex);
        fields.b0 = disc.background_b()?;
        fields.e1 = initial_field(&config, &disc, &markers)?;
        let schedule = config.schedule();
        Ok(Self {
            config,
            disc,
            schedule,
            state: State { fields, markers, time: 0.0 },
            step: 0,
            timings: Timings::default(),
        })
    }

    /// Restores a run from `fields.bin` and `markers.bin` in `dir`.
    pub fn resume(config: SimConfig, dir: &Path) -> Result<Self> {
        let mut sim = Self::new(config)?;
        let (step, time, e1, b1) = read_fields(&dir.join(FIELDS_FILE))?;
        if e1.len() != sim.state.fields.e1.len() || b1.len() != sim.state.fields.b1.len() {
            return Err(Error::Format {
                path: dir.join(FIELDS_FILE),
                msg: "field dimensions do not match the configuration".into(),
            });
        }
        let markers = MarkerBatch::read_snapshot(&dir.join(MARKERS_FILE), &sim.disc.phys, &sim.disc.background)?;
        if markers.len() != sim.config.n_markers() {
            return Err(Error::Format {
                path: dir.join(MARKERS_FILE),
                msg: format!("expected {} markers, found {}", sim.config.n_markers(), markers.len()),
            });
        }
        sim.state.fields.e1 = e1;
        sim.state.fields.b1 = b1;
        sim.state.markers = markers;
        sim.state.time = time;
        sim.step = step;
        Ok(sim)
    }

    pub fn energies(&self) -> Result<Energies> {
        hamiltonian(&self.state.markers, &self.state.fields, &self.disc.masses, &self.disc.phys)
    }

    pub fn div_b_inf(&self) -> f64 {
        spmv_alloc(self.disc.complex.div(), &self.state.fields.b1)
            .iter()
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn advance(&mut self) -> Result<()> {
        let dt = self.config.time.dt;
        compose_step(&self.schedule, &mut self.state, &self.disc, dt, &mut self.timings).map_err(|e| Error::Step {
            step: self.step + 1,
            time: self.state.time,
            source: Box::new(e),
        })?;
        self.step += 1;
        // Recompute from the step count so resumed runs see identical times.
        self.state.time = self.step as f64 * dt;
        Ok(())
    }

    /// Physical `E_x` at the cell centers of the first direction.
    pub fn ex_line(&self) -> Vec<f64> {
        sample_ex_line(&self.disc, &self.state.fields.e1)
    }

    /// Runs to `t_end`, writing outputs when `out_dir` is given.
    pub fn run(&mut self, out_dir: Option<&Path>, progress: bool) -> Result<RunRecord> {
        let n_steps = self.config.n_steps();
        let save_every = self.config.output.save_every_steps;
        let mut writer = match out_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(ECHO_FILE), self.config.to_toml())?;
                let mut w = BufWriter::new(File::create(dir.join(SCALARS_FILE))?);
                writeln!(w, "{SCALARS_HEADER}")?;
                Some(w)
            }
            None => None,
        };
        let mut series = ScalarSeries::default();
        let n1 = self.disc.complex.n_cells()[0];
        let mut lines: Vec<f64> = Vec::new();
        let mut n_lines = 0;
        let started = Instant::now();
        loop {
            let energies = self.energies().map_err(|e| Error::Step {
                step: self.step,
                time: self.state.time,
                source: Box::new(e),
            })?;
            series.push(self.state.time, &energies, self.div_b_inf());
            if let Some(w) = writer.as_mut() {
                writeln!(w, "{}", series.row(series.len() - 1))?;
            }
            if self.step % save_every == 0 {
                lines.extend(self.ex_line());
                n_lines += 1;
            }
            if self.step >= n_steps {
                break;
            }
            self.advance()?;
            if progress && (self.step % 100 == 0 || self.step == n_steps) {
                eprintln!(
                    "step {:>7}/{n_steps}  t = {:>10.4}  H = {:.12e}  elapsed {:.1}s",
                    self.step,
                    self.state.time,
                    energies.total,
                    started.elapsed().as_secs_f64()
                );
            }
        }
        let lengths = self.disc.mapping.lengths();
        let ex_line = Grid2 {
            n_rows: n_lines,
            n_cols: n1,
            d_row: save_every as f64 * self.config.time.dt,
            d_col: lengths[0] / n1 as f64,
            data: lines,
        };
        if let (Some(dir), Some(mut w)) = (out_dir, writer) {
            w.flush()?;
            ex_line.write(&dir.join(EX_LINE_FILE))?;
            if self.config.output.save_fields {
                write_fields(&dir.join(FIELDS_FILE), self.step, self.state.time, &self.state.fields)?;
            }
            if self.config.output.save_markers {
                self.state.markers.write_snapshot(&dir.join(MARKERS_FILE))?;
            }
            let mut t = BufWriter::new(File::create(dir.join("timings.txt"))?);
            for (s, d, calls) in self.timings.iter().filter(|x| x.2 > 0) {
                writeln!(t, "{s:<14} {calls:>8} calls {:>12.3} s", d.as_secs_f64())?;
            }
            writeln!(t, "cg_iterations {}", self.timings.cg_iterations)?;
            writeln!(t, "wall {:.3} s", started.elapsed().as_secs_f64())?;
        }
        Ok(RunRecord {
            config: self.config.clone(),
            series,
            ex_line,
            timings: self.timings.clone(),
            output_dir: out_dir.map(Path::to_path_buf),
        })
    }
}

pub fn sample_ex_line(disc: &Discretization, e1: &[f64]) -> Vec<f64> {
    let n1 = disc.complex.n_cells()[0];
    (0..n1)
        .map(|j| {
            let eta = [(j as f64 + 0.5) / n1 as f64, 0.5, 0.5];
            let ehat = Vector3::from(disc.complex.eval_field(Space::V1, e1, eta));
            let dl = disc.mapping.jacobian(eta);
            let inv = dl.try_inverse().expect("mapping validated at construction");
            (inv.transpose() * ehat)[0]
        })
        .collect()
}

fn init_weights(config: &SimConfig, disc: &Discretization, markers: &mut MarkerBatch) {
    let exp = &config.experiment;
    let phys = disc.phys;
    let bg = disc.background;
    match exp.phase_rule() {
        PhaseRule::None => {}
        PhaseRule::Cosine => {
            let (delta, k) = (exp.delta, exp.k_mode);
            markers.init_weights(&disc.mapping, |x, v| delta * eval_f0(&phys, &bg, v) * (k * x[0]).cos());
        }
        PhaseRule::SumOfSines => {
            let a = exp.noise_amplitude;
            let lx = disc.mapping.lengths()[0];
            let modes = exp.mode_count;
            let two_pi = 2.0 * std::f64::consts::PI;
            markers.init_weights(&disc.mapping, |x, v| {
                let s: f64 = (1..=modes)
                    .map(|m| {
                        let m = m as f64;
                        (two_pi * m * x[0] / lx + two_pi * std::f64::consts::SQRT_2 * m * m).sin()
                    })
                    .sum();
                a * eval_f0(&phys, &bg, v) * s
            });
        }
        PhaseRule::UniformNoise => {
            // Separate stream family from the sampler so the noise does not
            // correlate with positions or velocities.
            let a = exp.noise_amplitude;
            let n = markers.len();
            let mut u = Vec::with_capacity(n);
            for chunk in 0..n.div_ceil(MARKER_CHUNK) {
                let mut rng = ChaCha8Rng::seed_from_u64(config.particles.seed ^ 0x6e6f_6973_6521);
                rng.set_stream(chunk as u64);
                for _ in 0..MARKER_CHUNK.min(n - chunk * MARKER_CHUNK) {
                    u.push(rng.gen_range(-1.0..=1.0));
                }
            }
            for p in 0..n {
                markers.w[p] = a * u[p] * markers.f0[p] / markers.s0[p];
            }
        }
    }
}

fn initial_field(config: &SimConfig, disc: &Discretization, markers: &MarkerBatch) -> Result<Vec<f64>> {
    let tol = disc.solver.tol;
    let iters = disc.solver.max_iter;
    let phys = disc.phys;
    match config.experiment.init_field() {
        InitField::Zero => Ok(vec![0.0; disc.complex.dim(Space::V1)]),
        InitField::Analytic => {
            let (delta, k) = (config.experiment.delta, config.experiment.k_mode);
            let q = phys.alpha_sq() / phys.eps * disc.background.n0 * delta;
            let mut rho = project_v0_dual(&disc.complex, &disc.mapping, |x| q * (k * x[0]).cos())?;
            remove_mean(&mut rho);
            solve_poisson(&disc.complex, &disc.masses.m1, &rho, tol, iters)
        }
        InitField::Deposit => {
            let mut rho = deposit_charge(disc, markers);
            remove_mean(&mut rho);
            solve_poisson(&disc.complex, &disc.masses.m1, &rho, tol, iters)
        }
    }
}

fn remove_mean(rho: &mut [f64]) {
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    rho.iter_mut().for_each(|r| *r -= mean);
}

/// `(α² / (N ε)) Σ_p w_p Λ⁰(η_p)`.
pub fn deposit_charge(disc: &Discretization, markers: &MarkerBatch) -> Vec<f64> {
    let mut rho = vec![0.0; disc.complex.dim(Space::V0)];
    if markers.is_empty() {
        return rho;
    }
    let scale = disc.phys.alpha_sq() / (markers.len() as f64 * disc.phys.eps);
    for p in 0..markers.len() {
        for (g, v) in disc.complex.eval_component(Space::V0, 0, markers.eta[p]) {
            rho[g] += scale * markers.w[p] * v;
        }
    }
    rho
}

/// Field checkpoint: magic, step, time, `dim e1`, `dim b1`, then `e1`, `b1`.
pub fn write_fields(path: &Path, step: usize, time: f64, fields: &FieldState) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(FIELDS_MAGIC)?;
    out.write_all(&(step as u64).to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    out.write_all(&(fields.e1.len() as u64).to_le_bytes())?;
    out.write_all(&(fields.b1.len() as u64).to_le_bytes())?;
    for x in fields.e1.iter().chain(&fields.b1) {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_fields(path: &Path) -> Result<(usize, f64, Vec<f64>, Vec<f64>)> {
    let bad = |msg: &str| Error::Format { path: path.to_path_buf(), msg: msg.into() };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 40 || &bytes[..8] != FIELDS_MAGIC {
        return Err(bad("missing or bad header"));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap() };
    let step = u64::from_le_bytes(word(0)) as usize;
    let time = f64::from_le_bytes(word(1));
    let n1 = u64::from_le_bytes(word(2)) as usize;
    let n2 = u64::from_le_bytes(word(3)) as usize;
    if bytes.len() != 40 + 8 * (n1 + n2) {
        return Err(bad("payload length does not match header"));
    }
    let vals: Vec<f64> = bytes[40..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    Ok((step, time, vals[..n1].to_vec(), vals[n1..].to_vec()))
}

#[derive(Debug, Serialize)]
struct BernsteinSample {
    k: f64,
    harmonic: usize,
    omega: f64,
}

#[derive(Debug, Serialize)]
pub struct Overlays {
    pub omega_p: f64,
    pub omega_c: f64,
    pub v_th: f64,
    pub omega_l: f64,
    pub omega_r: f64,
    pub half_integer_lines: Vec<f64>,
    pub cold_modes: Vec<crate::diagnostics::ColdModes>,
    bernstein: Vec<BernsteinSample>,
}

/// Closed-form overlay curves for a dispersion plot of the given run.
pub fn overlays(config: &SimConfig, k_max: f64, omega_max: f64, samples: usize) -> Result<Overlays> {
    let (omega_p, omega_c) = config.frequencies();
    let v_th = config.physics.v_th;
    let mut cold = Vec::new();
    let mut bern = Vec::new();
    let (omega_l, omega_r) = if omega_c > 0.0 {
        let h = hybrid_frequencies(omega_p, omega_c)?;
        (h.omega_l, h.omega_r)
    } else {
        (f64::NAN, f64::NAN)
    };
    for i in 0..samples {
        let k = k_max * i as f64 / (samples.max(2) - 1) as f64;
        if omega_c > 0.0 {
            cold.push(cold_plasma_modes(k, omega_p, omega_c)?);
            let harmonics = (omega_max / omega_c).ceil() as usize;
            for (n, w) in bernstein_roots(k, omega_p, omega_c, v_th, harmonics.max(1)) {
                bern.push(BernsteinSample { k, harmonic: n, omega: w });
            }
        }
    }
    let half_integer_lines = if omega_p > 0.0 {
        (0..)
            .map(|m| (m as f64 + 0.5) * omega_p)
            .take_while(|w| *w <= omega_max)
            .collect()
    } else {
        Vec::new()
    };
    Ok(Overlays {
        omega_p,
        omega_c,
        v_th,
        omega_l,
        omega_r,
        half_integer_lines,
        cold_modes: cold,
        bernstein: bern,
    })
}

/// Spectrum analysis of a finished run directory: writes `spectrum.bin`
/// (positive quadrant) and `overlays.json`, and reports the spectral peaks
/// near the hybrid cutoffs, searched within `±half_width · ω_p`.
pub fn analyze_spectrum(dir: &Path, k_start: f64, half_width: f64) -> Result<(CvkPeaks, Overlays)> {
    let text = fs::read_to_string(dir.join(ECHO_FILE))?;
    let config = SimConfig::parse(&text)?;
    let line = Grid2::read(&dir.join(EX_LINE_FILE))?;
    let spec = dispersion_spectrum(&line)?;
    spec.positive_quadrant().write(&dir.join(SPECTRUM_FILE))?;
    let (omega_p, _) = config.frequencies();
    let ov = overlays(&config, spec.k.iter().cloned().fold(0.0, f64::max), 4.0 * omega_p.max(1.0), 64)?;
    let targets: Vec<f64> = [ov.omega_l, ov.omega_r].into_iter().filter(|x| x.is_finite()).collect();
    let peaks = cvk_peak_offsets(&spec, k_start, &targets, half_width * omega_p);
    fs::write(
        dir.join(OVERLAYS_FILE),
        serde_json::to_string_pretty(&ov).map_err(|e| Error::InvalidArgument(e.to_string()))?,
    )?;
    Ok((peaks, ov))
}
