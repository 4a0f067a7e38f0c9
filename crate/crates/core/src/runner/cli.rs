use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::config::SimConfig;
use super::presets::{preset, PRESET_NAMES};
use super::sim::{analyze_spectrum, Simulation, SCALARS_FILE};
use crate::diagnostics::{fit_damping_rate, ScalarSeries, DEFAULT_MAXIMA_WINDOW};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "lvpic", about = "Structure-preserving delta-f PIC for linearized Vlasov-Maxwell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation from a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides `particles.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from the checkpoint files in this directory.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Print a preset configuration.
    Presets { name: Option<String> },
    /// Post-process a finished run directory.
    Analyze {
        #[arg(value_enum)]
        kind: AnalysisKind,
        #[arg(long)]
        input: PathBuf,
        /// Number of energy maxima used in the damping fit.
        #[arg(long, default_value_t = 6)]
        maxima: usize,
        /// Smallest wavenumber in the k-averaged spectrum.
        #[arg(long, default_value_t = 4.0)]
        k_start: f64,
        /// Peak search half-width around each cutoff, in units of ω_p.
        #[arg(long, default_value_t = 0.05)]
        half_width: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnalysisKind {
    Damping,
    Spectrum,
}

/// Entry point of the binary; returns the process exit code.
pub fn cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(parsed.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, output, seed, resume, threads, quiet } => {
            let text = fs::read_to_string(&config)?;
            let mut cfg = SimConfig::parse(&text)?;
            if let Some(s) = seed {
                cfg.particles.seed = s;
            }
            let out = output.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            if let Some(dir) = &resume {
                if dir == &out {
                    // Checkpoints in `out` would be read after outputs are truncated.
                    return Err(Error::InvalidArgument("--resume and the output directory must differ".into()));
                }
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            pool.install(|| run(cfg, &out, resume.as_deref(), !quiet))
        }
        Command::Presets { name: None } => {
            for n in PRESET_NAMES {
                println!("{n}");
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => match preset(&name) {
            Some(text) => {
                print!("{text}");
                Ok(())
            }
            None => Err(Error::InvalidArgument(format!(
                "unknown preset {name:?}; available: {}",
                PRESET_NAMES.join(", ")
            ))),
        },
        Command::Analyze { kind: AnalysisKind::Damping, input, maxima, .. } => {
            let s = ScalarSeries::read_csv(&input.join(SCALARS_FILE))?;
            let fit = fit_damping_rate(&s.time, &s.h_e, maxima, DEFAULT_MAXIMA_WINDOW)?;
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "slope {:.6}", fit.slope);
            let _ = writeln!(out, "damping_rate {:.6}", -0.5 * fit.slope);
            for (t, e) in &fit.maxima {
                let _ = writeln!(out, "maximum t = {t:.4} H_E = {e:.6e}");
            }
            Ok(())
        }
        Command::Analyze { kind: AnalysisKind::Spectrum, input, k_start, half_width, .. } => {
            let (peaks, _) = analyze_spectrum(&input, k_start, half_width)?;
            let mut out = std::io::stdout().lock();
            for t in &peaks.targets {
                let _ = match &t.peak {
                    Some(p) => writeln!(
                        out,
                        "target {:.6} peak {:.6} offset {:.6} prominence {:.1}",
                        t.target, p.omega, t.offset, t.prominence
                    ),
                    None => writeln!(out, "target {:.6} no peak within band", t.target),
                };
            }
            Ok(())
        }
    }
}

fn run(cfg: SimConfig, out: &Path, resume: Option<&Path>, progress: bool) -> Result<()> {
    let mut sim = match resume {
        Some(dir) => Simulation::resume(cfg, dir)?,
        None => Simulation::new(cfg)?,
    };
    let record = sim.run(Some(out), progress)?;
    if progress {
        let err = record.series.rel_energy_err.iter().skip(1).fold(0.0f64, |m, x| m.max(x.abs()));
        eprintln!("done: {} samples, max relative energy error {err:.3e}", record.series.len());
    }
    Ok(())
}
