//! Run configuration in TOML form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feec::spline::MAX_DEGREE;
use crate::geometry::{MappingKind, MappingSpec};
use crate::markers::{BackgroundSpec, PhysParams};
use crate::propagators::{SolverSettings, Splitting, Substep, SubstepSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mapping: MappingSection,
    pub grid: GridSection,
    pub physics: PhysicsSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub time: TimeSection,
    pub particles: ParticleSection,
    #[serde(default)]
    pub solvers: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingSection {
    pub kind: MappingKind,
    pub lengths: [f64; 3],
    #[serde(default)]
    pub alpha_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_cells: [usize; 3],
    pub degrees: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub alpha: f64,
    pub eps: f64,
    pub v_th: f64,
    #[serde(default = "one")]
    pub n0: f64,
    #[serde(default)]
    pub b0: [f64; 3],
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lvm,
    Lva,
    DirectDeltaF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Include the vacuum Maxwell substep in the direct delta-f scheme.
    #[serde(default)]
    pub maxwell: bool,
    /// Overrides the default substep order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<Vec<Substep>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { kind: ModelKind::Lvm, maxwell: false, substeps: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Landau,
    Bernstein,
    Custom,
}

/// Initial weight perturbation `f1 / f0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRule {
    /// `δ cos(k x)`.
    Cosine,
    /// `A u_p` with `u_p` uniform on `[−1, 1]`.
    UniformNoise,
    /// `A Σ_{m=1..M} sin(2π m x / L_x + 2π√2 m²)`.
    SumOfSines,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitField {
    /// Poisson solve of the analytic charge of the cosine perturbation.
    Analytic,
    /// Poisson solve of the charge deposited by the markers, mean removed.
    Deposit,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub k_mode: f64,
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub mode_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_rule: Option<PhaseRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_field: Option<InitField>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Custom,
            delta: 0.0,
            k_mode: 0.0,
            noise_amplitude: 0.0,
            mode_count: 0,
            phase_rule: None,
            init_field: None,
        }
    }
}

impl ExperimentSection {
    pub fn phase_rule(&self) -> PhaseRule {
        self.phase_rule.unwrap_or(match self.kind {
            ExperimentKind::Landau => PhaseRule::Cosine,
            ExperimentKind::Bernstein => PhaseRule::UniformNoise,
            ExperimentKind::Custom => PhaseRule::None,
        })
    }

    pub fn init_field(&self) -> InitField {
        self.init_field.unwrap_or(match self.kind {
            ExperimentKind::Landau => InitField::Analytic,
            ExperimentKind::Bernstein => InitField::Deposit,
            ExperimentKind::Custom => InitField::Zero,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "strang")]
    pub splitting: Splitting,
}

fn strang() -> Splitting {
    Splitting::Strang
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    pub per_cell: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { cg_tol: 1e-12, cg_max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    #[serde(default = "one_usize")]
    pub save_every_steps: usize,
    #[serde(default)]
    pub save_fields: bool,
    #[serde(default)]
    pub save_markers: bool,
}

fn one_usize() -> usize {
    1
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "output".into(), save_every_steps: 1, save_fields: false, save_markers: false }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, if present.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl SimConfig {
    /// Parses and validates a configuration; errors carry the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let config: SimConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            msg: e.message().to_string(),
        })?;
        config.validate().map_err(|(section, key, msg)| Error::Config {
            line: line_of_key(text, section, key),
            msg: format!("{section}.{key}: {msg}"),
        })?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn check(&self) -> Result<()> {
        self.validate().map_err(|(section, key, msg)| Error::Config {
            line: None,
            msg: format!("{section}.{key}: {msg}"),
        })
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let fail = |s, k, m: String| Err((s, k, m));
        if let Err(e) = self.mapping_spec() {
            return fail("mapping", "lengths", e.to_string());
        }
        for d in 0..3 {
            let (n, p) = (self.grid.n_cells[d], self.grid.degrees[d]);
            if n == 0 {
                return fail("grid", "n_cells", "cell counts must be positive".into());
            }
            if p == 0 || p > MAX_DEGREE {
                return fail("grid", "degrees", format!("degrees must lie in 1..={MAX_DEGREE}"));
            }
            if n < p {
                return fail("grid", "n_cells", format!("direction {d} has fewer cells ({n}) than its degree ({p})"));
            }
        }
        if let Err(e) = self.phys() {
            return fail("physics", "v_th", e.to_string());
        }
        if !(self.physics.n0 > 0.0) {
            return fail("physics", "n0", "background density must be positive".into());
        }
        if self.physics.b0.iter().any(|b| *b != 0.0) && self.mapping.kind != MappingKind::Cuboid {
            return fail("physics", "b0", "a nonzero background field requires a cuboid mapping".into());
        }
        if !(self.time.dt > 0.0) || !self.time.dt.is_finite() {
            return fail("time", "dt", format!("must be positive, got {}", self.time.dt));
        }
        if !(self.time.t_end >= self.time.dt) {
            return fail("time", "t_end", format!("must be at least dt, got {}", self.time.t_end));
        }
        if self.particles.per_cell == 0 {
            return fail("particles", "per_cell", "must be at least 1".into());
        }
        if !(self.solvers.cg_tol > 0.0 && self.solvers.cg_tol <= 1e-3) {
            return fail("solvers", "cg_tol", format!("must lie in (0, 1e-3], got {}", self.solvers.cg_tol));
        }
        if self.solvers.cg_max_iter == 0 {
            return fail("solvers", "cg_max_iter", "must be positive".into());
        }
        if self.output.save_every_steps == 0 {
            return fail("output", "save_every_steps", "must be positive".into());
        }
        let e = &self.experiment;
        match e.phase_rule() {
            PhaseRule::Cosine if e.k_mode <= 0.0 && e.delta != 0.0 => {
                return fail("experiment", "k_mode", "cosine perturbation needs a positive wavenumber".into())
            }
            PhaseRule::SumOfSines if e.mode_count == 0 => {
                return fail("experiment", "mode_count", "sum-of-sines needs at least one mode".into())
            }
            _ => {}
        }
        if e.init_field() == InitField::Analytic && e.phase_rule() != PhaseRule::Cosine {
            return fail("experiment", "init_field", "the analytic field is only defined for the cosine perturbation".into());
        }
        Ok(())
    }

    pub fn mapping_spec(&self) -> Result<MappingSpec> {
        MappingSpec::new(self.mapping.kind, self.mapping.lengths, self.mapping.alpha_c)
    }

    pub fn phys(&self) -> Result<PhysParams> {
        PhysParams::new(self.physics.alpha, self.physics.eps, self.physics.v_th)
    }

    pub fn background(&self) -> BackgroundSpec {
        BackgroundSpec { n0: self.physics.n0, b0: self.physics.b0 }
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings { tol: self.solvers.cg_tol, max_iter: self.solvers.cg_max_iter }
    }

    pub fn schedule(&self) -> SubstepSchedule {
        let splitting = self.time.splitting;
        let mut s = match self.model.kind {
            ModelKind::Lvm => SubstepSchedule::vlasov_maxwell(splitting),
            ModelKind::Lva => SubstepSchedule::vlasov_ampere(splitting),
            ModelKind::DirectDeltaF => SubstepSchedule::direct_deltaf(splitting, self.model.maxwell),
        };
        if let Some(list) = &self.model.substeps {
            s.substeps = list.clone();
        }
        s
    }

    pub fn n_steps(&self) -> usize {
        (self.time.t_end / self.time.dt).round() as usize
    }

    pub fn n_markers(&self) -> usize {
        self.particles.per_cell * self.grid.n_cells.iter().product::<usize>()
    }

    /// Plasma and cyclotron frequencies in code units.
    pub fn frequencies(&self) -> (f64, f64) {
        let b = self.physics.b0.iter().map(|x| x * x).sum::<f64>().sqrt();
        let eps = self.physics.eps.abs();
        (self.physics.alpha.abs() * self.physics.n0.sqrt() / eps, b / eps)
    }
}
