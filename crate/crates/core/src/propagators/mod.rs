//! Split time integration of the coupled particle–field system.
//!
//! The geometric scheme composes five substeps, each conserving the discrete
//! energy: `Maxwell` (curl part of the fields), `Coupling` (electric field and
//! weights), `AdvectEta`, `LorentzE` and `LorentzB`. The direct delta-f
//! comparison scheme uses `AdvectEta`, `LorentzE`, `DdfAmpere`, `DdfWeights`,
//! `DdfLorentzB` and `Maxwell`.

mod accumulate;
mod substeps;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

pub use accumulate::{
    accumulate_coupling, accumulate_current, current_from_rows, Coupling, CouplingOperator, MarkerRows,
};
pub use substeps::{
    ddf_ampere, ddf_lorentz_magnetic, ddf_weights, rotate_velocity, step_advect_eta, step_coupling,
    step_lorentz_electric, step_lorentz_magnetic, step_maxwell,
};

use crate::error::{Error, Result};
use crate::feec::{DeRhamComplex, DenseFactor, MassMatrices, Precond, Space};
use crate::geometry::{MappingKind, MappingSpec};
use crate::markers::{BackgroundSpec, MarkerBatch, PhysParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 10_000 }
    }
}

/// Largest `V1` dimension for which `M1` is factored densely.
pub const DENSE_FACTOR_LIMIT: usize = 4096;

/// Everything that stays fixed during a run: spaces, geometry, matrices and
/// parameters.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub complex: DeRhamComplex,
    pub mapping: MappingSpec,
    pub masses: MassMatrices,
    /// `Curlᵀ M2 Curl`.
    pub curl_curl: CsrMatrix<f64>,
    /// `Curlᵀ M2`.
    pub curl_t_m2: CsrMatrix<f64>,
    pub phys: PhysParams,
    pub background: BackgroundSpec,
    pub solver: SolverSettings,
    /// Cholesky factor of `M1` for small problems.
    pub m1_factor: Option<DenseFactor>,
}

impl Discretization {
    pub fn new(
        complex: DeRhamComplex,
        mapping: MappingSpec,
        phys: PhysParams,
        background: BackgroundSpec,
        solver: SolverSettings,
    ) -> Result<Self> {
        let masses = MassMatrices::assemble(&complex, &mapping)?;
        let curl_t = complex.curl().transpose();
        let curl_t_m2 = &curl_t * &masses.m2;
        let curl_curl = &curl_t_m2 * complex.curl();
        let m1_factor = if masses.m1.nrows() <= DENSE_FACTOR_LIMIT { DenseFactor::new(&masses.m1) } else { None };
        Ok(Self { complex, mapping, masses, curl_curl, curl_t_m2, phys, background, solver, m1_factor })
    }

    /// Preconditioner for systems dominated by `M1`.
    pub fn m1_precond(&self) -> Precond<'_> {
        self.m1_factor.as_ref().map_or(Precond::Jacobi, Precond::Factor)
    }

    /// `V2` coefficients of the constant physical field `background.b0`.
    pub fn background_b(&self) -> Result<Vec<f64>> {
        constant_two_form(&self.complex, &self.mapping, self.background.b0)
    }
}

/// Exact `V2` coefficients of a constant physical field on a cuboid. The
/// 2-form pull-back of `B` is `√g DL⁻¹ B`, constant per component, and a
/// constant is reproduced by equal coefficients since the spline families sum
/// to `1` (main) and `n` (derivative).
pub fn constant_two_form(complex: &DeRhamComplex, mapping: &MappingSpec, b: [f64; 3]) -> Result<Vec<f64>> {
    let nb = complex.block_dim();
    let mut out = vec![0.0; 3 * nb];
    if b.iter().all(|x| *x == 0.0) {
        return Ok(out);
    }
    if mapping.kind() != MappingKind::Cuboid {
        return Err(Error::InvalidArgument(
            "a nonzero background magnetic field is only supported on cuboid mappings".into(),
        ));
    }
    let l = mapping.lengths();
    let n = complex.n_cells();
    for c in 0..3 {
        let (d1, d2) = ((c + 1) % 3, (c + 2) % 3);
        let pulled = b[c] * l[d1] * l[d2];
        let value = pulled / (n[d1] * n[d2]) as f64;
        out[c * nb..(c + 1) * nb].iter_mut().for_each(|x| *x = value);
    }
    Ok(out)
}

/// Exact `V1` coefficients of a constant physical field on a cuboid.
pub fn constant_one_form(complex: &DeRhamComplex, mapping: &MappingSpec, e: [f64; 3]) -> Result<Vec<f64>> {
    let nb = complex.block_dim();
    let mut out = vec![0.0; 3 * nb];
    if e.iter().all(|x| *x == 0.0) {
        return Ok(out);
    }
    if mapping.kind() != MappingKind::Cuboid {
        return Err(Error::InvalidArgument(
            "a nonzero background electric field is only supported on cuboid mappings".into(),
        ));
    }
    let l = mapping.lengths();
    let n = complex.n_cells();
    for c in 0..3 {
        let value = e[c] * l[c] / n[c] as f64;
        out[c * nb..(c + 1) * nb].iter_mut().for_each(|x| *x = value);
    }
    Ok(out)
}

/// Field coefficients: perturbations `e1`, `b1` and backgrounds `e0`, `b0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub e1: Vec<f64>,
    pub b1: Vec<f64>,
    pub e0: Vec<f64>,
    pub b0: Vec<f64>,
}

impl FieldState {
    pub fn zeros(complex: &DeRhamComplex) -> Self {
        let n1 = complex.dim(Space::V1);
        let n2 = complex.dim(Space::V2);
        Self { e1: vec![0.0; n1], b1: vec![0.0; n2], e0: vec![0.0; n1], b0: vec![0.0; n2] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub fields: FieldState,
    pub markers: MarkerBatch,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Substep {
    Maxwell,
    Coupling,
    AdvectEta,
    LorentzE,
    LorentzB,
    DdfAmpere,
    DdfWeights,
    DdfLorentzB,
}

impl Substep {
    pub const ALL: [Substep; 8] = [
        Substep::Maxwell,
        Substep::Coupling,
        Substep::AdvectEta,
        Substep::LorentzE,
        Substep::LorentzB,
        Substep::DdfAmpere,
        Substep::DdfWeights,
        Substep::DdfLorentzB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Substep::Maxwell => "maxwell",
            Substep::Coupling => "coupling",
            Substep::AdvectEta => "advect-eta",
            Substep::LorentzE => "lorentz-e",
            Substep::LorentzB => "lorentz-b",
            Substep::DdfAmpere => "ddf-ampere",
            Substep::DdfWeights => "ddf-weights",
            Substep::DdfLorentzB => "ddf-lorentz-b",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|s| *s == self).unwrap()
    }
}

impl fmt::Display for Substep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Substep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown substep '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    LieTrotter,
    Strang,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstepSchedule {
    pub substeps: Vec<Substep>,
    pub splitting: Splitting,
}

impl SubstepSchedule {
    pub fn vlasov_maxwell(splitting: Splitting) -> Self {
        use Substep::*;
        Self { substeps: vec![Maxwell, Coupling, AdvectEta, LorentzE, LorentzB], splitting }
    }

    /// Electrostatic reduction: no Maxwell substep, so `b1` never changes.
    pub fn vlasov_ampere(splitting: Splitting) -> Self {
        use Substep::*;
        Self { substeps: vec![Coupling, AdvectEta, LorentzE, LorentzB], splitting }
    }

    pub fn direct_deltaf(splitting: Splitting, maxwell: bool) -> Self {
        use Substep::*;
        let mut substeps = vec![AdvectEta, LorentzE, DdfAmpere, DdfWeights, DdfLorentzB];
        if maxwell {
            substeps.push(Maxwell);
        }
        Self { substeps, splitting }
    }

    /// The sequence of `(substep, fraction of dt)` this schedule applies.
    /// Strang uses the symmetric composition with the innermost substep
    /// taken once with the full step.
    pub fn sequence(&self) -> Vec<(Substep, f64)> {
        let s = &self.substeps;
        match self.splitting {
            Splitting::LieTrotter => s.iter().map(|&x| (x, 1.0)).collect(),
            Splitting::Strang => {
                let Some((&last, head)) = s.split_last() else {
                    return Vec::new();
                };
                let mut out: Vec<(Substep, f64)> = head.iter().map(|&x| (x, 0.5)).collect();
                out.push((last, 1.0));
                out.extend(head.iter().rev().map(|&x| (x, 0.5)));
                out
            }
        }
    }
}

/// Accumulated wall-clock time and call counts per substep.
#[derive(Debug, Clone, Default)]
pub struct Timings {
    entries: [(Duration, usize); 8],
    pub cg_iterations: usize,
}

impl Timings {
    pub fn record(&mut self, s: Substep, d: Duration) {
        let e = &mut self.entries[s.index()];
        e.0 += d;
        e.1 += 1;
    }

    pub fn get(&self, s: Substep) -> (Duration, usize) {
        self.entries[s.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Substep, Duration, usize)> + '_ {
        Substep::ALL.iter().map(|&s| (s, self.entries[s.index()].0, self.entries[s.index()].1))
    }
}

/// Applies one substep for time `dt`; returns CG iterations spent.
pub fn apply_substep(s: Substep, state: &mut State, disc: &Discretization, dt: f64) -> Result<usize> {
    let State { fields, markers, .. } = state;
    match s {
        Substep::Maxwell => step_maxwell(fields, disc, dt),
        Substep::Coupling => step_coupling(fields, markers, disc, dt),
        Substep::AdvectEta => {
            step_advect_eta(markers, &disc.mapping, dt);
            Ok(0)
        }
        Substep::LorentzE => {
            step_lorentz_electric(markers, &fields.e0, disc, dt);
            Ok(0)
        }
        Substep::LorentzB => {
            step_lorentz_magnetic(markers, &fields.b0, disc, dt);
            Ok(0)
        }
        Substep::DdfAmpere => ddf_ampere(fields, markers, disc, dt),
        Substep::DdfWeights => {
            ddf_weights(fields, markers, disc, dt);
            Ok(0)
        }
        Substep::DdfLorentzB => {
            ddf_lorentz_magnetic(fields, markers, disc, dt);
            Ok(0)
        }
    }
}

/// Advances `state` by one step of size `dt` under `schedule`.
pub fn compose_step(
    schedule: &SubstepSchedule,
    state: &mut State,
    disc: &Discretization,
    dt: f64,
    timings: &mut Timings,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    for (s, fraction) in schedule.sequence() {
        let start = Instant::now();
        timings.cg_iterations += apply_substep(s, state, disc, fraction * dt)?;
        timings.record(s, start.elapsed());
    }
    state.time += dt;
    Ok(())
}

/// One step of the direct delta-f comparison scheme.
pub fn direct_deltaf_step(
    state: &mut State,
    disc: &Discretization,
    dt: f64,
    splitting: Splitting,
    maxwell: bool,
    timings: &mut Timings,
) -> Result<()> {
    compose_step(&SubstepSchedule::direct_deltaf(splitting, maxwell), state, disc, dt, timings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strang_sequence_is_palindromic() {
        let s = SubstepSchedule::vlasov_maxwell(Splitting::Strang).sequence();
        assert_eq!(s.len(), 9);
        for i in 0..4 {
            assert_eq!(s[i], s[8 - i]);
            assert_eq!(s[i].1, 0.5);
        }
        assert_eq!(s[4], (Substep::LorentzB, 1.0));
        let total: f64 = s.iter().filter(|x| x.0 == Substep::Coupling).map(|x| x.1).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn single_substep_strang_equals_lie() {
        for s in Substep::ALL {
            let lie = SubstepSchedule { substeps: vec![s], splitting: Splitting::LieTrotter };
            let strang = SubstepSchedule { substeps: vec![s], splitting: Splitting::Strang };
            assert_eq!(lie.sequence(), strang.sequence());
        }
        let empty = SubstepSchedule { substeps: vec![], splitting: Splitting::Strang };
        assert!(empty.sequence().is_empty());
    }

    #[test]
    fn substep_names_round_trip() {
        for s in Substep::ALL {
            assert_eq!(s.name().parse::<Substep>().unwrap(), s);
        }
        assert!("warp".parse::<Substep>().is_err());
    }
}
