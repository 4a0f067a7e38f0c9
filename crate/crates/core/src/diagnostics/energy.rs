use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::feec::solver::quadratic_form;
use crate::feec::MassMatrices;
use crate::markers::{MarkerBatch, PhysParams};
use crate::propagators::FieldState;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energies {
    pub particles: f64,
    pub e: f64,
    pub b: f64,
    pub total: f64,
}

/// Discrete energy: `(α² v_th² / 2N) Σ s0 w² / f0 + ½ eᵀ M1 e + ½ bᵀ M2 b`.
/// The marker sum runs in marker order.
pub fn hamiltonian(
    batch: &MarkerBatch,
    fields: &FieldState,
    masses: &MassMatrices,
    phys: &PhysParams,
) -> Result<Energies> {
    let mut sum = 0.0;
    for p in 0..batch.len() {
        let f0 = batch.f0[p];
        if !(f0 > 0.0) {
            return Err(Error::InvalidMarker { index: p, f0 });
        }
        sum += batch.s0[p] * batch.w[p] * batch.w[p] / f0;
    }
    let particles = if batch.is_empty() {
        0.0
    } else {
        phys.alpha_sq() * phys.v_th * phys.v_th / (2.0 * batch.len() as f64) * sum
    };
    let e = 0.5 * quadratic_form(&masses.m1, &fields.e1);
    let b = 0.5 * quadratic_form(&masses.m2, &fields.b1);
    Ok(Energies { particles, e, b, total: particles + e + b })
}

/// `|(H^{n+1} − H^n) / H^n|` per step; entries with `H^n = 0` are NaN.
pub fn rel_energy_error(h: &[f64]) -> Vec<f64> {
    h.windows(2)
        .map(|w| if w[0] == 0.0 { f64::NAN } else { ((w[1] - w[0]) / w[0]).abs() })
        .collect()
}

pub const SCALARS_HEADER: &str = "time,H_total,H_particles,H_E,H_B,rel_energy_err,div_b_inf";

/// Per-step scalar record. `rel_energy_err` is NaN in the first row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalarSeries {
    pub time: Vec<f64>,
    pub h_total: Vec<f64>,
    pub h_particles: Vec<f64>,
    pub h_e: Vec<f64>,
    pub h_b: Vec<f64>,
    pub rel_energy_err: Vec<f64>,
    pub div_b_inf: Vec<f64>,
}

impl ScalarSeries {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn push(&mut self, time: f64, en: &Energies, div_b_inf: f64) {
        let rel = match self.h_total.last() {
            Some(&prev) if prev != 0.0 => ((en.total - prev) / prev).abs(),
            _ => f64::NAN,
        };
        self.time.push(time);
        self.h_total.push(en.total);
        self.h_particles.push(en.particles);
        self.h_e.push(en.e);
        self.h_b.push(en.b);
        self.rel_energy_err.push(rel);
        self.div_b_inf.push(div_b_inf);
    }

    pub fn row(&self, i: usize) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.time[i],
            self.h_total[i],
            self.h_particles[i],
            self.h_e[i],
            self.h_b[i],
            self.rel_energy_err[i],
            self.div_b_inf[i]
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SCALARS_HEADER}")?;
        for i in 0..self.len() {
            writeln!(out, "{}", self.row(i))?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse_csv(&text).map_err(|msg| Error::Format { path: path.to_path_buf(), msg })
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        if header.trim() != SCALARS_HEADER {
            return Err(format!("unexpected header '{header}'"));
        }
        let mut s = ScalarSeries::default();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", n + 2))?;
            if v.len() != 7 {
                return Err(format!("line {}: expected 7 columns, found {}", n + 2, v.len()));
            }
            s.time.push(v[0]);
            s.h_total.push(v[1]);
            s.h_particles.push(v[2]);
            s.h_e.push(v[3]);
            s.h_b.push(v[4]);
            s.rel_energy_err.push(v[5]);
            s.div_b_inf.push(v[6]);
        }
        Ok(s)
    }
}
