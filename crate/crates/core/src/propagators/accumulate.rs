//! Particle-to-grid accumulation of currents and of the coupling operator.

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;

use crate::feec::{DeRhamComplex, LinearOperator, Space};
use crate::geometry::MappingSpec;
use crate::markers::{MarkerBatch, PhysParams, MARKER_CHUNK};

/// Per-marker sparse rows `a_p = Λ¹(η_p) · DL⁻¹(η_p) v_p` in `V1`.
#[derive(Debug, Clone)]
pub struct MarkerRows {
    offsets: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
    dim: usize,
}

impl MarkerRows {
    pub fn build(batch: &MarkerBatch, complex: &DeRhamComplex, mapping: &MappingSpec) -> Self {
        let parts: Vec<(Vec<usize>, Vec<u32>, Vec<f64>)> = batch
            .eta
            .par_chunks(MARKER_CHUNK)
            .zip(batch.v.par_chunks(MARKER_CHUNK))
            .map(|(etas, vs)| {
                let mut lens = Vec::with_capacity(etas.len());
                let mut idx = Vec::new();
                let mut val = Vec::new();
                for (&eta, v) in etas.iter().zip(vs) {
                    let u = mapping.logical_velocity(eta, &Vector3::from(*v));
                    let start = idx.len();
                    for c in 0..3 {
                        if u[c] == 0.0 {
                            continue;
                        }
                        for (g, b) in complex.eval_component(Space::V1, c, eta) {
                            idx.push(g as u32);
                            val.push(b * u[c]);
                        }
                    }
                    lens.push(idx.len() - start);
                }
                (lens, idx, val)
            })
            .collect();
        let mut offsets = Vec::with_capacity(batch.len() + 1);
        offsets.push(0);
        let total: usize = parts.iter().map(|p| p.1.len()).sum();
        let mut idx = Vec::with_capacity(total);
        let mut val = Vec::with_capacity(total);
        for (lens, i, v) in parts {
            for l in lens {
                offsets.push(offsets.last().unwrap() + l);
            }
            idx.extend(i);
            val.extend(v);
        }
        Self { offsets, idx, val, dim: complex.dim(Space::V1) }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, p: usize) -> (&[u32], &[f64]) {
        let r = self.offsets[p]..self.offsets[p + 1];
        (&self.idx[r.clone()], &self.val[r])
    }

    /// `a_pᵀ x`.
    #[inline]
    pub fn dot(&self, p: usize, x: &[f64]) -> f64 {
        let (i, v) = self.row(p);
        i.iter().zip(v).map(|(&i, &v)| v * x[i as usize]).sum()
    }

    /// `Σ_p c_p a_p`, reduced over fixed marker chunks in order.
    pub fn scatter(&self, c: &[f64]) -> Vec<f64> {
        self.reduce(|p, _| c[p])
    }

    /// `Σ_p c_p a_p (a_pᵀ x)`.
    pub fn gram_apply(&self, c: &[f64], x: &[f64]) -> Vec<f64> {
        self.reduce(|p, rows| c[p] * rows.dot(p, x))
    }

    /// `Σ_p c_p a_p ∘ a_p`, the diagonal of the Gram operator.
    pub fn gram_diagonal(&self, c: &[f64]) -> Vec<f64> {
        let n = self.len();
        let chunks: Vec<Vec<f64>> = (0..n.div_ceil(MARKER_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut out = vec![0.0; self.dim];
                for p in chunk * MARKER_CHUNK..((chunk + 1) * MARKER_CHUNK).min(n) {
                    let (i, v) = self.row(p);
                    for (&i, &v) in i.iter().zip(v) {
                        out[i as usize] += c[p] * v * v;
                    }
                }
                out
            })
            .collect();
        sum_in_order(chunks, self.dim)
    }

    fn reduce<F>(&self, coef: F) -> Vec<f64>
    where
        F: Fn(usize, &Self) -> f64 + Sync,
    {
        let n = self.len();
        let chunks: Vec<Vec<f64>> = (0..n.div_ceil(MARKER_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut out = vec![0.0; self.dim];
                for p in chunk * MARKER_CHUNK..((chunk + 1) * MARKER_CHUNK).min(n) {
                    let s = coef(p, self);
                    if s == 0.0 {
                        continue;
                    }
                    let (i, v) = self.row(p);
                    for (&i, &v) in i.iter().zip(v) {
                        out[i as usize] += s * v;
                    }
                }
                out
            })
            .collect();
        sum_in_order(chunks, self.dim)
    }
}

fn sum_in_order(chunks: Vec<Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut total = vec![0.0; dim];
    for part in chunks {
        for (t, x) in total.iter_mut().zip(&part) {
            *t += x;
        }
    }
    total
}

/// `(α² / (N ε)) Σ_p w_p a_p`.
pub fn accumulate_current(
    batch: &MarkerBatch,
    complex: &DeRhamComplex,
    mapping: &MappingSpec,
    phys: &PhysParams,
) -> Vec<f64> {
    let rows = MarkerRows::build(batch, complex, mapping);
    current_from_rows(&rows, batch, phys)
}

pub fn current_from_rows(rows: &MarkerRows, batch: &MarkerBatch, phys: &PhysParams) -> Vec<f64> {
    if batch.is_empty() {
        return vec![0.0; rows.dim()];
    }
    let scale = phys.alpha_sq() / (batch.len() as f64 * phys.eps);
    let mut j = rows.scatter(&batch.w);
    j.iter_mut().for_each(|x| *x *= scale);
    j
}

/// The coupling operator `EW u = (α² / (N v_th² ε²)) Σ_p (f0_p / s0_p) a_p (a_pᵀ u)`,
/// applied matrix-free.
#[derive(Debug, Clone)]
pub struct CouplingOperator {
    pub rows: MarkerRows,
    /// `f0_p / s0_p`.
    pub ratio: Vec<f64>,
    coef: Vec<f64>,
}

impl CouplingOperator {
    pub fn new(rows: MarkerRows, batch: &MarkerBatch, phys: &PhysParams) -> Self {
        let ratio: Vec<f64> = batch.f0.iter().zip(&batch.s0).map(|(f, s)| f / s).collect();
        let n = batch.len().max(1) as f64;
        let scale = phys.alpha_sq() / (n * phys.v_th * phys.v_th * phys.eps * phys.eps);
        let coef = ratio.iter().map(|r| scale * r).collect();
        Self { rows, ratio, coef }
    }

    /// Dense matrix of the operator, for small oracle problems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rows.dim();
        let mut m = DMatrix::zeros(n, n);
        for p in 0..self.rows.len() {
            let (i, v) = self.rows.row(p);
            for (&a, &va) in i.iter().zip(v) {
                for (&b, &vb) in i.iter().zip(v) {
                    m[(a as usize, b as usize)] += self.coef[p] * va * vb;
                }
            }
        }
        m
    }
}

impl LinearOperator for CouplingOperator {
    fn dim(&self) -> usize {
        self.rows.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.rows.gram_apply(&self.coef, x));
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.rows.gram_diagonal(&self.coef))
    }
}

/// Coupling operator and vector `EW_vec = (α² / (N ε)) Σ_p w_p a_p`.
pub struct Coupling {
    pub op: CouplingOperator,
    pub vec: Vec<f64>,
}

pub fn accumulate_coupling(
    batch: &MarkerBatch,
    complex: &DeRhamComplex,
    mapping: &MappingSpec,
    phys: &PhysParams,
) -> Coupling {
    let rows = MarkerRows::build(batch, complex, mapping);
    let vec = current_from_rows(&rows, batch, phys);
    Coupling { op: CouplingOperator::new(rows, batch, phys), vec }
}
