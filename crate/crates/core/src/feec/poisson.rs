//! Periodic Poisson solve `Gᵀ M1 G φ = ρ`, `e = −G φ`.

use nalgebra_sparse::CsrMatrix;

use super::complex::{DeRhamComplex, Space};
use super::solver::{pcg, spmv, Precond, spmv_alloc, spmv_transpose, LinearOperator};
use super::spline::gauss_legendre_unit;
use crate::error::{Error, Result};
use crate::geometry::MappingSpec;

/// Relative size of `Σ ρ_i` below which the right-hand side counts as
/// mean-free (and is projected exactly).
pub const COMPATIBILITY_TOL: f64 = 1e-10;

struct Laplacian<'a> {
    grad: &'a CsrMatrix<f64>,
    m1: &'a CsrMatrix<f64>,
}

impl LinearOperator for Laplacian<'_> {
    fn dim(&self) -> usize {
        self.grad.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = spmv_alloc(self.grad, x);
        let mut mg = vec![0.0; g.len()];
        spmv(self.m1, &g, &mut mg);
        y.copy_from_slice(&spmv_transpose(self.grad, &mg));
    }
}

/// Returns the `V1` coefficients of `e = −G φ` with `Gᵀ M1 G φ = rho`.
pub fn solve_poisson(
    complex: &DeRhamComplex,
    m1: &CsrMatrix<f64>,
    rho: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n0 = complex.dim(Space::V0);
    if rho.len() != n0 {
        return Err(Error::InvalidArgument(format!(
            "charge vector has length {}, expected {n0}",
            rho.len()
        )));
    }
    let sum: f64 = rho.iter().sum();
    let scale: f64 = rho.iter().map(|r| r.abs()).sum();
    if sum.abs() > COMPATIBILITY_TOL * scale {
        return Err(Error::Compatibility { mean: sum / n0 as f64 });
    }
    let mean = sum / n0 as f64;
    let rhs: Vec<f64> = rho.iter().map(|r| r - mean).collect();
    let op = Laplacian { grad: complex.grad(), m1 };
    let phi = pcg(&op, &rhs, None, Precond::None, tol, max_iter)?.x;
    Ok(spmv_alloc(complex.grad(), &phi).into_iter().map(|g| -g).collect())
}

/// Dual coefficients `∫ f(x(η)) Λ⁰_i(η) √g dη` of a physical scalar field.
pub fn project_v0_dual<F>(complex: &DeRhamComplex, mapping: &MappingSpec, f: F) -> Result<Vec<f64>>
where
    F: Fn([f64; 3]) -> f64,
{
    let n = complex.n_cells();
    let points = complex.degrees().iter().max().copied().unwrap_or(1) + 3;
    let (nodes, weights) = gauss_legendre_unit(points);
    let mut out = vec![0.0; complex.dim(Space::V0)];
    for cell in 0..complex.total_cells() {
        let c = complex.unflat(cell);
        for (i1, &x1) in nodes.iter().enumerate() {
            for (i2, &x2) in nodes.iter().enumerate() {
                for (i3, &x3) in nodes.iter().enumerate() {
                    let eta = [
                        (c[0] as f64 + x1) / n[0] as f64,
                        (c[1] as f64 + x2) / n[1] as f64,
                        (c[2] as f64 + x3) / n[2] as f64,
                    ];
                    let wq = weights[i1] * weights[i2] * weights[i3]
                        / (n[0] * n[1] * n[2]) as f64;
                    let b = mapping.bundle(eta)?;
                    let value = wq * b.sqrt_g * f([b.x[0], b.x[1], b.x[2]]);
                    for (g, v) in complex.eval_component(Space::V0, 0, eta) {
                        out[g] += value * v;
                    }
                }
            }
        }
    }
    Ok(out)
}
