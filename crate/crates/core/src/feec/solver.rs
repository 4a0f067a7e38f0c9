//! Conjugate gradients and the sparse kernels used by the field solves.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows per parallel task in sparse products; fixed so results never depend
/// on the thread count.
const ROW_CHUNK: usize = 256;

/// A symmetric linear map applied without exposing its matrix.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Main diagonal, used for Jacobi scaling when available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl LinearOperator for CsrMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        spmv(self, x, y);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(diagonal(self))
    }
}

/// `y = A x`, parallel over row blocks; each row is summed in storage order.
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(a.nrows(), y.len());
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, out)| {
        let base = chunk * ROW_CHUNK;
        for (k, slot) in out.iter_mut().enumerate() {
            let r = base + k;
            let mut acc = 0.0;
            for j in offsets[r]..offsets[r + 1] {
                acc += vals[j] * x[cols[j]];
            }
            *slot = acc;
        }
    });
}

pub fn spmv_alloc(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    spmv(a, x, &mut y);
    y
}

/// `y = Aᵀ x`, computed sequentially in row order.
pub fn spmv_transpose(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.nrows(), x.len());
    let mut y = vec![0.0; a.ncols()];
    for (r, row) in a.row_iter().enumerate() {
        let xr = x[r];
        if xr == 0.0 {
            continue;
        }
        for (&c, &v) in row.col_indices().iter().zip(row.values()) {
            y[c] += v * xr;
        }
    }
    y
}

pub fn diagonal(a: &CsrMatrix<f64>) -> Vec<f64> {
    a.row_iter()
        .enumerate()
        .map(|(r, row)| row.get_entry(r).map_or(0.0, |e| e.into_value()))
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x^T A x` for a sparse matrix.
pub fn quadratic_form(a: &CsrMatrix<f64>, x: &[f64]) -> f64 {
    dot(x, &spmv_alloc(a, x))
}

/// Sum of two operators `A + s B`.
pub struct Shifted<'a, A: ?Sized, B: ?Sized> {
    pub a: &'a A,
    pub b: &'a B,
    pub scale: f64,
}

impl<A: LinearOperator + ?Sized, B: LinearOperator + ?Sized> LinearOperator for Shifted<'_, A, B> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.a.apply(x, y);
        if self.scale != 0.0 {
            let mut t = vec![0.0; y.len()];
            self.b.apply(x, &mut t);
            for (yi, ti) in y.iter_mut().zip(&t) {
                *yi += self.scale * ti;
            }
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let mut d = self.a.diagonal()?;
        if self.scale != 0.0 {
            let db = self.b.diagonal()?;
            for (x, y) in d.iter_mut().zip(&db) {
                *x += self.scale * y;
            }
        }
        Some(d)
    }
}

/// Dense Cholesky factor of a sparse SPD matrix, used as a preconditioner
/// for operators dominated by that matrix.
#[derive(Debug, Clone)]
pub struct DenseFactor {
    chol: Cholesky<f64, Dyn>,
}

impl DenseFactor {
    /// Returns `None` if `a` is not numerically positive definite.
    pub fn new(a: &CsrMatrix<f64>) -> Option<Self> {
        let mut dense = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
        for (r, c, v) in a.triplet_iter() {
            dense[(r, c)] += *v;
        }
        Cholesky::new(dense).map(|chol| Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// `z = A⁻¹ r`.
    pub fn solve_into(&self, r: &[f64], z: &mut [f64]) {
        let mut v = DVector::from_column_slice(r);
        self.chol.solve_mut(&mut v);
        z.copy_from_slice(v.as_slice());
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Precond<'a> {
    None,
    /// Inverse of the operator's diagonal, when it is available and positive.
    Jacobi,
    Factor(&'a DenseFactor),
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b − A x‖ / ‖b‖` (recursively updated).
    pub residual: f64,
}

/// Solves `A x = rhs` to relative residual `tol` with plain CG from zero.
pub fn cg_solve<A: LinearOperator + ?Sized>(
    op: &A,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    pcg(op, rhs, None, Precond::None, tol, max_iter).map(|r| r.x)
}

/// Preconditioned conjugate gradients with optional initial guess.
pub fn pcg<A: LinearOperator + ?Sized>(
    op: &A,
    rhs: &[f64],
    guess: Option<&[f64]>,
    precond: Precond<'_>,
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!(
            "right-hand side has length {}, operator has dimension {n}",
            rhs.len()
        )));
    }
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok(CgReport { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    if let Precond::Factor(f) = precond {
        if f.dim() != n {
            return Err(Error::InvalidArgument(format!(
                "preconditioner has dimension {}, operator has dimension {n}",
                f.dim()
            )));
        }
    }
    let inv_diag: Option<Vec<f64>> = match precond {
        Precond::Jacobi => op
            .diagonal()
            .filter(|d| d.iter().all(|v| *v > 0.0))
            .map(|d| d.iter().map(|v| 1.0 / v).collect()),
        _ => None,
    };
    let precondition = |r: &[f64], z: &mut [f64]| match (&inv_diag, precond) {
        (Some(inv), _) => z.iter_mut().zip(r).zip(inv).for_each(|((z, r), d)| *z = r * d),
        (None, Precond::Factor(f)) => f.solve_into(r, z),
        (None, _) => z.copy_from_slice(r),
    };

    let mut x = guess.map_or_else(|| vec![0.0; n], |g| g.to_vec());
    let mut ax = vec![0.0; n];
    let mut r: Vec<f64> = if guess.is_some() {
        op.apply(&x, &mut ax);
        rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    } else {
        rhs.to_vec()
    };
    let mut residual = norm(&r) / b_norm;
    if residual <= tol {
        return Ok(CgReport { x, iterations: 0, residual });
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NonConvergence { iterations: it, residual });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = norm(&r) / b_norm;
        if residual <= tol {
            return Ok(CgReport { x, iterations: it, residual });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual })
}
