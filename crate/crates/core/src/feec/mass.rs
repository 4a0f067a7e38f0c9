//! Metric-weighted mass matrices of the discrete spaces.

use std::io::Write;

use nalgebra::Matrix3;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;

use super::complex::{DeRhamComplex, Space};
use super::spline::gauss_legendre_unit;
use crate::error::Result;
use crate::geometry::{MappingBundle, MappingSpec};

/// Cells per parallel assembly task.
const CELL_CHUNK: usize = 16;

#[derive(Debug, Clone)]
pub struct MassMatrices {
    pub m0: CsrMatrix<f64>,
    pub m1: CsrMatrix<f64>,
    pub m2: CsrMatrix<f64>,
}

impl MassMatrices {
    pub fn assemble(complex: &DeRhamComplex, mapping: &MappingSpec) -> Result<Self> {
        Ok(Self {
            m0: assemble_mass(complex, mapping, Space::V0)?,
            m1: assemble_mass(complex, mapping, Space::V1)?,
            m2: assemble_mass(complex, mapping, Space::V2)?,
        })
    }
}

/// Pull-back weight of `space` at a point; scalar spaces use entry (0, 0).
fn weight(space: Space, b: &MappingBundle) -> Matrix3<f64> {
    let w = match space {
        Space::V0 => Matrix3::from_element(b.sqrt_g),
        Space::V1 => b.metric_inv * b.sqrt_g,
        Space::V2 => b.metric / b.sqrt_g,
        Space::V3 => Matrix3::from_element(1.0 / b.sqrt_g),
    };
    (w + w.transpose()) * 0.5
}

/// Quadrature points of one direction: per cell, `(eta, weight)` pairs.
fn axis_rule(n: usize, points: usize) -> Vec<Vec<(f64, f64)>> {
    let (x, w) = gauss_legendre_unit(points);
    let h = 1.0 / n as f64;
    (0..n)
        .map(|c| x.iter().zip(&w).map(|(x, w)| ((c as f64 + x) * h, w * h)).collect())
        .collect()
}

/// Assembles `M_ij = ∫ Λ_i · W Λ_j dη` with the pull-back weight `W` of the
/// space, using Gauss–Legendre quadrature with `max degree + 1` points per
/// cell and direction. The result is exactly symmetric.
pub fn assemble_mass(
    complex: &DeRhamComplex,
    mapping: &MappingSpec,
    space: Space,
) -> Result<CsrMatrix<f64>> {
    let n = complex.n_cells();
    let points = complex.degrees().iter().max().copied().unwrap_or(1) + 1;
    let rules: Vec<_> = (0..3).map(|d| axis_rule(n[d], points)).collect();
    let total = complex.total_cells();
    let ncomp = space.components();

    let per_chunk: Vec<Result<Vec<(usize, usize, f64)>>> = (0..total)
        .collect::<Vec<_>>()
        .par_chunks(CELL_CHUNK)
        .map(|cells| {
            let mut out = Vec::new();
            for &cell in cells {
                let idx = complex.unflat(cell);
                element(complex, mapping, space, ncomp, &rules, idx, &mut out)?;
            }
            Ok(out)
        })
        .collect();

    // Upper triangle, merged in cell order, then mirrored.
    let mut upper = Vec::new();
    for chunk in per_chunk {
        upper.extend(chunk?);
    }
    upper.sort_by_key(|&(r, c, _)| (r, c));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(upper.len() / 2);
    for (r, c, v) in upper {
        match merged.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => merged.push((r, c, v)),
        }
    }
    let dim = complex.dim(space);
    let mut coo = CooMatrix::new(dim, dim);
    for &(r, c, v) in &merged {
        coo.push(r, c, v);
        if r != c {
            coo.push(c, r, v);
        }
    }
    Ok(CsrMatrix::from(&coo))
}

fn element(
    complex: &DeRhamComplex,
    mapping: &MappingSpec,
    space: Space,
    ncomp: usize,
    rules: &[Vec<Vec<(f64, f64)>>],
    cell: [usize; 3],
    out: &mut Vec<(usize, usize, f64)>,
) -> Result<()> {
    // Local functions are identified by global index; the index set of a
    // component is the same at every point of the cell.
    let mut indices: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); ncomp];
    for &(e1, w1) in &rules[0][cell[0]] {
        for &(e2, w2) in &rules[1][cell[1]] {
            for &(e3, w3) in &rules[2][cell[2]] {
                let eta = [e1, e2, e3];
                let wq = w1 * w2 * w3;
                let bundle = mapping.bundle(eta)?;
                let wm = weight(space, &bundle);
                for c in 0..ncomp {
                    let local = complex.eval_component(space, c, eta);
                    if indices[c].is_empty() {
                        indices[c] = local.iter().map(|e| e.0).collect();
                    }
                    values[c].clear();
                    values[c].extend(local.iter().map(|e| e.1));
                }
                if blocks.is_empty() {
                    for a in 0..ncomp {
                        for b in 0..ncomp {
                            blocks.push(vec![0.0; indices[a].len() * indices[b].len()]);
                        }
                    }
                }
                for a in 0..ncomp {
                    for b in a..ncomp {
                        let s = wq * wm[(a, b)];
                        if s == 0.0 {
                            continue;
                        }
                        let nb = indices[b].len();
                        let block = &mut blocks[a * ncomp + b];
                        for (i, &va) in values[a].iter().enumerate() {
                            let sa = s * va;
                            for (j, &vb) in values[b].iter().enumerate() {
                                block[i * nb + j] += sa * vb;
                            }
                        }
                    }
                }
            }
        }
    }
    for a in 0..ncomp {
        for b in a..ncomp {
            let nb = indices[b].len();
            let block = &blocks[a * ncomp + b];
            for (i, &gi) in indices[a].iter().enumerate() {
                for (j, &gj) in indices[b].iter().enumerate() {
                    let v = block[i * nb + j];
                    if v == 0.0 {
                        continue;
                    }
                    if a == b {
                        // Same block: keep one orientation of each pair; the
                        // element block is symmetric in exact arithmetic.
                        if gi <= gj {
                            out.push((gi, gj, v));
                        }
                    } else if gi <= gj {
                        out.push((gi, gj, v));
                    } else {
                        out.push((gj, gi, v));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Writes a matrix as `row col value` lines.
pub fn write_coo<W: Write>(m: &CsrMatrix<f64>, mut out: W) -> std::io::Result<()> {
    for (r, c, v) in m.triplet_iter() {
        writeln!(out, "{r} {c} {v:.17e}")?;
    }
    Ok(())
}
