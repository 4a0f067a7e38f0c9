use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::accumulate::{current_from_rows, CouplingOperator, MarkerRows};
use super::{Discretization, FieldState};
use crate::error::Result;
use crate::feec::solver::{pcg, spmv_alloc, Shifted};
use crate::feec::{LinearOperator, Space};
use crate::geometry::{wrap_unit, MappingSpec};
use crate::markers::{MarkerBatch, MARKER_CHUNK};

/// Crank–Nicolson step of `M1 ė = Curlᵀ M2 b`, `ḃ = −Curl e`, with `b`
/// eliminated: `(M1 + dt²/4 K) e' = (M1 − dt²/4 K) e + dt Curlᵀ M2 b` where
/// `K = Curlᵀ M2 Curl`, then `b' = b − dt/2 Curl (e' + e)`.
pub fn step_maxwell(fields: &mut FieldState, disc: &Discretization, dt: f64) -> Result<usize> {
    let e = &fields.e1;
    let b = &fields.b1;
    if e.iter().all(|x| *x == 0.0) && b.iter().all(|x| *x == 0.0) {
        return Ok(0);
    }
    let q = 0.25 * dt * dt;
    let m1e = spmv_alloc(&disc.masses.m1, e);
    let ke = spmv_alloc(&disc.curl_curl, e);
    let cb = spmv_alloc(&disc.curl_t_m2, b);
    let rhs: Vec<f64> = (0..e.len()).map(|i| m1e[i] - q * ke[i] + dt * cb[i]).collect();
    let op = Shifted { a: &disc.masses.m1, b: &disc.curl_curl, scale: q };
    let report = pcg(&op, &rhs, Some(e), disc.m1_precond(), disc.solver.tol, disc.solver.max_iter)?;
    let sum: Vec<f64> = report.x.iter().zip(e).map(|(a, b)| a + b).collect();
    let curl_sum = spmv_alloc(disc.complex.curl(), &sum);
    for (bi, ci) in fields.b1.iter_mut().zip(&curl_sum) {
        *bi -= 0.5 * dt * ci;
    }
    fields.e1 = report.x;
    Ok(report.iterations)
}

/// Crank–Nicolson step of the field–weight exchange
/// `M1 ė = −(α²/(Nε)) Σ w_p a_p`, `ẇ_p = (f0_p/s0_p)/(v_th² ε) a_pᵀ e`
/// with the weights eliminated.
pub fn step_coupling(
    fields: &mut FieldState,
    batch: &mut MarkerBatch,
    disc: &Discretization,
    dt: f64,
) -> Result<usize> {
    if batch.is_empty() {
        return Ok(0);
    }
    let rows = MarkerRows::build(batch, &disc.complex, &disc.mapping);
    let ew_vec = current_from_rows(&rows, batch, &disc.phys);
    let op = CouplingOperator::new(rows, batch, &disc.phys);
    let e = &fields.e1;
    let q = 0.25 * dt * dt;
    let m1e = spmv_alloc(&disc.masses.m1, e);
    let mut ewe = vec![0.0; e.len()];
    op.apply(e, &mut ewe);
    let rhs: Vec<f64> = (0..e.len()).map(|i| m1e[i] - q * ewe[i] - dt * ew_vec[i]).collect();
    let system = Shifted { a: &disc.masses.m1, b: &op, scale: q };
    let report = pcg(&system, &rhs, Some(e), disc.m1_precond(), disc.solver.tol, disc.solver.max_iter)?;
    let sum: Vec<f64> = report.x.iter().zip(e).map(|(a, b)| a + b).collect();
    let k = 0.5 * dt / (disc.phys.v_th * disc.phys.v_th * disc.phys.eps);
    update_weights(batch, &op.rows, &op.ratio, &sum, k);
    fields.e1 = report.x;
    Ok(report.iterations)
}

/// `w_p += k · ratio_p · a_pᵀ x`.
fn update_weights(batch: &mut MarkerBatch, rows: &MarkerRows, ratio: &[f64], x: &[f64], k: f64) {
    batch.w.par_chunks_mut(MARKER_CHUNK).enumerate().for_each(|(chunk, ws)| {
        let base = chunk * MARKER_CHUNK;
        for (j, w) in ws.iter_mut().enumerate() {
            let p = base + j;
            *w += k * ratio[p] * rows.dot(p, x);
        }
    });
}

/// Moves markers along `η̇ = DL⁻¹(η) v` with classical RK4 and wraps into
/// the unit cube. Affine mappings are advanced exactly.
pub fn step_advect_eta(batch: &mut MarkerBatch, mapping: &MappingSpec, dt: f64) {
    let vs = &batch.v;
    batch.eta.par_chunks_mut(MARKER_CHUNK).enumerate().for_each(|(chunk, etas)| {
        let base = chunk * MARKER_CHUNK;
        for (j, eta) in etas.iter_mut().enumerate() {
            let v = Vector3::from(vs[base + j]);
            *eta = advect_one(mapping, *eta, &v, dt);
        }
    });
}

fn advect_one(mapping: &MappingSpec, eta: [f64; 3], v: &Vector3<f64>, dt: f64) -> [f64; 3] {
    let f = |e: [f64; 3]| mapping.logical_velocity(e, v);
    let x = Vector3::from(eta);
    let next = if mapping.is_affine() {
        x + dt * f(eta)
    } else {
        let at = |y: Vector3<f64>| [y[0], y[1], y[2]];
        let k1 = f(eta);
        let k2 = f(at(x + 0.5 * dt * k1));
        let k3 = f(at(x + 0.5 * dt * k2));
        let k4 = f(at(x + dt * k3));
        x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    [wrap_unit(next[0]), wrap_unit(next[1]), wrap_unit(next[2])]
}

/// `v_p += (dt/ε) DL⁻ᵀ Λ¹ᵀ e0`; positions are frozen so the kick is exact.
pub fn step_lorentz_electric(batch: &mut MarkerBatch, e0: &[f64], disc: &Discretization, dt: f64) {
    if e0.iter().all(|x| *x == 0.0) {
        return;
    }
    let scale = dt / disc.phys.eps;
    let etas = &batch.eta;
    batch.v.par_chunks_mut(MARKER_CHUNK).enumerate().for_each(|(chunk, vs)| {
        let base = chunk * MARKER_CHUNK;
        for (j, v) in vs.iter_mut().enumerate() {
            let eta = etas[base + j];
            let ehat = Vector3::from(disc.complex.eval_field(Space::V1, e0, eta));
            let dl_inv = disc.mapping.jacobian(eta).try_inverse().unwrap_or_else(Matrix3::zeros);
            let e = dl_inv.transpose() * ehat;
            for d in 0..3 {
                v[d] += scale * e[d];
            }
        }
    });
    batch.refresh_f0(&disc.phys, &disc.background);
}

/// Exact rotation of velocities for `v̇ = (1/ε) v × B`, with the physical
/// field `B = DL Λ²ᵀ b / √g`.
pub fn step_lorentz_magnetic(batch: &mut MarkerBatch, b: &[f64], disc: &Discretization, dt: f64) {
    if b.iter().all(|x| *x == 0.0) {
        return;
    }
    rotate(batch, &disc.mapping, dt / disc.phys.eps, |eta| {
        disc.complex.eval_field(Space::V2, b, eta)
    });
    batch.refresh_f0(&disc.phys, &disc.background);
}

fn rotate<F>(batch: &mut MarkerBatch, mapping: &MappingSpec, dt_over_eps: f64, bhat: F)
where
    F: Fn([f64; 3]) -> [f64; 3] + Sync,
{
    let etas = &batch.eta;
    batch.v.par_chunks_mut(MARKER_CHUNK).enumerate().for_each(|(chunk, vs)| {
        let base = chunk * MARKER_CHUNK;
        for (j, v) in vs.iter_mut().enumerate() {
            let eta = etas[base + j];
            let dl = mapping.jacobian(eta);
            let field = dl * Vector3::from(bhat(eta)) / dl.determinant();
            *v = rotate_velocity(*v, &field, dt_over_eps);
        }
    });
}

/// Solution at time `dt` of `v̇ = (1/ε) v × B` for constant `B`, given
/// `dt / ε`: a rotation about `B̂` by angle `−(dt/ε)|B|` (Rodrigues).
pub fn rotate_velocity(v: [f64; 3], b: &Vector3<f64>, dt_over_eps: f64) -> [f64; 3] {
    let norm = b.norm();
    if norm == 0.0 {
        return v;
    }
    let n = b / norm;
    let theta = -dt_over_eps * norm;
    let (s, c) = theta.sin_cos();
    let v = Vector3::from(v);
    let r = v * c + n.cross(&v) * s + n * (n.dot(&v) * (1.0 - c));
    [r[0], r[1], r[2]]
}

/// Direct delta-f (III): `M1 Δe = −dt (α²/(Nε)) Σ w_p a_p`.
pub fn ddf_ampere(fields: &mut FieldState, batch: &MarkerBatch, disc: &Discretization, dt: f64) -> Result<usize> {
    if batch.is_empty() {
        return Ok(0);
    }
    let j = crate::propagators::accumulate_current(batch, &disc.complex, &disc.mapping, &disc.phys);
    let rhs: Vec<f64> = j.iter().map(|x| -dt * x).collect();
    let report = pcg(&disc.masses.m1, &rhs, None, disc.m1_precond(), disc.solver.tol, disc.solver.max_iter)?;
    for (e, d) in fields.e1.iter_mut().zip(&report.x) {
        *e += d;
    }
    Ok(report.iterations)
}

/// Direct delta-f (IV): explicit `w_p += dt (f0_p/s0_p)/(v_th² ε) a_pᵀ e1`.
pub fn ddf_weights(fields: &FieldState, batch: &mut MarkerBatch, disc: &Discretization, dt: f64) {
    if batch.is_empty() {
        return;
    }
    let rows = MarkerRows::build(batch, &disc.complex, &disc.mapping);
    let ratio: Vec<f64> = batch.f0.iter().zip(&batch.s0).map(|(f, s)| f / s).collect();
    let k = dt / (disc.phys.v_th * disc.phys.v_th * disc.phys.eps);
    update_weights(batch, &rows, &ratio, &fields.e1, k);
}

/// Direct delta-f (V): magnetic rotation in the total field `b0 + b1`.
pub fn ddf_lorentz_magnetic(fields: &FieldState, batch: &mut MarkerBatch, disc: &Discretization, dt: f64) {
    let total: Vec<f64> = fields.b0.iter().zip(&fields.b1).map(|(a, b)| a + b).collect();
    step_lorentz_magnetic(batch, &total, disc, dt);
}
