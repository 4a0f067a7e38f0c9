#![allow(dead_code)]

use lvpic::feec::DeRhamComplex;
use lvpic::geometry::MappingSpec;
use lvpic::markers::{sample_markers, BackgroundSpec, MarkerBatch, PhysParams};
use lvpic::propagators::{Discretization, FieldState, MarkerRows, SolverSettings};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from(m)
}

pub fn small_disc(mapping: MappingSpec, background: BackgroundSpec) -> Discretization {
    let complex = DeRhamComplex::periodic([4, 4, 1], [2, 2, 1]).unwrap();
    let phys = PhysParams::new(1.2, -0.8, 0.9).unwrap();
    let solver = SolverSettings { tol: 1e-14, max_iter: 5000 };
    Discretization::new(complex, mapping, phys, background, solver).unwrap()
}

pub fn colella() -> MappingSpec {
    MappingSpec::colella([3.0, 2.0, 1.0], 0.1).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_fields(disc: &Discretization, seed: u64) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = FieldState::zeros(&disc.complex);
    f.e1 = random_vec(&mut rng, f.e1.len());
    f.b1 = random_vec(&mut rng, f.b1.len());
    f
}

pub fn random_markers(disc: &Discretization, n: usize, seed: u64) -> MarkerBatch {
    let mut batch = sample_markers(n, &disc.mapping, &disc.phys, &disc.background, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for w in batch.w.iter_mut() {
        *w = rng.gen_range(-1.0..1.0);
    }
    batch.refresh_f0(&disc.phys, &disc.background);
    batch
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

/// Crank–Nicolson for `M1 ė = Cᵀ M2 b`, `ḃ = −C e` with both unknowns kept.
pub fn dense_maxwell(disc: &Discretization, e: &[f64], b: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let m1 = dense(&disc.masses.m1);
    let m2 = dense(&disc.masses.m2);
    let c = dense(disc.complex.curl());
    let (n1, n2) = (e.len(), b.len());
    let ctm2 = c.transpose() * &m2;
    let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
    a.view_mut((0, 0), (n1, n1)).copy_from(&m1);
    a.view_mut((0, n1), (n1, n2)).copy_from(&(-0.5 * dt * &ctm2));
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(0.5 * dt * &c));
    a.view_mut((n1, n1), (n2, n2)).fill_with_identity();
    let ev = DVector::from_column_slice(e);
    let bv = DVector::from_column_slice(b);
    let mut rhs = DVector::zeros(n1 + n2);
    rhs.rows_mut(0, n1).copy_from(&(&m1 * &ev + 0.5 * dt * &ctm2 * &bv));
    rhs.rows_mut(n1, n2).copy_from(&(&bv - 0.5 * dt * &c * &ev));
    let x = a.lu().solve(&rhs).unwrap();
    (x.rows(0, n1).iter().copied().collect(), x.rows(n1, n2).iter().copied().collect())
}

/// Crank–Nicolson for the field–weight exchange with all weights kept.
pub fn dense_coupling(disc: &Discretization, e: &[f64], batch: &MarkerBatch, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let phys = disc.phys;
    let rows = MarkerRows::build(batch, &disc.complex, &disc.mapping);
    let n1 = e.len();
    let np = batch.len();
    let mut amat = DMatrix::zeros(n1, np);
    for p in 0..np {
        let (idx, val) = rows.row(p);
        for (&i, &v) in idx.iter().zip(val) {
            amat[(i as usize, p)] += v;
        }
    }
    let m1 = dense(&disc.masses.m1);
    let ce = phys.alpha_sq() / (np as f64 * phys.eps);
    let cw: Vec<f64> = (0..np).map(|p| batch.f0[p] / batch.s0[p] / (phys.v_th * phys.v_th * phys.eps)).collect();
    // M1 e' + dt/2 ce A w' = M1 e − dt/2 ce A w
    // w'_p − dt/2 cw_p a_pᵀ e' = w_p + dt/2 cw_p a_pᵀ e
    let mut a = DMatrix::zeros(n1 + np, n1 + np);
    a.view_mut((0, 0), (n1, n1)).copy_from(&m1);
    a.view_mut((0, n1), (n1, np)).copy_from(&(0.5 * dt * ce * &amat));
    for p in 0..np {
        for i in 0..n1 {
            a[(n1 + p, i)] = -0.5 * dt * cw[p] * amat[(i, p)];
        }
        a[(n1 + p, n1 + p)] = 1.0;
    }
    let ev = DVector::from_column_slice(e);
    let wv = DVector::from_column_slice(&batch.w);
    let mut rhs = DVector::zeros(n1 + np);
    rhs.rows_mut(0, n1).copy_from(&(&m1 * &ev - 0.5 * dt * ce * &amat * &wv));
    let ae = amat.transpose() * &ev;
    for p in 0..np {
        rhs[n1 + p] = batch.w[p] + 0.5 * dt * cw[p] * ae[p];
    }
    let x = a.lu().solve(&rhs).unwrap();
    (x.rows(0, n1).iter().copied().collect(), x.rows(n1, np).iter().copied().collect())
}
