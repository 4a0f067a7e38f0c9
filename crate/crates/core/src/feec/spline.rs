//! Periodic uniform B-splines on the unit interval.
//!
//! Two families live on each axis: the degree-`p` B-splines `N_i` and the
//! degree-`p-1` "derivative" splines `D_i = n * N^{p-1}_{i+1}`, normalized so
//! that `N_i' = D_{i-1} - D_i`. With this normalization the discrete
//! derivative is the integer difference matrix and every `D_i` has unit
//! integral.

use smallvec::SmallVec;

use crate::geometry::wrap_unit;

/// Largest supported spline degree.
pub const MAX_DEGREE: usize = 7;

/// Nonzero basis functions at a point: `(global index, value)` pairs with
/// duplicate indices merged.
pub type Local1d = SmallVec<[(usize, f64); MAX_DEGREE + 1]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicSplines {
    n_cells: usize,
    degree: usize,
}

impl PeriodicSplines {
    pub fn new(n_cells: usize, degree: usize) -> Self {
        debug_assert!(degree >= 1 && degree <= MAX_DEGREE && n_cells >= 1);
        Self { n_cells, degree }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Dimension of either family; periodic spaces have one function per cell.
    pub fn dim(&self) -> usize {
        self.n_cells
    }

    /// Cell index and local coordinate in `[0, 1)` of a logical coordinate.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = wrap_unit(x) * self.n_cells as f64;
        let cell = (s.floor() as usize).min(self.n_cells - 1);
        (cell, (s - cell as f64).clamp(0.0, 1.0))
    }

    /// Values of the `p + 1` uniform B-spline pieces of degree `p` at local
    /// coordinate `t`; entry `r` belongs to `N_{cell - p + r}`. The degree
    /// `p - 1` pieces are returned alongside.
    #[inline]
    pub fn pieces(&self, t: f64) -> ([f64; MAX_DEGREE + 1], [f64; MAX_DEGREE + 1]) {
        let p = self.degree;
        let mut basis = [0.0; MAX_DEGREE + 1];
        let mut lower = [0.0; MAX_DEGREE + 1];
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        basis[0] = 1.0;
        for j in 1..=p {
            if j == p {
                lower = basis;
            }
            left[j] = t + (j - 1) as f64;
            right[j] = j as f64 - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = basis[r] / (right[r + 1] + left[j - r]);
                basis[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            basis[j] = saved;
        }
        (basis, lower)
    }

    /// Degree-`p` B-splines that are nonzero at `x`.
    pub fn eval_main(&self, x: f64) -> Local1d {
        let (cell, t) = self.locate(x);
        let (basis, _) = self.pieces(t);
        let n = self.n_cells;
        let p = self.degree;
        let mut out = Local1d::new();
        for (r, &value) in basis.iter().enumerate().take(p + 1) {
            let idx = (cell + n * (p + 1) - p + r) % n;
            push_merged(&mut out, idx, value);
        }
        out
    }

    /// Derivative splines `D_i` that are nonzero at `x`.
    pub fn eval_deriv(&self, x: f64) -> Local1d {
        let (cell, t) = self.locate(x);
        let (_, lower) = self.pieces(t);
        let n = self.n_cells;
        let p = self.degree;
        let scale = n as f64;
        let mut out = Local1d::new();
        // N^{p-1}_{cell-p+1+r} maps to D_{cell-p+r}.
        for (r, &value) in lower.iter().enumerate().take(p) {
            let idx = (cell + n * (p + 1) - p + r) % n;
            push_merged(&mut out, idx, scale * value);
        }
        out
    }

    /// Exact derivative of the degree-`p` B-splines at `x`, expressed through
    /// the derivative splines.
    pub fn eval_main_derivative(&self, x: f64) -> Local1d {
        let d = self.eval_deriv(x);
        let n = self.n_cells;
        let mut out = Local1d::new();
        for &(j, value) in &d {
            // N_j' = D_{j-1} - D_j, so D_j contributes +value to N_{j+1}' and -value to N_j'.
            push_merged(&mut out, (j + 1) % n, value);
            push_merged(&mut out, j, -value);
        }
        out
    }
}

#[inline]
fn push_merged(out: &mut Local1d, idx: usize, value: f64) {
    if let Some(slot) = out.iter_mut().find(|(i, _)| *i == idx) {
        slot.1 += value;
    } else {
        out.push((idx, value));
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1);
    let mut nodes = Vec::with_capacity(points);
    let mut weights = Vec::with_capacity(points);
    let n = points;
    for i in 0..n {
        // Newton iteration on P_n starting from the Chebyshev-like guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
