//! Tensor-product periodic spline de Rham complex `V0 -> V1 -> V2 -> V3`.
//!
//! Components of `V1` use the derivative family in their own direction,
//! components of `V2` use it in the two other directions. Global indices are
//! block-major: component `c` of a vector space occupies
//! `c * n0 .. (c + 1) * n0`, and inside a block the multi-index
//! `(i1, i2, i3)` is flattened as `(i1 * n2 + i2) * n3 + i3`.

use nalgebra_sparse::{CooMatrix, CsrMatrix};
use smallvec::SmallVec;

use super::spline::{Local1d, PeriodicSplines, MAX_DEGREE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    V0,
    V1,
    V2,
    V3,
}

impl Space {
    pub fn components(self) -> usize {
        match self {
            Space::V0 | Space::V3 => 1,
            Space::V1 | Space::V2 => 3,
        }
    }

    /// Whether direction `dir` of component `comp` uses the derivative family.
    pub fn uses_derivative(self, comp: usize, dir: usize) -> bool {
        match self {
            Space::V0 => false,
            Space::V1 => comp == dir,
            Space::V2 => comp != dir,
            Space::V3 => true,
        }
    }
}

/// Sparse local evaluation of one scalar component: `(global index, value)`.
pub type LocalComponent = SmallVec<[(usize, f64); 64]>;

#[derive(Debug, Clone)]
pub struct DeRhamComplex {
    axes: [PeriodicSplines; 3],
    grad: CsrMatrix<f64>,
    curl: CsrMatrix<f64>,
    div: CsrMatrix<f64>,
}

impl DeRhamComplex {
    /// Builds the complex. Only fully periodic spaces are supported.
    pub fn new(n_cells: [usize; 3], degrees: [usize; 3], periodic: [bool; 3]) -> Result<Self> {
        if periodic.iter().any(|p| !p) {
            return Err(Error::UnsupportedBoundary);
        }
        for d in 0..3 {
            if n_cells[d] == 0 {
                return Err(Error::InvalidDiscretization(format!("direction {d} has no cells")));
            }
            if degrees[d] == 0 || degrees[d] > MAX_DEGREE {
                return Err(Error::InvalidDiscretization(format!(
                    "degree {} in direction {d} outside 1..={MAX_DEGREE}",
                    degrees[d]
                )));
            }
            if n_cells[d] < degrees[d] {
                return Err(Error::InvalidDiscretization(format!(
                    "direction {d}: {} cells cannot carry degree {}",
                    n_cells[d], degrees[d]
                )));
            }
        }
        let axes = [
            PeriodicSplines::new(n_cells[0], degrees[0]),
            PeriodicSplines::new(n_cells[1], degrees[1]),
            PeriodicSplines::new(n_cells[2], degrees[2]),
        ];
        let mut complex = Self {
            axes,
            grad: CsrMatrix::zeros(0, 0),
            curl: CsrMatrix::zeros(0, 0),
            div: CsrMatrix::zeros(0, 0),
        };
        complex.grad = complex.build_grad();
        complex.curl = complex.build_curl();
        complex.div = complex.build_div();
        Ok(complex)
    }

    pub fn periodic(n_cells: [usize; 3], degrees: [usize; 3]) -> Result<Self> {
        Self::new(n_cells, degrees, [true; 3])
    }

    pub fn n_cells(&self) -> [usize; 3] {
        [self.axes[0].n_cells(), self.axes[1].n_cells(), self.axes[2].n_cells()]
    }

    pub fn degrees(&self) -> [usize; 3] {
        [self.axes[0].degree(), self.axes[1].degree(), self.axes[2].degree()]
    }

    pub fn axis(&self, dir: usize) -> &PeriodicSplines {
        &self.axes[dir]
    }

    /// Size of one scalar block; equals `N0` and `N3`.
    pub fn block_dim(&self) -> usize {
        self.axes.iter().map(|a| a.dim()).product()
    }

    pub fn dim(&self, space: Space) -> usize {
        space.components() * self.block_dim()
    }

    pub fn total_cells(&self) -> usize {
        self.n_cells().iter().product()
    }

    #[inline]
    pub fn flat(&self, i: [usize; 3]) -> usize {
        let n = self.n_cells();
        (i[0] * n[1] + i[1]) * n[2] + i[2]
    }

    pub fn unflat(&self, k: usize) -> [usize; 3] {
        let n = self.n_cells();
        [k / (n[1] * n[2]), (k / n[2]) % n[1], k % n[2]]
    }

    /// Incidence matrix `V0 -> V1`.
    pub fn grad(&self) -> &CsrMatrix<f64> {
        &self.grad
    }

    /// Incidence matrix `V1 -> V2`.
    pub fn curl(&self) -> &CsrMatrix<f64> {
        &self.curl
    }

    /// Incidence matrix `V2 -> V3`.
    pub fn div(&self) -> &CsrMatrix<f64> {
        &self.div
    }

    /// Per-direction local basis of component `comp` of `space` at `eta`.
    #[inline]
    pub fn local_axes(&self, space: Space, comp: usize, eta: [f64; 3]) -> [Local1d; 3] {
        std::array::from_fn(|d| {
            if space.uses_derivative(comp, d) {
                self.axes[d].eval_deriv(eta[d])
            } else {
                self.axes[d].eval_main(eta[d])
            }
        })
    }

    /// Nonzero basis functions of component `comp` at `eta`, with global
    /// indices including the block offset.
    pub fn eval_component(&self, space: Space, comp: usize, eta: [f64; 3]) -> LocalComponent {
        let [a, b, c] = self.local_axes(space, comp, eta);
        let offset = comp * self.block_dim();
        let mut out = LocalComponent::new();
        for &(i, vi) in &a {
            for &(j, vj) in &b {
                for &(k, vk) in &c {
                    out.push((offset + self.flat([i, j, k]), vi * vj * vk));
                }
            }
        }
        out
    }

    /// Evaluates a field with coefficients `coeffs` at `eta`; scalar spaces
    /// return their value in component 0.
    pub fn eval_field(&self, space: Space, coeffs: &[f64], eta: [f64; 3]) -> [f64; 3] {
        debug_assert_eq!(coeffs.len(), self.dim(space));
        let mut out = [0.0; 3];
        for (comp, slot) in out.iter_mut().enumerate().take(space.components()) {
            *slot = self
                .eval_component(space, comp, eta)
                .iter()
                .map(|&(g, v)| coeffs[g] * v)
                .sum();
        }
        out
    }

    fn difference_1d(&self, dir: usize) -> Vec<(usize, usize, f64)> {
        // (D-index, N-index, value): d_j = c_{j+1} - c_j.
        let n = self.axes[dir].n_cells();
        let mut out = Vec::with_capacity(2 * n);
        for j in 0..n {
            let next = (j + 1) % n;
            if next == j {
                continue;
            }
            out.push((j, j, -1.0));
            out.push((j, next, 1.0));
        }
        out
    }

    /// Block of the derivative in `dir` acting on a scalar block, returned as
    /// triplets `(row, col, value)` local to the blocks.
    fn partial_block(&self, dir: usize) -> Vec<(usize, usize, f64)> {
        let n = self.n_cells();
        let diff = self.difference_1d(dir);
        let mut out = Vec::with_capacity(diff.len() * self.block_dim() / n[dir].max(1));
        for i0 in 0..n[0] {
            for i1 in 0..n[1] {
                for i2 in 0..n[2] {
                    let idx = [i0, i1, i2];
                    for &(row_d, col_d, value) in diff.iter().filter(|t| t.0 == idx[dir]) {
                        let mut r = idx;
                        let mut c = idx;
                        r[dir] = row_d;
                        c[dir] = col_d;
                        out.push((self.flat(r), self.flat(c), value));
                    }
                }
            }
        }
        out
    }

    fn assemble(
        &self,
        rows: usize,
        cols: usize,
        blocks: &[(usize, usize, usize, f64)],
    ) -> CsrMatrix<f64> {
        // blocks: (row block, col block, direction, sign)
        let nb = self.block_dim();
        let mut coo = CooMatrix::new(rows, cols);
        for &(rb, cb, dir, sign) in blocks {
            for (r, c, v) in self.partial_block(dir) {
                coo.push(rb * nb + r, cb * nb + c, sign * v);
            }
        }
        CsrMatrix::from(&coo)
    }

    fn build_grad(&self) -> CsrMatrix<f64> {
        let nb = self.block_dim();
        self.assemble(3 * nb, nb, &[(0, 0, 0, 1.0), (1, 0, 1, 1.0), (2, 0, 2, 1.0)])
    }

    fn build_curl(&self) -> CsrMatrix<f64> {
        let nb = self.block_dim();
        self.assemble(
            3 * nb,
            3 * nb,
            &[
                (0, 2, 1, 1.0),
                (0, 1, 2, -1.0),
                (1, 0, 2, 1.0),
                (1, 2, 0, -1.0),
                (2, 1, 0, 1.0),
                (2, 0, 1, -1.0),
            ],
        )
    }

    fn build_div(&self) -> CsrMatrix<f64> {
        let nb = self.block_dim();
        self.assemble(nb, 3 * nb, &[(0, 0, 0, 1.0), (0, 1, 1, 1.0), (0, 2, 2, 1.0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn landau_grid_dimensions() {
        let c = DeRhamComplex::periodic([32, 1, 1], [3, 1, 1]).unwrap();
        assert_eq!(c.dim(Space::V0), 32);
        assert_eq!(c.dim(Space::V1), 96);
        assert_eq!(c.dim(Space::V2), 96);
        assert_eq!(c.dim(Space::V3), 32);
        assert_eq!(c.grad().nrows(), 96);
        assert_eq!(c.grad().ncols(), 32);
    }

    #[test]
    fn rejects_non_periodic_and_bad_degrees() {
        assert!(matches!(
            DeRhamComplex::new([4, 4, 4], [1, 1, 1], [true, false, true]),
            Err(Error::UnsupportedBoundary)
        ));
        assert!(DeRhamComplex::periodic([2, 1, 1], [3, 1, 1]).is_err());
        assert!(DeRhamComplex::periodic([8, 1, 1], [0, 1, 1]).is_err());
    }

    #[test]
    fn partition_of_unity_in_3d() {
        let c = DeRhamComplex::periodic([8, 1, 1], [2, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let eta = [rng.gen(), rng.gen(), rng.gen()];
            let s: f64 = c.eval_component(Space::V0, 0, eta).iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn local_support_size_is_bounded() {
        let c = DeRhamComplex::periodic([6, 5, 4], [3, 2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let eta = [rng.gen(), rng.gen(), rng.gen()];
            for space in [Space::V0, Space::V1, Space::V2, Space::V3] {
                for comp in 0..space.components() {
                    assert!(c.eval_component(space, comp, eta).len() <= 4 * 3 * 2);
                }
            }
        }
    }

    #[test]
    fn incidence_entries_are_unit_integers() {
        let c = DeRhamComplex::periodic([4, 3, 2], [2, 2, 1]).unwrap();
        for m in [c.grad(), c.curl(), c.div()] {
            assert!(m.values().iter().all(|v| *v == 1.0 || *v == -1.0 || *v == 0.0));
        }
    }
}
