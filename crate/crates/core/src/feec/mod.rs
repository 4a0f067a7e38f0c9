//! Discrete de Rham complex, mass matrices and field solvers.

pub mod complex;
pub mod mass;
pub mod poisson;
pub mod solver;
pub mod spline;

pub use complex::{DeRhamComplex, LocalComponent, Space};
pub use mass::{assemble_mass, write_coo, MassMatrices};
pub use poisson::{project_v0_dual, solve_poisson};
pub use solver::{cg_solve, pcg, CgReport, DenseFactor, LinearOperator, Precond};
