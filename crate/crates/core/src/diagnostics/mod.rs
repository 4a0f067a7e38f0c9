//! Energies, error measures, damping fits, spectra and analytic dispersion
//! references.

mod damping;
mod dispersion;
mod energy;
mod spectrum;

pub use damping::{fit_damping_rate, DampingFit, DEFAULT_MAXIMA_WINDOW};
pub use dispersion::{
    bernstein_residual, bernstein_roots, bisect, cold_plasma_modes, hybrid_frequencies, scaled_bessel_i,
    ColdModes, Hybrid, DEFAULT_BESSEL_TERMS, POLE_TOL,
};
pub use energy::{hamiltonian, rel_energy_error, Energies, ScalarSeries, SCALARS_HEADER};
pub use spectrum::{
    cvk_peak_offsets, dispersion_spectrum, k_averaged_power, write_grid_header, CvkPeaks, Grid2, Peak, TargetPeak,
    SpectrumGrid, GRID_MAGIC,
};
