//! Periodic grids, spectral calculus and pointwise estimators on the flat torus.

pub mod field;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod ops;
pub mod potential;

pub use field::{DensityFamily, DensityField, ScalarField};
pub use fourier::Fourier;
pub use grid::{canonical, periodic_distance, periodic_distance_sq, PeriodicGrid};
pub use ops::{
    energy, grad_sup_2_norm, grad_sup_inf_norm, grad_sup_inf_norm_refined, hj_residual, linfty_check,
    min_hessian_eig, min_hessian_eig_refined, min_second_difference, pressure, LinftyReport, Potentials,
    EXTREMUM_OVERSAMPLE,
};
pub use potential::{potential_constants, GridPotential, PotentialSpec, TrigTerm, Wave};
