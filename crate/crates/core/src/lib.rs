//! Semi-convexity bounds, spectral fields on the flat torus, a pseudospectral
//! solver, optimal transport and the JKO scheme for the granular-medium
//! equation `d_t rho = lap rho + div(rho grad(V + W * rho))`.

pub mod bounds;
pub mod error;
pub mod jko;
pub mod pde;
pub mod torus;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};

/// Default absolute tolerance for scalar identities.
pub const SCALAR_TOL: f64 = 1e-12;
