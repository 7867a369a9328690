//! Quadratic optimal transport on the torus.
//!
//! Potentials follow the convention `psi(x) + phi(y) <= d(x,y)^2 / 2`, and the
//! optimal map is `T = id - grad psi`.

mod assignment;
mod circle;
mod kernel;
mod sinkhorn;

use std::fmt::Write as _;

pub use assignment::{hungarian, lp_oracle};
pub use circle::w2_circle_1d;
pub use kernel::GibbsKernel;
pub use sinkhorn::{sinkhorn_periodic, SinkhornOptions, EPS_FLOOR};
pub(crate) use sinkhorn::eps_ladder;

use crate::error::{Error, Result};
use crate::torus::io::{fmt_f64, write_field};
use crate::torus::{canonical, DensityField, Fourier, PeriodicGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Circle,
    Assignment,
    Sinkhorn,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Circle => "circle",
            Method::Assignment => "assignment",
            Method::Sinkhorn => "sinkhorn",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportResult {
    /// Squared distance `W_2^2` (for Sinkhorn: `sum pi d^2` of the entropic plan).
    pub cost: f64,
    /// Regularization, 0 for exact methods.
    pub eps: f64,
    pub method: Method,
    /// Source potential.
    pub psi: Vec<f64>,
    /// Target potential.
    pub phi: Vec<f64>,
    /// Dense coupling (row = source), when small enough to store.
    pub plan: Option<Vec<f64>>,
    /// Assignment `i -> sigma(i)` for the atomic oracle.
    pub assignment: Option<Vec<usize>>,
    /// Displacement `T(x_i) - x_i` at source nodes (1D exact solver).
    pub displacement: Option<Vec<f64>>,
    /// Largest marginal violation in L1 (0 for exact methods).
    pub marginal_error: f64,
    pub iterations: usize,
}

impl TransportResult {
    /// Optimal value of the `d^2/2` problem.
    pub fn half_cost(&self) -> f64 {
        0.5 * self.cost
    }

    /// Text block: cost, eps, then both potentials in torus-field format.
    pub fn to_text(&self, grid: &PeriodicGrid) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cost {}", fmt_f64(self.cost));
        let _ = writeln!(s, "eps {}", fmt_f64(self.eps));
        let _ = writeln!(s, "method {}", self.method.name());
        s.push_str(&write_field(grid, 0.0, &self.psi));
        s.push_str(&write_field(grid, 0.0, &self.phi));
        s
    }
}

/// Discrete `c`-transform `phi(y_j) = min_i d(x_i, y_j)^2 / 2 - psi(x_i)` on one grid.
pub fn c_transform(grid: &PeriodicGrid, psi: &[f64]) -> Vec<f64> {
    let m = grid.len();
    (0..m)
        .map(|j| {
            let y = grid.coords(j);
            (0..m)
                .map(|i| 0.5 * crate::torus::periodic_distance_sq(&grid.coords(i)[..grid.dim()], &y[..grid.dim()]) - psi[i])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `T(x) - x = -grad psi`, one vector per axis, wrapped into `[-1/2, 1/2)`.
pub fn brenier_map(result: &TransportResult, grid: &PeriodicGrid) -> Result<Vec<Vec<f64>>> {
    if result.psi.len() != grid.len() {
        return Err(Error::Cardinality(result.psi.len(), grid.len()));
    }
    let mut ft = Fourier::new(*grid);
    Ok(ft
        .gradient(&result.psi)
        .into_iter()
        .map(|g| g.into_iter().map(|v| canonical(-v)).collect())
        .collect())
}

/// Log residual of `nu(T) det(DT) = mu` on a 1D grid, with `T = id - psi'`,
/// `DT = 1 - psi''` and `nu` interpolated linearly.
pub fn monge_ampere_residual_1d(
    mu: &DensityField,
    nu: &DensityField,
    psi: &[f64],
) -> Result<Vec<f64>> {
    let grid = mu.grid();
    if grid.dim() != 1 {
        return Err(Error::Dimension("Monge-Ampere residual is implemented in 1D".into()));
    }
    let mut ft = Fourier::new(grid);
    let d1 = ft.gradient(psi).remove(0);
    let d2 = ft.hessian(psi).remove(0);
    let n = grid.n();
    let nv = nu.values();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let y = grid.coords(i)[0] - d1[i];
        let s = y.rem_euclid(1.0) * n as f64;
        let j = s.floor() as usize % n;
        let w = s - s.floor();
        let nu_t = (1.0 - w) * nv[j] + w * nv[(j + 1) % n];
        let jac = 1.0 - d2[i];
        if !(jac > 0.0) {
            return Err(Error::Domain(format!("non-positive Jacobian {jac} at node {i}")));
        }
        out.push(nu_t.ln() + jac.ln() - mu.values()[i].ln());
    }
    Ok(out)
}
