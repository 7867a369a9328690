//! Pressure variable, Hessian and gradient estimators, energy, HJ residual.

use super::field::{check_positive, DensityField, ScalarField};
use super::fourier::Fourier;
use super::grid::PeriodicGrid;
use super::potential::{potential_constants, GridPotential, PotentialSpec};
use crate::bounds::PotentialConstants;
use crate::error::{Error, Result};

/// `V` and `W` bound to one grid.
#[derive(Clone, Debug)]
pub struct Potentials {
    pub v: GridPotential,
    pub w: GridPotential,
}

impl Potentials {
    pub fn new(v: &PotentialSpec, w: &PotentialSpec, grid: PeriodicGrid) -> Result<Self> {
        if !w.is_even() {
            return Err(Error::Domain("interaction potential W must be even".into()));
        }
        Ok(Self {
            v: GridPotential::new(v, grid)?,
            w: GridPotential::new(w, grid)?,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.v.grid()
    }

    pub fn constants(&self) -> PotentialConstants {
        potential_constants(self.v.spec(), self.w.spec())
    }

    /// `V + W * rho` at the nodes.
    pub fn potential_part(&self, rho: &[f64]) -> Vec<f64> {
        let mut out = self.v.values().to_vec();
        if !self.w.is_zero() {
            for (o, c) in out.iter_mut().zip(self.w.convolve(rho)) {
                *o += c;
            }
        }
        out
    }

    /// Drift `q = grad V + grad W * rho`, one vector per axis.
    pub fn drift(&self, rho: &[f64]) -> Vec<Vec<f64>> {
        let dim = self.grid().dim();
        let mut q: Vec<Vec<f64>> = (0..dim).map(|a| self.v.grad(a).to_vec()).collect();
        if !self.w.is_zero() {
            for (qa, ga) in q.iter_mut().zip(self.w.convolve_grad(rho)) {
                for (x, g) in qa.iter_mut().zip(ga) {
                    *x += g;
                }
            }
        }
        q
    }
}

fn check_grid(rho: &DensityField, pots: &Potentials) -> Result<()> {
    if rho.grid() != pots.grid() {
        return Err(Error::Dimension("density and potentials live on different grids".into()));
    }
    Ok(())
}

/// `u[rho] = log rho + V + W * rho`.
pub fn pressure(rho: &DensityField, pots: &Potentials) -> Result<ScalarField> {
    check_grid(rho, pots)?;
    check_positive(rho.values(), 0.0)?;
    let mut u = pots.potential_part(rho.values());
    for (x, r) in u.iter_mut().zip(rho.values()) {
        *x += r.ln();
    }
    ScalarField::new(rho.grid(), u)
}

/// Refinement factor for extrema of smooth fields (see [`min_hessian_eig_refined`]).
pub const EXTREMUM_OVERSAMPLE: usize = 4;

/// Smallest Hessian eigenvalue over all nodes (spectral derivatives).
pub fn min_hessian_eig(u: &ScalarField) -> f64 {
    let mut ft = Fourier::new(u.grid);
    min_hessian_eig_with(&mut ft, &u.values, 1)
}

/// Smallest Hessian eigenvalue of the trigonometric interpolant, sampled on
/// the grid refined `factor` times. Only meaningful for resolved fields: a
/// kink rings between nodes.
pub fn min_hessian_eig_refined(u: &ScalarField, factor: usize) -> f64 {
    let mut ft = Fourier::new(u.grid);
    min_hessian_eig_with(&mut ft, &u.values, factor)
}

pub fn min_hessian_eig_with(ft: &mut Fourier, u: &[f64], factor: usize) -> f64 {
    let h: Vec<Vec<f64>> = ft.hessian(u).iter().map(|c| ft.refine(c, factor)).collect();
    if h.len() == 1 {
        return h[0].iter().cloned().fold(f64::INFINITY, f64::min);
    }
    (0..h[0].len())
        .map(|i| smaller_eig(h[0][i], h[1][i], h[2][i]))
        .fold(f64::INFINITY, f64::min)
}

/// Smaller eigenvalue of `[[a, b], [b, c]]`.
pub fn smaller_eig(a: f64, b: f64, c: f64) -> f64 {
    let m = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    m - r
}

/// Minimum over nodes and directions of `Delta_{h,nu} u / |h nu|^2` with `h` the grid spacing.
pub fn min_second_difference(u: &ScalarField) -> f64 {
    let grid = u.grid;
    let dirs: &[[i64; 2]] = if grid.dim() == 1 {
        &[[1, 0]]
    } else {
        &[[1, 0], [0, 1], [1, 1], [1, -1]]
    };
    let h = grid.spacing();
    let mut best = f64::INFINITY;
    for d in dirs {
        let len2 = ((d[0] * d[0] + d[1] * d[1]) as f64) * h * h;
        for i in 0..grid.len() {
            let p = u.values[grid.shifted(i, *d)];
            let m = u.values[grid.shifted(i, [-d[0], -d[1]])];
            best = best.min((p + m - 2.0 * u.values[i]) / len2);
        }
    }
    best
}

/// `sup_x |grad u(x)|_inf` over the nodes.
pub fn grad_sup_inf_norm(u: &ScalarField) -> f64 {
    grad_sup_inf_norm_refined(u, 1)
}

/// `sup_x |grad u(x)|_inf` over the grid refined `factor` times.
pub fn grad_sup_inf_norm_refined(u: &ScalarField, factor: usize) -> f64 {
    let mut ft = Fourier::new(u.grid);
    let g: Vec<Vec<f64>> = ft.gradient(&u.values).iter().map(|c| ft.refine(c, factor)).collect();
    g.iter()
        .flat_map(|c| c.iter())
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// `sup_x |grad u(x)|_2`.
pub fn grad_sup_2_norm(u: &ScalarField) -> f64 {
    let mut ft = Fourier::new(u.grid);
    let g = ft.gradient(&u.values);
    (0..g[0].len())
        .map(|i| g.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinftyReport {
    /// Measured `sup |grad log rho|_2`.
    pub measured_lip: f64,
    pub lower: f64,
    pub upper: f64,
    /// `min rho - lower`.
    pub lower_margin: f64,
    /// `upper - max rho`.
    pub upper_margin: f64,
    pub pass: bool,
}

/// Checks `exp(-(d/2) L) <= rho <= exp((d/2) L)` nodewise.
pub fn linfty_check(rho: &DensityField, lip: f64) -> Result<LinftyReport> {
    check_positive(rho.values(), 0.0)?;
    let grid = rho.grid();
    let logr = ScalarField::new(grid, rho.values().iter().map(|v| v.ln()).collect())?;
    let measured = grad_sup_2_norm(&logr);
    if measured > lip * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::Domain(format!(
            "log rho has Lipschitz constant {measured} above the supplied {lip}"
        )));
    }
    let e = 0.5 * grid.dim() as f64 * lip;
    let (lower, upper) = ((-e).exp(), e.exp());
    let min = rho.min();
    let max = rho.values().iter().cloned().fold(0.0, f64::max);
    let lower_margin = min - lower;
    let upper_margin = upper - max;
    Ok(LinftyReport {
        measured_lip: measured,
        lower,
        upper,
        lower_margin,
        upper_margin,
        pass: lower_margin >= 0.0 && upper_margin >= 0.0,
    })
}

/// `int rho log rho + int V rho + 1/2 int (W * rho) rho`.
pub fn energy(rho: &DensityField, pots: &Potentials) -> Result<f64> {
    check_grid(rho, pots)?;
    check_positive(rho.values(), 0.0)?;
    let r = rho.values();
    let n = r.len() as f64;
    let mut e = 0.0;
    for (x, v) in r.iter().zip(pots.v.values()) {
        e += x * x.ln() + v * x;
    }
    if !pots.w.is_zero() {
        for (x, c) in r.iter().zip(pots.w.convolve(r)) {
            e += 0.5 * c * x;
        }
    }
    Ok(e / n)
}

/// `Delta u + |grad u|^2 - grad V . grad u - R` for one density.
fn hj_rhs(rho: &DensityField, pots: &Potentials, ft: &mut Fourier) -> Result<Vec<f64>> {
    let u = pressure(rho, pots)?;
    let lap = ft.laplacian(&u.values);
    let grad = ft.gradient(&u.values);
    let dim = grad.len();
    let r = rho.values();
    let mut out = lap;
    for i in 0..out.len() {
        for a in 0..dim {
            out[i] += grad[a][i] * grad[a][i] - pots.v.grad(a)[i] * grad[a][i];
        }
    }
    if !pots.w.is_zero() {
        let gw = pots.w.convolve_grad(r);
        for a in 0..dim {
            let flux: Vec<f64> = r.iter().zip(&grad[a]).map(|(x, g)| x * g).collect();
            let conv = pots.w.convolve_grad(&flux);
            for i in 0..out.len() {
                out[i] -= gw[a][i] * grad[a][i] - conv[a][i];
            }
        }
    }
    Ok(out)
}

/// Residual of the pressure equation between two close snapshots, at the
/// midpoint (trapezoidal right-hand side).
pub fn hj_residual(
    a: (&DensityField, f64),
    b: (&DensityField, f64),
    pots: &Potentials,
) -> Result<ScalarField> {
    let dt = b.1 - a.1;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("snapshot times must increase, got dt = {dt}")));
    }
    let mut ft = Fourier::new(pots.grid());
    let ua = pressure(a.0, pots)?;
    let ub = pressure(b.0, pots)?;
    let ra = hj_rhs(a.0, pots, &mut ft)?;
    let rb = hj_rhs(b.0, pots, &mut ft)?;
    let values = (0..ua.values.len())
        .map(|i| (ub.values[i] - ua.values[i]) / dt - 0.5 * (ra[i] + rb[i]))
        .collect();
    ScalarField::new(pots.grid(), values)
}
