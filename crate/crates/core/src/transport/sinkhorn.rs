use super::kernel::GibbsKernel;
use super::{Method, TransportResult};
use crate::error::{Error, Result};
use crate::torus::DensityField;

/// Smallest regularization accepted by [`sinkhorn_periodic`].
pub const EPS_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornOptions {
    /// L1 marginal violation at which the final stage stops.
    pub tol: f64,
    /// Tolerance of the intermediate annealing stages.
    pub stage_tol: f64,
    /// Starting value of the halving ladder.
    pub eps_start: f64,
    pub max_iter: usize,
    /// Plans are stored only up to this many nodes.
    pub max_plan_nodes: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            stage_tol: 1e-6,
            eps_start: 0.1,
            max_iter: 200_000,
            max_plan_nodes: 1024,
        }
    }
}

/// Halving ladder from `start` down to `target` (inclusive).
pub(crate) fn eps_ladder(start: f64, target: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut e = start;
    while e > target * 1.5 {
        v.push(e);
        e *= 0.5;
    }
    v.push(target);
    v
}

/// Entropic transport between two densities on the same grid, log domain.
pub fn sinkhorn_periodic(
    mu: &DensityField,
    nu: &DensityField,
    eps: f64,
    opts: &SinkhornOptions,
) -> Result<TransportResult> {
    let grid = mu.grid();
    if nu.grid() != grid {
        return Err(Error::Dimension("Sinkhorn marginals live on different grids".into()));
    }
    if !(eps >= EPS_FLOOR) {
        return Err(Error::Domain(format!("eps = {eps} below the floor {EPS_FLOOR}")));
    }
    let m = grid.len();
    let inv_m = 1.0 / m as f64;
    let la: Vec<f64> = mu.values().iter().map(|v| (v * inv_m).ln()).collect();
    let lb: Vec<f64> = nu.values().iter().map(|v| (v * inv_m).ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let mut kernel = GibbsKernel::new(grid, eps)?;
    let ladder = eps_ladder(opts.eps_start.max(eps), eps);
    for (stage, &e) in ladder.iter().enumerate() {
        kernel = GibbsKernel::new(grid, e)?;
        let last = stage + 1 == ladder.len();
        let tol = if last { opts.tol } else { opts.stage_tol };
        let mut it = 0;
        loop {
            // g from f, then f from g; the column violation is read off the
            // next g update.
            let af: Vec<f64> = f.iter().zip(&la).map(|(x, l)| x / e + l).collect();
            let kf = kernel.apply(&af);
            let g_new: Vec<f64> = kf.iter().map(|v| -e * v).collect();
            violation = g
                .iter()
                .zip(&g_new)
                .zip(&lb)
                .map(|((go, gn), l)| (l.exp() * (((go - gn) / e).exp() - 1.0)).abs())
                .sum();
            g = g_new;
            if it > 0 && violation <= tol {
                break;
            }
            let ag: Vec<f64> = g.iter().zip(&lb).map(|(x, l)| x / e + l).collect();
            let kg = kernel.apply(&ag);
            for (x, v) in f.iter_mut().zip(&kg) {
                *x = -e * v;
            }
            it += 1;
            iterations += 1;
            if it >= opts.max_iter {
                return Err(Error::NonConvergence {
                    solver: "sinkhorn",
                    iterations,
                    residual: violation,
                });
            }
        }
    }
    // Here g was just recomputed from f, so column marginals are exact and
    // the row marginal carries the violation of the last f step.
    let mut row_violation = 0.0;
    let ag: Vec<f64> = g.iter().zip(&lb).map(|(x, l)| x / eps + l).collect();
    let kg = kernel.apply(&ag);
    for i in 0..m {
        let row = (f[i] / eps + la[i] + kg[i]).exp();
        row_violation += (row - la[i].exp()).abs();
    }
    let store_plan = m <= opts.max_plan_nodes;
    let mut plan = if store_plan { Some(vec![0.0; m * m]) } else { None };
    let mut cost = 0.0;
    for i in 0..m {
        let base = f[i] / eps + la[i];
        for j in 0..m {
            let c = kernel.cost(i, j);
            let p = (base + g[j] / eps + lb[j] - c / eps).exp();
            cost += 2.0 * c * p;
            if let Some(pl) = plan.as_mut() {
                pl[i * m + j] = p;
            }
        }
    }
    let shift = f.iter().sum::<f64>() * inv_m;
    Ok(TransportResult {
        cost,
        eps,
        method: Method::Sinkhorn,
        psi: f.iter().map(|x| x - shift).collect(),
        phi: g.iter().map(|x| x + shift).collect(),
        plan,
        assignment: None,
        displacement: None,
        marginal_error: violation.max(row_violation),
        iterations,
    })
}
