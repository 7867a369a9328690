//! Exact transport on the circle through quantile functions.
//!
//! Node values are read as piecewise-constant densities on the cells
//! `[x_i - h/2, x_i + h/2)`, so quantile functions are piecewise linear and
//! the cost for a given cut shift integrates in closed form.

use super::{c_transform, Method, TransportResult};
use crate::error::{Error, Result};
use crate::torus::DensityField;

const GOLDEN_TOL: f64 = 1e-12;

struct Quantile {
    lo: f64,
    h: f64,
    cum: Vec<f64>,
    mass: Vec<f64>,
}

impl Quantile {
    fn new(rho: &DensityField) -> Self {
        let n = rho.values().len();
        let h = 1.0 / n as f64;
        let mass: Vec<f64> = rho.values().iter().map(|v| v * h).collect();
        let total: f64 = mass.iter().sum();
        let mass: Vec<f64> = mass.iter().map(|m| m / total).collect();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for m in &mass {
            cum.push(cum.last().unwrap() + m);
        }
        *cum.last_mut().unwrap() = 1.0;
        Self { lo: -0.5 * h, h, cum, mass }
    }

    /// Quantile on `[0, 1]`.
    fn q(&self, p: f64) -> f64 {
        let n = self.mass.len();
        let idx = match self.cum.binary_search_by(|c| c.total_cmp(&p)) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
        .min(n - 1);
        self.lo + self.h * (idx as f64 + ((p - self.cum[idx]) / self.mass[idx]).clamp(0.0, 1.0))
    }

    /// Periodic lift: `Q(p + 1) = Q(p) + 1`.
    fn q_lift(&self, p: f64) -> f64 {
        let k = p.floor();
        k + self.q(p - k)
    }

    /// CDF at node `i` (cell midpoint).
    fn cdf_node(&self, i: usize) -> f64 {
        self.cum[i] + 0.5 * self.mass[i]
    }

    fn mean(&self) -> f64 {
        // Quantile integrates to the mean position on the reference interval.
        (0..self.mass.len())
            .map(|i| self.mass[i] * (self.lo + self.h * (i as f64 + 0.5)))
            .sum()
    }
}

/// `int_0^1 |Q_mu(p) - Q_nu(p + theta)|^2 dp`, exact for piecewise-linear quantiles.
fn shift_cost(qm: &Quantile, qn: &Quantile, theta: f64) -> f64 {
    let mut bps: Vec<f64> = qm.cum.clone();
    for c in &qn.cum {
        let p = c - theta;
        bps.push(p - p.floor());
    }
    bps.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &p in &bps {
        let d = qm.q(p) - qn.q_lift(p + theta);
        if let Some((p0, d0)) = prev {
            let len = p - p0;
            if len > 0.0 {
                acc += len * (d0 * d0 + d0 * d + d * d) / 3.0;
            }
        }
        prev = Some((p, d));
    }
    acc
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Exact `W_2^2` on the circle; returns the monotone map as a displacement field.
pub fn w2_circle_1d(mu: &DensityField, nu: &DensityField) -> Result<TransportResult> {
    let grid = mu.grid();
    if grid.dim() != 1 || nu.grid() != grid {
        return Err(Error::Dimension("w2_circle_1d needs two densities on one 1D grid".into()));
    }
    let qm = Quantile::new(mu);
    let qn = Quantile::new(nu);
    // The mean displacement for shift theta is mean_nu + theta - mean_mu, and an
    // optimal one lies in [-1/2, 1/2].
    let center = qm.mean() - qn.mean();
    let theta = golden_min(|t| shift_cost(&qm, &qn, t), center - 0.75, center + 0.75);
    let cost = shift_cost(&qm, &qn, theta);

    let n = grid.n();
    let h = grid.spacing();
    let disp: Vec<f64> = (0..n)
        .map(|i| qn.q_lift(qm.cdf_node(i) + theta) - i as f64 * h)
        .collect();
    // psi' = -disp; trapezoidal integration with the periodic closure removed.
    let mut psi = vec![0.0; n];
    for i in 1..n {
        psi[i] = psi[i - 1] - 0.5 * h * (disp[i - 1] + disp[i]);
    }
    let closure = psi[n - 1] - 0.5 * h * (disp[n - 1] + disp[0]);
    for (i, p) in psi.iter_mut().enumerate() {
        *p -= closure * i as f64 / n as f64;
    }
    let mean = psi.iter().sum::<f64>() / n as f64;
    for p in &mut psi {
        *p -= mean;
    }
    let phi = c_transform(&grid, &psi);
    Ok(TransportResult {
        cost,
        eps: 0.0,
        method: Method::Circle,
        psi,
        phi,
        plan: None,
        assignment: None,
        displacement: Some(disp),
        marginal_error: 0.0,
        iterations: 0,
    })
}
