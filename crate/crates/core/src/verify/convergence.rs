use crate::error::{Error, Result};
use crate::jko::JkoFlow;
use crate::pde::Trajectory;
use crate::torus::{DensityField, Fourier, Potentials};
use crate::transport::{sinkhorn_periodic, w2_circle_1d, SinkhornOptions};

/// Regularization of the 2D distance estimate.
const EPS_2D: f64 = 2e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    /// `W_2(rho^tau_T, rho_T)`.
    pub w2_at_end: f64,
    /// Sup over snapshot times in `[t0, T]`.
    pub w2_sup: f64,
    /// `int_{t0}^T |D^2(rho^tau_t - rho_t)|_{L^2}^2 dt` (only when `W = 0`).
    pub h2_integrated: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub t0: f64,
    pub t_end: f64,
    pub rows: Vec<ConvergenceRow>,
}

fn strictly_decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

impl ConvergenceReport {
    pub fn w2_end_decreasing(&self) -> bool {
        strictly_decreasing(self.rows.iter().map(|r| r.w2_at_end))
    }

    pub fn w2_sup_decreasing(&self) -> bool {
        strictly_decreasing(self.rows.iter().map(|r| r.w2_sup))
    }

    pub fn h2_decreasing(&self) -> Option<bool> {
        let h: Option<Vec<f64>> = self.rows.iter().map(|r| r.h2_integrated).collect();
        h.map(|v| strictly_decreasing(v.into_iter()))
    }

    pub fn to_csv(&self) -> String {
        use crate::torus::io::fmt_f64;
        let mut s = String::from("tau,w2_at_end,w2_sup,h2_integrated\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(r.tau),
                fmt_f64(r.w2_at_end),
                fmt_f64(r.w2_sup),
                fmt_f64(r.h2_integrated.unwrap_or(f64::NAN))
            ));
        }
        s
    }
}

/// `|D^2 (a - b)|_{L^2}^2` through Fourier coefficients, `sum (2 pi |k|)^4 |c_k|^2`.
pub fn h2_seminorm_sq(ft: &mut Fourier, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let spec = ft.forward(&diff);
    let n = diff.len() as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    spec.iter()
        .enumerate()
        .map(|(i, c)| {
            let k = ft.wavevector(i);
            let k2 = (k[0] * k[0] + k[1] * k[1]) as f64 * two_pi * two_pi;
            k2 * k2 * c.norm_sqr() / (n * n)
        })
        .sum()
}

fn w2(a: &DensityField, b: &DensityField) -> Result<f64> {
    if a.grid().dim() == 1 {
        return Ok(w2_circle_1d(a, b)?.cost.max(0.0).sqrt());
    }
    // Entropic estimate with the self-transport costs removed.
    let opts = SinkhornOptions::default();
    let ab = sinkhorn_periodic(a, b, EPS_2D, &opts)?.cost;
    let aa = sinkhorn_periodic(a, a, EPS_2D, &opts)?.cost;
    let bb = sinkhorn_periodic(b, b, EPS_2D, &opts)?.cost;
    Ok((ab - 0.5 * (aa + bb)).max(0.0).sqrt())
}

/// Distances between JKO interpolations (ordered by decreasing `tau`) and a
/// PDE trajectory on `[t0, t_end]`.
pub fn convergence_report(
    pde: &Trajectory,
    flows: &[JkoFlow],
    pots: &Potentials,
    t0: f64,
    t_end: f64,
) -> Result<ConvergenceReport> {
    if flows.windows(2).any(|w| w[1].tau >= w[0].tau) {
        return Err(Error::Domain("flows must be ordered by decreasing tau".into()));
    }
    let tol = 1e-9;
    let snaps: Vec<_> = pde
        .snapshots
        .iter()
        .filter(|s| s.t >= t0 - tol && s.t <= t_end + tol)
        .collect();
    if snaps.is_empty() {
        return Err(Error::Domain(format!("no PDE snapshots in [{t0}, {t_end}]")));
    }
    let end = pde.nearest(t_end);
    if (end.t - t_end).abs() > tol {
        return Err(Error::Domain(format!("no PDE snapshot at t = {t_end}")));
    }
    let mut ft = Fourier::new(pde.grid);
    let mut rows = Vec::new();
    for flow in flows {
        if flow.grid() != pde.grid || pots.grid() != pde.grid {
            return Err(Error::Dimension("flow, trajectory and potentials differ in grid".into()));
        }
        if (flow.k() as f64) * flow.tau < t_end - tol {
            return Err(Error::Domain(format!(
                "flow with tau = {} ends before t = {t_end}",
                flow.tau
            )));
        }
        let mut w2_sup = 0.0_f64;
        let mut h2 = Vec::with_capacity(snaps.len());
        for s in &snaps {
            let r = flow.at(s.t);
            w2_sup = w2_sup.max(w2(r, &s.rho)?);
            h2.push((s.t, h2_seminorm_sq(&mut ft, r.values(), s.rho.values())));
        }
        let h2_integrated = pots.w.is_zero().then(|| {
            h2.windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
                .sum()
        });
        rows.push(ConvergenceRow {
            tau: flow.tau,
            w2_at_end: w2(flow.at(t_end), &end.rho)?,
            w2_sup,
            h2_integrated,
        });
    }
    Ok(ConvergenceReport { t0, t_end, rows })
}
