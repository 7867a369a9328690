use super::{CheckRow, Report};
use crate::bounds::{comparison_sequence, lipschitz_and_linfty_bounds, lyh_envelope, ComparisonSequence, Defect};
use crate::error::{Error, Result};
use crate::jko::JkoFlow;
use crate::pde::Trajectory;
use crate::torus::{
    grad_sup_inf_norm_refined, min_hessian_eig, min_hessian_eig_refined, pressure, DensityField, Potentials,
    EXTREMUM_OVERSAMPLE,
};

/// Absolute tolerance on spectral Hessian eigenvalues (roundoff in `log rho`
/// amplified by `(pi n)^2`).
pub const HESSIAN_TOL: f64 = 1e-7;

/// How `lambda0` enters the envelopes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lambda0Mode {
    /// Positive part of `-min eig D^2 u[rho_0]`.
    Measured,
    Infinite,
}

impl Lambda0Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Lambda0Mode::Measured => "measured",
            Lambda0Mode::Infinite => "infinite",
        }
    }

    fn defect(&self, rho0: &DensityField, pots: &Potentials) -> Result<Defect> {
        Ok(match self {
            Lambda0Mode::Measured => Defect::Finite(measured_lambda0(rho0, pots)?),
            Lambda0Mode::Infinite => Defect::Infinite,
        })
    }
}

pub fn measured_lambda0(rho0: &DensityField, pots: &Potentials) -> Result<f64> {
    Ok((-min_hessian_eig(&pressure(rho0, pots)?)).max(0.0))
}

fn first(traj: &Trajectory) -> Result<&DensityField> {
    traj.snapshots
        .first()
        .map(|s| &s.rho)
        .ok_or_else(|| Error::Domain("empty trajectory".into()))
}

/// `min eig D^2 u[rho_t] >= -b_t` on every snapshot with `t >= t_min`; the
/// slack is relative to `b_t`.
pub fn lyh_continuous(
    traj: &Trajectory,
    pots: &Potentials,
    mode: Lambda0Mode,
    rel_slack: f64,
    t_min: f64,
) -> Result<Report> {
    let lambda0 = mode.defect(first(traj)?, pots)?;
    let big_lambda = pots.constants().big_lambda();
    let mut rep = Report::new(format!("lyh_continuous_{}", mode.name()));
    for (i, s) in traj.snapshots.iter().enumerate() {
        if !(s.t > 0.0 && s.t >= t_min) {
            continue;
        }
        let b = lyh_envelope(s.t, lambda0, big_lambda)?;
        let m = min_hessian_eig_refined(&pressure(&s.rho, pots)?, EXTREMUM_OVERSAMPLE);
        rep.rows
            .push(CheckRow::lower(format!("snap{i}"), s.t, m, -b, rel_slack * b + HESSIAN_TOL));
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyhJkoReport {
    /// `-lambda_k >= -E_k / tau`, absolute slack.
    pub sharp: Report,
    /// `-lambda_k >= -(1 + eps) envelope(k tau)` for `k tau >= t0`.
    pub envelope: Report,
    pub sequence: ComparisonSequence,
}

pub fn lyh_jko(
    flow: &JkoFlow,
    pots: &Potentials,
    mode: Lambda0Mode,
    sharp_slack: f64,
    env_eps: f64,
    t0: f64,
) -> Result<LyhJkoReport> {
    if flow.k() == 0 {
        return Err(Error::Domain("lyh_jko needs at least one step".into()));
    }
    let c = pots.constants();
    let lambda0 = mode.defect(&flow.steps[0].rho, pots)?;
    let seq = comparison_sequence(lambda0, flow.tau, flow.k(), &c)?;
    let mut sharp = Report::new(format!("lyh_jko_sharp_{}", mode.name()));
    let mut envelope = Report::new(format!("lyh_jko_envelope_{}", mode.name()));
    for (k, st) in flow.steps.iter().enumerate().skip(1) {
        let t = k as f64 * flow.tau;
        sharp
            .rows
            .push(CheckRow::lower(format!("k{k}"), t, -st.lambda1, -seq.defect_bound(k), sharp_slack + HESSIAN_TOL));
        if t >= t0 && t > 0.0 {
            let b = (1.0 + env_eps) * lyh_envelope(t, lambda0, c.big_lambda())?;
            envelope
                .rows
                .push(CheckRow::lower(format!("k{k}"), t, -st.lambda1, -b, HESSIAN_TOL));
        }
    }
    Ok(LyhJkoReport { sharp, envelope, sequence: seq })
}

/// Gradient and two-sided `L^inf` bounds along a trajectory.
///
/// The gradient row has slack `rel_slack * bound`; density rows have none.
pub fn lipschitz_check(
    traj: &Trajectory,
    pots: &Potentials,
    mode: Lambda0Mode,
    rel_slack: f64,
    t_min: f64,
) -> Result<Report> {
    let lambda0 = mode.defect(first(traj)?, pots)?;
    let c = pots.constants();
    let d = traj.grid.dim();
    let mut rep = Report::new(format!("lipschitz_{}", mode.name()));
    for (i, s) in traj.snapshots.iter().enumerate() {
        if !(s.t > 0.0 && s.t >= t_min) {
            continue;
        }
        let b = lipschitz_and_linfty_bounds(s.t, lambda0, &c, d)?;
        let g = grad_sup_inf_norm_refined(&pressure(&s.rho, pots)?, EXTREMUM_OVERSAMPLE);
        rep.rows
            .push(CheckRow::upper(format!("grad_u{i}"), s.t, g, b.grad_u_bound, rel_slack * b.grad_u_bound + HESSIAN_TOL));
        let vals = s.rho.values();
        let max = vals.iter().cloned().fold(0.0, f64::max);
        rep.rows.push(CheckRow::lower(format!("rho_min{i}"), s.t, s.rho.min(), b.rho_lower, 0.0));
        rep.rows.push(CheckRow::upper(format!("rho_max{i}"), s.t, max, b.rho_upper, 0.0));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Snapshot;
    use crate::torus::{PeriodicGrid, PotentialSpec};

    #[test]
    fn steady_state_passes_with_full_margin() {
        let grid = PeriodicGrid::new(1, 64).unwrap();
        let v = PotentialSpec::cos1(1, 0.2);
        let pots = Potentials::new(&v, &PotentialSpec::zero(1), grid).unwrap();
        let rho = crate::torus::DensityFamily::Gibbs.build(grid, &v).unwrap();
        let traj = Trajectory {
            grid,
            dt: 0.1,
            scheme: "const".into(),
            snapshots: (0..5).map(|i| Snapshot { t: 0.1 * i as f64, rho: rho.clone() }).collect(),
        };
        let rep = lyh_continuous(&traj, &pots, Lambda0Mode::Infinite, 0.0, 0.0).unwrap();
        assert_eq!(rep.rows.len(), 4);
        for r in &rep.rows {
            assert!(r.measured.abs() < 1e-10);
            assert!((r.margin + r.bound).abs() < 1e-10);
        }
    }
}
