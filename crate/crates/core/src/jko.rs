//! One proximal step `argmin F[rho] + W_2^2(rho, eta) / (2 tau)` and the flow
//! built from it.
//!
//! The transport term is the debiased entropic divergence
//! `S_eps(rho, eta) = OT_eps(rho, eta) - OT_eps(rho, rho)/2 - OT_eps(eta, eta)/2`,
//! whose first variation in `rho` is `f - p` (cross potential minus self
//! potential). The step solves `u[rho] + (f - p)/tau = const` by a fixed point
//! on the unweighted potentials `(F, P)` and `log rho`, with the `W * rho` term
//! lagged, accelerated by Anderson mixing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bounds::{eval_g, ComparisonSequence, Defect, PotentialConstants};
use crate::pde::{Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::torus::io::fmt_f64;
use crate::torus::{
    energy, min_hessian_eig, periodic_distance_sq, pressure, DensityField, PeriodicGrid,
    Potentials,
};
use crate::transport::{w2_circle_1d, GibbsKernel, Method, TransportResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JkoOptions {
    /// Entropic regularization.
    pub eps: f64,
    /// Stop when the fixed-point update moves the density by at most this in
    /// L1 and the potentials by at most this in units of `eps`.
    pub tol: f64,
    pub max_iter: usize,
    /// Anderson history length; 0 disables acceleration.
    pub anderson_depth: usize,
    /// Start of the annealing ladder used when no warm start is available.
    pub eps_start: f64,
    /// Require `tau < min(tau*, 1/Lambda)` so that the comparison calculus
    /// applies. When false only `tau lambda* < 1` (unique minimizer) is required.
    pub comparison_domain: bool,
}

impl Default for JkoOptions {
    fn default() -> Self {
        Self {
            eps: 5e-4,
            tol: 1e-11,
            max_iter: 20_000,
            anderson_depth: 8,
            eps_start: 0.05,
            comparison_domain: true,
        }
    }
}

/// Potentials carried from one step to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    /// Cross potential on the new density.
    pub f: Vec<f64>,
    /// Self potential of the new density (becomes the `eta` self potential).
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub rho: DensityField,
    pub transport: TransportResult,
    /// Standard deviation over nodes of `u[rho] + psi/tau`, `psi = f - p`.
    pub residual: f64,
    /// Same with the exact circle Kantorovich potential (1D only, NaN otherwise).
    pub exact_residual: f64,
    pub iterations: usize,
    pub warm: WarmStart,
}

struct Workspace<'a> {
    kernel: GibbsKernel,
    pots: &'a Potentials,
    eps: f64,
    tau: f64,
    log_eta: Vec<f64>,
}

impl Workspace<'_> {
    fn m(&self) -> usize {
        self.log_eta.len()
    }

    /// `eps * LSE_j((a_j - C_ij)/eps)` for `a` given in units of `eps`.
    fn soft(&self, a_over_eps: &[f64]) -> Vec<f64> {
        self.kernel
            .apply(a_over_eps)
            .into_iter()
            .map(|v| self.eps * v)
            .collect()
    }

    /// One application of the fixed-point map on `x = (F/eps, P/eps, log m)`.
    fn map(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        let e = self.eps;
        let (fx, rest) = x.split_at(m);
        let (px, lx) = rest.split_at(m);
        // G_j = eps log eta_j - eps LSE_i((F_i - C_ij)/eps)
        let kf = self.soft(fx);
        let gx: Vec<f64> = (0..m).map(|j| self.log_eta[j] - kf[j] / e).collect();
        // s_i = eps LSE_j((G_j - C_ij)/eps)
        let s = self.soft(&gx);
        // Symmetric self-potential update at the current density.
        let kp = self.soft(px);
        let p_new: Vec<f64> = (0..m).map(|i| 0.5 * (px[i] + lx[i] - kp[i] / e)).collect();
        let lag = self.pots.potential_part(&density_values(lx));
        let mut l_new: Vec<f64> = (0..m)
            .map(|i| (s[i] + e * p_new[i] - self.tau * lag[i]) / (self.tau + e))
            .collect();
        normalize_log(&mut l_new);
        let mut out = Vec::with_capacity(3 * m);
        out.extend((0..m).map(|i| l_new[i] - s[i] / e));
        out.extend_from_slice(&p_new);
        out.extend_from_slice(&l_new);
        out
    }

    /// Symmetric potential of `eta` itself (in units of `eps`).
    fn eta_self_potential(&self, init: Option<&[f64]>) -> Result<Vec<f64>> {
        let m = self.m();
        let mut q = init.map(|v| v.to_vec()).unwrap_or_else(|| self.log_eta.clone());
        for it in 0..10_000 {
            let k = self.soft(&q);
            let mut delta = 0.0_f64;
            for i in 0..m {
                let nq = 0.5 * (q[i] + self.log_eta[i] - k[i] / self.eps);
                delta = delta.max((nq - q[i]).abs());
                q[i] = nq;
            }
            if delta < 1e-13 {
                return Ok(q);
            }
            if it == 9_999 {
                return Err(Error::NonConvergence {
                    solver: "symmetric sinkhorn",
                    iterations: it + 1,
                    residual: delta,
                });
            }
        }
        Ok(q)
    }
}

/// Node density values (mean 1) from mass log-weights.
fn density_values(log_mass: &[f64]) -> Vec<f64> {
    let n = log_mass.len() as f64;
    log_mass.iter().map(|l| l.exp() * n).collect()
}

/// Shifts `l` so that `sum exp(l) = 1`.
fn normalize_log(l: &mut [f64]) {
    let mx = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = l.iter().map(|v| (v - mx).exp()).sum();
    let shift = mx + s.ln();
    for v in l.iter_mut() {
        *v -= shift;
    }
}

/// Convergence measure of an update `x -> y` (see [`JkoOptions::tol`]).
fn update_size(x: &[f64], y: &[f64], m: usize) -> f64 {
    let l1: f64 = (0..m)
        .map(|i| (y[2 * m + i].exp() - x[2 * m + i].exp()).abs())
        .sum();
    let df: Vec<f64> = (0..m).map(|i| y[i] - x[i]).collect();
    let mean = df.iter().sum::<f64>() / m as f64;
    let fmax = df.iter().fold(0.0_f64, |a, d| a.max((d - mean).abs()));
    let pmax = (0..m).fold(0.0_f64, |a, i| a.max((y[m + i] - x[m + i]).abs()));
    l1 + fmax + pmax
}

/// Type-II Anderson mixing with a reset safeguard.
struct Anderson {
    depth: usize,
    dx: Vec<Vec<f64>>,
    dr: Vec<Vec<f64>>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self { depth, dx: Vec::new(), dr: Vec::new(), prev: None }
    }

    fn reset(&mut self) {
        self.dx.clear();
        self.dr.clear();
        self.prev = None;
    }

    /// Next iterate from `x` and its residual `r = map(x) - x`.
    fn next(&mut self, x: &[f64], r: &[f64]) -> Vec<f64> {
        if self.depth == 0 {
            return x.iter().zip(r).map(|(a, b)| a + b).collect();
        }
        if let Some((px, pr)) = self.prev.take() {
            self.dx.push(x.iter().zip(&px).map(|(a, b)| a - b).collect());
            self.dr.push(r.iter().zip(&pr).map(|(a, b)| a - b).collect());
            if self.dx.len() > self.depth {
                self.dx.remove(0);
                self.dr.remove(0);
            }
        }
        self.prev = Some((x.to_vec(), r.to_vec()));
        let k = self.dr.len();
        let mut out: Vec<f64> = x.iter().zip(r).map(|(a, b)| a + b).collect();
        if k == 0 {
            return out;
        }
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for i in 0..k {
            for j in 0..=i {
                let v = dot(&self.dr[i], &self.dr[j]);
                a[i * k + j] = v;
                a[j * k + i] = v;
            }
            b[i] = dot(&self.dr[i], r);
        }
        let scale = (0..k).map(|i| a[i * k + i]).fold(0.0, f64::max);
        for i in 0..k {
            a[i * k + i] += 1e-12 * scale;
        }
        let Some(gamma) = solve_dense(a, b, k) else {
            self.reset();
            return out;
        };
        for (j, g) in gamma.iter().enumerate() {
            for i in 0..out.len() {
                out[i] -= g * (self.dx[j][i] + self.dr[j][i]);
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, k: usize) -> Option<Vec<f64>> {
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i * k + col].abs().total_cmp(&a[j * k + col].abs()))?;
        if a[piv * k + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..k {
                a.swap(piv * k + j, col * k + j);
            }
            b.swap(piv, col);
        }
        for i in (col + 1)..k {
            let f = a[i * k + col] / a[col * k + col];
            for j in col..k {
                a[i * k + j] -= f * a[col * k + j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = ((i + 1)..k).map(|j| a[i * k + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * k + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn solve_stage(ws: &Workspace, mut x: Vec<f64>, opts: &JkoOptions, tol: f64) -> Result<(Vec<f64>, usize)> {
    let m = ws.m();
    let mut acc = Anderson::new(opts.anderson_depth);
    let mut best = f64::INFINITY;
    let mut best_x = x.clone();
    let mut last = f64::INFINITY;
    for it in 0..opts.max_iter {
        let y = ws.map(&x);
        let size = update_size(&x, &y, m);
        if !size.is_finite() {
            acc.reset();
            x = best_x.clone();
            continue;
        }
        if size <= tol {
            return Ok((y, it + 1));
        }
        last = size;
        if size < best {
            best = size;
            best_x = x.clone();
        } else if size > 1e3 * best {
            // Extrapolation went astray: restart plain iteration from the best point.
            acc.reset();
            x = ws.map(&best_x);
            continue;
        }
        let r: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        x = acc.next(&x, &r);
        let mut l = x[2 * m..].to_vec();
        normalize_log(&mut l);
        x[2 * m..].copy_from_slice(&l);
    }
    Err(Error::NonConvergence {
        solver: "jko fixed point",
        iterations: opts.max_iter,
        residual: last,
    })
}

/// One JKO step from `eta`.
pub fn jko_step(
    eta: &DensityField,
    tau: f64,
    pots: &Potentials,
    opts: &JkoOptions,
    warm: Option<&WarmStart>,
) -> Result<StepOutput> {
    let grid = eta.grid();
    if grid != pots.grid() {
        return Err(Error::Dimension("eta and potentials live on different grids".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let c = pots.constants();
    if opts.comparison_domain && c.big_lambda() > 0.0 {
        c.check_tau(tau)?;
    } else if tau * c.lambda_star() >= 1.0 {
        return Err(Error::Domain(format!(
            "tau = {tau} makes the proximal problem non-convex (tau lambda* >= 1)"
        )));
    }
    if !(opts.eps >= crate::transport::EPS_FLOOR) {
        return Err(Error::Domain(format!("eps = {} below the transport floor", opts.eps)));
    }
    let m = grid.len();
    let inv_m = 1.0 / m as f64;
    let log_eta: Vec<f64> = eta.values().iter().map(|v| (v * inv_m).ln()).collect();

    let ladder = match warm {
        Some(_) => vec![opts.eps],
        None => crate::transport::eps_ladder(opts.eps_start.max(opts.eps), opts.eps),
    };
    // Initial state: rho = eta, F = P = eps log eta (the self-transport solution at eps = inf).
    let mut x = Vec::with_capacity(3 * m);
    match warm {
        Some(w) => {
            x.extend(w.f.iter().map(|v| v / opts.eps));
            x.extend(w.p.iter().map(|v| v / opts.eps));
        }
        None => {
            x.extend_from_slice(&log_eta);
            x.extend_from_slice(&log_eta);
        }
    }
    x.extend_from_slice(&log_eta);

    let mut iterations = 0;
    let mut ws = None;
    for (stage, &e) in ladder.iter().enumerate() {
        let w = Workspace {
            kernel: GibbsKernel::new(grid, e)?,
            pots,
            eps: e,
            tau,
            log_eta: log_eta.clone(),
        };
        if stage > 0 {
            // Potentials in units of eps: rescale when eps halves.
            let prev = ladder[stage - 1];
            for v in x[..2 * m].iter_mut() {
                *v *= prev / e;
            }
        }
        let last = stage + 1 == ladder.len();
        let tol = if last { opts.tol } else { opts.tol.max(1e-6) };
        let (nx, it) = solve_stage(&w, x, opts, tol)?;
        x = nx;
        iterations += it;
        ws = Some(w);
    }
    let ws = ws.expect("ladder is non-empty");
    let e = opts.eps;

    let rho = DensityField::new(grid, density_values(&x[2 * m..]))?;
    let f: Vec<f64> = x[..m].iter().map(|v| v * e).collect();
    let p: Vec<f64> = x[m..2 * m].iter().map(|v| v * e).collect();
    let psi_raw: Vec<f64> = f.iter().zip(&p).map(|(a, b)| a - b).collect();
    let mean = psi_raw.iter().sum::<f64>() * inv_m;
    let psi: Vec<f64> = psi_raw.iter().map(|v| v - mean).collect();

    // Debiased cost 2 S_eps from the dual values of the three problems.
    let q = ws.eta_self_potential(warm.map(|w| w.p.iter().map(|v| v / e).collect::<Vec<_>>()).as_deref())?;
    let lm = &x[2 * m..];
    let kf = ws.soft(&x[..m]);
    let g_unw: Vec<f64> = (0..m).map(|j| e * log_eta[j] - kf[j]).collect();
    let mut ot_cross = 0.0;
    let mut ot_rho = 0.0;
    let mut ot_eta = 0.0;
    for i in 0..m {
        let mi = lm[i].exp();
        let ei = log_eta[i].exp();
        // Weighted potentials: F - eps log m, G - eps log eta, P - eps log m.
        ot_cross += mi * (f[i] - e * lm[i]) + ei * (g_unw[i] - e * log_eta[i]);
        ot_rho += 2.0 * mi * (p[i] - e * lm[i]);
        ot_eta += 2.0 * ei * (e * q[i] - e * log_eta[i]);
    }
    let sdiv = ot_cross - 0.5 * ot_rho - 0.5 * ot_eta;

    let u = pressure(&rho, pots)?;
    let residual = spread(&u.values, &psi, tau);
    let exact_residual = if grid.dim() == 1 {
        let ex = w2_circle_1d(&rho, eta)?;
        spread(&u.values, &ex.psi, tau)
    } else {
        f64::NAN
    };
    let transport = TransportResult {
        cost: 2.0 * sdiv,
        eps: e,
        method: Method::Sinkhorn,
        psi,
        phi: g_unw,
        plan: None,
        assignment: None,
        displacement: None,
        marginal_error: 0.0,
        iterations,
    };
    Ok(StepOutput {
        rho,
        transport,
        residual,
        exact_residual,
        iterations,
        warm: WarmStart { f, p },
    })
}

/// Standard deviation of `u + psi/tau` over nodes.
fn spread(u: &[f64], psi: &[f64], tau: f64) -> f64 {
    let v: Vec<f64> = u.iter().zip(psi).map(|(a, b)| a + b / tau).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowStep {
    pub rho: DensityField,
    /// Transport from the previous density (absent for `k = 0`).
    pub transport: Option<TransportResult>,
    pub residual: f64,
    pub exact_residual: f64,
    pub energy: f64,
    /// Exact `W_2^2(rho_k, rho_{k-1})` in 1D (debiased entropic estimate in 2D).
    pub w2_sq: f64,
    /// `-min eig D^2 u[rho_k]` (raw).
    pub lambda1: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JkoFlow {
    pub tau: f64,
    pub eps: f64,
    pub steps: Vec<FlowStep>,
}

impl JkoFlow {
    pub fn grid(&self) -> PeriodicGrid {
        self.steps[0].rho.grid()
    }

    /// Number of proximal steps `K`.
    pub fn k(&self) -> usize {
        self.steps.len() - 1
    }

    /// Piecewise-constant interpolation: `rho_k` on `[k tau, (k+1) tau)`.
    pub fn at(&self, t: f64) -> &DensityField {
        let k = ((t / self.tau) * (1.0 + 1e-12)).floor().max(0.0) as usize;
        &self.steps[k.min(self.steps.len() - 1)].rho
    }

    /// Index used by [`JkoFlow::at`].
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t / self.tau) * (1.0 + 1e-12)).floor().max(0.0) as usize;
        k.min(self.steps.len() - 1)
    }

    /// Largest violation of `F[rho_{k+1}] + W_2^2/(2 tau) <= F[rho_k]` (negative when all hold).
    pub fn descent_violation(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| w[1].energy + w[1].w2_sq / (2.0 * self.tau) - w[0].energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV step log. With a comparison sequence the `bound` column is
    /// `E_k / tau` and `margin = bound - lambda1`; otherwise both are NaN.
    pub fn step_log(&self, seq: Option<&ComparisonSequence>) -> String {
        let mut s = String::from(
            "k,t,energy,w2_sq,residual,exact_residual,lambda1,bound,margin,iterations\n",
        );
        for (k, st) in self.steps.iter().enumerate() {
            let bound = seq
                .filter(|q| k < q.len())
                .map_or(f64::NAN, |q| q.defect_bound(k));
            let _ = writeln!(
                s,
                "{k},{},{},{},{},{},{},{},{},{}",
                fmt_f64(k as f64 * self.tau),
                fmt_f64(st.energy),
                fmt_f64(st.w2_sq),
                fmt_f64(st.residual),
                fmt_f64(st.exact_residual),
                fmt_f64(st.lambda1),
                fmt_f64(bound),
                fmt_f64(bound - st.lambda1),
                st.iterations
            );
        }
        s
    }

    /// The step densities as a trajectory with snapshots at `k tau`.
    pub fn to_trajectory(&self) -> Trajectory {
        Trajectory {
            grid: self.grid(),
            dt: self.tau,
            scheme: "jko".into(),
            snapshots: self
                .steps
                .iter()
                .enumerate()
                .map(|(k, s)| Snapshot { t: k as f64 * self.tau, rho: s.rho.clone() })
                .collect(),
        }
    }

    /// Trajectory directory plus `transport_XXXXX.txt` per step and `steps.csv`.
    pub fn write_dir(&self, dir: &Path, seq: Option<&ComparisonSequence>) -> Result<Vec<PathBuf>> {
        let mut paths = self.to_trajectory().write_dir(dir)?;
        let grid = self.grid();
        for (k, st) in self.steps.iter().enumerate() {
            if let Some(tr) = &st.transport {
                let p = dir.join(format!("transport_{k:05}.txt"));
                std::fs::write(&p, tr.to_text(&grid))?;
                paths.push(p);
            }
        }
        let p = dir.join("steps.csv");
        std::fs::write(&p, self.step_log(seq))?;
        paths.push(p);
        Ok(paths)
    }
}

/// `K` iterated steps from `rho0`, each warm-started from the previous one.
pub fn jko_flow(
    rho0: &DensityField,
    tau: f64,
    k_steps: usize,
    pots: &Potentials,
    opts: &JkoOptions,
) -> Result<JkoFlow> {
    let mut steps = vec![FlowStep {
        rho: rho0.clone(),
        transport: None,
        residual: 0.0,
        exact_residual: 0.0,
        energy: energy(rho0, pots)?,
        w2_sq: 0.0,
        lambda1: -min_hessian_eig(&pressure(rho0, pots)?),
        iterations: 0,
    }];
    let mut warm: Option<WarmStart> = None;
    for _ in 0..k_steps {
        let prev = &steps.last().expect("non-empty").rho;
        let out = jko_step(prev, tau, pots, opts, warm.as_ref())?;
        let w2_sq = if prev.grid().dim() == 1 {
            w2_circle_1d(&out.rho, prev)?.cost
        } else {
            out.transport.cost
        };
        let e = energy(&out.rho, pots)?;
        let lambda1 = -min_hessian_eig(&pressure(&out.rho, pots)?);
        warm = Some(out.warm);
        steps.push(FlowStep {
            rho: out.rho,
            transport: Some(out.transport),
            residual: out.residual,
            exact_residual: out.exact_residual,
            energy: e,
            w2_sq,
            lambda1,
            iterations: out.iterations,
        });
    }
    Ok(JkoFlow { tau, eps: opts.eps, steps })
}

/// Measured quantities of the one-step semi-convexity theorem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneStep {
    /// `-min eig D^2 u[eta]` (raw, may be negative).
    pub lambda0_raw: f64,
    pub lambda1_raw: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// `G[tau lambda1+, tau] - tau lambda0+` (`+inf` if `tau lambda1+ >= 1`).
    pub g_check: f64,
}

pub fn one_step_lambda(
    eta: &DensityField,
    rho: &DensityField,
    pots: &Potentials,
    tau: f64,
) -> Result<OneStep> {
    let c: PotentialConstants = pots.constants();
    let l0 = -min_hessian_eig(&pressure(eta, pots)?);
    let l1 = -min_hessian_eig(&pressure(rho, pots)?);
    let (p0, p1) = (l0.max(0.0), l1.max(0.0));
    let e1 = tau * p1;
    let g = if e1 >= 1.0 {
        f64::INFINITY
    } else {
        eval_g(e1, tau, &c)?
    };
    Ok(OneStep {
        lambda0_raw: l0,
        lambda1_raw: l1,
        lambda0: p0,
        lambda1: p1,
        g_check: g - tau * p0,
    })
}

/// Measured `lambda0` of a density as a [`Defect`].
pub fn measured_defect(rho: &DensityField, pots: &Potentials) -> Result<Defect> {
    Ok(Defect::Finite((-min_hessian_eig(&pressure(rho, pots)?)).max(0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarnackParams {
    /// Exponent inflation `(1 + eps) d`.
    pub eps: f64,
    /// Constant multiplying `(h + 1/h + 1) tau`.
    pub c: f64,
    pub t0: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarnackSample {
    pub t: f64,
    pub h: f64,
    pub x: usize,
    pub y: usize,
    /// `log RHS - log LHS` without the `C` term.
    pub raw_margin: f64,
    /// `log RHS - log LHS`.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarnackReport {
    pub samples: Vec<HarnackSample>,
    pub pass_rate: f64,
    pub worst_margin: f64,
}

impl HarnackReport {
    /// Smallest `C` that makes every sample pass.
    pub fn required_c(&self, tau: f64) -> f64 {
        self.samples
            .iter()
            .map(|s| -s.raw_margin / ((s.h + 1.0 / s.h + 1.0) * tau))
            .fold(0.0, f64::max)
    }
}

/// Checks the discrete Harnack inequality on seeded random `(x, y, t, h)`.
pub fn discrete_harnack_check(
    flow: &JkoFlow,
    c: &PotentialConstants,
    params: &HarnackParams,
) -> Result<HarnackReport> {
    use rand::{Rng, SeedableRng};
    let tau = flow.tau;
    let grid = flow.grid();
    let t_end = flow.k() as f64 * tau;
    let t_lo = params.t0 + tau;
    if !(t_end - t_lo > 2.0 * tau) {
        return Err(Error::Domain(format!(
            "flow horizon {t_end} too short for t0 = {} and tau = {tau}",
            params.t0
        )));
    }
    let d = grid.dim();
    let big_lambda = c.big_lambda();
    let a = c.a();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
    let mut samples = Vec::with_capacity(params.samples);
    for _ in 0..params.samples {
        let t = rng.gen_range(t_lo..t_end - 2.0 * tau);
        let h = rng.gen_range(1.0001 * tau..t_end - t);
        let x = rng.gen_range(0..grid.len());
        let y = rng.gen_range(0..grid.len());
        let lhs = flow.at(t).values()[x].ln();
        let rhs_rho = flow.at(t + h).values()[y].ln();
        let xs = grid.coords(x);
        let ys = grid.coords(y);
        let dist2 = periodic_distance_sq(&xs[..d], &ys[..d]);
        let factor = crate::bounds::log_harnack_factor(t, h, big_lambda, d)? * (1.0 + params.eps);
        let raw = rhs_rho + factor + dist2 / (2.0 * (h - tau)) + 0.5 * h * a * a - lhs;
        let margin = raw + params.c * (h + 1.0 / h + 1.0) * tau;
        samples.push(HarnackSample { t, h, x, y, raw_margin: raw, margin });
    }
    let passed = samples.iter().filter(|s| s.margin >= 0.0).count();
    let worst = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    Ok(HarnackReport {
        pass_rate: passed as f64 / samples.len().max(1) as f64,
        worst_margin: worst,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{DensityFamily, PotentialSpec};

    #[test]
    fn dense_solve_matches_known_system() {
        let x = solve_dense(vec![2.0, 1.0, 1.0, 3.0], vec![3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn gibbs_state_is_a_fixed_point() {
        let grid = PeriodicGrid::new(1, 64).unwrap();
        let v = PotentialSpec::cos1(1, 0.2);
        let pots = Potentials::new(&v, &PotentialSpec::zero(1), grid).unwrap();
        let eta = DensityFamily::Gibbs.build(grid, &v).unwrap();
        let opts = JkoOptions { eps: 2e-3, ..JkoOptions::default() };
        let out = jko_step(&eta, 0.02, &pots, &opts, None).unwrap();
        assert!(out.rho.l1_distance(&eta) < 1e-9, "{}", out.rho.l1_distance(&eta));
        assert!(out.transport.cost.abs() < 1e-10);
    }
}
