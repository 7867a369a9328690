//! Acceptance criteria 1 to 14. Each prints one pass/fail line; the target
//! fails if any criterion does.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lyhjko::bounds::{
    comparison_sequence, critical_value, eval_g, helper_f, helper_g, helper_g_inv, invert_g, lyh_envelope, ode_x,
    Defect, PotentialConstants,
};
use lyhjko::jko::{discrete_harnack_check, jko_flow, one_step_lambda, HarnackParams, JkoFlow, JkoOptions};
use lyhjko::pde::{evolve, raw_mass_drift, Trajectory};
use lyhjko::torus::{
    min_hessian_eig_refined, periodic_distance_sq, pressure, DensityFamily, DensityField, PeriodicGrid, PotentialSpec,
    Potentials, TrigTerm, EXTREMUM_OVERSAMPLE,
};
use lyhjko::transport::{lp_oracle, sinkhorn_periodic, w2_circle_1d, SinkhornOptions};
use lyhjko::verify::{
    convergence_report, epsilon_ladder, grid_refinement, harnack_continuous, lyh_continuous, measured_lambda0,
    HarnackOptions, Lambda0Mode,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sci(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.3e}")).join(", "))
}

fn lib<T>(r: lyhjko::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

#[derive(Clone, Copy)]
struct Scenario {
    name: &'static str,
    v: f64,
    w: f64,
    /// The criteria ask for 0.02; GM uses 0.01 because 0.02 is above its tau*.
    tau: f64,
    steps: usize,
}

const SCENARIOS: [Scenario; 3] = [
    Scenario { name: "heat", v: 0.0, w: 0.0, tau: 0.02, steps: 50 },
    Scenario { name: "fp", v: 0.2, w: 0.0, tau: 0.02, steps: 50 },
    Scenario { name: "gm", v: 0.2, w: 0.1, tau: 0.01, steps: 100 },
];

const N: usize = 256;
const EPS_LADDER: [f64; 3] = [2e-3, 1e-3, 5e-4];
const ONE_STEP_SLACK: f64 = 5e-3;
const COMPARISON_SLACK: f64 = 5e-2;
const LYH_SLACK: f64 = 0.05;
const HARNACK_EPS: f64 = 0.1;
const HARNACK_T0: f64 = 0.1;
const HARNACK_MISS_SLACK: f64 = 0.05;
const CALIBRATION_SEED: u64 = 0x5eed_ca1b;

fn spec(amp: f64) -> PotentialSpec {
    if amp == 0.0 {
        PotentialSpec::zero(1)
    } else {
        PotentialSpec::cos1(1, amp)
    }
}

fn grid(n: usize) -> PeriodicGrid {
    PeriodicGrid::new(1, n).unwrap()
}

fn pots(s: &Scenario, n: usize) -> Potentials {
    Potentials::new(&spec(s.v), &spec(s.w), grid(n)).unwrap()
}

fn bump(n: usize) -> DensityField {
    DensityFamily::HeatKernel { width: 0.005, center: [0.5, 0.0] }
        .build(grid(n), &PotentialSpec::zero(1))
        .unwrap()
}

fn times(spacing: f64, t_end: f64) -> Vec<f64> {
    let m = (t_end / spacing).round() as usize;
    (1..=m).map(|i| if i == m { t_end } else { i as f64 * spacing }).collect()
}

fn pde(s: &Scenario, n: usize, spacing: f64, t_end: f64) -> Trajectory {
    evolve(&bump(n), &pots(s, n), t_end, 1e-4, &times(spacing, t_end)).unwrap()
}

fn opts(eps: f64) -> JkoOptions {
    JkoOptions { eps, ..JkoOptions::default() }
}

/// Flows at each rung of the eps ladder, per scenario, at the scenario step.
fn ladders() -> &'static Vec<Vec<JkoFlow>> {
    static L: OnceLock<Vec<Vec<JkoFlow>>> = OnceLock::new();
    L.get_or_init(|| {
        SCENARIOS
            .iter()
            .map(|s| {
                EPS_LADDER
                    .iter()
                    .map(|&e| jko_flow(&bump(N), s.tau, s.steps, &pots(s, N), &opts(e)).unwrap())
                    .collect()
            })
            .collect()
    })
}

/// Flows at tau = 0.01 to t = 1 for heat and FP (GM already runs at 0.01).
fn fine_flows() -> &'static Vec<JkoFlow> {
    static F: OnceLock<Vec<JkoFlow>> = OnceLock::new();
    F.get_or_init(|| {
        SCENARIOS[..2]
            .iter()
            .map(|s| jko_flow(&bump(N), 0.01, 100, &pots(s, N), &opts(5e-4)).unwrap())
            .collect()
    })
}

fn fine_flow(i: usize) -> &'static JkoFlow {
    if i < 2 {
        &fine_flows()[i]
    } else {
        ladders()[2].last().unwrap()
    }
}

fn one_step_values(flow: &JkoFlow, p: &Potentials) -> Result<Vec<(f64, f64)>, String> {
    (1..flow.steps.len())
        .map(|k| {
            let o = lib(one_step_lambda(&flow.steps[k - 1].rho, &flow.steps[k].rho, p, flow.tau))?;
            Ok((o.g_check, flow.tau * o.lambda1))
        })
        .collect()
}

// ---------------------------------------------------------------- criteria

fn c1_calculus() -> Outcome {
    let cases = [PotentialConstants::zero(), PotentialConstants::from_star(2.0, 3.0), PotentialConstants::from_star(0.5, 4.0)];
    let mut worst_fix = 0.0_f64;
    let mut worst_inv = 0.0_f64;
    for c in &cases {
        for &tau in &[1e-3, 1e-2, 0.05, 0.1] {
            if c.check_tau(tau).is_err() {
                continue;
            }
            if c.big_lambda() > 0.0 {
                let ec = lib(critical_value(tau, c))?;
                worst_fix = worst_fix.max((lib(eval_g(ec, tau, c))? - ec).abs());
            }
            for i in 0..=48 {
                let y = 10f64.powf(-6.0 + i as f64 / 6.0);
                let e = lib(invert_g(y, tau, c))?;
                worst_inv = worst_inv.max((lib(eval_g(e, tau, c))? - y).abs());
            }
        }
    }
    let mut worst_fg = 0.0_f64;
    for i in 0..200 {
        let z = 1.0 + 10f64.powf(-8.0 + i as f64 * 0.06);
        let g = lib(helper_g(z))?;
        worst_fg = worst_fg.max((lib(helper_g_inv(g))? - z).abs() / z);
        worst_fg = worst_fg.max((lib(helper_f(z))? - z * g).abs());
        let w = i as f64 / 200.0 + 1.0 / 400.0;
        worst_fg = worst_fg.max((lib(helper_g(lib(helper_g_inv(w))?))? - w).abs());
    }
    ensure(worst_fix <= 1e-12, || format!("G fixed point error {worst_fix:.2e}"))?;
    ensure(worst_inv <= 1e-10, || format!("invert_G round trip error {worst_inv:.2e}"))?;
    ensure(worst_fg <= 1e-12, || format!("f/g round trip error {worst_fg:.2e}"))?;
    Ok(format!("fixed point {worst_fix:.1e}, invert_G {worst_inv:.1e}, f/g {worst_fg:.1e}"))
}

/// Root of `E/(1-E)^2 = 1` in `[0, 1)` by bisection.
fn e2_oracle() -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 0.9_f64);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m / ((1.0 - m) * (1.0 - m)) < 1.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

fn c2_heat_asymptotics() -> Outcome {
    let c = PotentialConstants::zero();
    let seq = lib(comparison_sequence(Defect::Infinite, 0.1, 1000, &c))?;
    let e2 = seq.e(2);
    let oracle = e2_oracle();
    let closed = (3.0 - 5f64.sqrt()) / 2.0;
    let asym = (2.0 * 1000.0 * seq.e(1000) - 1.0).abs();
    ensure((e2 - oracle).abs() <= 1e-12 && (e2 - closed).abs() <= 1e-12, || {
        format!("E_2 = {e2}, oracle {oracle}, closed form {closed}")
    })?;
    ensure(asym <= 0.01, || format!("|2k E_k - 1| = {asym:.4e} at k = 1000"))?;
    Ok(format!("E_2 error {:.1e}, |2k E_k - 1| = {asym:.3e} at k = 1000", (e2 - closed).abs()))
}

fn c3_heat_bound() -> Outcome {
    let c = PotentialConstants::zero();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for &tau in &[0.5, 0.1, 0.01] {
        for &l0 in &[0.5, 1.0, 2.0] {
            let e0: f64 = tau * l0;
            if e0 > 1.0 {
                continue;
            }
            cases += 1;
            let seq = lib(comparison_sequence(Defect::Finite(l0), tau, 10_000, &c))?;
            for k in 0..=10_000 {
                let bound = e0 / (k as f64 * e0 * (2.0 - e0) + 1.0);
                worst = worst.max(seq.e(k) - bound);
            }
        }
    }
    ensure(worst <= 1e-12, || format!("E_k exceeds the bound by {worst:.2e}"))?;
    Ok(format!("{cases} (tau, lambda0) pairs, max E_k - bound = {worst:.2e}"))
}

#[derive(Debug, PartialEq)]
enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

fn trend(v: &[f64]) -> Trend {
    let tol = 1e-14;
    if v.iter().all(|x| (x - v[0]).abs() <= tol) {
        return Trend::Constant;
    }
    let up = v.windows(2).all(|w| w[1] >= w[0] - tol) && v[1] > v[0];
    let down = v.windows(2).all(|w| w[1] <= w[0] + tol) && v[1] < v[0];
    match (up, down) {
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        _ => Trend::Mixed,
    }
}

fn c4_trichotomy() -> Outcome {
    let c = PotentialConstants::from_star(2.0, 3.0);
    let taus = [0.01, 0.03, 0.06, 0.09, 0.12];
    let lambdas = [0.0, 1.0, 3.0, 10.0, 100.0];
    let mut checked = 0;
    for &tau in &taus {
        let ec = lib(critical_value(tau, &c))?;
        let mut l0s: Vec<f64> = lambdas.to_vec();
        l0s.push(ec / tau);
        for &l0 in &l0s {
            let seq = lib(comparison_sequence(Defect::Finite(l0), tau, 200, &c))?;
            let d = tau * l0 - ec;
            let expected = if l0 == 0.0 || d.abs() <= 1e-15 {
                Trend::Constant
            } else if d < 0.0 {
                Trend::Increasing
            } else {
                Trend::Decreasing
            };
            let got = trend(&seq.values);
            ensure(got == expected, || format!("tau = {tau}, lambda0 = {l0}: {got:?}, expected {expected:?}"))?;
            checked += 1;
        }
    }
    let mut pairs = 0;
    for (i, &tau) in taus.iter().enumerate() {
        for &eta in &taus[i..] {
            for &l0 in &lambdas {
                let a = lib(comparison_sequence(Defect::Finite(l0), tau, 200, &c))?;
                let b = lib(comparison_sequence(Defect::Finite(l0), eta, 200, &c))?;
                if let Some(k) = (0..=200).find(|&k| a.e(k) > b.e(k) + 1e-15) {
                    return Err(format!("E_{k}^{tau} = {} > E_{k}^{eta} = {}", a.e(k), b.e(k)));
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("{checked} sequences classified, {pairs} (tau <= eta) pairs ordered"))
}

fn ode_sup_error(tau: f64, c: &PotentialConstants) -> Result<f64, String> {
    let k_max = (2.0 / tau).round() as usize;
    let seq = lib(comparison_sequence(Defect::Finite(1.0), tau, k_max, c))?;
    let mut sup = 0.0_f64;
    for k in 0..k_max {
        let x = seq.inverse(k);
        for t in [k as f64 * tau, (k + 1) as f64 * tau] {
            sup = sup.max((x - ode_x(t, 1.0, c.big_lambda())).abs());
        }
    }
    Ok(sup)
}

fn c5_ode_rate() -> Outcome {
    let c = PotentialConstants::from_star(2.0, 3.0);
    assert_eq!(c.big_lambda(), 7.0);
    let errs: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&t| ode_sup_error(t, &c)).collect::<Result<_, _>>()?;
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    ensure(ratios.iter().all(|r| (1.6..=2.5).contains(r)), || {
        format!("errors {}, ratios {ratios:.3?}", sci(&errs))
    })?;
    Ok(format!("sup errors {}, ratios {ratios:.3?}", sci(&errs)))
}

fn c6_lemma1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    let mut tightest = 0.0_f64;
    for i in 0..200 {
        let dim = 1 + i % 2;
        let terms: Vec<TrigTerm> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let f = [rng.gen_range(-4..=4), if dim == 2 { rng.gen_range(-4..=4) } else { 0 }];
                let a = rng.gen_range(-1.0..1.0);
                if rng.gen_bool(0.5) {
                    TrigTerm::cos(f, a)
                } else {
                    TrigTerm::sin(f, a)
                }
            })
            .collect();
        let u = lib(PotentialSpec::new(dim, terms))?;
        let lambda = u.certified().lambda;
        let m = if dim == 1 { 8192 } else { 256 };
        let mut sup = 0.0_f64;
        for a in 0..m {
            for b in 0..if dim == 1 { 1 } else { m } {
                let g = u.gradient([a as f64 / m as f64, b as f64 / m as f64]);
                sup = sup.max(g[0].abs()).max(g[1].abs());
            }
        }
        worst = worst.max(sup - lambda / 2.0);
        if lambda > 0.0 {
            tightest = tightest.max(sup / (lambda / 2.0));
        }
    }
    ensure(worst <= 1e-8, || format!("sup |grad u| exceeds lambda/2 by {worst:.3e}"))?;
    Ok(format!("200 polynomials, max(sup|grad u| - lambda/2) = {worst:.3e}, largest ratio {tightest:.4}"))
}

fn c7_pde() -> Outcome {
    let g = grid(256);
    let zero = PotentialSpec::zero(1);
    let heat = Potentials::new(&zero, &zero, g).unwrap();
    let rho0 = lib(DensityFamily::Cosine { amplitude: 0.5, freq: [1, 0] }.build(g, &zero))?;
    let traj = lib(evolve(&rho0, &heat, 0.1, 1e-4, &[0.1]))?;
    let decay = 0.5 * (-4.0 * std::f64::consts::PI.powi(2) * 0.1).exp();
    let heat_err = traj.snapshots.last().unwrap().rho.values().iter().enumerate().fold(0.0_f64, |m, (i, v)| {
        let x = g.coords(i)[0];
        m.max((v - (1.0 + decay * (2.0 * std::f64::consts::PI * x).cos())).abs())
    });
    let fp = Potentials::new(&spec(0.2), &zero, g).unwrap();
    let gibbs = lib(DensityFamily::Gibbs.build(g, &spec(0.2)))?;
    let start = DensityField::uniform(g);
    let traj = lib(evolve(&start, &fp, 5.0, 1e-4, &[5.0]))?;
    let l1 = traj.snapshots.last().unwrap().rho.values().iter().zip(gibbs.values()).map(|(a, b)| (a - b).abs()).sum::<f64>()
        / g.len() as f64;
    let drift = lib(raw_mass_drift(&bump(256), &fp, 1.0, 1e-4))?;
    ensure(heat_err <= 1e-6, || format!("heat sup error {heat_err:.2e}"))?;
    ensure(l1 <= 1e-6, || format!("FP steady-state L1 error {l1:.2e}"))?;
    ensure(drift <= 1e-10, || format!("mass drift {drift:.2e} over t = 1"))?;
    Ok(format!("heat sup error {heat_err:.1e}, FP L1 at t = 5 {l1:.1e}, mass drift {drift:.1e} per unit time"))
}

/// Worst `margin / |bound|` of the continuous LYH rows.
fn worst_relative_lyh(s: &Scenario, n: usize, mode: Lambda0Mode) -> lyhjko::Result<f64> {
    let traj = pde(s, n, 0.01, 1.0);
    let rep = lyh_continuous(&traj, &pots(s, n), mode, 0.0, 0.01)?;
    Ok(rep.rows.iter().filter(|r| r.bound < 0.0).map(|r| r.margin / -r.bound).fold(f64::INFINITY, f64::min))
}

fn c8_continuous_lyh() -> Outcome {
    let mut parts = Vec::new();
    for s in &SCENARIOS {
        let mode = if s.name == "heat" { Lambda0Mode::Infinite } else { Lambda0Mode::Measured };
        let traj = pde(s, 512, 0.01, 1.0);
        let p = pots(s, 512);
        let l0 = lib(measured_lambda0(&bump(512), &p))?;
        let big = p.constants().big_lambda();
        let mut worst = f64::INFINITY;
        for snap in traj.snapshots.iter().filter(|x| x.t >= 0.01 - 1e-12) {
            let m = min_hessian_eig_refined(&lib(pressure(&snap.rho, &p))?, EXTREMUM_OVERSAMPLE);
            let ok = if s.name == "heat" {
                worst = worst.min(snap.t * m + (1.0 + LYH_SLACK) / 2.0);
                snap.t * m >= -(1.0 + LYH_SLACK) / 2.0
            } else {
                let env = lib(lyh_envelope(snap.t, Defect::Finite(l0), big))?;
                worst = worst.min(m / env + 1.0 + LYH_SLACK);
                m >= -(1.0 + LYH_SLACK) * env
            };
            ensure(ok, || format!("{}: LYH fails at t = {}", s.name, snap.t))?;
        }
        let refine = lib(grid_refinement(&[128, 256, 512, 1024], 1e-8, |n| worst_relative_lyh(s, n, mode)))?;
        let needed = -refine.finest();
        ensure(refine.justifies(LYH_SLACK, needed), || {
            format!("{}: slack not justified by refinement\n{}", s.name, refine.to_csv())
        })?;
        parts.push(format!("{} margin {worst:.3} (refinement error {:.1e})", s.name, refine.error_estimate()));
    }
    Ok(parts.join(", "))
}

fn c9_transport() -> Outcome {
    let g = grid(256);
    let zero = PotentialSpec::zero(1);
    let hk = |w: f64, c: f64| DensityFamily::HeatKernel { width: w, center: [c, 0.0] }.build(g, &zero).unwrap();
    let pairs = [(hk(0.005, 0.3), hk(0.01, 0.6)), (hk(0.01, 0.1), hk(0.004, 0.8)), (hk(0.02, 0.5), hk(0.003, 0.45))];
    let mut worst_rel = 0.0_f64;
    for (i, (mu, nu)) in pairs.iter().enumerate() {
        let exact = lib(w2_circle_1d(mu, nu))?.cost;
        let gaps: Vec<f64> = [1e-2, 1e-3, 5e-4]
            .iter()
            .map(|&e| lib(sinkhorn_periodic(mu, nu, e, &SinkhornOptions::default())).map(|r| (r.cost - exact).abs()))
            .collect::<Result<_, _>>()?;
        ensure(gaps.windows(2).all(|w| w[1] < w[0]), || format!("pair {i}: gaps {} not decreasing", sci(&gaps)))?;
        let rel = gaps[2] / exact;
        ensure(rel <= 0.05, || format!("pair {i}: gap {rel:.3e} of the cost at eps = 5e-4"))?;
        worst_rel = worst_rel.max(rel);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for inst in 0..50 {
        let n = 1 + inst % 6;
        let dim = 1 + inst % 2;
        let atoms = |rng: &mut ChaCha8Rng| -> Vec<[f64; 2]> {
            (0..n).map(|_| [rng.gen::<f64>(), if dim == 2 { rng.gen::<f64>() } else { 0.0 }]).collect()
        };
        let (mu, nu) = (atoms(&mut rng), atoms(&mut rng));
        let lp = lib(lp_oracle(&mu, &nu, dim))?.cost;
        let brute = (0..n)
            .permutations(n)
            .map(|s| 2.0 * ((0..n).map(|i| 0.5 * periodic_distance_sq(&mu[i][..dim], &nu[s[i]][..dim])).sum::<f64>() / n as f64))
            .fold(f64::INFINITY, f64::min);
        ensure(lp == brute, || format!("instance {inst}: lp {lp} vs exhaustive {brute}"))?;
    }
    Ok(format!("Sinkhorn gaps decreasing, worst relative gap {worst_rel:.2e} at eps = 5e-4; 50 assignment instances exact"))
}

fn c10_one_step() -> Outcome {
    let mut parts = Vec::new();
    for (i, s) in SCENARIOS.iter().enumerate() {
        let p = pots(s, N);
        let flows = &ladders()[i];
        let values: Vec<Vec<(f64, f64)>> = flows.iter().map(|f| one_step_values(f, &p)).collect::<Result<_, _>>()?;
        let mut it = values.iter();
        let ladder = lib(epsilon_ladder(&EPS_LADDER, |_| Ok(it.next().unwrap().iter().map(|v| v.0).collect())))?;
        ensure(ladder.budget() <= ONE_STEP_SLACK, || format!("{}: eps-ladder budget {:.3e}", s.name, ladder.budget()))?;
        let target = values.last().unwrap();
        let worst_g = target.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        let worst_tl = target.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        ensure(worst_g <= ONE_STEP_SLACK, || format!("{}: G check {worst_g:.3e}", s.name))?;
        ensure(worst_tl < 1.0, || format!("{}: tau lambda1 = {worst_tl}", s.name))?;
        parts.push(format!(
            "{} (tau {}) max G_check {worst_g:.1e}, budget {:.1e}, max tau*lambda1 {worst_tl:.3}",
            s.name,
            s.tau,
            ladder.budget()
        ));
    }
    Ok(parts.join("; "))
}

fn c11_comparison() -> Outcome {
    let mut parts = Vec::new();
    for (i, s) in SCENARIOS.iter().enumerate() {
        let p = pots(s, N);
        let l0 = lib(measured_lambda0(&bump(N), &p))?;
        let seq = lib(comparison_sequence(Defect::Finite(l0), s.tau, s.steps, &p.constants()))?;
        let flows = &ladders()[i];
        let vals = |f: &JkoFlow| -> Vec<f64> { (1..f.steps.len()).map(|k| f.steps[k].lambda1 - seq.defect_bound(k)).collect() };
        let mut it = flows.iter();
        let ladder = lib(epsilon_ladder(&EPS_LADDER, |_| Ok(vals(it.next().unwrap()))))?;
        ensure(ladder.budget() <= COMPARISON_SLACK, || format!("{}: eps-ladder budget {:.3e}", s.name, ladder.budget()))?;
        let target = vals(flows.last().unwrap());
        let worst = target.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ensure(worst <= COMPARISON_SLACK, || format!("{}: lambda_k - E_k/tau = {worst:.3e}", s.name))?;
        parts.push(format!("{} max(lambda_k - E_k/tau) = {worst:.3e} over {} steps", s.name, target.len()));
    }
    Ok(parts.join("; "))
}

fn c12_harnack() -> Outcome {
    let mut parts = Vec::new();
    for s in &SCENARIOS {
        let traj = pde(s, N, 0.01, 1.0);
        let h = lib(harnack_continuous(&traj, &pots(s, N), &HarnackOptions::default()))?;
        ensure(h.closed.pass() && h.closed.rows.len() == 1000, || format!("{}: {}", s.name, h.closed.summary()))?;
        ensure(h.ordering_violations == 0, || format!("{}: {} path values above the closed form", s.name, h.ordering_violations))?;
        parts.push(format!("{} continuous {}/1000", s.name, h.closed.pass_count()));
    }
    let params = |c: f64, seed: u64| HarnackParams { eps: HARNACK_EPS, c, t0: HARNACK_T0, samples: 1000, seed };
    let heat = fine_flow(0);
    let zero = PotentialConstants::zero();
    let cal = lib(discrete_harnack_check(heat, &zero, &params(0.0, CALIBRATION_SEED)))?;
    let c = cal.required_c(heat.tau);
    for (i, s) in SCENARIOS.iter().enumerate() {
        let consts = pots(s, N).constants();
        let r = lib(discrete_harnack_check(fine_flow(i), &consts, &params(c, 0)))?;
        let misses: Vec<f64> = r.samples.iter().map(|x| x.margin).filter(|m| *m < 0.0).collect();
        let required = if s.name == "heat" { 1.0 } else { 0.99 };
        ensure(r.pass_rate >= required, || format!("{}: discrete pass rate {}", s.name, r.pass_rate))?;
        ensure(misses.iter().all(|m| *m >= -HARNACK_MISS_SLACK), || format!("{}: misses {misses:?}", s.name))?;
        parts.push(format!("{} discrete {:.1}%", s.name, 100.0 * r.pass_rate));
    }
    Ok(format!("C = {c}; {}", parts.join(", ")))
}

fn c13_convergence() -> Outcome {
    let mut parts = Vec::new();
    for (i, s) in SCENARIOS[..2].iter().enumerate() {
        let p = pots(s, N);
        let traj = pde(s, N, 0.005, 0.5);
        let coarse = JkoOptions { comparison_domain: false, ..opts(5e-4) };
        let f04 = lib(jko_flow(&bump(N), 0.04, 14, &p, &coarse))?;
        let flows = vec![f04, ladders()[i].last().unwrap().clone(), fine_flow(i).clone()];
        let rep = lib(convergence_report(&traj, &flows, &p, 0.1, 0.5))?;
        let w2: Vec<f64> = rep.rows.iter().map(|r| r.w2_at_end).collect();
        ensure(rep.w2_end_decreasing(), || format!("{}: W2 at t = 0.5 {}", s.name, sci(&w2)))?;
        let mut line = format!("{} W2(0.5) {}", s.name, sci(&w2));
        if s.w == 0.0 && s.v != 0.0 {
            let h2: Vec<f64> = rep.rows.iter().map(|r| r.h2_integrated.unwrap_or(f64::NAN)).collect();
            ensure(rep.h2_decreasing() == Some(true), || format!("{}: H2 {}", s.name, sci(&h2)))?;
            line.push_str(&format!(" H2 {}", sci(&h2)));
        }
        parts.push(line);
    }
    Ok(parts.join("; "))
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c14_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "3")] {
        let dir = tmp.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_lyhjko"))
            .args(["all", "--seed", "7", "--jobs", jobs, "--out"])
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        runs.push((files(&dir), out.status.code()));
    }
    let (a, b) = (&runs[0].0, &runs[1].0);
    let csv_a: Vec<&String> = a.keys().filter(|k| k.ends_with(".csv")).collect();
    let csv_b: Vec<&String> = b.keys().filter(|k| k.ends_with(".csv")).collect();
    ensure(!csv_a.is_empty() && csv_a == csv_b, || format!("CSV sets differ: {} vs {}", csv_a.len(), csv_b.len()))?;
    let differing: Vec<&&String> = csv_a.iter().filter(|k| a[**k] != b[**k]).collect();
    ensure(differing.is_empty(), || format!("differing CSV files: {differing:?}"))?;
    ensure(a.get("manifest.txt") == b.get("manifest.txt"), || "manifests differ".into())?;
    Ok(format!(
        "{} CSV files byte-identical across --jobs 1 and --jobs 3 (exit codes {:?}, {:?})",
        csv_a.len(),
        runs[0].1,
        runs[1].1
    ))
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Outcome); 14] = [
        (1, "comparison calculus exactness", 1, c1_calculus),
        (2, "heat asymptotics", 1, c2_heat_asymptotics),
        (3, "heat certified bound", 5, c3_heat_bound),
        (4, "trichotomy and tau-monotonicity", 5, c4_trichotomy),
        (5, "ODE comparison rate", 5, c5_ode_rate),
        (6, "semi-convex gradient bound", 10, c6_lemma1),
        (7, "PDE solver fidelity", 60, c7_pde),
        (8, "continuous LYH", 300, c8_continuous_lyh),
        (9, "transport oracles", 60, c9_transport),
        (10, "JKO one-step theorem", 300, c10_one_step),
        (11, "discrete comparison principle", 300, c11_comparison),
        (12, "Harnack", 300, c12_harnack),
        (13, "convergence ladders", 600, c13_convergence),
        (14, "determinism", 1200, c14_determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let res = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let res = res.and_then(|d| {
            if took <= Duration::from_secs(limit) {
                Ok(d)
            } else {
                Err(format!("{d}; took {:.1}s, limit {limit}s", took.as_secs_f64()))
            }
        });
        match res {
            Ok(d) => println!("criterion {id:>2} PASS {name} ({:.1}s): {d}", took.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("criterion {id:>2} FAIL {name} ({:.1}s): {e}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
