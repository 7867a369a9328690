//! Strang-split pseudospectral solver for
//! `d_t rho = lap rho + div(rho grad V + rho grad W * rho)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::field::check_positive;
use crate::torus::io::{fmt_f64, read_field, write_field};
use crate::torus::{energy, DensityField, Fourier, PeriodicGrid, Potentials};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Nodes below this value abort the run.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

/// Advective CFL number: `dt <= CFL * h / max|q|_inf`.
pub const CFL: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub rho: DensityField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: PeriodicGrid,
    pub dt: f64,
    pub scheme: String,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Snapshot closest to `t`.
    pub fn nearest(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("trajectory has at least one snapshot")
    }

    /// Writes `trajectory.txt` plus one field file per snapshot; returns the paths.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = format!("# trajectory dt={} scheme={}\n", fmt_f64(self.dt), self.scheme);
        let mut paths = Vec::new();
        for (i, s) in self.snapshots.iter().enumerate() {
            let name = format!("snap_{i:05}.field");
            let p = dir.join(&name);
            std::fs::write(&p, write_field(&self.grid, s.t, s.rho.values()))?;
            let _ = writeln!(manifest, "{name} {}", fmt_f64(s.t));
            paths.push(p);
        }
        let mp = dir.join("trajectory.txt");
        std::fs::write(&mp, manifest)?;
        paths.push(mp);
        Ok(paths)
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("trajectory.txt"))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let perr = |msg: &str| Error::Parse { line: 1, msg: msg.into() };
        let rest = header
            .strip_prefix("# trajectory")
            .ok_or_else(|| perr("missing trajectory header"))?;
        let (mut dt, mut scheme) = (None, None);
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("dt", v)) => dt = v.parse::<f64>().ok(),
                Some(("scheme", v)) => scheme = Some(v.to_string()),
                _ => return Err(perr("bad header token")),
            }
        }
        let (dt, scheme) = dt.zip(scheme).ok_or_else(|| perr("header needs dt and scheme"))?;
        let mut snapshots = Vec::new();
        let mut grid = None;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let name = line.split_whitespace().next().unwrap_or_default();
            let (g, t, values) = read_field(&std::fs::read_to_string(dir.join(name))?)?;
            grid = Some(g);
            snapshots.push(Snapshot { t, rho: DensityField::new(g, values)? });
        }
        let grid = grid.ok_or_else(|| perr("trajectory lists no snapshots"))?;
        Ok(Self { grid, dt, scheme, snapshots })
    }
}

/// Integrator state: one FFT workspace and the potentials.
struct Stepper<'a> {
    ft: Fourier,
    pots: &'a Potentials,
    /// `|k|^2` per bin.
    k2: Vec<f64>,
    /// Dealiasing mask for the flux (2/3 rule).
    keep: Vec<bool>,
}

impl<'a> Stepper<'a> {
    fn new(pots: &'a Potentials) -> Self {
        let grid = pots.grid();
        let ft = Fourier::new(grid);
        let cut = grid.n() as i64 / 3;
        let mut k2 = Vec::with_capacity(grid.len());
        let mut keep = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let k = ft.wavevector(idx);
            k2.push((k[0] * k[0] + k[1] * k[1]) as f64);
            keep.push(k[0].abs() <= cut && k[1].abs() <= cut);
        }
        Self { ft, pots, k2, keep }
    }

    fn diffuse(&mut self, rho: &mut Vec<f64>, s: f64) {
        let mut spec = self.ft.forward(rho);
        for (c, k2) in spec.iter_mut().zip(&self.k2) {
            *c *= (-TWO_PI * TWO_PI * k2 * s).exp();
        }
        *rho = self.ft.inverse_real(spec);
    }

    /// Largest `|q|_inf` over nodes.
    fn max_drift(&self, rho: &[f64]) -> f64 {
        self.pots
            .drift(rho)
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `div(P(rho q))` with `P` the 2/3 truncation.
    fn drift_rhs(&mut self, rho: &[f64]) -> Vec<f64> {
        let q = self.pots.drift(rho);
        let mut total = vec![Complex64::new(0.0, 0.0); rho.len()];
        for (a, qa) in q.iter().enumerate() {
            let flux: Vec<f64> = rho.iter().zip(qa).map(|(r, v)| r * v).collect();
            let spec = self.ft.forward(&flux);
            for (idx, c) in spec.iter().enumerate() {
                if !self.keep[idx] {
                    continue;
                }
                let k = self.ft.wavevector(idx)[a] as f64;
                total[idx] += *c * Complex64::new(0.0, TWO_PI * k);
            }
        }
        self.ft.inverse_real(total)
    }

    fn step(&mut self, rho: &mut Vec<f64>, dt: f64) -> Result<()> {
        let h = self.pots.grid().spacing();
        let qmax = self.max_drift(rho);
        if qmax > 0.0 && dt > CFL * h / qmax {
            return Err(Error::Stability { dt, limit: CFL * h / qmax });
        }
        self.diffuse(rho, 0.5 * dt);
        let f0 = self.drift_rhs(rho);
        let mid: Vec<f64> = rho.iter().zip(&f0).map(|(r, f)| r + 0.5 * dt * f).collect();
        let f1 = self.drift_rhs(&mid);
        for (r, f) in rho.iter_mut().zip(&f1) {
            *r += dt * f;
        }
        self.diffuse(rho, 0.5 * dt);
        check_positive(rho, POSITIVITY_FLOOR)
    }
}

/// Evolves `rho0` to time `t_end`, recording `rho` at `t = 0` and at each of
/// `snapshot_times` (steps are shortened to land on them exactly).
pub fn evolve(
    rho0: &DensityField,
    pots: &Potentials,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    if rho0.grid() != pots.grid() {
        return Err(Error::Dimension("initial density and potentials differ in grid".into()));
    }
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}")));
    }
    let mut targets: Vec<f64> = snapshot_times.iter().cloned().filter(|&t| t > 0.0).collect();
    if targets.iter().any(|&t| t > t_end) {
        return Err(Error::Domain("snapshot time beyond horizon".into()));
    }
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let grid = rho0.grid();
    let mut stepper = Stepper::new(pots);
    let drift_free = pots.v.is_zero() && pots.w.is_zero();
    let mut rho = rho0.values().to_vec();
    let mut snapshots = vec![Snapshot { t: 0.0, rho: rho0.clone() }];
    let mut t = 0.0;
    for &target in &targets {
        if drift_free {
            // Pure diffusion is exact in Fourier space.
            stepper.diffuse(&mut rho, target - t);
            check_positive(&rho, POSITIVITY_FLOOR)?;
        } else {
            let steps = ((target - t) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = (target - t) / steps as f64;
            for _ in 0..steps {
                stepper.step(&mut rho, h)?;
            }
        }
        t = target;
        // The scheme conserves mass; the normalization only removes roundoff.
        snapshots.push(Snapshot { t, rho: DensityField::new(grid, rho.clone())? });
    }
    Ok(Trajectory {
        grid,
        dt,
        scheme: "strang2".into(),
        snapshots,
    })
}

/// Mass `mean(rho)` of raw node values, used to monitor drift before renormalization.
pub fn raw_mass_drift(rho0: &DensityField, pots: &Potentials, t_end: f64, dt: f64) -> Result<f64> {
    let mut stepper = Stepper::new(pots);
    let mut rho = rho0.values().to_vec();
    let steps = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / steps as f64;
    for _ in 0..steps {
        stepper.step(&mut rho, h)?;
    }
    let m = rho.iter().sum::<f64>() / rho.len() as f64;
    Ok((m - 1.0).abs())
}

/// `int |grad u[rho]|^2 rho`.
pub fn fisher_information(rho: &DensityField, pots: &Potentials) -> Result<f64> {
    check_positive(rho.values(), 0.0)?;
    let grid = rho.grid();
    let mut ft = Fourier::new(grid);
    let logr: Vec<f64> = rho.values().iter().map(|v| v.ln()).collect();
    let gl = ft.gradient(&logr);
    let q = pots.drift(rho.values());
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let g2: f64 = (0..grid.dim()).map(|a| (gl[a][i] + q[a][i]).powi(2)).sum();
        acc += g2 * rho.values()[i];
    }
    Ok(acc / grid.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipationRow {
    pub t: f64,
    pub energy: f64,
    pub fisher: f64,
    /// Central finite difference of the energy (NaN at the ends).
    pub d_energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipationReport {
    pub rows: Vec<DissipationRow>,
    /// Largest energy increase between consecutive snapshots.
    pub max_increase: f64,
    pub monotone: bool,
    /// `|dF/dt + I| / I` at the interior snapshot closest to the middle.
    pub mid_relative_error: f64,
}

pub fn dissipation_check(traj: &Trajectory, pots: &Potentials) -> Result<DissipationReport> {
    if traj.snapshots.len() < 2 {
        return Err(Error::Domain("dissipation check needs at least two snapshots".into()));
    }
    let snaps = &traj.snapshots;
    let energies: Vec<f64> = snaps.iter().map(|s| energy(&s.rho, pots)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(snaps.len());
    for (i, s) in snaps.iter().enumerate() {
        let d_energy = if i == 0 || i + 1 == snaps.len() {
            f64::NAN
        } else {
            (energies[i + 1] - energies[i - 1]) / (snaps[i + 1].t - snaps[i - 1].t)
        };
        rows.push(DissipationRow {
            t: s.t,
            energy: energies[i],
            fisher: fisher_information(&s.rho, pots)?,
            d_energy,
        });
    }
    let max_increase = energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let mid_relative_error = if rows.len() >= 3 {
        let mid = rows.len() / 2;
        let r = &rows[mid.clamp(1, rows.len() - 2)];
        if r.fisher > 0.0 {
            (r.d_energy + r.fisher).abs() / r.fisher
        } else {
            (r.d_energy + r.fisher).abs()
        }
    } else {
        f64::NAN
    };
    Ok(DissipationReport {
        rows,
        max_increase,
        monotone: max_increase <= 1e-8,
        mid_relative_error,
    })
}
