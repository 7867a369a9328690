//! FFT plumbing and spectral differentiation on a [`PeriodicGrid`].

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::PeriodicGrid;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Forward/inverse transforms for one grid. Not shared across threads with
/// mutable state: each instance owns its scratch space.
pub struct Fourier {
    grid: PeriodicGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fourier {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n());
        let inv = planner.plan_fft_inverse(grid.n());
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            grid,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Signed integer wavenumber of FFT bin `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.grid.n();
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.grid.n() / 2
    }

    /// Per-axis wavenumbers of flat bin `idx`.
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        let [i, j] = self.grid.multi_index(idx);
        if self.grid.dim() == 1 {
            [self.wavenumber(i), 0]
        } else {
            [self.wavenumber(i), self.wavenumber(j)]
        }
    }

    fn transform(&mut self, buf: &mut [Complex64], forward: bool) {
        let n = self.grid.n();
        let plan = if forward { &self.fwd } else { &self.inv };
        plan.process_with_scratch(buf, &mut self.scratch);
        if self.grid.dim() == 2 {
            transpose(buf, n);
            plan.process_with_scratch(buf, &mut self.scratch);
            transpose(buf, n);
        }
    }

    /// Unnormalized forward transform of real samples.
    pub fn forward(&mut self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        buf
    }

    /// Inverse transform including the `1/N` factor; returns the real part.
    pub fn inverse_real(&mut self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, false);
        let scale = 1.0 / self.grid.len() as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    /// Spectral gradient; one vector per axis. Nyquist bins are dropped.
    pub fn gradient(&mut self, values: &[f64]) -> Vec<Vec<f64>> {
        let spec = self.forward(values);
        (0..self.grid.dim())
            .map(|axis| self.apply_derivative(&spec, axis, None))
            .collect()
    }

    /// Spectral second derivatives `[f_xx]` in 1D, `[f_xx, f_xy, f_yy]` in 2D.
    pub fn hessian(&mut self, values: &[f64]) -> Vec<Vec<f64>> {
        let spec = self.forward(values);
        if self.grid.dim() == 1 {
            vec![self.apply_derivative(&spec, 0, Some(0))]
        } else {
            vec![
                self.apply_derivative(&spec, 0, Some(0)),
                self.apply_derivative(&spec, 0, Some(1)),
                self.apply_derivative(&spec, 1, Some(1)),
            ]
        }
    }

    /// Laplacian via the multiplier `-4 pi^2 |k|^2`.
    pub fn laplacian(&mut self, values: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (idx, c) in spec.iter_mut().enumerate() {
            let k = self.wavevector(idx);
            let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
            *c *= -TWO_PI * TWO_PI * k2;
        }
        self.inverse_real(spec)
    }

    /// Trigonometric interpolant of `values` sampled on the grid refined `factor`
    /// times per axis. Nyquist coefficients are split evenly between `+-n/2`.
    pub fn refine(&mut self, values: &[f64], factor: usize) -> Vec<f64> {
        if factor == 1 {
            return values.to_vec();
        }
        let dim = self.grid.dim();
        let n = self.grid.n() as i64;
        let fine = PeriodicGrid::new(dim, self.grid.n() * factor).expect("refined grid is valid");
        let m = fine.n() as i64;
        let spec = self.forward(values);
        let scale = (factor as f64).powi(dim as i32);
        let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
        for (idx, c) in spec.iter().enumerate() {
            let k = self.wavevector(idx);
            let split = |a: usize| -> Vec<(i64, f64)> {
                if a < dim && k[a] == -n / 2 {
                    vec![(-n / 2, 0.5), (n / 2, 0.5)]
                } else {
                    vec![(k[a], 1.0)]
                }
            };
            for &(k0, w0) in &split(0) {
                for &(k1, w1) in &split(1) {
                    let i = k0.rem_euclid(m) as usize;
                    let j = k1.rem_euclid(m) as usize;
                    out[fine.flat_index([i, j])] += *c * (w0 * w1 * scale);
                }
            }
        }
        Fourier::new(fine).inverse_real(out)
    }

    /// Applies `d/dx_a` (and `d/dx_b` if given) to a spectrum.
    pub fn apply_derivative(&mut self, spec: &[Complex64], a: usize, b: Option<usize>) -> Vec<f64> {
        let mut out = spec.to_vec();
        for (idx, c) in out.iter_mut().enumerate() {
            let mi = self.grid.multi_index(idx);
            let k = self.wavevector(idx);
            let mut m = Complex64::new(0.0, TWO_PI * k[a] as f64);
            let mut odd_on_nyquist = self.is_nyquist(mi[a]);
            if let Some(b) = b {
                m *= Complex64::new(0.0, TWO_PI * k[b] as f64);
                if a == b {
                    odd_on_nyquist = false;
                } else {
                    odd_on_nyquist |= self.is_nyquist(mi[b]);
                }
            }
            *c = if odd_on_nyquist { Complex64::new(0.0, 0.0) } else { *c * m };
        }
        self.inverse_real(out)
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
