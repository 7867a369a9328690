//! Log-sum-exp against the periodic Gibbs kernel `exp(-d(x,y)^2 / (2 eps))`.

use crate::error::{Error, Result};
use crate::torus::{canonical, PeriodicGrid};

/// Applies `out_i = log sum_j exp(a_j - d(x_i, x_j)^2 / (2 eps))` on one grid.
///
/// The cost is translation invariant and separable across axes, so a 2D
/// application is two passes of the 1D circulant operator.
#[derive(Clone, Debug)]
pub struct GibbsKernel {
    grid: PeriodicGrid,
    eps: f64,
    /// `-c(m h)/eps` for `m` in `0..2n`, periodic in `m`.
    neg_cost: Vec<f64>,
}

impl GibbsKernel {
    pub fn new(grid: PeriodicGrid, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Domain(format!("eps must be positive, got {eps}")));
        }
        let n = grid.n();
        let h = grid.spacing();
        let neg_cost = (0..2 * n)
            .map(|m| {
                let d = canonical((m % n) as f64 * h);
                -0.5 * d * d / eps
            })
            .collect();
        Ok(Self { grid, eps, neg_cost })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Cost `d^2/2` between nodes `i` and `j`.
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n();
        let a = self.grid.multi_index(i);
        let b = self.grid.multi_index(j);
        let mut c = 0.0;
        for ax in 0..self.grid.dim() {
            let m = (a[ax] + n - b[ax]) % n;
            c -= self.neg_cost[m];
        }
        c * self.eps
    }

    fn lines(&self, a: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        for (src, dst) in a.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for (i, o) in dst.iter_mut().enumerate() {
                *o = lse_row(src, &self.neg_cost[n - i..2 * n - i]);
            }
        }
    }

    /// `log sum_j exp(a_j - c_ij / eps)` for every node `i`.
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let mut out = vec![0.0; a.len()];
        if self.grid.dim() == 1 {
            self.lines(a, &mut out);
            return out;
        }
        // Inner axis (contiguous), then the outer axis through a transpose.
        let mut tmp = vec![0.0; a.len()];
        self.lines(a, &mut tmp);
        transpose(&mut tmp, n);
        self.lines(&tmp, &mut out);
        transpose(&mut out, n);
        out
    }
}

/// `log sum_j exp(a_j + s_j)`, stable.
fn lse_row(a: &[f64], s: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (x, y) in a.iter().zip(s) {
        m = m.max(x + y);
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(s) {
        acc += (x + y - m).exp();
    }
    m + acc.ln()
}

fn transpose(buf: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::periodic_distance_sq;

    fn brute(grid: PeriodicGrid, eps: f64, a: &[f64]) -> Vec<f64> {
        let d = grid.dim();
        (0..grid.len())
            .map(|i| {
                let xi = grid.coords(i);
                let terms: Vec<f64> = (0..grid.len())
                    .map(|j| a[j] - 0.5 * periodic_distance_sq(&xi[..d], &grid.coords(j)[..d]) / eps)
                    .collect();
                let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_1d_and_2d() {
        for (dim, n) in [(1, 32), (2, 8)] {
            let grid = PeriodicGrid::new(dim, n).unwrap();
            let k = GibbsKernel::new(grid, 0.01).unwrap();
            let a: Vec<f64> = (0..grid.len()).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
            let fast = k.apply(&a);
            let slow = brute(grid, 0.01, &a);
            for (x, y) in fast.iter().zip(&slow) {
                assert!((x - y).abs() < 1e-12, "{dim}D: {x} vs {y}");
            }
        }
    }
}
