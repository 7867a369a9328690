use crate::error::{Error, Result};

/// Uniform periodic grid on `[0,1)^dim` with `n` nodes per axis.
///
/// Node `(i, j)` of a 2D grid lives at flat index `i * n + j` with
/// coordinates `(i/n, j/n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Domain(format!("n must be a power of two >= 8, got {n}")));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Per-axis integer indices of a flat index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        if self.dim == 1 {
            mi[0]
        } else {
            mi[0] * self.n + mi[1]
        }
    }

    /// Coordinates of node `idx`; the second entry is 0 in 1D.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        let [i, j] = self.multi_index(idx);
        [i as f64 * h, j as f64 * h]
    }

    /// Index of the node reached from `idx` by the integer shift `s` (periodic).
    pub fn shifted(&self, idx: usize, s: [i64; 2]) -> usize {
        let n = self.n as i64;
        let [i, j] = self.multi_index(idx);
        let i2 = (i as i64 + s[0]).rem_euclid(n) as usize;
        if self.dim == 1 {
            i2
        } else {
            let j2 = (j as i64 + s[1]).rem_euclid(n) as usize;
            i2 * self.n + j2
        }
    }
}

/// Canonical representative of `v` mod 1 in `[-1/2, 1/2)`.
pub fn canonical(v: f64) -> f64 {
    v - (v + 0.5).floor()
}

/// Squared periodic distance `|[x - y]|^2` over the first `d` coordinates.
pub fn periodic_distance_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| canonical(a - b).powi(2))
        .sum()
}

pub fn periodic_distance(x: &[f64], y: &[f64]) -> f64 {
    periodic_distance_sq(x, y).sqrt()
}
