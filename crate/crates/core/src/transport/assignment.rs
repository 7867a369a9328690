//! Exact assignment between equal-mass atoms (Hungarian algorithm).

use super::{Method, TransportResult};
use crate::error::{Error, Result};
use crate::torus::periodic_distance_sq;

/// Largest instance accepted by [`lp_oracle`].
pub const MAX_ATOMS: usize = 64;

/// Minimum-cost perfect matching on a dense `n x n` cost matrix (row-major).
///
/// Returns `(sigma, u, v)` with `sigma[i]` the column of row `i` and dual
/// potentials satisfying `u_i + v_j <= c_ij`, with equality on the matching.
pub fn hungarian(cost: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    // 1-based arrays; index 0 is the virtual column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0; n];
    for j in 1..=n {
        sigma[p[j] - 1] = j - 1;
    }
    (sigma, u[1..].to_vec(), v[1..].to_vec())
}

/// Exact transport between `N` equal-mass atoms under `d^2/2` on `T^dim`.
pub fn lp_oracle(mu: &[[f64; 2]], nu: &[[f64; 2]], dim: usize) -> Result<TransportResult> {
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::Cardinality(n, nu.len()));
    }
    if n == 0 || n > MAX_ATOMS {
        return Err(Error::Domain(format!("need 1 to {MAX_ATOMS} atoms, got {n}")));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::Dimension(format!("dim must be 1 or 2, got {dim}")));
    }
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = 0.5 * periodic_distance_sq(&mu[i][..dim], &nu[j][..dim]);
        }
    }
    let (sigma, u, v) = hungarian(&c, n);
    let half: f64 = (0..n).map(|i| c[i * n + sigma[i]]).sum::<f64>() / n as f64;
    Ok(TransportResult {
        cost: 2.0 * half,
        eps: 0.0,
        method: Method::Assignment,
        psi: u,
        phi: v,
        plan: None,
        assignment: Some(sigma),
        displacement: None,
        marginal_error: 0.0,
        iterations: 0,
    })
}
