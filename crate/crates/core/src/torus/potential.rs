//! Trigonometric-polynomial potentials with exact derivatives and certified constants.

use std::fmt;

use super::grid::PeriodicGrid;
use crate::bounds::PotentialConstants;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Wave {
    Cos,
    Sin,
}

/// `amp * cos(2 pi k.x)` or `amp * sin(2 pi k.x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigTerm {
    pub wave: Wave,
    pub freq: [i32; 2],
    pub amp: f64,
}

impl TrigTerm {
    pub fn cos(freq: [i32; 2], amp: f64) -> Self {
        Self { wave: Wave::Cos, freq, amp }
    }

    pub fn sin(freq: [i32; 2], amp: f64) -> Self {
        Self { wave: Wave::Sin, freq, amp }
    }

    pub fn omega(&self) -> [f64; 2] {
        [TWO_PI * self.freq[0] as f64, TWO_PI * self.freq[1] as f64]
    }

    pub fn phase(&self, x: [f64; 2]) -> f64 {
        let w = self.omega();
        w[0] * x[0] + w[1] * x[1]
    }

    /// `(c, s)` such that the term equals `c cos(theta) + s sin(theta)`.
    fn coeffs(&self) -> (f64, f64) {
        match self.wave {
            Wave::Cos => (self.amp, 0.0),
            Wave::Sin => (0.0, self.amp),
        }
    }

    /// Derivative of order `m` along the phase, as a value at phase `th`.
    fn phase_derivative(&self, th: f64, m: u32) -> f64 {
        let (c, s) = self.coeffs();
        let (cs, sn) = (th.cos(), th.sin());
        match m % 4 {
            0 => c * cs + s * sn,
            1 => -c * sn + s * cs,
            2 => -c * cs - s * sn,
            _ => c * sn - s * cs,
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.phase_derivative(self.phase(x), 0)
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let d = self.phase_derivative(self.phase(x), 1);
        let w = self.omega();
        [w[0] * d, w[1] * d]
    }

    /// `[f_xx, f_xy, f_yy]`.
    pub fn hessian(&self, x: [f64; 2]) -> [f64; 3] {
        let d = self.phase_derivative(self.phase(x), 2);
        let w = self.omega();
        [w[0] * w[0] * d, w[0] * w[1] * d, w[1] * w[1] * d]
    }

    fn norms(&self) -> (f64, f64, f64) {
        let w = self.omega();
        let l1 = w[0].abs() + w[1].abs();
        let l2 = w[0].hypot(w[1]);
        let linf = w[0].abs().max(w[1].abs());
        (l1, l2, linf)
    }
}

/// Certified per-potential constants.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Certified {
    /// Semi-convexity: `D^2 f >= -lambda`.
    pub lambda: f64,
    /// `sup_nu |grad d_nu nu f|_1`.
    pub l: f64,
    pub grad_inf: f64,
    pub grad_2: f64,
    pub lip: f64,
}

/// Real trigonometric polynomial on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    dim: usize,
    terms: Vec<TrigTerm>,
}

impl PotentialSpec {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(format!("potential dim must be 1 or 2, got {dim}")));
        }
        for t in &terms {
            if dim == 1 && t.freq[1] != 0 {
                return Err(Error::Dimension(format!(
                    "1D potential term has a second frequency {}",
                    t.freq[1]
                )));
            }
            if !t.amp.is_finite() {
                return Err(Error::Domain(format!("non-finite amplitude {}", t.amp)));
            }
        }
        let terms = terms.into_iter().filter(|t| t.amp != 0.0).collect();
        Ok(Self { dim, terms })
    }

    /// Single term `amp * cos(2 pi k x)` in 1D.
    pub fn cos1(k: i32, amp: f64) -> Self {
        Self::new(1, vec![TrigTerm::cos([k, 0], amp)]).expect("valid 1D term")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `f(-x) = f(x)`: every sine term must vanish.
    pub fn is_even(&self) -> bool {
        self.terms.iter().all(|t| t.wave == Wave::Cos || t.freq == [0, 0])
    }

    pub fn max_freq(&self) -> i32 {
        self.terms
            .iter()
            .map(|t| t.freq[0].abs().max(t.freq[1].abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.terms.iter().fold([0.0; 2], |acc, t| {
            let g = t.gradient(x);
            [acc[0] + g[0], acc[1] + g[1]]
        })
    }

    pub fn hessian(&self, x: [f64; 2]) -> [f64; 3] {
        self.terms.iter().fold([0.0; 3], |acc, t| {
            let h = t.hessian(x);
            [acc[0] + h[0], acc[1] + h[1], acc[2] + h[2]]
        })
    }

    /// Values at the nodes of `grid`.
    pub fn sample(&self, grid: &PeriodicGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.value(grid.coords(i))).collect()
    }

    /// Certified constants. Sums of per-term exact constants, tightened in 1D
    /// by dense sampling plus a derivative margin when there are several terms.
    pub fn certified(&self) -> Certified {
        let mut tri = Certified::default();
        // Triangle-inequality sums of higher derivatives used for the sampling margin.
        let mut d4 = 0.0;
        for t in &self.terms {
            let a = t.amp.abs();
            let (l1, l2, linf) = t.norms();
            tri.lambda += a * l2 * l2;
            tri.l += a * l2 * l2 * l1;
            tri.grad_inf += a * linf;
            tri.grad_2 += a * l2;
            d4 += a * l2.powi(4);
        }
        tri.lip = tri.grad_2;
        if self.dim != 1 || self.terms.len() < 2 {
            return tri;
        }
        let m = (64 * self.max_freq() as usize).max(1024);
        let delta = 1.0 / m as f64;
        let (mut min2, mut max1, mut max3) = (f64::INFINITY, 0.0_f64, 0.0_f64);
        for i in 0..m {
            let x = i as f64 * delta;
            let (mut d1, mut d2, mut d3) = (0.0, 0.0, 0.0);
            for t in &self.terms {
                let th = t.phase([x, 0.0]);
                let w = t.omega()[0];
                d1 += w * t.phase_derivative(th, 1);
                d2 += w * w * t.phase_derivative(th, 2);
                d3 += w * w * w * t.phase_derivative(th, 3);
            }
            min2 = min2.min(d2);
            max1 = max1.max(d1.abs());
            max3 = max3.max(d3.abs());
        }
        // Between samples a function moves by at most (delta/2) sup|f'|.
        let half = 0.5 * delta;
        let grad = (max1 + half * tri.lambda).min(tri.grad_inf);
        Certified {
            lambda: (-min2 + half * tri.l).max(0.0).min(tri.lambda),
            l: (max3 + half * d4).min(tri.l),
            grad_inf: grad,
            grad_2: grad,
            lip: grad,
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let w = match t.wave {
                    Wave::Cos => "cos",
                    Wave::Sin => "sin",
                };
                let k = if self.dim == 1 {
                    format!("{}", t.freq[0])
                } else {
                    format!("{},{}", t.freq[0], t.freq[1])
                };
                format!("{w}[{k}]:{:e}", t.amp)
            })
            .collect();
        if parts.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{}", parts.join(" "))
    }
}

impl PotentialSpec {
    /// Parses the [`fmt::Display`] form: whitespace-separated `cos[k]:amp` or
    /// `sin[k1,k2]:amp` terms, or `0`.
    pub fn parse(dim: usize, text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "0" || text.is_empty() {
            return Self::new(dim, Vec::new());
        }
        let bad = |tok: &str| Error::Domain(format!("bad potential term '{tok}'"));
        let mut terms = Vec::new();
        for tok in text.split_whitespace() {
            let (head, amp) = tok.split_once(':').ok_or_else(|| bad(tok))?;
            let amp: f64 = amp.parse().map_err(|_| bad(tok))?;
            let (wave, freq) = head
                .strip_suffix(']')
                .and_then(|h| h.split_once('['))
                .ok_or_else(|| bad(tok))?;
            let wave = match wave {
                "cos" => Wave::Cos,
                "sin" => Wave::Sin,
                _ => return Err(bad(tok)),
            };
            let ks: Vec<i32> = freq
                .split(',')
                .map(|k| k.trim().parse::<i32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(tok))?;
            if ks.len() != dim {
                return Err(Error::Dimension(format!("term '{tok}' needs {dim} frequencies")));
            }
            let freq = [ks[0], ks.get(1).copied().unwrap_or(0)];
            terms.push(TrigTerm { wave, freq, amp });
        }
        Self::new(dim, terms)
    }
}

/// Combined constants of the pair `(V, W)`.
pub fn potential_constants(v: &PotentialSpec, w: &PotentialSpec) -> PotentialConstants {
    let cv = v.certified();
    let cw = w.certified();
    PotentialConstants {
        lambda_v: cv.lambda,
        lambda_w: cw.lambda,
        l_v: cv.l,
        l_w: cw.l,
        grad_v_inf: cv.grad_inf,
        grad_w_inf: cw.grad_inf,
        grad_v_2: cv.grad_2,
        grad_w_2: cw.grad_2,
        lip_v: cv.lip,
        lip_w: cw.lip,
    }
}

/// A potential with its node tables on a fixed grid.
///
/// Convolutions against a term only need the two trigonometric moments of the
/// other factor, so `W * g` is exact for any grid function `g`.
#[derive(Clone, Debug)]
pub struct GridPotential {
    spec: PotentialSpec,
    grid: PeriodicGrid,
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
    values: Vec<f64>,
    grad: Vec<Vec<f64>>,
}

/// Trigonometric moments `(mean(g cos theta), mean(g sin theta))` per term.
pub type Moments = Vec<(f64, f64)>;

impl GridPotential {
    pub fn new(spec: &PotentialSpec, grid: PeriodicGrid) -> Result<Self> {
        if spec.dim() != grid.dim() {
            return Err(Error::Dimension(format!(
                "potential dim {} vs grid dim {}",
                spec.dim(),
                grid.dim()
            )));
        }
        let m = grid.len();
        let mut cos: Vec<Vec<f64>> = Vec::with_capacity(spec.terms.len());
        let mut sin: Vec<Vec<f64>> = Vec::with_capacity(spec.terms.len());
        for t in &spec.terms {
            let th: Vec<f64> = (0..m).map(|i| t.phase(grid.coords(i))).collect();
            cos.push(th.iter().map(|x| x.cos()).collect());
            sin.push(th.iter().map(|x| x.sin()).collect());
        }
        let mut values = vec![0.0; m];
        let mut grad = vec![vec![0.0; m]; grid.dim()];
        for (ti, t) in spec.terms.iter().enumerate() {
            let (c, s) = t.coeffs();
            let w = t.omega();
            for i in 0..m {
                let (cs, sn) = (cos[ti][i], sin[ti][i]);
                values[i] += c * cs + s * sn;
                let d = -c * sn + s * cs;
                for (a, g) in grad.iter_mut().enumerate() {
                    g[i] += w[a] * d;
                }
            }
        }
        Ok(Self {
            spec: spec.clone(),
            grid,
            cos,
            sin,
            values,
            grad,
        })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn is_zero(&self) -> bool {
        self.spec.is_zero()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Gradient component `axis` at the nodes.
    pub fn grad(&self, axis: usize) -> &[f64] {
        &self.grad[axis]
    }

    pub fn moments(&self, g: &[f64]) -> Moments {
        let inv = 1.0 / g.len() as f64;
        (0..self.spec.terms.len())
            .map(|ti| {
                let mut c = 0.0;
                let mut s = 0.0;
                for ((gv, cs), sn) in g.iter().zip(&self.cos[ti]).zip(&self.sin[ti]) {
                    c += gv * cs;
                    s += gv * sn;
                }
                (c * inv, s * inv)
            })
            .collect()
    }

    /// `(f * g)` at the nodes.
    pub fn convolve(&self, g: &[f64]) -> Vec<f64> {
        let mom = self.moments(g);
        let mut out = vec![0.0; self.grid.len()];
        for (ti, t) in self.spec.terms.iter().enumerate() {
            let (p, q) = conv_coeffs(t, mom[ti]);
            for (i, o) in out.iter_mut().enumerate() {
                *o += p * self.cos[ti][i] + q * self.sin[ti][i];
            }
        }
        out
    }

    /// `grad (f * g)` at the nodes, one vector per axis.
    pub fn convolve_grad(&self, g: &[f64]) -> Vec<Vec<f64>> {
        let mom = self.moments(g);
        self.convolve_grad_from_moments(&mom)
    }

    pub fn convolve_grad_from_moments(&self, mom: &Moments) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.grid.len()]; self.grid.dim()];
        for (ti, t) in self.spec.terms.iter().enumerate() {
            let (p, q) = conv_coeffs(t, mom[ti]);
            let w = t.omega();
            for i in 0..self.grid.len() {
                let d = -p * self.sin[ti][i] + q * self.cos[ti][i];
                for (a, o) in out.iter_mut().enumerate() {
                    o[i] += w[a] * d;
                }
            }
        }
        out
    }

    /// `grad (f * g)` at an arbitrary point, from precomputed moments of `g`.
    pub fn convolve_grad_at(&self, mom: &Moments, x: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (ti, t) in self.spec.terms.iter().enumerate() {
            let (p, q) = conv_coeffs(t, mom[ti]);
            let th = t.phase(x);
            let d = -p * th.sin() + q * th.cos();
            let w = t.omega();
            out[0] += w[0] * d;
            out[1] += w[1] * d;
        }
        out
    }
}

/// `(f * g)(x) = p cos(theta(x)) + q sin(theta(x))` for a single term `f`.
fn conv_coeffs(t: &TrigTerm, (mc, ms): (f64, f64)) -> (f64, f64) {
    // cos(a - b) = cos a cos b + sin a sin b; sin(a - b) = sin a cos b - cos a sin b
    let (c, s) = t.coeffs();
    (c * mc - s * ms, c * ms + s * mc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_constants_are_closed_form() {
        let v = PotentialSpec::cos1(1, 0.2);
        let c = v.certified();
        let w = TWO_PI;
        assert!((c.lambda - 0.2 * w * w).abs() < 1e-12);
        assert!((c.l - 0.2 * w * w * w).abs() < 1e-12);
        assert!((c.grad_inf - 0.2 * w).abs() < 1e-12);
    }

    #[test]
    fn sampled_constants_dominate_fine_samples() {
        let v = PotentialSpec::new(
            1,
            vec![TrigTerm::cos([1, 0], 0.3), TrigTerm::sin([3, 0], 0.05)],
        )
        .unwrap();
        let c = v.certified();
        let m = 20_000;
        for i in 0..m {
            let x = [i as f64 / m as f64, 0.0];
            assert!(-v.hessian(x)[0] <= c.lambda + 1e-9);
            assert!(v.gradient(x)[0].abs() <= c.grad_inf + 1e-9);
        }
    }

    #[test]
    fn convolution_of_single_mode() {
        let grid = PeriodicGrid::new(1, 64).unwrap();
        let w = GridPotential::new(&PotentialSpec::cos1(1, 1.0), grid).unwrap();
        let rho: Vec<f64> = (0..64)
            .map(|i| 1.0 + 0.5 * (TWO_PI * grid.coords(i)[0]).cos())
            .collect();
        let conv = w.convolve(&rho);
        for (i, v) in conv.iter().enumerate() {
            let x = grid.coords(i)[0];
            assert!((v - 0.25 * (TWO_PI * x).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn evenness() {
        assert!(PotentialSpec::cos1(2, 0.1).is_even());
        let s = PotentialSpec::new(1, vec![TrigTerm::sin([1, 0], 0.1)]).unwrap();
        assert!(!s.is_even());
    }

    #[test]
    fn display_parse_round_trip() {
        for (dim, spec) in [
            (1, PotentialSpec::cos1(1, 0.2)),
            (1, PotentialSpec::zero(1)),
            (
                2,
                PotentialSpec::new(2, vec![TrigTerm::cos([1, 0], 0.1), TrigTerm::sin([1, -2], 1.0 / 3.0)])
                    .unwrap(),
            ),
        ] {
            let text = spec.to_string();
            assert_eq!(PotentialSpec::parse(dim, &text).unwrap(), spec, "{text}");
        }
        assert!(PotentialSpec::parse(1, "tan[1]:1").is_err());
        assert!(PotentialSpec::parse(1, "cos[1,1]:1").is_err());
    }
}
