//! Scalar constants, the comparison sequence and every closed-form bound.
//!
//! Nothing here touches a grid: inputs are certified constants of the
//! potentials and the outputs are plain numbers.

use crate::error::{domain, Result};

/// Initial semi-convexity defect: `D^2 u[rho_0] >= -lambda0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Defect {
    Finite(f64),
    Infinite,
}

impl Defect {
    /// Wraps a measured value; `+inf` maps to [`Defect::Infinite`], negative
    /// values are clamped to zero.
    pub fn from_value(x: f64) -> Self {
        if x == f64::INFINITY {
            Defect::Infinite
        } else {
            Defect::Finite(x.max(0.0))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Defect::Finite(x) => x,
            Defect::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Defect::Infinite)
    }
}

/// Certified constants of the pair `(V, W)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PotentialConstants {
    pub lambda_v: f64,
    pub lambda_w: f64,
    pub l_v: f64,
    pub l_w: f64,
    pub grad_v_inf: f64,
    pub grad_w_inf: f64,
    pub grad_v_2: f64,
    pub grad_w_2: f64,
    pub lip_v: f64,
    pub lip_w: f64,
}

/// Step-size thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    /// `min(1/(lambda*+L*), 2/(3 lambda*+L*))`.
    pub tau_star: f64,
    /// `min(tau_star, 1/lambda*)`.
    pub tau_double_star: f64,
    /// `1/Lambda`: below this `G[., tau]` is increasing on `[0,1)`.
    pub tau_monotone: f64,
}

fn recip_or_inf(den: f64, num: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

impl PotentialConstants {
    /// Heat case: `V = W = 0`.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Constants with only the combined `lambda*` and `L*` set (as `lambda_V`, `2 L_V`).
    pub fn from_star(lambda_star: f64, l_star: f64) -> Self {
        Self {
            lambda_v: lambda_star,
            l_v: 2.0 * l_star,
            ..Self::default()
        }
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_v + self.lambda_w
    }

    pub fn l_star(&self) -> f64 {
        0.5 * self.l_v + self.l_w
    }

    /// `Lambda = 2 lambda* + L*`.
    pub fn big_lambda(&self) -> f64 {
        2.0 * self.lambda_star() + self.l_star()
    }

    /// `lambda* + L*`.
    pub fn beta(&self) -> f64 {
        self.lambda_star() + self.l_star()
    }

    /// `[V]_Lip + [W]_Lip`.
    pub fn a(&self) -> f64 {
        self.lip_v + self.lip_w
    }

    /// `|grad V|_2 + |grad W|_2`.
    pub fn b(&self) -> f64 {
        self.grad_v_2 + self.grad_w_2
    }

    pub fn thresholds(&self) -> Thresholds {
        let ls = self.lambda_star();
        let lst = self.l_star();
        let tau_star = recip_or_inf(ls + lst, 1.0).min(recip_or_inf(3.0 * ls + lst, 2.0));
        Thresholds {
            tau_star,
            tau_double_star: tau_star.min(recip_or_inf(ls, 1.0)),
            tau_monotone: recip_or_inf(self.big_lambda(), 1.0),
        }
    }

    /// Largest admissible step for the comparison calculus.
    ///
    /// `dG/dE` has numerator `(1 - tau Lambda) + (1 + tau L*) E`, so
    /// monotonicity on `[0,1)` needs `tau < 1/Lambda`, which is never larger
    /// than `tau_star`.
    pub fn tau_limit(&self) -> f64 {
        let t = self.thresholds();
        t.tau_star.min(t.tau_monotone)
    }

    /// Validates `0 < tau < tau_limit`.
    pub fn check_tau(&self, tau: f64) -> Result<()> {
        let lim = self.tau_limit();
        if !(tau > 0.0 && tau.is_finite()) {
            return domain(format!("tau must be positive and finite, got {tau}"));
        }
        if tau >= lim {
            let t = self.thresholds();
            let name = if t.tau_star <= t.tau_monotone { "tau*" } else { "1/Lambda" };
            return domain(format!(
                "tau = {tau} is not below the threshold {name} = {lim} (tau* = {}, 1/Lambda = {})",
                t.tau_star, t.tau_monotone
            ));
        }
        Ok(())
    }
}

/// Shorthand for [`PotentialConstants::thresholds`], returning `(tau*, tau**)`.
pub fn tau_thresholds(c: &PotentialConstants) -> (f64, f64) {
    let t = c.thresholds();
    (t.tau_star, t.tau_double_star)
}

/// `G[E,tau] = E/(1-E)^2 (1 - tau Lambda + tau (lambda*+L*) E)`, `+inf` at `E = 1`.
pub fn eval_g(e: f64, tau: f64, c: &PotentialConstants) -> Result<f64> {
    c.check_tau(tau)?;
    if !(0.0..=1.0).contains(&e) {
        return domain(format!("E = {e} outside [0,1]"));
    }
    Ok(g_unchecked(e, tau, c))
}

fn g_unchecked(e: f64, tau: f64, c: &PotentialConstants) -> f64 {
    if e == 1.0 {
        return f64::INFINITY;
    }
    let om = 1.0 - e;
    e / (om * om) * (1.0 - tau * c.big_lambda() + tau * c.beta() * e)
}

/// Unique `E` in `[0,1)` with `G[E,tau] = y`; `1` for `y = +inf`.
///
/// `G[E] = y` is the quadratic `(tau beta - y) E^2 + (a + 2y) E - y = 0` with
/// `a = 1 - tau Lambda`, whose discriminant simplifies to `a^2 + 4 y (a + tau beta)`.
/// The root is taken in its cancellation-free form and then refined by
/// safeguarded bisection against `G` itself.
pub fn invert_g(y: f64, tau: f64, c: &PotentialConstants) -> Result<f64> {
    c.check_tau(tau)?;
    if y.is_nan() || y < 0.0 {
        return domain(format!("invert_G needs y >= 0, got {y}"));
    }
    if y == f64::INFINITY {
        return Ok(1.0);
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let a = 1.0 - tau * c.big_lambda();
    let ab = a + tau * c.beta();
    let guess = 2.0 * y / (a + 2.0 * y + (a * a + 4.0 * y * ab).sqrt());
    Ok(polish_root(y, tau, c, guess))
}

/// Bisection on the bracket around `guess` until it collapses to adjacent floats.
fn polish_root(y: f64, tau: f64, c: &PotentialConstants, guess: f64) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    // Narrow the bracket around the closed-form guess before bisecting.
    let w = 64.0 * f64::EPSILON * guess.max(f64::MIN_POSITIVE);
    let (gl, gh) = ((guess - w).max(0.0), (guess + w).min(1.0));
    if g_unchecked(gl, tau, c) <= y {
        lo = gl;
    }
    if g_unchecked(gh, tau, c) > y {
        hi = gh;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g_unchecked(mid, tau, c) <= y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (g_unchecked(hi, tau, c) - y).abs() < (g_unchecked(lo, tau, c) - y).abs() {
        hi
    } else {
        lo
    }
}

/// The comparison sequence `E_0 = tau lambda0`, `G[E_{k+1}] = E_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonSequence {
    pub tau: f64,
    pub lambda0: Defect,
    /// `values[k] = E_k`; `values[0]` is `+inf` when `lambda0` is infinite.
    pub values: Vec<f64>,
}

impl ComparisonSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `E_k`.
    pub fn e(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Bound on the semi-convexity defect at step `k`: `E_k / tau`.
    pub fn defect_bound(&self, k: usize) -> f64 {
        self.values[k] / self.tau
    }

    /// `X_k = tau / E_k`.
    pub fn inverse(&self, k: usize) -> f64 {
        self.tau / self.values[k]
    }
}

pub fn comparison_sequence(
    lambda0: Defect,
    tau: f64,
    k_max: usize,
    c: &PotentialConstants,
) -> Result<ComparisonSequence> {
    c.check_tau(tau)?;
    let e0 = match lambda0 {
        Defect::Finite(l) if l >= 0.0 && l.is_finite() => tau * l,
        Defect::Finite(l) => return domain(format!("lambda0 must be in [0,inf], got {l}")),
        Defect::Infinite => f64::INFINITY,
    };
    let mut values = Vec::with_capacity(k_max + 1);
    values.push(e0);
    for k in 0..k_max {
        let next = invert_g(values[k], tau, c)?;
        values.push(next);
    }
    Ok(ComparisonSequence { tau, lambda0, values })
}

/// Positive fixed point of `G[., tau]`.
pub fn critical_value(tau: f64, c: &PotentialConstants) -> Result<f64> {
    let lam = c.big_lambda();
    if lam == 0.0 {
        return domain("critical value needs Lambda > 0");
    }
    c.check_tau(tau)?;
    if tau >= c.thresholds().tau_double_star {
        return domain(format!("tau = {tau} is not below tau**"));
    }
    // Root of E^2 - b E + tau Lambda with b = 2 + tau beta, smaller branch.
    let b = 2.0 + tau * c.beta();
    let x = 4.0 * tau * lam / (b * b);
    Ok(0.5 * b * x / (1.0 + (1.0 - x).sqrt()))
}

fn check_h_args(x: f64, tau: f64, c: &PotentialConstants) -> Result<f64> {
    if !(x >= 0.0 && tau >= 0.0) {
        return domain(format!("H needs X >= 0 and tau >= 0, got X = {x}, tau = {tau}"));
    }
    let den = (1.0 - tau * c.big_lambda()) * x + tau * tau * c.beta();
    if den <= 0.0 {
        return domain(format!("H denominator is {den} at X = {x}, tau = {tau}"));
    }
    Ok(den)
}

/// `H[X,tau] = (X - tau)^2 / ((1 - tau Lambda) X + tau^2 beta)`.
pub fn eval_h(x: f64, tau: f64, c: &PotentialConstants) -> Result<f64> {
    let den = check_h_args(x, tau, c)?;
    Ok((x - tau).powi(2) / den)
}

/// `R[X,tau] = H[X,tau] - X - tau (Lambda X - 2)`.
pub fn eval_r(x: f64, tau: f64, c: &PotentialConstants) -> Result<f64> {
    if x <= 0.0 {
        return domain(format!("R needs X > 0, got {x}"));
    }
    Ok(eval_h(x, tau, c)? - x - tau * (c.big_lambda() * x - 2.0))
}

/// Continuous envelope `E_t^{lambda0}` with `D^2 u[rho_t] >= -E_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyhEnvelope {
    pub lambda0: Defect,
    pub big_lambda: f64,
}

impl LyhEnvelope {
    pub fn new(lambda0: Defect, big_lambda: f64) -> Self {
        Self { lambda0, big_lambda }
    }

    pub fn is_heat_like(&self) -> bool {
        self.big_lambda == 0.0
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        lyh_envelope(t, self.lambda0, self.big_lambda)
    }
}

pub fn lyh_envelope(t: f64, lambda0: Defect, big_lambda: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("envelope needs t > 0, got {t}"));
    }
    let lam = big_lambda;
    Ok(match (lam == 0.0, lambda0) {
        (true, Defect::Finite(l)) => l / (2.0 * t * l + 1.0),
        (true, Defect::Infinite) => 1.0 / (2.0 * t),
        (false, Defect::Finite(l)) => {
            let one_minus = -(-lam * t).exp_m1();
            lam * l / (lam * (-lam * t).exp() + 2.0 * l * one_minus)
        }
        (false, Defect::Infinite) => lam / (2.0 * -(-lam * t).exp_m1()),
    })
}

/// Heat-case bound on `E_k / tau`.
pub fn heat_bound(k: usize, tau: f64, lambda0: f64) -> Result<f64> {
    if !(tau > 0.0 && lambda0 > 0.0) {
        return domain("heat bound needs tau > 0 and lambda0 > 0");
    }
    let e0 = tau * lambda0;
    if e0 > 1.0 {
        return domain(format!("heat bound needs tau lambda0 <= 1, got {e0}"));
    }
    Ok(lambda0 / (k as f64 * e0 * (2.0 - e0) + 1.0))
}

/// `f(z) = z - sqrt(z (z - 1))`, evaluated as `z / (z + sqrt(z (z - 1)))`.
pub fn helper_f(z: f64) -> Result<f64> {
    if !(z >= 1.0) {
        return domain(format!("f needs z >= 1, got {z}"));
    }
    Ok(z / (z + (z * (z - 1.0)).sqrt()))
}

/// `g(z) = f(z) / z`.
pub fn helper_g(z: f64) -> Result<f64> {
    if !(z >= 1.0) {
        return domain(format!("g needs z >= 1, got {z}"));
    }
    Ok(1.0 / (z + (z * (z - 1.0)).sqrt()))
}

/// `g^{-1}(z) = 1 / (z (2 - z))` on `(0,1]`.
pub fn helper_g_inv(z: f64) -> Result<f64> {
    if !(z > 0.0 && z <= 1.0) {
        return domain(format!("g inverse needs z in (0,1], got {z}"));
    }
    Ok(1.0 / (z * (2.0 - z)))
}

/// Solution of `X' = 2 - Lambda X` from `X0`.
pub fn ode_x(t: f64, x0: f64, big_lambda: f64) -> f64 {
    if big_lambda == 0.0 {
        x0 + 2.0 * t
    } else {
        let eq = 2.0 / big_lambda;
        (x0 - eq) * (-big_lambda * t).exp() + eq
    }
}

/// `(A/alpha)(1 - (1+alpha)^{-k})`.
pub fn discrete_gronwall_bound(a: f64, alpha: f64, k: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return domain(format!("Gronwall bound needs alpha > 0, got {alpha}"));
    }
    Ok(a / alpha * -(-(k as f64) * alpha.ln_1p()).exp_m1())
}

/// `((e^{Lambda(t+h)} - 1)/(e^{Lambda t} - 1))^d`, `((t+h)/t)^d` when `Lambda = 0`.
pub fn harnack_factor(t: f64, h: f64, big_lambda: f64, d: usize) -> Result<f64> {
    Ok(log_harnack_factor(t, h, big_lambda, d)?.exp())
}

/// Logarithm of [`harnack_factor`].
pub fn log_harnack_factor(t: f64, h: f64, big_lambda: f64, d: usize) -> Result<f64> {
    if !(t > 0.0 && h > 0.0) {
        return domain(format!("Harnack factor needs t, h > 0, got t = {t}, h = {h}"));
    }
    let ratio_ln = if big_lambda == 0.0 {
        (h / t).ln_1p()
    } else if big_lambda * t > 30.0 {
        // expm1 ratio ~ e^{Lambda h} (1 - e^{-Lambda(t+h)})/(1 - e^{-Lambda t})
        big_lambda * h + (-(-big_lambda * (t + h)).exp()).ln_1p()
            - (-(-big_lambda * t).exp()).ln_1p()
    } else {
        ((big_lambda * (t + h)).exp_m1() / (big_lambda * t).exp_m1()).ln()
    };
    Ok(d as f64 * ratio_ln)
}

/// `(dist/(2 sqrt h) + sqrt(h) B / 2)^2`.
pub fn lagrangian_cost_upper(dist: f64, h: f64, b: f64) -> f64 {
    let s = h.sqrt();
    (dist / (2.0 * s) + 0.5 * s * b).powi(2)
}

/// Output of [`lipschitz_and_linfty_bounds`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzBounds {
    pub grad_u_bound: f64,
    pub grad_logrho_bound: f64,
    pub rho_lower: f64,
    pub rho_upper: f64,
}

pub fn lipschitz_and_linfty_bounds(
    t: f64,
    lambda0: Defect,
    c: &PotentialConstants,
    d: usize,
) -> Result<LipschitzBounds> {
    let e = lyh_envelope(t, lambda0, c.big_lambda())?;
    let lt = c.grad_v_inf + c.grad_w_inf + 0.5 * e;
    let df = d as f64;
    let expo = df * df.sqrt() / 2.0 * lt;
    Ok(LipschitzBounds {
        grad_u_bound: 0.5 * e,
        grad_logrho_bound: lt,
        rho_lower: (-expo).exp(),
        rho_upper: expo.exp(),
    })
}
