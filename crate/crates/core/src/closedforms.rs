//! Explicit radial objects: Green functions, the ε-regularized profiles
//! w^ε with their right-hand sides f^ε, outer barriers, gradient weights,
//! and the radial reduction of S_k.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symfun::binomial;

/// Position of k relative to n/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseKind {
    /// k < n/2
    Subcritical,
    /// k = n/2
    Critical,
    /// n/2 < k ≤ n
    Supercritical,
}

impl CaseKind {
    pub fn from_nk(n: usize, k: usize) -> Result<Self> {
        if n < 2 || k == 0 || k > n {
            return Err(Error::Domain(format!("need n >= 2 and 1 <= k <= n, got n={n}, k={k}")));
        }
        Ok(match (2 * k).cmp(&n) {
            std::cmp::Ordering::Less => CaseKind::Subcritical,
            std::cmp::Ordering::Equal => CaseKind::Critical,
            std::cmp::Ordering::Greater => CaseKind::Supercritical,
        })
    }

    /// Dirichlet value on ∂Ω: −1, 0 or +1.
    pub fn boundary_value(self) -> f64 {
        match self {
            CaseKind::Subcritical => -1.0,
            CaseKind::Critical => 0.0,
            CaseKind::Supercritical => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Subcritical => "subcritical",
            CaseKind::Critical => "critical",
            CaseKind::Supercritical => "supercritical",
        }
    }
}

/// Parameters of one regularized, truncated exterior problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub n: usize,
    pub k: usize,
    /// Radius of a ball contained in Ω.
    pub r0: f64,
    /// Enclosure radius: Ω ⊂ B_{R₀/2}.
    pub enclosure: f64,
    /// Regularization ε. Zero denotes the homogeneous limit.
    pub eps: f64,
    /// Truncation radius R of the outer sphere.
    pub truncation: f64,
    pub case: CaseKind,
}

impl ProblemParams {
    pub fn new(n: usize, k: usize, r0: f64, enclosure: f64, eps: f64, truncation: f64) -> Result<Self> {
        let case = CaseKind::from_nk(n, k)?;
        let p = Self {
            n,
            k,
            r0,
            enclosure,
            eps,
            truncation,
            case,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let case = CaseKind::from_nk(self.n, self.k)?;
        if case != self.case {
            return Err(Error::Config(format!(
                "case {} does not match n={}, k={} (expected {})",
                self.case.name(),
                self.n,
                self.k,
                case.name()
            )));
        }
        if !(self.r0 > 0.0 && self.r0 < 0.5 * self.enclosure) {
            return Err(Error::Config(format!(
                "need 0 < r0 < R0/2, got r0={}, R0={}",
                self.r0, self.enclosure
            )));
        }
        if !(self.eps >= 0.0 && self.eps < self.enclosure / 3.0) {
            return Err(Error::Config(format!(
                "need 0 <= eps < R0/3, got eps={}, R0={}",
                self.eps, self.enclosure
            )));
        }
        if !(self.truncation.is_finite() && self.truncation > self.r0) {
            return Err(Error::Config(format!(
                "truncation radius R={} must exceed r0={}",
                self.truncation, self.r0
            )));
        }
        Ok(())
    }

    /// Checks R ≥ 100(R₀+1), the far-truncation regime of the a priori estimates.
    pub fn check_far_truncation(&self) -> Result<()> {
        let min = 100.0 * (self.enclosure + 1.0);
        if self.truncation < min {
            return Err(Error::Config(format!(
                "truncation radius R={} below 100(R0+1)={min}",
                self.truncation
            )));
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let mut p = *self;
        p.eps = eps;
        p.validate()?;
        Ok(p)
    }

    pub fn with_truncation(&self, truncation: f64) -> Result<Self> {
        let mut p = *self;
        p.truncation = truncation;
        p.validate()?;
        Ok(p)
    }

    /// Green exponent (2k−n)/k.
    pub fn green_exponent(&self) -> f64 {
        (2.0 * self.k as f64 - self.n as f64) / self.k as f64
    }

    /// Expected decay exponents of (u − asymptote), |Du| and |D²u|:
    /// −(n−2k)/k, −(n−k)/k, −n/k. In the Critical case the first entry is
    /// the exponent of u − log|x|, which is bounded, so 0.
    pub fn decay_exponents(&self) -> [f64; 3] {
        let (n, k) = (self.n as f64, self.k as f64);
        let first = match self.case {
            CaseKind::Critical => 0.0,
            _ => -(n - 2.0 * k) / k,
        };
        [first, -(n - k) / k, -n / k]
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be positive and finite, got {r}")));
    }
    Ok(())
}

/// (r² + ε²)^a evaluated in log space.
fn shifted_pow(r: f64, eps: f64, a: f64) -> f64 {
    (a * shifted_log(r, eps)).exp()
}

/// ln(r² + ε²) without forming r² for large r.
fn shifted_log(r: f64, eps: f64) -> f64 {
    let (big, small) = if r.abs() >= eps { (r.abs(), eps) } else { (eps, r.abs()) };
    if big == 0.0 {
        return f64::NEG_INFINITY;
    }
    let q = small / big;
    2.0 * big.ln() + q.mul_add(q, 1.0).ln()
}

/// The S_k-harmonic radial function: −r^{(2k−n)/k}, log r, or r^{(2k−n)/k}.
pub fn green(params: &ProblemParams, radius: f64) -> Result<f64> {
    check_radius(radius)?;
    let p = params.green_exponent();
    Ok(match params.case {
        CaseKind::Subcritical => -radius.powf(p),
        CaseKind::Critical => radius.ln(),
        CaseKind::Supercritical => radius.powf(p),
    })
}

/// Radial derivatives (g′, g″) of [`green`].
pub fn green_derivatives(params: &ProblemParams, radius: f64) -> Result<(f64, f64)> {
    check_radius(radius)?;
    let p = params.green_exponent();
    let s = match params.case {
        CaseKind::Subcritical => -1.0,
        CaseKind::Critical => return Ok((1.0 / radius, -1.0 / (radius * radius))),
        CaseKind::Supercritical => 1.0,
    };
    Ok((
        s * p * radius.powf(p - 1.0),
        s * p * (p - 1.0) * radius.powf(p - 2.0),
    ))
}

/// The regularized radial profile w^ε, normalized to −1 / 0 / +1 at r = R₀.
pub fn w_profile(params: &ProblemParams, radius: f64) -> f64 {
    let (n, k) = (params.n as f64, params.k as f64);
    let (r0, e) = (params.enclosure, params.eps);
    match params.case {
        CaseKind::Subcritical => {
            let q = (n - 2.0 * k) / (2.0 * k);
            -(q * (shifted_log(r0, e) - shifted_log(radius, e))).exp()
        }
        CaseKind::Critical => 0.5 * (shifted_log(radius, e) - shifted_log(r0, e)),
        CaseKind::Supercritical => {
            let q = (2.0 * k - n) / (2.0 * k);
            shifted_pow(radius, e, q) - shifted_pow(r0, e, q) + 1.0
        }
    }
}

/// Radial derivatives (w′, w″) of [`w_profile`].
pub fn w_derivatives(params: &ProblemParams, radius: f64) -> (f64, f64) {
    let (n, k) = (params.n as f64, params.k as f64);
    let (r, e) = (radius, params.eps);
    let s = r * r + e * e;
    match params.case {
        CaseKind::Subcritical => {
            let q = (n - 2.0 * k) / (2.0 * k);
            let a = (q * shifted_log(params.enclosure, e)).exp();
            let base = 2.0 * q * a * shifted_pow(r, e, -q - 1.0);
            (base * r, base * (s - 2.0 * (q + 1.0) * r * r) / s)
        }
        CaseKind::Critical => (r / s, (s - 2.0 * r * r) / (s * s)),
        CaseKind::Supercritical => {
            let q = (2.0 * k - n) / (2.0 * k);
            let base = 2.0 * q * shifted_pow(r, e, q - 1.0);
            (base * r, base * (s + 2.0 * (q - 1.0) * r * r) / s)
        }
    }
}

/// Leading constant c of f^ε = c·ε²·(r²+ε²)^{−n/2−1}.
pub fn f_rhs_constant(params: &ProblemParams) -> f64 {
    let (n, k) = (params.n, params.k);
    let (nf, kf) = (n as f64, k as f64);
    match params.case {
        CaseKind::Subcritical => {
            let base = (nf - 2.0 * kf) / kf;
            binomial(n, k)
                * base.powi(k as i32)
                * shifted_pow(params.enclosure, params.eps, (nf - 2.0 * kf) / 2.0)
        }
        CaseKind::Critical => 2.0 * binomial(n - 1, n / 2 - 1),
        CaseKind::Supercritical => binomial(n, k) * ((2.0 * kf - nf) / kf).powi(k as i32),
    }
}

/// f^ε = S_k(D²w^ε) in closed form.
pub fn f_rhs(params: &ProblemParams, radius: f64) -> f64 {
    let e = params.eps;
    if e == 0.0 {
        return 0.0;
    }
    let n = params.n as f64;
    f_rhs_constant(params) * e * e * shifted_pow(radius, e, -n / 2.0 - 1.0)
}

/// A variant of the leading constants (inverted base; 2^{k+1} in place of 2
/// when 2k = n). It does not
/// reproduce S_k(D²w^ε) in general; kept only so tests can show that.
pub fn f_rhs_printed_constant(params: &ProblemParams) -> f64 {
    let (n, k) = (params.n, params.k);
    let (nf, kf) = (n as f64, k as f64);
    match params.case {
        CaseKind::Subcritical => {
            binomial(n, k)
                * (kf / (nf - 2.0 * kf)).powi(k as i32)
                * shifted_pow(params.enclosure, params.eps, (nf - 2.0 * kf) / 2.0)
        }
        CaseKind::Critical => 2f64.powi(k as i32 + 1) * binomial(n - 1, n / 2 - 1),
        CaseKind::Supercritical => binomial(n, k) * (kf / (2.0 * kf - nf)).powi(k as i32),
    }
}

/// S_k of the Hessian of a radial function with derivatives u′, u″ at radius r.
pub fn radial_sk(n: usize, k: usize, du: f64, d2u: f64, radius: f64) -> Result<f64> {
    check_radius(radius)?;
    if k == 0 || k > n {
        return Err(Error::Domain(format!("order k={k} outside 1..={n}")));
    }
    let a = du / radius;
    let ak1 = a.powi(k as i32 - 1);
    Ok(binomial(n - 1, k) * ak1 * a + binomial(n - 1, k - 1) * d2u * ak1)
}

/// Coefficient a^{ε,R} of the outer barrier, chosen so that the barrier
/// equals w^ε on ∂B_R and the boundary value on ∂B_{r₀}.
pub fn barrier_coefficient(params: &ProblemParams) -> f64 {
    let (r0, big_r) = (params.r0, params.truncation);
    let p = params.green_exponent();
    match params.case {
        CaseKind::Subcritical => {
            // ρ = −a (r₀/r)^{-p} + a − 1 with p < 0.
            let q = -w_profile(params, big_r);
            (1.0 - q) / (1.0 - (r0 / big_r).powf(-p))
        }
        CaseKind::Critical => w_profile(params, big_r) / (big_r / r0).ln(),
        CaseKind::Supercritical => {
            (w_profile(params, big_r) - 1.0) / (big_r.powf(p) - r0.powf(p))
        }
    }
}

/// Upper barrier ρ^{ε,R} on r₀ ≤ |x| ≤ R.
pub fn outer_barrier(params: &ProblemParams, radius: f64) -> Result<f64> {
    let (r0, big_r) = (params.r0, params.truncation);
    let tol = 1e-12 * big_r;
    if radius < r0 - tol || radius > big_r + tol {
        return Err(Error::Domain(format!("radius {radius} outside [{r0}, {big_r}]")));
    }
    let a = barrier_coefficient(params);
    let p = params.green_exponent();
    Ok(match params.case {
        CaseKind::Subcritical => -a * (r0 / radius).powf(-p) + a - 1.0,
        CaseKind::Critical => a * (radius / r0).ln(),
        CaseKind::Supercritical => a * (radius.powf(p) - r0.powf(p)) + 1.0,
    })
}

/// The exact ε = 0, R = ∞ solution of the exterior problem for the ball B_{r₀}
/// whose asymptote is the Green function.
pub fn ball_solution(params: &ProblemParams, radius: f64) -> f64 {
    let r0 = params.r0;
    let p = params.green_exponent();
    match params.case {
        CaseKind::Subcritical => -(r0 / radius).powf(-p),
        CaseKind::Critical => (radius / r0).ln(),
        CaseKind::Supercritical => radius.powf(p) - r0.powf(p) + 1.0,
    }
}

/// Radial derivatives (u′, u″) of [`ball_solution`].
pub fn ball_solution_derivatives(params: &ProblemParams, radius: f64) -> (f64, f64) {
    let r0 = params.r0;
    let p = params.green_exponent();
    match params.case {
        CaseKind::Subcritical => {
            let c = -r0.powf(-p);
            (c * p * radius.powf(p - 1.0), c * p * (p - 1.0) * radius.powf(p - 2.0))
        }
        CaseKind::Critical => (1.0 / radius, -1.0 / (radius * radius)),
        CaseKind::Supercritical => (p * radius.powf(p - 1.0), p * (p - 1.0) * radius.powf(p - 2.0)),
    }
}

fn sign_error(case: CaseKind, u: f64) -> Error {
    Error::Domain(format!("value u={u} has the wrong sign for the {} case", case.name()))
}

/// P = |Du|² · weight(u).
pub fn gradient_weight(params: &ProblemParams, u: f64, grad_norm: f64) -> Result<f64> {
    let (n, k) = (params.n as f64, params.k as f64);
    let g2 = grad_norm * grad_norm;
    match params.case {
        CaseKind::Critical => Ok(g2 * (2.0 * u).exp()),
        CaseKind::Subcritical => {
            if !(u < 0.0) {
                return Err(sign_error(params.case, u));
            }
            Ok(g2 * (-u).powf(-2.0 * (n - k) / (n - 2.0 * k)))
        }
        CaseKind::Supercritical => {
            if !(u > 0.0) {
                return Err(sign_error(params.case, u));
            }
            Ok(g2 * u.powf(2.0 * (n - k) / (2.0 * k - n)))
        }
    }
}

/// The level weight g(u) of the monotone quantity.
pub fn monotone_weight_g(params: &ProblemParams, u: f64) -> Result<f64> {
    let (n, k) = (params.n as f64, params.k as f64);
    let e = (n - k) / (2.0 * k - n);
    match params.case {
        CaseKind::Critical => Ok(u.exp()),
        CaseKind::Subcritical => {
            if !(u < 0.0) {
                return Err(sign_error(params.case, u));
            }
            Ok((-u).powf(e))
        }
        CaseKind::Supercritical => {
            if !(u > 0.0) {
                return Err(sign_error(params.case, u));
            }
            Ok(u.powf(e))
        }
    }
}

/// Surface area of the unit sphere S^{n−1} ⊂ ℝⁿ.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / (n as f64 - 2.0) * unit_sphere_area(n - 2),
    }
}
