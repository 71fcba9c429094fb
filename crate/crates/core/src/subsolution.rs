//! Convex inner domains and the glued strictly k-convex subsolutions used as
//! initial iterates and comparison functions.

use serde::{Deserialize, Serialize};

use crate::closedforms::{w_profile, CaseKind, ProblemParams};
use crate::error::{Error, Result};

/// Shape of the inner convex domain Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
    /// Planar body given by its support function h(θ_j) at θ_j = 2πj/M,
    /// interpolated trigonometrically.
    SupportSampled { support: Vec<f64> },
}

/// A convex domain containing the origin, with radii r_in, r_out such that
/// B_{r_in} ⊆ Ω ⊆ B_{r_out}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexDomain {
    pub shape: Shape,
    pub n: usize,
    pub r_in: f64,
    pub r_out: f64,
    #[serde(skip)]
    fourier: Option<Fourier>,
}

/// Trigonometric interpolant of a sampled support function.
#[derive(Debug, Clone, PartialEq)]
struct Fourier {
    a0: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Fourier {
    fn fit(samples: &[f64]) -> Self {
        let m = samples.len();
        let mf = m as f64;
        let top = m / 2;
        let a0 = samples.iter().sum::<f64>() / mf;
        let mut cos = Vec::with_capacity(top);
        let mut sin = Vec::with_capacity(top);
        for q in 1..=top {
            let (mut c, mut s) = (0.0, 0.0);
            for (j, h) in samples.iter().enumerate() {
                let th = 2.0 * std::f64::consts::PI * (q * j) as f64 / mf;
                c += h * th.cos();
                s += h * th.sin();
            }
            let scale = if m % 2 == 0 && q == top { 1.0 / mf } else { 2.0 / mf };
            cos.push(c * scale);
            sin.push(if m % 2 == 0 && q == top { 0.0 } else { s * scale });
        }
        Self { a0, cos, sin }
    }

    /// (h, h′, h″) at angle θ.
    fn eval(&self, th: f64) -> (f64, f64, f64) {
        let (mut h, mut d1, mut d2) = (self.a0, 0.0, 0.0);
        for (i, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let q = (i + 1) as f64;
            let (s, c) = (q * th).sin_cos();
            h += a * c + b * s;
            d1 += q * (-a * s + b * c);
            d2 += -q * q * (a * c + b * s);
        }
        (h, d1, d2)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl ConvexDomain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        if n < 2 || !(radius > 0.0) {
            return Err(Error::Config(format!(
                "ball needs dimension >= 2 and positive radius, got n={n}, radius={radius}"
            )));
        }
        let c = norm(&center);
        Self::finish(Shape::Ball { center, radius }, n, radius - c, radius + c, None)
    }

    pub fn ellipsoid(center: Vec<f64>, semi_axes: Vec<f64>) -> Result<Self> {
        let n = center.len();
        if n < 2 || semi_axes.len() != n || semi_axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config(
                "ellipsoid needs matching center/semi-axes of dimension >= 2 with positive axes".into(),
            ));
        }
        let c = norm(&center);
        let amin = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
        let amax = semi_axes.iter().cloned().fold(0.0, f64::max);
        // B_{amin - |c|} ⊆ Ω only if the origin is deep enough inside.
        let inside = center
            .iter()
            .zip(&semi_axes)
            .map(|(ci, a)| (ci / a).powi(2))
            .sum::<f64>()
            < 1.0;
        if !inside {
            return Err(Error::Config("the origin must lie inside the ellipsoid".into()));
        }
        Self::finish(Shape::Ellipsoid { center, semi_axes }, n, amin - c, amax + c, None)
    }

    /// Planar body from support-function samples at uniform angles.
    pub fn support_sampled(support: Vec<f64>) -> Result<Self> {
        let m = support.len();
        if m < 8 {
            return Err(Error::Config("support function needs at least 8 samples".into()));
        }
        if support.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Config(
                "support values must be positive (origin strictly inside)".into(),
            ));
        }
        let dth = 2.0 * std::f64::consts::PI / m as f64;
        let scale = support.iter().cloned().fold(0.0, f64::max);
        for j in 0..m {
            let prev = support[(j + m - 1) % m];
            let next = support[(j + 1) % m];
            if prev + next - 2.0 * dth.cos() * support[j] < -1e-12 * scale {
                return Err(Error::Config(format!(
                    "support samples fail the discrete convexity check at index {j}"
                )));
            }
        }
        let f = Fourier::fit(&support);
        let fine = 16 * m;
        let (mut hmin, mut hmax) = (f64::INFINITY, 0.0f64);
        for j in 0..fine {
            let (h, _, d2) = f.eval(2.0 * std::f64::consts::PI * j as f64 / fine as f64);
            if h + d2 <= 0.0 {
                return Err(Error::Config(
                    "interpolated support function has non-positive radius of curvature".into(),
                ));
            }
            hmin = hmin.min(h);
            hmax = hmax.max(h);
        }
        Self::finish(Shape::SupportSampled { support }, 2, hmin, hmax, Some(f))
    }

    fn finish(shape: Shape, n: usize, r_in: f64, r_out: f64, fourier: Option<Fourier>) -> Result<Self> {
        if !(r_in > 0.0) {
            return Err(Error::Config("the origin must be interior to the domain".into()));
        }
        Ok(Self {
            shape,
            n,
            r_in,
            r_out,
            fourier,
        })
    }

    /// Rebuilds cached data after deserialization.
    pub fn rebuild(&self) -> Result<Self> {
        match &self.shape {
            Shape::Ball { center, radius } => Self::ball(center.clone(), *radius),
            Shape::Ellipsoid { center, semi_axes } => Self::ellipsoid(center.clone(), semi_axes.clone()),
            Shape::SupportSampled { support } => Self::support_sampled(support.clone()),
        }
    }

    /// Checks Ω ⊆ B_{R₀/2}.
    pub fn check_enclosure(&self, enclosure: f64) -> Result<()> {
        if self.r_out > 0.5 * enclosure * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "domain outer radius {} exceeds R0/2 = {}",
                self.r_out,
                0.5 * enclosure
            )));
        }
        Ok(())
    }

    /// Whether `x` lies in the open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 < radius * radius
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let q: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((a, c), s)| ((a - c) / s).powi(2))
                    .sum();
                q < 1.0
            }
            Shape::SupportSampled { .. } => self.support_distance(x) < 0.0,
        }
    }

    /// Signed distance to ∂Ω, positive outside.
    pub fn signed_distance(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::Domain(format!(
                "point of dimension {} for a domain of dimension {}",
                x.len(),
                self.n
            )));
        }
        match &self.shape {
            Shape::Ball { center, radius } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                Ok(norm(&d) - radius)
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let y: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                ellipsoid_signed_distance(&y, semi_axes)
            }
            Shape::SupportSampled { .. } => Ok(self.support_distance(x)),
        }
    }

    /// sd(x) = max_θ (x·θ − h(θ)), exact for convex bodies.
    fn support_distance(&self, x: &[f64]) -> f64 {
        let f = self.fourier.as_ref().expect("support domain without interpolant");
        let m = f.cos.len().max(4) * 16;
        let two_pi = 2.0 * std::f64::consts::PI;
        let phi = |th: f64| {
            let (h, _, _) = f.eval(th);
            x[0] * th.cos() + x[1] * th.sin() - h
        };
        let mut best = (f64::NEG_INFINITY, 0.0);
        for j in 0..m {
            let th = two_pi * j as f64 / m as f64;
            let v = phi(th);
            if v > best.0 {
                best = (v, th);
            }
        }
        let mut th = best.1;
        let step = two_pi / m as f64;
        let (lo, hi) = (th - step, th + step);
        for _ in 0..60 {
            let (_, d1, d2) = f.eval(th);
            let (s, c) = th.sin_cos();
            let g1 = -x[0] * s + x[1] * c - d1;
            let g2 = -x[0] * c - x[1] * s - d2;
            if g2 >= 0.0 {
                break;
            }
            let next = (th - g1 / g2).clamp(lo, hi);
            let done = (next - th).abs() < 1e-15;
            th = next;
            if done {
                break;
            }
        }
        phi(th).max(best.0)
    }

    /// Smallest s > 0 with `p + s·dir` on ∂Ω, for `p` inside Ω.
    pub fn ray_exit(&self, p: &[f64], dir: &[f64]) -> Result<f64> {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let q: Vec<f64> = p.iter().zip(center).map(|(a, c)| a - c).collect();
                let a: f64 = dir.iter().map(|d| d * d).sum();
                let b: f64 = q.iter().zip(dir).map(|(x, d)| x * d).sum();
                let c: f64 = q.iter().map(|x| x * x).sum::<f64>() - radius * radius;
                larger_root(a, b, c)
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let mut a = 0.0;
                let mut b = 0.0;
                let mut c = -1.0;
                for i in 0..self.n {
                    let q = (p[i] - center[i]) / semi_axes[i];
                    let d = dir[i] / semi_axes[i];
                    a += d * d;
                    b += q * d;
                    c += q * q;
                }
                larger_root(a, b, c)
            }
            Shape::SupportSampled { .. } => {
                let len = norm(dir);
                let mut hi = 2.0 * self.r_out / len + 1.0;
                let mut lo = 0.0;
                let at = |s: f64| -> Vec<f64> { p.iter().zip(dir).map(|(a, d)| a + s * d).collect() };
                if self.support_distance(&at(hi)) <= 0.0 {
                    return Err(Error::Numerical("ray does not leave the domain".into()));
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.support_distance(&at(mid)) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-15 * hi {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }
}

/// Larger root of a s² + 2 b s + c = 0 (c ≤ 0 for an interior start point).
fn larger_root(a: f64, b: f64, c: f64) -> Result<f64> {
    let disc = b * b - a * c;
    if !(a > 0.0) || disc < 0.0 {
        return Err(Error::Numerical("ray misses the domain boundary".into()));
    }
    let sq = disc.sqrt();
    // Cancellation-free form of (-b + sq) / a.
    Ok(if b <= 0.0 { (-b + sq) / a } else { -c / (b + sq) })
}

/// Signed distance from y (centered coordinates) to the ellipsoid with the
/// given semi-axes, via Newton on the projection parameter t:
/// Σ a_i² y_i² / (a_i² + t)² = 1.
fn ellipsoid_signed_distance(y: &[f64], axes: &[f64]) -> Result<f64> {
    let n = y.len();
    let q: f64 = y.iter().zip(axes).map(|(v, a)| (v / a).powi(2)).sum();
    if q == 1.0 {
        return Ok(0.0);
    }
    let outside = q > 1.0;
    let amin2 = axes.iter().map(|a| a * a).fold(f64::INFINITY, f64::min);
    let scale = axes.iter().cloned().fold(0.0, f64::max);
    let f = |t: f64| -> (f64, f64) {
        let mut v = -1.0;
        let mut d = 0.0;
        for i in 0..n {
            let a2 = axes[i] * axes[i];
            let den = a2 + t;
            let num = a2 * y[i] * y[i];
            v += num / (den * den);
            d += -2.0 * num / (den * den * den);
        }
        (v, d)
    };
    let (mut lo, mut hi) = if outside {
        (0.0, norm(y) * scale)
    } else {
        (-amin2, 0.0)
    };
    let project = |t: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let a2 = axes[i] * axes[i];
                a2 * y[i] / (a2 + t)
            })
            .collect()
    };
    if !outside {
        // Degenerate interior case: the root sits at t = −a_min² when y has
        // no component along the shortest axes.
        let probe = -amin2 * (1.0 - 1e-15);
        if f(probe).0 <= 0.0 {
            let mut p = vec![0.0; n];
            let mut rest = 1.0;
            let mut min_axes = Vec::new();
            for i in 0..n {
                let a2 = axes[i] * axes[i];
                if (a2 - amin2).abs() <= 1e-15 * amin2 {
                    min_axes.push(i);
                } else {
                    p[i] = a2 * y[i] / (a2 - amin2);
                    rest -= (p[i] / axes[i]).powi(2);
                }
            }
            let r = rest.max(0.0).sqrt() * amin2.sqrt();
            let i0 = min_axes[0];
            p[i0] = if y[i0] < 0.0 { -r } else { r };
            let d: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a - b).collect();
            return Ok(-norm(&d));
        }
    }
    let mut t = if outside { 0.0 } else { 0.5 * lo };
    for _ in 0..200 {
        let (v, d) = f(t);
        if v > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - t).abs();
        t = next;
        if step <= 1e-15 * (1.0 + t.abs()) || hi - lo <= 1e-15 * (1.0 + t.abs()) {
            let p = project(t);
            let d: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a - b).collect();
            let dist = norm(&d);
            return Ok(if outside { dist } else { -dist });
        }
    }
    Err(Error::Numerical(format!(
        "ellipsoid projection did not converge for point {y:?}"
    )))
}

/// Parameters of the smooth maximum gluing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlueParams {
    /// Transition half-width δ.
    pub delta: f64,
    /// Exponential rate in Φ⁰ = t₀⁻¹(e^{t₀ d} − 1).
    pub t0: f64,
    /// Scale τ₀ of the inner profile.
    pub tau0: f64,
}

impl GlueParams {
    /// Default δ and τ₀ for an exterior problem.
    pub fn exterior_default(params: &ProblemParams) -> Self {
        let (n, k) = (params.n as f64, params.k as f64);
        let growth = (3.0 * params.enclosure).exp() - 1.0;
        let delta = match params.case {
            CaseKind::Subcritical => {
                2f64.powf(-n / (2.0 * k)) * (2f64.powf((n - 2.0 * k) / (2.0 * k)) - 1.0)
            }
            CaseKind::Supercritical => {
                0.5 * params.enclosure.powf((2.0 * k - n) / k)
                    * (2f64.powf((2.0 * k - n) / (2.0 * k)) - 1.0)
            }
            CaseKind::Critical => 0.25 * 2f64.ln(),
        };
        Self {
            delta,
            t0: 1.0,
            tau0: delta / growth,
        }
    }

    /// Defaults for the bounded ring with outer sphere radius ρ₁.
    pub fn ring_default(outer_radius: f64) -> Self {
        Self {
            delta: 0.5,
            t0: 1.0,
            tau0: 1.0 / (8.0 * (outer_radius.exp() - 1.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.tau0 > 0.0 && self.t0 > 0.0) {
            return Err(Error::Config(format!(
                "glue parameters must be positive, got delta={}, t0={}, tau0={}",
                self.delta, self.t0, self.tau0
            )));
        }
        Ok(())
    }
}

/// Φ⁰ = t₀⁻¹(e^{t₀ d(x)} − 1).
pub fn phi_zero(domain: &ConvexDomain, t0: f64, x: &[f64]) -> Result<f64> {
    let d = domain.signed_distance(x)?;
    Ok(phi_of_distance(t0, d))
}

fn phi_of_distance(t0: f64, d: f64) -> f64 {
    if t0 == 0.0 {
        d
    } else {
        (t0 * d).exp_m1() / t0
    }
}

/// m_δ(s): |s| outside the band, δ·p(s/δ) inside with p(s) = (3 + 6s² − s⁴)/8.
pub fn smooth_abs(s: f64, delta: f64) -> f64 {
    if s.abs() >= delta {
        s.abs()
    } else {
        let z = s / delta;
        let z2 = z * z;
        delta * (3.0 + 6.0 * z2 - z2 * z2) / 8.0
    }
}

/// H = ½(h + g + m_δ(h − g)).
pub fn smooth_max(h: f64, g: f64, delta: f64) -> f64 {
    0.5 * (h + g + smooth_abs(h - g, delta))
}

/// Pointwise smooth maximum of two scalar fields.
pub fn smooth_max_at<H, G>(h: H, g: G, delta: f64, x: &[f64]) -> f64
where
    H: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    smooth_max(h(x), g(x), delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Kind {
    Exterior(ProblemParams),
    Ring { outer_radius: f64, k1: f64, t1: f64 },
}

/// A glued subsolution, either for the exterior problem or for the bounded
/// ring between Ω and a centered sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subsolution {
    domain: ConvexDomain,
    glue: GlueParams,
    kind: Kind,
}

impl Subsolution {
    pub fn exterior(params: ProblemParams, domain: ConvexDomain, glue: GlueParams) -> Result<Self> {
        params.validate()?;
        glue.validate()?;
        if domain.n != params.n {
            return Err(Error::Config(format!(
                "domain dimension {} does not match n={}",
                domain.n, params.n
            )));
        }
        domain.check_enclosure(params.enclosure)?;
        if params.r0 > domain.r_in * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "r0={} exceeds the inscribed radius {} of the domain",
                params.r0, domain.r_in
            )));
        }
        if !(params.eps < params.enclosure / 3.0) {
            return Err(Error::Config("subsolution needs eps < R0/3".into()));
        }
        // On ∂Ω the outer profile is at most w(r_out); the band must stay clear.
        let gap = params.case.boundary_value() - w_profile(&params, domain.r_out);
        if !(gap > glue.delta) {
            return Err(Error::Config(format!(
                "glue band reaches the inner boundary: boundary gap {gap:.4e} <= delta {:.4e}",
                glue.delta
            )));
        }
        Ok(Self {
            domain,
            glue,
            kind: Kind::Exterior(params),
        })
    }

    /// Ring subsolution between Ω and the sphere of radius `outer_radius`:
    /// inner profile τ₀Φ⁰, outer profile 1 + K₁Φ¹ with Φ¹ = (|x|² − ρ₁²)/(2ρ₁).
    /// With `k1 = None`, t₁ places {Φ¹ = −t₁} halfway between r_out and ρ₁
    /// and K₁ = 2/t₁.
    pub fn ring(domain: ConvexDomain, outer_radius: f64, glue: GlueParams, k1: Option<f64>) -> Result<Self> {
        glue.validate()?;
        if !(outer_radius > domain.r_out) {
            return Err(Error::Config(format!(
                "ring outer radius {outer_radius} must exceed the domain radius {}",
                domain.r_out
            )));
        }
        let mid = 0.5 * (domain.r_out + outer_radius);
        let t1 = (outer_radius * outer_radius - mid * mid) / (2.0 * outer_radius);
        let k1 = k1.unwrap_or(2.0 / t1);
        let s = Self {
            domain,
            glue,
            kind: Kind::Ring { outer_radius, k1, t1 },
        };
        let h_in = s.outer_profile_radius(s.domain.r_out);
        if !(-h_in > glue.delta) {
            return Err(Error::Config(format!(
                "glue band reaches the inner boundary (outer profile {h_in:.4e} near the domain)"
            )));
        }
        Ok(s)
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn glue(&self) -> &GlueParams {
        &self.glue
    }

    /// (K₁, t₁) for ring subsolutions.
    pub fn ring_constants(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::Ring { k1, t1, .. } => Some((k1, t1)),
            Kind::Exterior(_) => None,
        }
    }

    fn outer_profile_radius(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Exterior(p) => w_profile(p, r),
            Kind::Ring { outer_radius, k1, .. } => {
                1.0 + k1 * (r * r - outer_radius * outer_radius) / (2.0 * outer_radius)
            }
        }
    }

    /// The distance-based profile near Ω.
    pub fn inner_profile(&self, x: &[f64]) -> Result<f64> {
        let d = self.domain.signed_distance(x)?;
        Ok(self.inner_from_distance(d))
    }

    fn inner_from_distance(&self, d: f64) -> f64 {
        let phi = phi_of_distance(self.glue.t0, d);
        match &self.kind {
            Kind::Exterior(p) => self.glue.tau0 * phi + p.case.boundary_value(),
            Kind::Ring { .. } => self.glue.tau0 * phi,
        }
    }

    /// The radial profile away from Ω.
    pub fn outer_profile(&self, x: &[f64]) -> f64 {
        self.outer_profile_radius(norm(x))
    }

    /// Value of the subsolution at a point outside Ω.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let r = norm(x);
        let h = self.outer_profile_radius(r);
        if let Kind::Exterior(p) = &self.kind {
            if r >= 2.0 * p.enclosure {
                return Ok(h);
            }
        }
        let d = self.domain.signed_distance(x)?;
        if d < -1e-12 * (1.0 + r) {
            return Err(Error::Domain(format!("point {x:?} lies inside the domain")));
        }
        let g = self.inner_from_distance(d.max(0.0));
        Ok(smooth_max(h, g, self.glue.delta))
    }
}

/// Value at `x` of the exterior subsolution for (params, domain, glue).
pub fn build_subsolution(params: &ProblemParams, domain: &ConvexDomain, glue: &GlueParams, x: &[f64]) -> Result<f64> {
    Subsolution::exterior(*params, domain.clone(), *glue)?.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let b = ConvexDomain::ball(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(b.signed_distance(&[2.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(b.signed_distance(&[0.0, 0.0, 0.0]).unwrap(), -1.0);
        let e = ConvexDomain::ellipsoid(vec![0.0; 2], vec![2.0, 1.0]).unwrap();
        assert!((e.signed_distance(&[3.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((e.signed_distance(&[0.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((e.signed_distance(&[0.0, 0.5]).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_distance_is_a_distance() {
        let axes = vec![1.2, 1.0, 0.7];
        let e = ConvexDomain::ellipsoid(vec![0.0; 3], axes.clone()).unwrap();
        for &(x, y, z) in &[(2.0, 0.3, -0.4), (0.1, 1.5, 0.2), (-0.9, -0.9, 0.9), (0.3, 0.2, 0.1)] {
            let p = [x, y, z];
            let d = e.signed_distance(&p).unwrap();
            // Dense boundary sampling gives an upper bound on |d|.
            let mut best = f64::INFINITY;
            for i in 0..400 {
                for j in 0..200 {
                    let th = std::f64::consts::PI * (j as f64 + 0.5) / 200.0;
                    let ph = 2.0 * std::f64::consts::PI * i as f64 / 400.0;
                    let b = [axes[0] * th.sin() * ph.cos(), axes[1] * th.sin() * ph.sin(), axes[2] * th.cos()];
                    let dd = ((p[0] - b[0]).powi(2) + (p[1] - b[1]).powi(2) + (p[2] - b[2]).powi(2)).sqrt();
                    best = best.min(dd);
                }
            }
            assert!(d.abs() <= best + 1e-12);
            assert!(best - d.abs() < 1e-2, "{p:?}: {d} vs {best}");
            assert_eq!(d > 0.0, !e.contains(&p));
        }
    }

    #[test]
    fn support_sampled_circle_and_ellipse() {
        let m = 64;
        let circle = ConvexDomain::support_sampled(vec![1.0; m]).unwrap();
        assert!((circle.signed_distance(&[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((circle.signed_distance(&[0.3, 0.4]).unwrap() + 0.5).abs() < 1e-12);
        let (a, b) = (1.3, 1.0);
        let support: Vec<f64> = (0..m)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                ((a * th.cos()).powi(2) + (b * th.sin()).powi(2)).sqrt()
            })
            .collect();
        let s = ConvexDomain::support_sampled(support).unwrap();
        let e = ConvexDomain::ellipsoid(vec![0.0; 2], vec![a, b]).unwrap();
        for p in [[2.0, 0.5], [-0.2, 1.7], [0.1, 0.2], [1.0, -1.0]] {
            let d1 = s.signed_distance(&p).unwrap();
            let d2 = e.signed_distance(&p).unwrap();
            assert!((d1 - d2).abs() < 1e-6, "{p:?}: {d1} vs {d2}");
        }
        let t = s.ray_exit(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((t - a).abs() < 1e-6);
    }

    #[test]
    fn support_sampled_rejects_nonconvex() {
        let mut h = vec![1.0; 32];
        h[5] = 0.5;
        assert!(ConvexDomain::support_sampled(h).is_err());
    }

    #[test]
    fn ray_exit_ellipsoid() {
        let e = ConvexDomain::ellipsoid(vec![0.1, 0.0], vec![2.0, 1.0]).unwrap();
        let s = e.ray_exit(&[0.1, 0.0], &[0.5, 0.0]).unwrap();
        assert!((s - 4.0).abs() < 1e-12);
    }

    #[test]
    fn phi_examples() {
        let b = ConvexDomain::ball(vec![0.0; 2], 1.0).unwrap();
        assert_eq!(phi_zero(&b, 1.0, &[1.0, 0.0]).unwrap(), 0.0);
        assert!((phi_zero(&b, 1.0, &[2.0, 0.0]).unwrap() - (1f64.exp() - 1.0)).abs() < 1e-14);
        assert!((phi_zero(&b, 1e-9, &[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn smooth_max_examples() {
        let d = 0.3;
        assert_eq!(smooth_max(1.0 + 2.0 * d, 1.0, d), 1.0 + 2.0 * d);
        assert_eq!(smooth_max(0.0, 3.0 * d, d), 3.0 * d);
        assert!((smooth_max(1.0, 1.0, d) - (1.0 + d * 3.0 / 16.0)).abs() < 1e-15);
        assert_eq!(smooth_max_at(|x| x[0], |x| -x[0], d, &[1.0]), 1.0);
    }

    #[test]
    fn smooth_abs_polynomial_properties() {
        let d = 1.0;
        for i in 0..=1000 {
            let s = -1.0 + 2.0 * i as f64 / 1000.0;
            assert!(smooth_abs(s, d) >= s.abs() - 1e-15);
        }
        let h = 1e-6;
        for edge in [-1.0, 1.0] {
            let left = (smooth_abs(edge - h, d) - smooth_abs(edge - 2.0 * h, d)) / h;
            let right = (smooth_abs(edge + 2.0 * h, d) - smooth_abs(edge + h, d)) / h;
            assert!((left - right).abs() < 1e-5);
        }
    }

    #[test]
    fn exterior_boundary_and_far_values() {
        let p = ProblemParams::new(3, 1, 0.4, 1.0, 0.01, 500.0).unwrap();
        let dom = ConvexDomain::ball(vec![0.0; 3], 0.45).unwrap();
        let glue = GlueParams::exterior_default(&p);
        let s = Subsolution::exterior(p, dom.clone(), glue).unwrap();
        assert!((s.value(&[0.45, 0.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(s.value(&[3.0, 0.0, 0.0]).unwrap(), w_profile(&p, 3.0));
        assert!(s.value(&[0.1, 0.0, 0.0]).is_err());
        let v = build_subsolution(&p, &dom, &glue, &[0.0, 3.0, 0.0]).unwrap();
        assert_eq!(v, w_profile(&p, 3.0));
    }

    #[test]
    fn glue_misconfiguration_rejected() {
        let p = ProblemParams::new(3, 1, 0.4, 1.0, 0.01, 500.0).unwrap();
        let dom = ConvexDomain::ball(vec![0.0; 3], 0.45).unwrap();
        let mut glue = GlueParams::exterior_default(&p);
        glue.delta = 5.0;
        assert!(Subsolution::exterior(p, dom.clone(), glue).is_err());
        let big = ConvexDomain::ball(vec![0.0; 3], 0.6).unwrap();
        assert!(Subsolution::exterior(p, big, GlueParams::exterior_default(&p)).is_err());
    }

    #[test]
    fn default_constants() {
        let p = ProblemParams::new(5, 1, 0.4, 1.0, 0.01, 500.0).unwrap();
        let g = GlueParams::exterior_default(&p);
        let alt = 0.5 * (1.0 - 2f64.powf(-1.5));
        assert!((g.delta - alt).abs() < 1e-15);
        assert!((g.tau0 - alt / (3f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn ring_profile_values() {
        let dom = ConvexDomain::ball(vec![0.0; 2], 0.5).unwrap();
        let s = Subsolution::ring(dom, 2.0, GlueParams::ring_default(2.0), None).unwrap();
        assert!(s.value(&[0.5, 0.0]).unwrap().abs() < 1e-12);
        assert!((s.value(&[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    }
}
