//! Integrals over level sets and over the annulus: I_{a,b,k}, the
//! k-capacity pair, the boundary inequalities, area growth and the coarea
//! cross-check.

use serde::{Deserialize, Serialize};

use crate::closedforms::{monotone_weight_g, unit_sphere_area, CaseKind, ProblemParams};
use crate::error::{Error, Result};
use crate::solver::{AnnularGrid, Field, Jet};

use super::extract::extract;
use super::quadrature::gauss_legendre;
use super::{flux_and_sk, LevelSetSample};

/// Relative tolerance on the inequality slack (quadrature error allowance).
pub const INEQUALITY_TOL: f64 = 1e-3;
/// Largest accepted growth of the normalized level-set area over its value on ∂Ω.
pub const AREA_RATIO_LIMIT: f64 = 4.0;

/// Levels available on the grid: [u on ∂Ω, min of the outer data).
pub fn level_range(field: &Field) -> (f64, f64) {
    let lo = field.problem.inner_value();
    let hi = match field.grid.as_ref() {
        AnnularGrid::Radial(_) => *field.values.last().unwrap(),
        AnnularGrid::Cartesian(g) => g
            .ghosts
            .iter()
            .zip(&field.ghost_data)
            .filter(|(r, _)| !r.inner)
            .map(|(_, d)| *d)
            .fold(f64::INFINITY, f64::min),
    };
    (lo, hi)
}

fn params(field: &Field) -> Result<ProblemParams> {
    field.problem.exterior_params().copied()
}

/// I_{a,b,k}(t) = ∫_{S_t} g(t)^a |Du|^{b−k} S_k^{ij}u_iu_j dA.
pub fn i_abk(field: &Field, t: f64, a: f64, b: f64) -> Result<f64> {
    let p = params(field)?;
    Ok(i_abk_routes(&extract(field, t)?, &p, a, b)?.0)
}

/// I_{a,b,k} on a sample by two routes: the S_k^{ij} flux (polynomial
/// route) and g^a|Du|^{b+1}H_{k−1} (eigenbasis curvature route).
pub fn i_abk_routes(sample: &LevelSetSample, p: &ProblemParams, a: f64, b: f64) -> Result<(f64, f64)> {
    let k = p.k;
    let ga = monotone_weight_g(p, sample.t)?.powf(a);
    let flux = sample.integrate(|q| q.grad_norm.powf(b - k as f64) * q.flux);
    let curv = sample.integrate(|q| q.grad_norm.powf(b + 1.0) * q.curvatures[k - 1]);
    Ok((ga * flux, ga * curv))
}

/// Volume and boundary forms of the k-capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPair {
    /// ∫ S_k^{ij}u_iu_j dx over the computational annulus.
    pub volume: f64,
    /// Estimated contribution of |x| > R.
    pub tail: f64,
    /// ∫_{∂Ω} |Du|^k H_{k−1} dA.
    pub boundary: f64,
    /// volume + tail − boundary.
    pub gap: f64,
}

fn jet_flux(jet: &Jet, k: usize) -> f64 {
    flux_and_sk(jet, k).0
}

/// Composite Gauss rule in log r of ∫_{r_a}^{r_b} |S^{n−1}| r^{n−1} F(r) dr
/// for a radial field, F = S_k^{ij}u_iu_j.
fn radial_volume(field: &Field, r_a: f64, r_b: f64) -> Result<f64> {
    let g = field.radial_grid().unwrap();
    let n = field.dim();
    let k = field.problem.k;
    let (xs, ws) = gauss_legendre(4);
    let area = unit_sphere_area(n);
    let mut total = 0.0;
    let mut x = vec![0.0; n];
    for j in 0..g.len() - 1 {
        let lo = g.radii[j].max(r_a);
        let hi = g.radii[j + 1].min(r_b);
        if !(hi > lo) {
            continue;
        }
        let (sa, sb) = (lo.ln(), hi.ln());
        let half = 0.5 * (sb - sa);
        for (xi, wi) in xs.iter().zip(&ws) {
            let r = (0.5 * (sa + sb) + half * xi).exp();
            let (u, du, d2u) = field.radial_eval(r)?;
            x[0] = r;
            let f = jet_flux(&Jet::radial(&x, u, du, d2u), k);
            total += wi * half * area * r.powi(n as i32) * f;
        }
    }
    Ok(total)
}

/// Nodewise F = S_k^{ij}u_iu_j and the cell volume fraction of each active node
/// outside Ω and inside B_R.
fn cartesian_nodes(field: &Field) -> Result<Vec<(Vec<f64>, f64, f64, f64)>> {
    let g = field.cartesian_grid().unwrap();
    let k = field.problem.k;
    let vol = g.h.powi(g.n as i32);
    let values = field.unknowns();
    let mut out = Vec::with_capacity(values.len());
    for (i, u) in values.iter().enumerate() {
        let x = field.unknown_point(i);
        let jet = Jet {
            value: *u,
            grad: field.gradient_at(i)?,
            hess: field.hessian_at(i)?,
        };
        let d_in = field.problem.domain.signed_distance(&x)?;
        let d_out = g.outer_radius - x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let frac = (0.5 + d_in / g.h).clamp(0.0, 1.0) * (0.5 + d_out / g.h).clamp(0.0, 1.0);
        let gn = jet.grad_norm();
        out.push((x, jet_flux(&jet, k), frac * vol, gn));
    }
    Ok(out)
}

/// Exponent p of the far-field decay S_k^{ij}u_iu_j ~ |x|^{−p}
/// (|Du| ~ |x|^{−(n−k)/k}, |D²u| ~ |x|^{−n/k}).
fn flux_decay_exponent(n: f64, k: f64) -> f64 {
    (n + k * n - 2.0 * k) / k
}

/// Volume and boundary integrals of the k-capacity (k < n/2 only; the volume
/// integral diverges otherwise). The tail beyond R uses the decay exponent
/// with its constant fitted on the outer shells.
pub fn capacity_pair(field: &Field) -> Result<CapacityPair> {
    let p = params(field)?;
    if p.case != CaseKind::Subcritical {
        return Err(Error::Precondition(format!(
            "the k-capacity is finite only for k < n/2 (n = {}, k = {})",
            p.n, p.k
        )));
    }
    let (n, k) = (p.n as f64, p.k as f64);
    let e = flux_decay_exponent(n, k);
    let big_r = field.grid.outer_radius();
    let (volume, samples): (f64, Vec<(f64, f64)>) = match field.grid.as_ref() {
        AnnularGrid::Radial(g) => {
            let vol = radial_volume(field, g.inner(), g.outer())?;
            let mut x = vec![0.0; p.n];
            let mut s = Vec::new();
            for &r in g.radii.iter().filter(|&&r| r >= 0.5 * big_r && r <= 0.9 * big_r) {
                let (u, du, d2u) = field.radial_eval(r)?;
                x[0] = r;
                s.push((r, jet_flux(&Jet::radial(&x, u, du, d2u), p.k)));
            }
            (vol, s)
        }
        AnnularGrid::Cartesian(_) => {
            let nodes = cartesian_nodes(field)?;
            let vol = nodes.iter().map(|(_, f, w, _)| f * w).sum();
            let s = nodes
                .iter()
                .map(|(x, f, _, _)| (x.iter().map(|v| v * v).sum::<f64>().sqrt(), *f))
                .filter(|(r, _)| *r >= 0.75 * big_r && *r <= 0.95 * big_r)
                .collect();
            (vol, s)
        }
    };
    let logs: Vec<f64> = samples
        .iter()
        .filter(|(_, f)| *f > 0.0)
        .map(|(r, f)| f.ln() + e * r.ln())
        .collect();
    let tail = if logs.is_empty() {
        0.0
    } else {
        let c = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
        unit_sphere_area(p.n) * c * big_r.powf(n - e) / (e - n)
    };
    let sample = extract(field, field.problem.inner_value())?;
    let boundary = sample.integrate(|q| q.grad_norm.powi(p.k as i32) * q.curvatures[p.k - 1]);
    Ok(CapacityPair {
        volume,
        tail,
        boundary,
        gap: volume + tail - boundary,
    })
}

/// Lower bound on b for the boundary inequality and whether it is strict:
/// b ≥ k(n−k−1)/(n−k) for k < n/2, b > n/2 − 1 for k = n/2.
pub fn inequality_threshold(p: &ProblemParams) -> Option<(f64, bool)> {
    let (n, k) = (p.n as f64, p.k as f64);
    match p.case {
        CaseKind::Subcritical => Some((k * (n - k - 1.0) / (n - k), false)),
        CaseKind::Critical => Some((n / 2.0 - 1.0, true)),
        CaseKind::Supercritical => None,
    }
}

/// ∫_{∂Ω}|Du|^{b+1}H_{k−1} ≤ κ ∫_{∂Ω}|Du|^b H_k with κ = (n−2k)/(n−k)
/// (k < n/2) or κ = 1 (k = n/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub b: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs.
    pub slack: f64,
    pub relative_slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Evaluates the boundary inequality for one exponent b.
pub fn inequality_report(field: &Field, b: f64) -> Result<InequalityReport> {
    let sample = extract(field, field.problem.inner_value())?;
    inequality_from_boundary(field, &sample, b)
}

pub(crate) fn inequality_from_boundary(field: &Field, sample: &LevelSetSample, b: f64) -> Result<InequalityReport> {
    let p = params(field)?;
    let (th, strict) = inequality_threshold(&p).ok_or_else(|| {
        Error::Precondition(format!(
            "no boundary inequality for k > n/2 (n = {}, k = {})",
            p.n, p.k
        ))
    })?;
    if b < th || (strict && b <= th) {
        let rel = if strict { ">" } else { "≥" };
        let name = if strict { "n/2 − 1" } else { "k(n−k−1)/(n−k)" };
        return Err(Error::Precondition(format!(
            "b = {b} violates the hypothesis b {rel} {name} = {th}"
        )));
    }
    let (n, k) = (p.n as f64, p.k);
    let kappa = match p.case {
        CaseKind::Subcritical => (n - 2.0 * k as f64) / (n - k as f64),
        _ => 1.0,
    };
    let lhs = sample.integrate(|q| q.grad_norm.powf(b + 1.0) * q.curvatures[k - 1]);
    let rhs = kappa * sample.integrate(|q| q.grad_norm.powf(b) * q.curvatures[k]);
    let slack = rhs - lhs;
    let relative_slack = slack / rhs.abs().max(f64::MIN_POSITIVE);
    Ok(InequalityReport {
        b,
        lhs,
        rhs,
        slack,
        relative_slack,
        tolerance: INEQUALITY_TOL,
        pass: relative_slack >= -INEQUALITY_TOL,
    })
}

/// a₀ of the monotone quantity: −2(n−2k)/(n−k), 0 or 2(2k−n)/(n−k).
pub fn a0_exponent(p: &ProblemParams) -> f64 {
    let (n, k) = (p.n as f64, p.k as f64);
    match p.case {
        CaseKind::Subcritical => -2.0 * (n - 2.0 * k) / (n - k),
        CaseKind::Critical => 0.0,
        CaseKind::Supercritical => 2.0 * (2.0 * k - n) / (n - k),
    }
}

/// I_{a,b,k} tabulated over a t grid with a = b − k + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSeries {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub areas: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub a0: f64,
    pub eps: f64,
    /// max over s > t of I(s) − I(t).
    pub max_forward_increase: f64,
    /// max_forward_increase / ε²; None for ε = 0.
    pub normalized_increase: Option<f64>,
}

/// Tabulates I_{a,b,k} (a = b − k + 1) over an increasing t grid.
pub fn monotone_series(field: &Field, b: f64, ts: &[f64]) -> Result<MonotoneSeries> {
    let p = params(field)?;
    if ts.is_empty() || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("t grid must be non-empty and increasing".into()));
    }
    let c = field.problem.inner_value();
    let ok = match p.case {
        CaseKind::Subcritical => ts[0] >= c && *ts.last().unwrap() < 0.0,
        _ => ts[0] >= c,
    };
    if !ok {
        return Err(Error::Precondition(format!(
            "t grid [{}, {}] outside the admissible range for {}",
            ts[0],
            ts.last().unwrap(),
            p.case.name()
        )));
    }
    let k = p.k;
    let a = b - k as f64 + 1.0;
    let mut values = Vec::with_capacity(ts.len());
    let mut areas = Vec::with_capacity(ts.len());
    for &t in ts {
        let s = extract(field, t)?;
        values.push(i_abk_routes(&s, &p, a, b)?.0);
        areas.push(s.area());
    }
    let mut mfi = f64::NEG_INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            mfi = mfi.max(values[j] - values[i]);
        }
    }
    let eps = p.eps;
    Ok(MonotoneSeries {
        t: ts.to_vec(),
        values,
        areas,
        a,
        b,
        k,
        a0: a0_exponent(&p),
        eps,
        max_forward_increase: mfi,
        normalized_increase: (eps > 0.0).then(|| mfi / (eps * eps)),
    })
}

/// Level-set area against its a priori growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaBound {
    pub t: f64,
    pub area: f64,
    /// |S_t|·|t|^{k(n−1)/(n−2k)}, |S_t|·t^{−k(n−1)/(2k−n)} or |S_t|·e^{−(n−1)t}.
    pub ratio: f64,
    /// The same ratio on ∂Ω (equal to |∂Ω|).
    pub boundary_ratio: f64,
    pub within: bool,
}

fn area_normalization(p: &ProblemParams, t: f64) -> f64 {
    let (n, k) = (p.n as f64, p.k as f64);
    match p.case {
        CaseKind::Subcritical => t.abs().powf(k * (n - 1.0) / (n - 2.0 * k)),
        CaseKind::Supercritical => t.abs().powf(-k * (n - 1.0) / (2.0 * k - n)),
        CaseKind::Critical => (-(n - 1.0) * t).exp(),
    }
}

/// Area of S_t and its normalized ratio.
pub fn area_bound_check(field: &Field, t: f64) -> Result<AreaBound> {
    Ok(area_bound_series(field, &[t])?.remove(0))
}

pub fn area_bound_series(field: &Field, ts: &[f64]) -> Result<Vec<AreaBound>> {
    let p = params(field)?;
    let c = field.problem.inner_value();
    let boundary = extract(field, c)?.area() * area_normalization(&p, c);
    ts.iter()
        .map(|&t| {
            let area = extract(field, t)?.area();
            let ratio = area * area_normalization(&p, t);
            Ok(AreaBound {
                t,
                area,
                ratio,
                boundary_ratio: boundary,
                within: ratio.is_finite() && ratio <= AREA_RATIO_LIMIT * boundary,
            })
        })
        .collect()
}

/// ∫_{c<u<t₁} S_k^{ij}u_iu_j dx against ∫_c^{t₁} dt ∫_{S_t} S_k^{ij}u_iu_j/|Du| dA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoareaCheck {
    pub t_max: f64,
    pub volume: f64,
    pub coarea: f64,
    pub relative: f64,
}

pub fn coarea_check(field: &Field, t_max: f64, levels: usize) -> Result<CoareaCheck> {
    let c = field.problem.inner_value();
    if !(t_max > c) {
        return Err(Error::Domain(format!("t_max = {t_max} must exceed the boundary level {c}")));
    }
    let volume = match field.grid.as_ref() {
        AnnularGrid::Radial(g) => {
            let top = extract(field, t_max)?.points[0].x[0];
            radial_volume(field, g.inner(), top)?
        }
        AnnularGrid::Cartesian(g) => {
            let values = field.unknowns();
            cartesian_nodes(field)?
                .iter()
                .zip(&values)
                .map(|((_, f, w, gn), u)| {
                    let frac = (0.5 + (t_max - u) / (gn * g.h)).clamp(0.0, 1.0);
                    f * w * frac
                })
                .sum()
        }
    };
    let (xs, ws) = gauss_legendre(levels.max(2));
    let half = 0.5 * (t_max - c);
    let mut coarea = 0.0;
    for (xi, wi) in xs.iter().zip(&ws) {
        let t = c + half * (1.0 + xi);
        let s = extract(field, t)?;
        coarea += wi * half * s.integrate(|q| q.flux / q.grad_norm);
    }
    Ok(CoareaCheck {
        t_max,
        volume,
        coarea,
        relative: (volume - coarea).abs() / coarea.abs().max(f64::MIN_POSITIVE),
    })
}
