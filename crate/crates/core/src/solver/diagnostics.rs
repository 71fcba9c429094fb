//! Runtime checks of the a priori bounds on converged fields, and the
//! far-field fit used to rescale truncated solutions.

use serde::{Deserialize, Serialize};

use crate::closedforms::{gradient_weight, green, CaseKind};
use crate::error::{Error, Result};

use super::discrete::node_symmetric_functions;
use super::field::{norm, Field};
use super::newton::subsolution_gap;

/// Statistics over the unknowns in one radial shell r_lo ≤ |x| < r_hi.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellDiagnostics {
    pub r_lo: f64,
    pub r_hi: f64,
    pub nodes: usize,
    /// Subcritical: (−u)|x|^{(n−2k)/k}. Otherwise u − G(|x|) with G the
    /// Green asymptote (log|x| or |x|^{(2k−n)/k}).
    pub decay_min: f64,
    pub decay_max: f64,
    /// |Du|·|x|^{(n−k)/k}.
    pub grad_min: f64,
    pub grad_max: f64,
    /// |D²u|·|x|^{n/k} (Frobenius norm).
    pub hess_max: f64,
    /// P = |Du|²·weight(u).
    pub p_min: f64,
    pub p_max: f64,
    /// x·Du·|x|^{n/k−2}.
    pub floor_min: f64,
    /// min over i ≤ k of S_i (plus rounding bound).
    pub gamma_min: f64,
}

/// Shell table plus pass/fail flags. Violations are reported, not raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub shells: Vec<ShellDiagnostics>,
    /// Subcritical bounds [r₀^{(n−2k)/k}, R₀^{(n−2k)/k}] for (−u)|x|^{(n−2k)/k}.
    pub decay_bounds: Option<(f64, f64)>,
    pub decay_ok: bool,
    pub floor_min: f64,
    pub floor_ok: bool,
    pub gamma_min: f64,
    pub gamma_ok: bool,
    /// min(u − u̲); the subsolution dominates when ≥ −1e−8.
    pub subsolution_gap: f64,
    pub dominance_ok: bool,
    pub flags: Vec<String>,
}

/// Relative slack allowed on the decay bounds.
const DECAY_TOL: f64 = 1e-3;

/// Per-shell bound checks with `shells` geometric shells between the inner
/// radius and R.
pub fn diagnostics(field: &Field, shells: usize) -> Result<DiagnosticsReport> {
    let shells = shells.max(1);
    let n = field.problem.n as f64;
    let k = field.problem.k as f64;
    let params = field.problem.params().copied();
    let r_in = field.problem.domain.r_in;
    let r_out = field.grid.outer_radius();
    let syms = node_symmetric_functions(field)?;
    let mut table: Vec<ShellDiagnostics> = (0..shells)
        .map(|s| {
            let lo = r_in * (r_out / r_in).powf(s as f64 / shells as f64);
            let hi = r_in * (r_out / r_in).powf((s + 1) as f64 / shells as f64);
            ShellDiagnostics {
                r_lo: lo,
                r_hi: hi,
                nodes: 0,
                decay_min: f64::INFINITY,
                decay_max: f64::NEG_INFINITY,
                grad_min: f64::INFINITY,
                grad_max: 0.0,
                hess_max: 0.0,
                p_min: f64::INFINITY,
                p_max: 0.0,
                floor_min: f64::INFINITY,
                gamma_min: f64::INFINITY,
            }
        })
        .collect();
    let values = field.unknowns();
    for (i, u) in values.iter().enumerate() {
        let x = field.unknown_point(i);
        let r = norm(&x);
        let s = (((r / r_in).ln() / (r_out / r_in).ln()) * shells as f64).floor();
        let s = (s.max(0.0) as usize).min(shells - 1);
        let du = field.gradient_at(i)?;
        let hess = field.hessian_at(i)?;
        let gnorm = norm(&du);
        let xdu: f64 = x.iter().zip(&du).map(|(a, b)| a * b).sum();
        let sh = &mut table[s];
        sh.nodes += 1;
        let decay = match params {
            Some(p) => match p.case {
                CaseKind::Subcritical => -u * r.powf((n - 2.0 * k) / k),
                _ => u - green(&p, r)?,
            },
            None => *u,
        };
        sh.decay_min = sh.decay_min.min(decay);
        sh.decay_max = sh.decay_max.max(decay);
        let gs = gnorm * r.powf((n - k) / k);
        sh.grad_min = sh.grad_min.min(gs);
        sh.grad_max = sh.grad_max.max(gs);
        sh.hess_max = sh.hess_max.max(hess.norm() * r.powf(n / k));
        if let Some(p) = params {
            if let Ok(pv) = gradient_weight(&p, *u, gnorm) {
                sh.p_min = sh.p_min.min(pv);
                sh.p_max = sh.p_max.max(pv);
            }
        }
        sh.floor_min = sh.floor_min.min(xdu * r.powf(n / k - 2.0));
        sh.gamma_min = sh.gamma_min.min(syms[i].margin());
    }
    table.retain(|s| s.nodes > 0);
    let mut flags = Vec::new();
    let decay_bounds = params.and_then(|p| match p.case {
        CaseKind::Subcritical => {
            let q = (n - 2.0 * k) / k;
            Some((p.r0.powf(q), p.enclosure.powf(q)))
        }
        _ => None,
    });
    let mut decay_ok = true;
    if let Some((lo, hi)) = decay_bounds {
        for s in &table {
            if s.decay_min < lo * (1.0 - DECAY_TOL) || s.decay_max > hi * (1.0 + DECAY_TOL) {
                decay_ok = false;
                flags.push(format!(
                    "decay bound violated in shell [{:.4e}, {:.4e}): [{:.6e}, {:.6e}] not in [{lo:.6e}, {hi:.6e}]",
                    s.r_lo, s.r_hi, s.decay_min, s.decay_max
                ));
            }
        }
    }
    let floor_min = table.iter().map(|s| s.floor_min).fold(f64::INFINITY, f64::min);
    let floor_ok = floor_min > 0.0;
    if !floor_ok {
        flags.push(format!("gradient floor not positive: min x·Du|x|^(n/k-2) = {floor_min:.6e}"));
    }
    let gamma_min = table.iter().map(|s| s.gamma_min).fold(f64::INFINITY, f64::min);
    let gamma_ok = gamma_min > 0.0;
    if !gamma_ok {
        flags.push(format!("Γ_k margin not positive: {gamma_min:.6e}"));
    }
    let gap = subsolution_gap(field)?;
    let dominance_ok = gap >= -1e-8;
    if !dominance_ok {
        flags.push(format!("subsolution not dominated: min(u - u_sub) = {gap:.6e}"));
    }
    Ok(DiagnosticsReport {
        shells: table,
        decay_bounds,
        decay_ok,
        floor_min,
        floor_ok,
        gamma_min,
        gamma_ok,
        subsolution_gap: gap,
        dominance_ok,
        flags,
    })
}

/// Fit u ≈ α + β·G(|x|) over an outer shell, and the implied scale s of the
/// truncated solution relative to the one normalized at infinity:
/// s = 1 + α (Subcritical) or s = β (otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldFit {
    pub alpha: f64,
    pub beta: f64,
    pub scale: f64,
    pub samples: usize,
    pub rms: f64,
}

/// Least-squares far-field fit over lo_frac·R ≤ |x| ≤ hi_frac·R.
pub fn far_field_fit(field: &Field, lo_frac: f64, hi_frac: f64) -> Result<FarFieldFit> {
    let p = *field.problem.exterior_params()?;
    let big_r = field.grid.outer_radius();
    let (lo, hi) = (lo_frac * big_r, hi_frac * big_r);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let values = field.unknowns();
    for (i, u) in values.iter().enumerate() {
        let r = norm(&field.unknown_point(i));
        if r >= lo && r <= hi {
            xs.push(green(&p, r)?);
            ys.push(*u);
        }
    }
    let (beta, alpha, rms) = crate::decay::line_fit(&xs, &ys)
        .map_err(|e| Error::Extraction(format!("far-field fit: {e}")))?;
    let scale = match p.case {
        CaseKind::Subcritical => 1.0 + alpha,
        _ => beta,
    };
    if !(scale > 0.0) {
        return Err(Error::Extraction(format!("far-field scale {scale} is not positive")));
    }
    Ok(FarFieldFit {
        alpha,
        beta,
        scale,
        samples: xs.len(),
        rms,
    })
}

/// The field rescaled by its far-field fit, approximating the solution
/// normalized at infinity.
pub fn renormalized(field: &Field, lo_frac: f64, hi_frac: f64) -> Result<(Field, FarFieldFit)> {
    let fit = far_field_fit(field, lo_frac, hi_frac)?;
    Ok((field.rescaled(fit.scale), fit))
}
