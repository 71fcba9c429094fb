//! Damped Newton iteration that keeps every iterate in Γ_k.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::discrete::{
    jacobian, node_symmetric_functions, residual_weights, residual_with_rhs, rhs_vector, sk_values, Jacobian, NodeSym,
};
use super::field::Field;
use super::grid::AnnularGrid;
use super::linalg::{bicgstab, norm_inf, KrylovInfo};
use super::problem::{Problem, SolveConfig};

/// Record of one accepted Newton step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Weighted sup-norm of the residual before and after the step.
    pub residual_before: f64,
    pub residual_after: f64,
    pub step_length: f64,
    pub update_norm: f64,
    pub backtracks: usize,
    pub krylov_iterations: usize,
    /// Homotopy parameter of the right-hand side (1 for the target problem).
    pub theta: f64,
}

/// Outcome of a Newton solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final sup-norm of |x|ⁿ(S_k(D²u) − f).
    pub residual: f64,
    pub history: Vec<StepInfo>,
    /// Unknowns that failed the Γ_k test on the initial iterate and were exempt.
    pub flagged: Vec<usize>,
    /// Number of intermediate right-hand sides used (0: direct Newton).
    pub homotopy_stages: usize,
    /// min over unknowns of u − u̲.
    pub subsolution_gap: f64,
    /// min over unknowns and i ≤ k of S_i (plus rounding bound).
    pub gamma_min: f64,
}

fn weighted_sup(r: &[f64], w: &[f64]) -> f64 {
    r.iter().zip(w).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max)
}

fn weighted_l2(r: &[f64], w: &[f64]) -> f64 {
    r.iter().zip(w).map(|(a, b)| (a * b) * (a * b)).sum::<f64>().sqrt()
}

fn first_violation(syms: &[NodeSym], margin: f64, exempt: &[bool]) -> Option<(usize, usize)> {
    syms.iter()
        .enumerate()
        .filter(|(i, _)| !exempt[*i])
        .find_map(|(i, s)| s.violation(margin).map(|order| (i, order)))
}

/// Right-hand side, residual weights and Γ_k exemptions of a Newton run.
struct Ctx {
    rhs: Vec<f64>,
    weights: Vec<f64>,
    exempt: Vec<bool>,
    theta: f64,
}

impl Ctx {
    fn new(field: &Field, margin: f64) -> Result<Self> {
        let syms = node_symmetric_functions(field)?;
        Ok(Self {
            rhs: rhs_vector(field),
            weights: residual_weights(field),
            exempt: syms.iter().map(|s| s.violation(margin).is_some()).collect(),
            theta: 1.0,
        })
    }

    /// Nodes that became admissible are tested from now on.
    fn release(&mut self, field: &Field, margin: f64) -> Result<()> {
        let syms = node_symmetric_functions(field)?;
        for (e, s) in self.exempt.iter_mut().zip(&syms) {
            if *e && s.violation(margin).is_none() {
                *e = false;
            }
        }
        Ok(())
    }
}

/// One damped Newton step. Nodes that already fail the Γ_k test are exempt
/// from it during the line search.
pub fn newton_step(field: &Field, config: &SolveConfig) -> Result<(Field, StepInfo)> {
    let ctx = Ctx::new(field, config.gamma_margin)?;
    let r = residual_with_rhs(field, &ctx.rhs)?;
    step(field, config, &ctx, &r)
}

/// Backtracks from the full Newton step until Γ_k holds at every
/// non-exempt node and the weighted ℓ² residual decreases.
fn step(field: &Field, config: &SolveConfig, ctx: &Ctx, r: &[f64]) -> Result<(Field, StepInfo)> {
    let before = weighted_sup(r, &ctx.weights);
    let merit = weighted_l2(r, &ctx.weights);
    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    let (delta, krylov) = match jacobian(field)? {
        Jacobian::Banded(b) => (b.solve(&rhs)?, None),
        Jacobian::Sparse(a) => {
            let (x, info) = bicgstab(&a, &rhs, config.krylov_tol, config.krylov_max_iter)?;
            (x, Some(info))
        }
    };
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Newton update".into()));
    }
    let base = field.unknowns();
    // At the rounding floor of the residual the update carries no information.
    let update = norm_inf(&delta);
    if update <= ROUNDOFF_UPDATE * norm_inf(&base).max(1.0) {
        let info = StepInfo {
            residual_before: before,
            residual_after: before,
            step_length: 0.0,
            update_norm: update,
            backtracks: 0,
            krylov_iterations: krylov.map(|k: KrylovInfo| k.iterations).unwrap_or(0),
            theta: ctx.theta,
        };
        return Ok((field.clone(), info));
    }
    let mut alpha = 1.0;
    let mut last_reason = String::new();
    let mut last_node = 0;
    for backtracks in 0..=config.max_backtracks {
        let cand: Vec<f64> = base.iter().zip(&delta).map(|(u, d)| u + alpha * d).collect();
        let mut trial = field.clone();
        trial.set_unknowns(&cand);
        let syms = node_symmetric_functions(&trial)?;
        match first_violation(&syms, config.gamma_margin, &ctx.exempt) {
            Some((node, order)) => {
                last_node = node;
                last_reason = format!("S_{order} would leave the admissible cone");
            }
            None => {
                let k = field.problem.k;
                let rt: Vec<f64> = syms.iter().zip(&ctx.rhs).map(|(s, f)| s.e[k] - f).collect();
                let after = weighted_sup(&rt, &ctx.weights);
                if weighted_l2(&rt, &ctx.weights) < merit || after <= config.newton_tol {
                    let info = StepInfo {
                        residual_before: before,
                        residual_after: after,
                        step_length: alpha,
                        update_norm: alpha * norm_inf(&delta),
                        backtracks,
                        krylov_iterations: krylov.map(|k: KrylovInfo| k.iterations).unwrap_or(0),
                        theta: ctx.theta,
                    };
                    return Ok((trial, info));
                }
                last_node = rt
                    .iter()
                    .zip(&ctx.weights)
                    .enumerate()
                    .fold((0, 0.0), |acc, (i, (a, b))| {
                        let v = (a * b).abs();
                        if v > acc.1 {
                            (i, v)
                        } else {
                            acc
                        }
                    })
                    .0;
                last_reason = format!("residual did not decrease (sup {after:.3e}, before {before:.3e})");
            }
        }
        alpha *= config.damping;
    }
    // No decrease is possible once every residual is within its rounding bound.
    let k = field.problem.k;
    let syms = node_symmetric_functions(field)?;
    if r.iter().zip(&syms).all(|(v, s)| v.abs() <= s.noise[k]) {
        let info = StepInfo {
            residual_before: before,
            residual_after: before,
            step_length: 0.0,
            update_norm: 0.0,
            backtracks: config.max_backtracks,
            krylov_iterations: krylov.map(|k: KrylovInfo| k.iterations).unwrap_or(0),
            theta: ctx.theta,
        };
        return Ok((field.clone(), info));
    }
    Err(Error::LineSearch {
        node: last_node,
        reason: last_reason,
    })
}

/// Newton iterations until the weighted sup-norm is below `tol`.
fn iterate(
    mut field: Field,
    config: &SolveConfig,
    ctx: &mut Ctx,
    tol: f64,
    history: &mut Vec<StepInfo>,
) -> Result<(Field, f64)> {
    let mut r = residual_with_rhs(&field, &ctx.rhs)?;
    let mut norm = weighted_sup(&r, &ctx.weights);
    let mut iterations = 0;
    let mut short_steps = 0;
    while norm > tol {
        if iterations >= config.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        }
        let (next, info) = step(&field, config, ctx, &r)?;
        if info.step_length == 0.0 {
            history.push(info);
            break;
        }
        short_steps = if info.step_length < STAGNATION_STEP { short_steps + 1 } else { 0 };
        if short_steps >= STAGNATION_COUNT {
            return Err(Error::LineSearch {
                node: 0,
                reason: format!("stagnated at residual {norm:.3e}"),
            });
        }
        field = next;
        iterations += 1;
        history.push(info);
        ctx.release(&field, config.gamma_margin)?;
        r = residual_with_rhs(&field, &ctx.rhs)?;
        norm = weighted_sup(&r, &ctx.weights);
    }
    Ok((field, norm))
}

/// Updates below this fraction of max|u| end the iteration as converged.
const ROUNDOFF_UPDATE: f64 = 1e-13;
/// Consecutive steps shorter than this abandon the iteration.
const STAGNATION_STEP: f64 = 1e-3;
const STAGNATION_COUNT: usize = 3;
/// Tolerance of intermediate homotopy stages.
const HOMOTOPY_TOL: f64 = 1e-6;
const HOMOTOPY_MIN_STEP: f64 = 1e-6;

/// Newton iteration from a given iterate. If the direct iteration fails, the
/// right-hand side is deformed geometrically from S_k(D²u₀) to f, each
/// intermediate problem solved by Newton from the previous solution.
pub fn solve_from(field: Field, config: &SolveConfig) -> Result<(Field, SolveReport)> {
    config.validate()?;
    let mut ctx = Ctx::new(&field, config.gamma_margin)?;
    let flagged: Vec<usize> = ctx.exempt.iter().enumerate().filter(|(_, e)| **e).map(|(i, _)| i).collect();
    let initial_exempt = ctx.exempt.clone();
    let mut history = Vec::new();
    let direct = iterate(field.clone(), config, &mut ctx, config.newton_tol, &mut history);
    let mut homotopy_stages = 0;
    let (field, norm) = match direct {
        Ok(done) => done,
        Err(Error::LineSearch { .. }) | Err(Error::NonConvergence { .. }) | Err(Error::Numerical(_)) => {
            history.clear();
            let target = ctx.rhs.clone();
            let start: Vec<f64> = sk_values(&field)?
                .iter()
                .zip(&target)
                .map(|(v, f)| v.max(1e-12 * f.abs()).max(f64::MIN_POSITIVE))
                .collect();
            ctx.exempt = initial_exempt;
            let mut cur = field;
            let mut theta = 0.0;
            let mut dtheta: f64 = 0.25;
            let mut last_err = None;
            loop {
                if dtheta < HOMOTOPY_MIN_STEP {
                    return Err(last_err.unwrap_or(Error::NonConvergence {
                        iterations: history.len(),
                        residual: f64::NAN,
                    }));
                }
                let next = (theta + dtheta).min(1.0);
                let mut trial_ctx = Ctx {
                    rhs: start
                        .iter()
                        .zip(&target)
                        .map(|(a, b)| if *b > 0.0 { a.powf(1.0 - next) * b.powf(next) } else { (1.0 - next) * a + next * b })
                        .collect(),
                    weights: ctx.weights.clone(),
                    exempt: ctx.exempt.clone(),
                    theta: next,
                };
                let tol = if next >= 1.0 { config.newton_tol } else { HOMOTOPY_TOL.max(config.newton_tol) };
                let mut steps = Vec::new();
                match iterate(cur.clone(), config, &mut trial_ctx, tol, &mut steps) {
                    Ok((f, norm)) => {
                        history.extend(steps);
                        homotopy_stages += 1;
                        cur = f;
                        ctx.exempt = trial_ctx.exempt;
                        theta = next;
                        if theta >= 1.0 {
                            break (cur, norm);
                        }
                        dtheta *= 2.0;
                    }
                    Err(e) => {
                        last_err = Some(e);
                        dtheta *= 0.25;
                    }
                }
            }
        }
        Err(e) => return Err(e),
    };
    let syms = node_symmetric_functions(&field)?;
    let gamma_min = syms.iter().map(|s| s.margin()).fold(f64::INFINITY, f64::min);
    let subsolution_gap = subsolution_gap(&field)?;
    Ok((
        field,
        SolveReport {
            iterations: history.len(),
            residual: norm,
            history,
            flagged,
            homotopy_stages,
            subsolution_gap,
            gamma_min,
        },
    ))
}

/// Newton iteration started from the sampled subsolution.
pub fn solve(problem: &Problem, grid: Arc<AnnularGrid>, config: &SolveConfig) -> Result<(Field, SolveReport)> {
    let field = Field::initial(grid, problem.clone())?;
    solve_from(field, config)
}

/// min over unknowns of u − u̲.
pub fn subsolution_gap(field: &Field) -> Result<f64> {
    let u = field.unknowns();
    let mut gap = f64::INFINITY;
    for (i, v) in u.iter().enumerate() {
        let x = field.unknown_point(i);
        gap = gap.min(v - field.problem.subsolution.value(&x)?);
    }
    Ok(gap)
}
