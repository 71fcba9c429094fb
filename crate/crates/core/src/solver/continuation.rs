//! Continuation along ε ↓ 0 and R ↑ ∞ with warm starts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::field::Field;
use super::grid::AnnularGrid;
use super::newton::{solve_from, SolveReport};
use super::problem::{Problem, SolveConfig};

/// Builds the grid of a continuation stage from its problem.
pub type GridFactory<'a> = dyn Fn(&Problem) -> Result<Arc<AnnularGrid>> + 'a;

/// One completed stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub eps: f64,
    pub radius: f64,
    pub unknowns: usize,
    pub solve: SolveReport,
    pub probe_values: Vec<f64>,
    /// Sup-norm change of the probe values against the previous stage.
    pub probe_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub probe_points: Vec<Vec<f64>>,
    pub stages: Vec<StageRecord>,
    /// Successive stages agreed on the probes to within 10·newton_tol.
    pub converged: bool,
}

/// A failed stage, with everything completed before it.
#[derive(Debug)]
pub struct ContinuationFailure {
    pub error: Error,
    pub report: ContinuationReport,
    pub last: Option<Box<Field>>,
}

impl std::fmt::Display for ContinuationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "continuation failed after {} stage(s): {}",
            self.report.stages.len(),
            self.error
        )
    }
}

impl std::error::Error for ContinuationFailure {}

/// The (ε_j, R_j) pairs of a schedule; the shorter list is extended by its
/// last entry and an empty list keeps the problem's own value.
pub fn stage_schedule(problem: &Problem, config: &SolveConfig) -> Vec<(f64, f64)> {
    let len = config.eps_schedule.len().max(config.r_schedule.len()).max(1);
    (0..len)
        .map(|j| {
            let pick = |v: &[f64], d: f64| if v.is_empty() { d } else { v[j.min(v.len() - 1)] };
            (
                pick(&config.eps_schedule, problem.eps()),
                pick(&config.r_schedule, problem.outer_radius),
            )
        })
        .collect()
}

/// Points on the positive coordinate axes at the given radii (all 2n axis
/// points for Cartesian grids).
pub fn probe_points(n: usize, radii: &[f64], all_axes: bool) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for &r in radii {
        if all_axes {
            for a in 0..n {
                for s in [1.0, -1.0] {
                    let mut x = vec![0.0; n];
                    x[a] = s * r;
                    out.push(x);
                }
            }
        } else {
            let mut x = vec![0.0; n];
            x[0] = r;
            out.push(x);
        }
    }
    out
}

fn probe(field: &Field, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points.iter().map(|x| field.value_at(x)).collect()
}

/// Stage problem for (ε, R).
pub fn stage_problem(problem: &Problem, eps: f64, radius: f64) -> Result<Problem> {
    let p = if radius != problem.outer_radius {
        problem.with_outer_radius(radius)?
    } else {
        problem.clone()
    };
    if eps != p.eps() {
        p.with_eps(eps)
    } else {
        Ok(p)
    }
}

/// Runs the schedule from stage `start`, warm-starting from `previous`
/// (the stage `start − 1` solution) when given.
pub fn continue_from(
    problem: &Problem,
    factory: &GridFactory<'_>,
    config: &SolveConfig,
    probe_points: &[Vec<f64>],
    start: usize,
    previous: Option<Field>,
    mut report: ContinuationReport,
    mut on_stage: impl FnMut(&Field, &StageRecord) -> Result<()>,
) -> std::result::Result<(Field, ContinuationReport), ContinuationFailure> {
    let fail = |error: Error, report: ContinuationReport, last: Option<Field>| ContinuationFailure {
        error,
        report,
        last: last.map(Box::new),
    };
    if let Err(e) = config.validate() {
        return Err(fail(e, report, previous));
    }
    report.probe_points = probe_points.to_vec();
    let schedule = stage_schedule(problem, config);
    let mut prev = previous;
    let mut prev_probe = report.stages.last().map(|s| s.probe_values.clone());
    for (j, &(eps, radius)) in schedule.iter().enumerate().skip(start) {
        let stage = (|| -> Result<(Field, StageRecord)> {
            let prob = stage_problem(problem, eps, radius)?;
            let grid = match &prev {
                Some(f) if (f.grid.outer_radius() - radius).abs() <= 1e-12 * radius => f.grid.clone(),
                _ => factory(&prob)?,
            };
            let init = match &prev {
                Some(f) if Arc::ptr_eq(&f.grid, &grid) => {
                    Field::from_values(grid.clone(), prob.clone(), f.values.clone())?
                }
                Some(f) => Field::interpolated(grid.clone(), prob.clone(), f)?,
                None => Field::initial(grid.clone(), prob.clone())?,
            };
            let (field, solve) = solve_from(init, config)?;
            let values = probe(&field, probe_points)?;
            let delta = prev_probe.as_ref().map(|p: &Vec<f64>| {
                p.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            });
            let record = StageRecord {
                stage: j,
                eps,
                radius,
                unknowns: field.len(),
                solve,
                probe_values: values,
                probe_delta: delta,
            };
            Ok((field, record))
        })();
        match stage {
            Ok((field, record)) => {
                if let Err(e) = on_stage(&field, &record) {
                    report.stages.push(record);
                    return Err(fail(e, report, Some(field)));
                }
                prev_probe = Some(record.probe_values.clone());
                report.stages.push(record);
                prev = Some(field);
            }
            Err(e) => return Err(fail(e, report, prev)),
        }
    }
    report.converged = report
        .stages
        .last()
        .and_then(|s| s.probe_delta)
        .map(|d| d < 10.0 * config.newton_tol)
        .unwrap_or(false);
    match prev {
        Some(f) => Ok((f, report)),
        None => Err(fail(Error::Config("empty continuation schedule".into()), report, None)),
    }
}

/// Runs every stage of the schedule from the subsolution.
pub fn continue_to_limit(
    problem: &Problem,
    factory: &GridFactory<'_>,
    config: &SolveConfig,
    probe_points: &[Vec<f64>],
) -> std::result::Result<(Field, ContinuationReport), ContinuationFailure> {
    continue_from(
        problem,
        factory,
        config,
        probe_points,
        0,
        None,
        ContinuationReport::default(),
        |_, _| Ok(()),
    )
}
