//! Run configuration files (TOML).

use serde::{Deserialize, Serialize};

use khessian::closedforms::{CaseKind, ProblemParams};
use khessian::levelset::inequality_threshold;
use khessian::solver::{AnnularGrid, CartesianGrid, Problem, RadialGrid, SolveConfig};
use khessian::subsolution::ConvexDomain;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    pub domain: DomainBlock,
    #[serde(default)]
    pub schedule: ScheduleBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub n: usize,
    pub k: usize,
    /// Optional; must agree with the case derived from (n, k).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    pub r0: f64,
    /// R₀, with Ω ⊂ B_{R₀/2}.
    pub enclosure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainBlock {
    Ball {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        radius: f64,
    },
    Ellipsoid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        semi_axes: Vec<f64>,
    },
    SupportSampled {
        support: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    /// Strictly decreasing ε values.
    pub eps: Vec<f64>,
    /// Strictly increasing truncation radii R.
    pub radius: Vec<f64>,
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        Self {
            eps: vec![0.0],
            radius: vec![100.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Radial,
    Cartesian,
}

/// Missing keys take the library defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub grid: GridKind,
    /// Radial intervals.
    pub nodes: usize,
    /// Cartesian spacing.
    pub h: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub max_backtracks: usize,
    pub gamma_margin: f64,
    pub krylov_tol: f64,
    pub krylov_max_iter: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self {
            grid: GridKind::Radial,
            nodes: 400,
            h: 1.0 / 32.0,
            newton_tol: d.newton_tol,
            max_iter: d.max_iter,
            damping: d.damping,
            max_backtracks: d.max_backtracks,
            gamma_margin: d.gamma_margin,
            krylov_tol: d.krylov_tol,
            krylov_max_iter: d.krylov_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisBlock {
    /// Exponents b of the boundary inequality and the monotone quantity.
    pub b: Vec<f64>,
    /// Levels t of the monotone series; empty picks 12 levels automatically.
    pub t: Vec<f64>,
    pub probe_radii: Vec<f64>,
    /// Geometric shells of the diagnostics table.
    pub shells: usize,
    /// Rescale truncated fields by their far-field fit before analysis.
    pub renormalize: bool,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            b: Vec::new(),
            t: Vec::new(),
            probe_radii: Vec::new(),
            shells: 8,
            renormalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingBlock {
    pub outer_radius: f64,
    /// Right-hand side constants, increasing.
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
}

fn config_error(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn case(&self) -> Result<CaseKind, CliError> {
        CaseKind::from_nk(self.problem.n, self.problem.k).map_err(|e| config_error("problem", e))
    }

    /// Checks every documented constraint, naming the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let case = self.case()?;
        if let Some(c) = &self.problem.case {
            if !c.eq_ignore_ascii_case(case.name()) {
                return Err(config_error(
                    "problem.case",
                    format!(
                        "'{c}' does not match n={}, k={} (derived case: {})",
                        self.problem.n,
                        self.problem.k,
                        case.name()
                    ),
                ));
            }
        }
        let s = &self.schedule;
        if s.eps.is_empty() {
            return Err(config_error("schedule.eps", "must not be empty"));
        }
        if s.eps.iter().any(|e| !(*e >= 0.0)) {
            return Err(config_error("schedule.eps", "entries must be non-negative"));
        }
        if s.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(config_error("schedule.eps", "must be strictly decreasing"));
        }
        if s.radius.is_empty() {
            return Err(config_error("schedule.radius", "must not be empty"));
        }
        if s.radius.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config_error("schedule.radius", "must be strictly increasing"));
        }
        for (i, r) in s.radius.iter().enumerate() {
            ProblemParams::new(self.problem.n, self.problem.k, self.problem.r0, self.problem.enclosure, s.eps[0], *r)
                .map_err(|e| config_error(&format!("schedule.radius[{i}]"), e))?;
        }
        for (i, e) in s.eps.iter().enumerate() {
            ProblemParams::new(self.problem.n, self.problem.k, self.problem.r0, self.problem.enclosure, *e, s.radius[0])
                .map_err(|err| config_error(&format!("schedule.eps[{i}]"), err))?;
        }
        self.solve_config().validate().map_err(|e| config_error("solver", e))?;
        let dom = self.domain()?;
        if dom.n != self.problem.n {
            return Err(config_error("domain", format!("dimension {} differs from problem.n = {}", dom.n, self.problem.n)));
        }
        match self.solver.grid {
            GridKind::Radial => {
                if !matches!(self.domain, DomainBlock::Ball { .. }) || dom.r_out - dom.r_in > 1e-12 * dom.r_out {
                    return Err(config_error("solver.grid", "radial grids need a ball centered at the origin"));
                }
                if self.solver.nodes < 4 {
                    return Err(config_error("solver.nodes", "need at least 4 radial intervals"));
                }
            }
            GridKind::Cartesian => {
                if !(self.solver.h > 0.0) {
                    return Err(config_error("solver.h", "must be positive"));
                }
                if !(self.problem.n == 2 || self.problem.n == 3) {
                    return Err(config_error("solver.grid", "Cartesian grids support n = 2, 3"));
                }
            }
        }
        if self.analysis.probe_radii.iter().any(|r| !(*r > 0.0)) {
            return Err(config_error("analysis.probe_radii", "entries must be positive"));
        }
        if self.analysis.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config_error("analysis.t", "must be strictly increasing"));
        }
        if let Some(r) = &self.ring {
            if !(r.outer_radius > dom.r_out) {
                return Err(config_error("ring.outer_radius", "must exceed the domain's outer radius"));
            }
            if r.eps.is_empty() || r.eps.iter().any(|e| !(*e > 0.0)) {
                return Err(config_error("ring.eps", "needs positive entries"));
            }
            if r.eps.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(config_error("ring.eps", "must be strictly increasing"));
            }
        }
        Ok(())
    }

    /// Rejects inequality exponents below the admissibility threshold.
    pub fn check_exponents(&self) -> Result<(), CliError> {
        let p = self.params(self.schedule.eps[0], self.schedule.radius[0])?;
        let Some((th, strict)) = inequality_threshold(&p) else {
            return Ok(());
        };
        for (i, &b) in self.analysis.b.iter().enumerate() {
            if b < th || (strict && b <= th) {
                let hyp = if strict {
                    format!("b > n/2 - 1 = {th}")
                } else {
                    format!("b >= k(n-k-1)/(n-k) = {th}")
                };
                return Err(config_error(
                    &format!("analysis.b[{i}]"),
                    format!("b = {b} violates the hypothesis {hyp} of the boundary inequality"),
                ));
            }
        }
        Ok(())
    }

    pub fn params(&self, eps: f64, radius: f64) -> Result<ProblemParams, CliError> {
        ProblemParams::new(self.problem.n, self.problem.k, self.problem.r0, self.problem.enclosure, eps, radius)
            .map_err(|e| config_error("problem", e))
    }

    pub fn domain(&self) -> Result<ConvexDomain, CliError> {
        let n = self.problem.n;
        let d = match &self.domain {
            DomainBlock::Ball { center, radius } => {
                ConvexDomain::ball(center.clone().unwrap_or_else(|| vec![0.0; n]), *radius)
            }
            DomainBlock::Ellipsoid { center, semi_axes } => {
                ConvexDomain::ellipsoid(center.clone().unwrap_or_else(|| vec![0.0; n]), semi_axes.clone())
            }
            DomainBlock::SupportSampled { support } => ConvexDomain::support_sampled(support.clone()),
        };
        d.map_err(|e| config_error("domain", e))
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let p = self.params(self.schedule.eps[0], self.schedule.radius[0])?;
        Problem::exterior(p, self.domain()?, None).map_err(|e| config_error("problem", e))
    }

    pub fn solve_config(&self) -> SolveConfig {
        let s = &self.solver;
        SolveConfig {
            newton_tol: s.newton_tol,
            max_iter: s.max_iter,
            damping: s.damping,
            max_backtracks: s.max_backtracks,
            eps_schedule: self.schedule.eps.clone(),
            r_schedule: self.schedule.radius.clone(),
            gamma_margin: s.gamma_margin,
            krylov_tol: s.krylov_tol,
            krylov_max_iter: s.krylov_max_iter,
        }
    }

    /// Grid on the annulus between Ω and the sphere of radius `outer`.
    pub fn grid(&self, domain: &ConvexDomain, outer: f64) -> khessian::Result<AnnularGrid> {
        Ok(match self.solver.grid {
            GridKind::Radial => {
                AnnularGrid::Radial(RadialGrid::geometric(self.problem.n, domain.r_in, outer, self.solver.nodes)?)
            }
            GridKind::Cartesian => AnnularGrid::Cartesian(CartesianGrid::build(self.problem.n, self.solver.h, outer, domain)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BALL: &str = r#"
[problem]
n = 3
k = 1
case = "subcritical"
r0 = 1.0
enclosure = 2.5

[domain]
shape = "ball"
radius = 1.0

[schedule]
eps = [0.1, 0.0]
radius = [1000.0]

[analysis]
b = [0.5, 1.0]
"#;

    #[test]
    fn round_trip() {
        let a = RunConfig::parse(BALL).unwrap();
        let b = RunConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.to_toml(), a.to_toml());
    }

    #[test]
    fn case_mismatch_named() {
        let text = BALL.replace("subcritical", "critical");
        match RunConfig::parse(&text) {
            Err(CliError::Config(m)) => assert!(m.contains("problem.case"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn radius_schedule_must_increase() {
        let text = BALL.replace("radius = [1000.0]", "radius = [1000.0, 500.0]");
        match RunConfig::parse(&text) {
            Err(CliError::Config(m)) => assert!(m.contains("schedule.radius"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponent_threshold() {
        let text = BALL.replace("b = [0.5, 1.0]", "b = [0.25]");
        let cfg = RunConfig::parse(&text).unwrap();
        match cfg.check_exponents() {
            Err(CliError::Config(m)) => assert!(m.contains("k(n-k-1)/(n-k)"), "{m}"),
            other => panic!("{other:?}"),
        }
    }
}
