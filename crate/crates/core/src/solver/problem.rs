//! Problem data: operator order, inner domain, right-hand side and Dirichlet
//! data, plus the Newton/continuation settings.

use serde::{Deserialize, Serialize};

use crate::closedforms::{f_rhs, ProblemParams};
use crate::error::{Error, Result};
use crate::subsolution::{ConvexDomain, GlueParams, Subsolution};

/// Which boundary value problem is solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemKind {
    /// S_k(D²u) = f^ε in B_R \ Ω, u = c on ∂Ω, u = u̲ on ∂B_R.
    Exterior(ProblemParams),
    /// S_k(D²u) = ε in B_ρ₁ \ Ω, u = 0 on ∂Ω, u = 1 on ∂B_ρ₁.
    Ring { eps: f64 },
}

/// A fully specified Dirichlet problem on an annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub n: usize,
    pub k: usize,
    pub kind: ProblemKind,
    pub domain: ConvexDomain,
    pub subsolution: Subsolution,
    /// Radius of the outer sphere (R, or ρ₁ for rings).
    pub outer_radius: f64,
}

impl Problem {
    pub fn exterior(params: ProblemParams, domain: ConvexDomain, glue: Option<GlueParams>) -> Result<Self> {
        let glue = glue.unwrap_or_else(|| GlueParams::exterior_default(&params));
        let subsolution = Subsolution::exterior(params, domain.clone(), glue)?;
        Ok(Self {
            n: params.n,
            k: params.k,
            kind: ProblemKind::Exterior(params),
            domain,
            subsolution,
            outer_radius: params.truncation,
        })
    }

    pub fn ring(
        k: usize,
        domain: ConvexDomain,
        outer_radius: f64,
        eps: f64,
        glue: Option<GlueParams>,
        k1: Option<f64>,
    ) -> Result<Self> {
        let n = domain.n;
        if k == 0 || k > n {
            return Err(Error::Config(format!("order k={k} outside 1..={n}")));
        }
        if !(eps > 0.0) {
            return Err(Error::Config(format!("ring right-hand side must be positive, got {eps}")));
        }
        let glue = glue.unwrap_or_else(|| GlueParams::ring_default(outer_radius));
        let subsolution = Subsolution::ring(domain.clone(), outer_radius, glue, k1)?;
        Ok(Self {
            n,
            k,
            kind: ProblemKind::Ring { eps },
            domain,
            subsolution,
            outer_radius,
        })
    }

    pub fn params(&self) -> Option<&ProblemParams> {
        match &self.kind {
            ProblemKind::Exterior(p) => Some(p),
            ProblemKind::Ring { .. } => None,
        }
    }

    /// Parameters of an exterior problem, or a precondition error for rings.
    pub fn exterior_params(&self) -> Result<&ProblemParams> {
        self.params()
            .ok_or_else(|| Error::Precondition("operation needs an exterior problem".into()))
    }

    /// Regularization parameter (ε of f^ε, or the ring constant).
    pub fn eps(&self) -> f64 {
        match &self.kind {
            ProblemKind::Exterior(p) => p.eps,
            ProblemKind::Ring { eps } => *eps,
        }
    }

    /// Right-hand side at radius r.
    pub fn rhs(&self, r: f64) -> f64 {
        match &self.kind {
            ProblemKind::Exterior(p) => f_rhs(p, r),
            ProblemKind::Ring { eps } => *eps,
        }
    }

    /// Dirichlet value on ∂Ω.
    pub fn inner_value(&self) -> f64 {
        match &self.kind {
            ProblemKind::Exterior(p) => p.case.boundary_value(),
            ProblemKind::Ring { .. } => 0.0,
        }
    }

    /// Dirichlet value at a point of the outer sphere.
    pub fn outer_value(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            ProblemKind::Exterior(_) => self.subsolution.value(x),
            ProblemKind::Ring { .. } => Ok(1.0),
        }
    }

    /// Same problem with a different regularization parameter.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        match &self.kind {
            ProblemKind::Exterior(p) => {
                let q = p.with_eps(eps)?;
                Self::exterior(q, self.domain.clone(), self.keep_glue(p, &q))
            }
            ProblemKind::Ring { .. } => {
                let mut out = self.clone();
                if !(eps > 0.0) {
                    return Err(Error::Config(format!("ring right-hand side must be positive, got {eps}")));
                }
                out.kind = ProblemKind::Ring { eps };
                Ok(out)
            }
        }
    }

    /// Same problem with a different truncation radius.
    pub fn with_outer_radius(&self, radius: f64) -> Result<Self> {
        match &self.kind {
            ProblemKind::Exterior(p) => {
                let q = p.with_truncation(radius)?;
                Self::exterior(q, self.domain.clone(), self.keep_glue(p, &q))
            }
            ProblemKind::Ring { eps } => {
                Self::ring(self.k, self.domain.clone(), radius, *eps, None, None)
            }
        }
    }

    /// Re-derives cached data (domain interpolants, subsolution) after
    /// deserialization.
    pub fn rebuild(&self) -> Result<Self> {
        let domain = self.domain.rebuild()?;
        let glue = Some(*self.subsolution.glue());
        match &self.kind {
            ProblemKind::Exterior(p) => Self::exterior(*p, domain, glue),
            ProblemKind::Ring { eps } => {
                let k1 = self.subsolution.ring_constants().map(|c| c.0);
                Self::ring(self.k, domain, self.outer_radius, *eps, glue, k1)
            }
        }
    }

    /// Keeps user-overridden glue parameters; defaults are recomputed.
    fn keep_glue(&self, old: &ProblemParams, new: &ProblemParams) -> Option<GlueParams> {
        let current = *self.subsolution.glue();
        if current == GlueParams::exterior_default(old) {
            Some(GlueParams::exterior_default(new))
        } else {
            Some(current)
        }
    }
}

/// Newton and continuation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Target for the sup-norm of the scaled residual |x|ⁿ(S_k(D²u) − f).
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Backtracking factor in (0, 1).
    pub damping: f64,
    pub max_backtracks: usize,
    /// Strictly decreasing regularization schedule.
    pub eps_schedule: Vec<f64>,
    /// Strictly increasing truncation schedule.
    pub r_schedule: Vec<f64>,
    /// Lower bound enforced on S_1, …, S_k during the line search.
    pub gamma_margin: f64,
    /// Relative tolerance of the Krylov solver.
    pub krylov_tol: f64,
    pub krylov_max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iter: 60,
            damping: 0.5,
            max_backtracks: 40,
            eps_schedule: Vec::new(),
            r_schedule: Vec::new(),
            gamma_margin: 0.0,
            krylov_tol: 1e-10,
            krylov_max_iter: 20_000,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::Config("newton_tol must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config(format!("damping must lie in (0,1), got {}", self.damping)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if self.eps_schedule.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::Config("eps_schedule entries must be non-negative".into()));
        }
        if self.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("eps_schedule must be strictly decreasing".into()));
        }
        if self.r_schedule.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("r_schedule entries must be positive".into()));
        }
        if self.r_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("r_schedule must be strictly increasing".into()));
        }
        if !(self.krylov_tol > 0.0 && self.krylov_tol < 1.0) {
            return Err(Error::Config("krylov_tol must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_validated() {
        let mut c = SolveConfig {
            eps_schedule: vec![0.1, 0.05],
            r_schedule: vec![100.0, 1000.0],
            ..SolveConfig::default()
        };
        assert!(c.validate().is_ok());
        c.r_schedule = vec![100.0, 100.0];
        assert!(c.validate().is_err());
        c.r_schedule = vec![100.0];
        c.eps_schedule = vec![0.1, 0.2];
        assert!(c.validate().is_err());
    }

    #[test]
    fn exterior_problem_data() {
        let p = ProblemParams::new(3, 1, 0.4, 1.0, 0.01, 500.0).unwrap();
        let dom = ConvexDomain::ball(vec![0.0; 3], 0.4).unwrap();
        let prob = Problem::exterior(p, dom, None).unwrap();
        assert_eq!(prob.inner_value(), -1.0);
        let v = prob.outer_value(&[500.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, crate::closedforms::w_profile(&p, 500.0));
        let q = prob.with_eps(0.005).unwrap();
        assert_eq!(q.eps(), 0.005);
        assert!(prob.with_outer_radius(800.0).is_ok());
    }
}
