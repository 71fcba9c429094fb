//! Discrete fields on annular grids: Dirichlet data, ghost values, nodal
//! derivatives and point evaluation.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::symfun::{binomial, Spectrum, SymMatrix};

use super::fd::fornberg;
use super::grid::{AnnularGrid, CartesianGrid, NodeKind, RadialGrid};
use super::jets::mls_jet;
use super::problem::Problem;

/// Value, gradient and Hessian of a field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: SymMatrix,
}

impl Jet {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Jet of a radial function with u(r), u′(r), u″(r) at the point x.
    pub fn radial(x: &[f64], u: f64, du: f64, d2u: f64) -> Self {
        let n = x.len();
        let r = norm(x);
        let e: Vec<f64> = x.iter().map(|v| v / r).collect();
        let a = du / r;
        let mut hess = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let id = if i == j { 1.0 } else { 0.0 };
                hess.set(i, j, (d2u - a) * e[i] * e[j] + a * id);
            }
        }
        Self {
            value: u,
            grad: e.iter().map(|v| du * v).collect(),
            hess,
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Finite-difference weights of a radial grid: for each node, the stencil
/// start index and weights of the first and second derivative.
#[derive(Debug, Clone)]
pub struct RadialStencils {
    pub start: Vec<usize>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
}

impl RadialStencils {
    /// Three-point central weights inside, four-point one-sided at both ends.
    pub fn new(grid: &RadialGrid) -> Self {
        Self::with_width(grid, 3)
    }

    /// Fourth-order weights (five-point central, six-point at the ends),
    /// used to recover derivatives of a converged field.
    pub fn recovery(grid: &RadialGrid) -> Self {
        Self::with_width(grid, 5)
    }

    /// Centered stencils of `width` nodes, shifted inward near the ends and
    /// widened by one where they become one-sided.
    fn with_width(grid: &RadialGrid, width: usize) -> Self {
        let m = grid.len() - 1;
        let half = width / 2;
        let mut start = Vec::with_capacity(m + 1);
        let mut d1 = Vec::with_capacity(m + 1);
        let mut d2 = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let one_sided = j < half || j + half > m;
            let len = (if one_sided { width + 1 } else { width }).min(m + 1);
            let s = j.saturating_sub(half).min(m + 1 - len);
            let w = fornberg(grid.radii[j], &grid.radii[s..s + len], 2);
            start.push(s);
            d1.push(w[1].clone());
            d2.push(w[2].clone());
        }
        Self { start, d1, d2 }
    }

    /// (u′, u″) at node j.
    pub fn apply(&self, values: &[f64], j: usize) -> (f64, f64) {
        let s = self.start[j];
        let mut a = 0.0;
        let mut b = 0.0;
        for (l, (w1, w2)) in self.d1[j].iter().zip(&self.d2[j]).enumerate() {
            a += w1 * values[s + l];
            b += w2 * values[s + l];
        }
        (a, b)
    }
}

/// Radial spectrum (u″, u′/r, …, u′/r) and its elementary symmetric functions.
pub fn radial_elem_sym(n: usize, k: usize, d2u: f64, a: f64) -> Vec<f64> {
    let mut e = vec![1.0; k + 1];
    for (i, ei) in e.iter_mut().enumerate().skip(1) {
        *ei = binomial(n - 1, i) * a.powi(i as i32) + binomial(n - 1, i - 1) * d2u * a.powi(i as i32 - 1);
    }
    e
}

/// Discrete solution (or iterate) on an annular grid.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<AnnularGrid>,
    pub problem: Problem,
    /// Radial: one value per node radius. Cartesian: one value per lattice
    /// node, NaN on unused nodes.
    pub values: Vec<f64>,
    /// Cartesian: Dirichlet value at each ghost rule's boundary point.
    pub ghost_data: Vec<f64>,
    stencils: OnceLock<Arc<RadialStencils>>,
    derivs: OnceLock<Arc<(Vec<f64>, Vec<f64>)>>,
}

impl Field {
    /// Field with interior values from `f` and exact Dirichlet data.
    pub fn from_fn<F>(grid: Arc<AnnularGrid>, problem: Problem, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64>,
    {
        check_compatible(&grid, &problem)?;
        let c = problem.inner_value();
        let mut field = match grid.as_ref() {
            AnnularGrid::Radial(g) => {
                let n = g.n;
                let m = g.len() - 1;
                let mut values = vec![0.0; m + 1];
                let mut x = vec![0.0; n];
                for j in 1..m {
                    x[0] = g.radii[j];
                    values[j] = f(&x)?;
                }
                values[0] = c;
                x[0] = g.outer();
                values[m] = problem.outer_value(&x)?;
                Self::raw(grid.clone(), problem, values, Vec::new())
            }
            AnnularGrid::Cartesian(g) => {
                let mut values = vec![f64::NAN; g.total_nodes()];
                let mut x = [0.0; 3];
                for &node in &g.active {
                    g.coords_into(node, &mut x);
                    values[node] = f(&x[..g.n])?;
                }
                let mut data = Vec::with_capacity(g.ghosts.len());
                for rule in &g.ghosts {
                    data.push(if rule.inner {
                        c
                    } else {
                        problem.outer_value(&rule.point[..g.n])?
                    });
                }
                Self::raw(grid.clone(), problem, values, data)
            }
        };
        field.refresh_ghosts();
        Ok(field)
    }

    fn raw(grid: Arc<AnnularGrid>, problem: Problem, values: Vec<f64>, ghost_data: Vec<f64>) -> Self {
        Self {
            grid,
            problem,
            values,
            ghost_data,
            stencils: OnceLock::new(),
            derivs: OnceLock::new(),
        }
    }

    /// The subsolution sampled on the grid.
    pub fn initial(grid: Arc<AnnularGrid>, problem: Problem) -> Result<Self> {
        let sub = problem.subsolution.clone();
        Self::from_fn(grid, problem, |x| sub.value(x))
    }

    /// Rebuilds a field from stored values (used by checkpoints).
    pub fn from_values(grid: Arc<AnnularGrid>, problem: Problem, values: Vec<f64>) -> Result<Self> {
        let expected = match grid.as_ref() {
            AnnularGrid::Radial(g) => g.len(),
            AnnularGrid::Cartesian(g) => g.total_nodes(),
        };
        if values.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} values, found {}",
                values.len()
            )));
        }
        let unknowns: Vec<f64> = match grid.as_ref() {
            AnnularGrid::Radial(_) => values[1..values.len() - 1].to_vec(),
            AnnularGrid::Cartesian(g) => g.active.iter().map(|&a| values[a]).collect(),
        };
        if unknowns.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite value at an active node".into()));
        }
        let mut field = Self::initial_data_only(grid, problem)?;
        field.set_unknowns(&unknowns);
        Ok(field)
    }

    fn initial_data_only(grid: Arc<AnnularGrid>, problem: Problem) -> Result<Self> {
        Self::from_fn(grid, problem, |_| Ok(0.0))
    }

    /// Warm start from another field: values of `from` inside its annulus,
    /// the subsolution (w outside 2R₀) elsewhere.
    pub fn interpolated(grid: Arc<AnnularGrid>, problem: Problem, from: &Field) -> Result<Self> {
        let sub = problem.subsolution.clone();
        let limit = from.grid.outer_radius();
        Self::from_fn(grid, problem, |x| {
            if norm(x) <= limit {
                match from.value_at(x) {
                    Ok(v) => Ok(v),
                    Err(_) => sub.value(x),
                }
            } else {
                sub.value(x)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.problem.n
    }

    pub fn radial_grid(&self) -> Option<&RadialGrid> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(g) => Some(g),
            AnnularGrid::Cartesian(_) => None,
        }
    }

    pub fn cartesian_grid(&self) -> Option<&CartesianGrid> {
        match self.grid.as_ref() {
            AnnularGrid::Cartesian(g) => Some(g),
            AnnularGrid::Radial(_) => None,
        }
    }

    /// Number of unknowns (interior radial nodes or active lattice nodes).
    pub fn len(&self) -> usize {
        self.grid.unknowns()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values at the unknowns, in solver order.
    pub fn unknowns(&self) -> Vec<f64> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(g) => self.values[1..g.len() - 1].to_vec(),
            AnnularGrid::Cartesian(g) => g.active.iter().map(|&a| self.values[a]).collect(),
        }
    }

    pub fn set_unknowns(&mut self, x: &[f64]) {
        match self.grid.clone().as_ref() {
            AnnularGrid::Radial(g) => {
                self.values[1..g.len() - 1].copy_from_slice(x);
            }
            AnnularGrid::Cartesian(g) => {
                for (&a, v) in g.active.iter().zip(x) {
                    self.values[a] = *v;
                }
            }
        }
        self.refresh_ghosts();
    }

    /// Recomputes ghost values from the extrapolation rules.
    pub fn refresh_ghosts(&mut self) {
        self.derivs = OnceLock::new();
        if let AnnularGrid::Cartesian(g) = self.grid.clone().as_ref() {
            for (rule, d) in g.ghosts.iter().zip(&self.ghost_data) {
                let mut v = rule.weights[0] * d;
                for (&a, w) in rule.nodes.iter().zip(&rule.weights[1..]) {
                    v += w * self.values[a];
                }
                self.values[rule.node] = v;
            }
        }
    }

    pub fn radial_stencils(&self) -> Option<Arc<RadialStencils>> {
        let g = self.radial_grid()?;
        Some(self.stencils.get_or_init(|| Arc::new(RadialStencils::new(g))).clone())
    }

    /// Radial nodal derivatives (u′, u″) at every node, from the
    /// fourth-order recovery stencils.
    pub fn radial_derivatives(&self) -> Option<Arc<(Vec<f64>, Vec<f64>)>> {
        let g = self.radial_grid()?;
        Some(
            self.derivs
                .get_or_init(|| {
                    let st = RadialStencils::recovery(g);
                    let (mut d1, mut d2) = (Vec::with_capacity(g.len()), Vec::with_capacity(g.len()));
                    for j in 0..g.len() {
                        let (a, b) = st.apply(&self.values, j);
                        d1.push(a);
                        d2.push(b);
                    }
                    Arc::new((d1, d2))
                })
                .clone(),
        )
    }

    /// Position of an unknown (radial nodes on the positive x₁ axis).
    pub fn unknown_point(&self, i: usize) -> Vec<f64> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(g) => {
                let mut x = vec![0.0; g.n];
                x[0] = g.radii[i + 1];
                x
            }
            AnnularGrid::Cartesian(g) => g.coords(g.active[i]),
        }
    }

    /// Finite-difference Hessian at unknown i. Radial fields return the
    /// diagonal surrogate diag(u″, u′/ρ, …, u′/ρ).
    pub fn hessian_at(&self, i: usize) -> Result<SymMatrix> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(g) => {
                if i + 2 >= g.len() {
                    return Err(stencil_error(i, "not an interior radial node"));
                }
                let d = self.radial_derivatives().unwrap();
                let j = i + 1;
                let mut diag = vec![d.0[j] / g.radii[j]; g.n];
                diag[0] = d.1[j];
                Ok(SymMatrix::from_diagonal(&diag))
            }
            AnnularGrid::Cartesian(g) => {
                let node = *g.active.get(i).ok_or_else(|| stencil_error(i, "no such active node"))?;
                cartesian_hessian(g, &self.values, node)
            }
        }
    }

    /// Spectrum of the discrete Hessian at unknown i.
    pub fn spectrum_at(&self, i: usize) -> Result<Spectrum> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(_) => {
                let h = self.hessian_at(i)?;
                Spectrum::new((0..h.dim()).map(|a| h.get(a, a)).collect())
            }
            AnnularGrid::Cartesian(_) => Ok(self.hessian_at(i)?.eigen()?.0),
        }
    }

    /// Central-difference gradient at unknown i.
    pub fn gradient_at(&self, i: usize) -> Result<Vec<f64>> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(g) => {
                if i + 2 >= g.len() {
                    return Err(stencil_error(i, "not an interior radial node"));
                }
                let d = self.radial_derivatives().unwrap();
                let mut v = vec![0.0; g.n];
                v[0] = d.0[i + 1];
                Ok(v)
            }
            AnnularGrid::Cartesian(g) => {
                let node = *g.active.get(i).ok_or_else(|| stencil_error(i, "no such active node"))?;
                let mut out = vec![0.0; g.n];
                for (a, o) in out.iter_mut().enumerate() {
                    let s = g.stride(a);
                    *o = (self.values[node + s] - self.values[node - s]) / (2.0 * g.h);
                }
                Ok(out)
            }
        }
    }

    /// Value at an arbitrary point of the annulus.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(_) => Ok(self.radial_eval(norm(x))?.0),
            AnnularGrid::Cartesian(g) => match multilinear(g, &self.values, x) {
                Some(v) => Ok(v),
                None => Ok(mls_jet(self, x)?.value),
            },
        }
    }

    /// Cheap value estimate (multilinear on Cartesian lattices), `None` where
    /// a cell corner is unused.
    pub fn value_fast(&self, x: &[f64]) -> Option<f64> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(_) => self.radial_eval(norm(x)).ok().map(|v| v.0),
            AnnularGrid::Cartesian(g) => multilinear(g, &self.values, x),
        }
    }

    /// Value, gradient and Hessian at an arbitrary point of the annulus.
    pub fn jet_at(&self, x: &[f64]) -> Result<Jet> {
        match self.grid.as_ref() {
            AnnularGrid::Radial(_) => {
                let (u, du, d2u) = self.radial_eval(norm(x))?;
                Ok(Jet::radial(x, u, du, d2u))
            }
            AnnularGrid::Cartesian(_) => mls_jet(self, x),
        }
    }

    /// (u, u′, u″) at radius r: cubic Hermite for u and u′, linear for u″.
    pub fn radial_eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        let g = self
            .radial_grid()
            .ok_or_else(|| Error::Precondition("radial evaluation on a Cartesian field".into()))?;
        let tol = 1e-12 * g.outer();
        if !(r >= g.inner() - tol && r <= g.outer() + tol) {
            return Err(Error::Domain(format!(
                "radius {r} outside [{}, {}]",
                g.inner(),
                g.outer()
            )));
        }
        let d = self.radial_derivatives().unwrap();
        let m = g.len() - 1;
        let j = match g.radii.partition_point(|&q| q <= r) {
            0 => 0,
            p => (p - 1).min(m - 1),
        };
        let (r0, r1) = (g.radii[j], g.radii[j + 1]);
        let h = r1 - r0;
        let s = ((r - r0) / h).clamp(0.0, 1.0);
        let (u0, u1) = (self.values[j], self.values[j + 1]);
        let (p0, p1) = (d.0[j], d.0[j + 1]);
        let (q0, q1) = (d.1[j], d.1[j + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let u = h00 * u0 + h10 * h * p0 + h01 * u1 + h11 * h * p1;
        let du = h00 * p0 + h10 * h * q0 + h01 * p1 + h11 * h * q1;
        let d2u = (1.0 - s) * q0 + s * q1;
        Ok((u, du, d2u))
    }

    /// Largest nodewise |u − v| over common unknowns of two fields on the same grid.
    pub fn max_difference(&self, other: &Field) -> Result<f64> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.len() != other.len() {
            return Err(Error::Precondition("fields live on different grids".into()));
        }
        let a = self.unknowns();
        let b = other.unknowns();
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    /// Rescales u ↦ c + (u − c)/s.
    pub fn rescaled(&self, s: f64) -> Field {
        let c = self.problem.inner_value();
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            if v.is_finite() {
                *v = c + (*v - c) / s;
            }
        }
        for d in out.ghost_data.iter_mut() {
            *d = c + (*d - c) / s;
        }
        out.refresh_ghosts();
        out
    }
}

fn stencil_error(i: usize, detail: &str) -> Error {
    Error::Stencil {
        node: i,
        detail: detail.into(),
    }
}

fn check_compatible(grid: &AnnularGrid, problem: &Problem) -> Result<()> {
    if grid.dim() != problem.n {
        return Err(Error::Config(format!(
            "grid dimension {} does not match n={}",
            grid.dim(),
            problem.n
        )));
    }
    let r = grid.outer_radius();
    if (r - problem.outer_radius).abs() > 1e-12 * r {
        return Err(Error::Config(format!(
            "grid outer radius {r} differs from the problem's {}",
            problem.outer_radius
        )));
    }
    if let AnnularGrid::Radial(g) = grid {
        let d = &problem.domain;
        let centered = match &d.shape {
            crate::subsolution::Shape::Ball { center, .. } => center.iter().all(|c| *c == 0.0),
            _ => false,
        };
        if !centered || (g.inner() - d.r_in).abs() > 1e-12 * d.r_in {
            return Err(Error::Config(
                "radial grids need a centered ball domain whose radius is the first node".into(),
            ));
        }
    }
    Ok(())
}

/// Central-difference Hessian at lattice node `node`.
pub(crate) fn cartesian_hessian(g: &CartesianGrid, values: &[f64], node: usize) -> Result<SymMatrix> {
    let n = g.n;
    let h2 = g.h * g.h;
    let u0 = values[node];
    let mut m = SymMatrix::zeros(n);
    for a in 0..n {
        let s = g.stride(a);
        let v = (values[node + s] - 2.0 * u0 + values[node - s]) / h2;
        m.set(a, a, v);
        for b in a + 1..n {
            let t = g.stride(b);
            let v = (values[node + s + t] - values[node + s - t] - values[node - s + t] + values[node - s - t])
                / (4.0 * h2);
            m.set(a, b, v);
        }
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(stencil_error(node, "stencil touches an unused node"));
    }
    Ok(m)
}

/// Multilinear interpolation of lattice values; `None` if a corner is unused.
pub(crate) fn multilinear(g: &CartesianGrid, values: &[f64], x: &[f64]) -> Option<f64> {
    let n = g.n;
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..n {
        let s = x[a] / g.h + g.half as f64;
        let i = s.floor();
        if i < 0.0 || i as usize + 1 >= g.dims {
            return None;
        }
        base[a] = i as usize;
        frac[a] = s - i;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << n) {
        let mut idx = base;
        let mut w = 1.0;
        for a in 0..n {
            if corner >> a & 1 == 1 {
                idx[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w == 0.0 {
            continue;
        }
        let node = g.index_of(&idx);
        if g.kinds[node] == NodeKind::Unused {
            return None;
        }
        acc += w * values[node];
    }
    Some(acc)
}
