//! Discrete operator: residuals, Γ_k tests and Jacobians.
//!
//! Nodal Γ_k tests subtract a floating-point error bound of the stencil from
//! the computed S_i, so that far-field nodes where S_k is below the rounding
//! level of the difference quotients are not reported as violations.

use rayon::prelude::*;

use crate::error::Result;
use crate::symfun::{binomial, matrix_elem_sym_all, sk_gradient_poly, SymMatrix};

use super::field::{cartesian_hessian, radial_elem_sym, Field};
use super::grid::{AnnularGrid, CartesianGrid, NodeKind};
use super::linalg::{BandMatrix, Csr};

const CHUNK: usize = 4096;
const NOISE_FACTOR: f64 = 16.0 * f64::EPSILON;

/// S_0, …, S_k at a node together with rounding bounds for each.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSym {
    pub e: Vec<f64>,
    pub noise: Vec<f64>,
}

impl NodeSym {
    /// Index of the first S_i (i ≥ 1) that is not above `margin` up to noise.
    pub fn violation(&self, margin: f64) -> Option<usize> {
        (1..self.e.len()).find(|&i| !(self.e[i] > margin - self.noise[i]))
    }

    /// min_i (S_i + noise_i), i = 1..=k.
    pub fn margin(&self) -> f64 {
        (1..self.e.len()).map(|i| self.e[i] + self.noise[i]).fold(f64::INFINITY, f64::min)
    }
}

fn noise_bound(n: usize, k: usize, scale: f64, err: f64) -> Vec<f64> {
    (0..=k)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                let c = binomial(n, i);
                let p = i as i32;
                c * ((scale + err).powi(p) - scale.powi(p)) + NOISE_FACTOR * c * scale.powi(p)
            }
        })
        .collect()
}

/// Radial node j (1 ≤ j < m): (u′, u″, S_i, noise).
fn radial_node(field: &Field, j: usize) -> (f64, f64, NodeSym) {
    let g = field.radial_grid().unwrap();
    let st = field.radial_stencils().unwrap();
    let (n, k) = (field.problem.n, field.problem.k);
    let s = st.start[j];
    let (mut du, mut d2u, mut a1, mut a2) = (0.0, 0.0, 0.0, 0.0);
    for l in 0..st.d1[j].len() {
        let v = field.values[s + l];
        du += st.d1[j][l] * v;
        d2u += st.d2[j][l] * v;
        a1 += (st.d1[j][l] * v).abs();
        a2 += (st.d2[j][l] * v).abs();
    }
    let r = g.radii[j];
    let a = du / r;
    let e = radial_elem_sym(n, k, d2u, a);
    let scale = d2u.abs().max(a.abs());
    let err = NOISE_FACTOR * a2.max(a1 / r);
    let noise = noise_bound(n, k, scale, err);
    (du, d2u, NodeSym { e, noise })
}

fn cartesian_node(g: &CartesianGrid, field: &Field, node: usize) -> Result<(SymMatrix, NodeSym)> {
    let m = cartesian_hessian(g, &field.values, node)?;
    let k = field.problem.k;
    let e = matrix_elem_sym_all(&m, k);
    let h2 = g.h * g.h;
    let u0 = field.values[node].abs();
    let mut err2 = 0.0;
    for a in 0..g.n {
        let s = g.stride(a);
        let d = (field.values[node + s].abs() + 2.0 * u0 + field.values[node - s].abs()) / h2;
        err2 += d * d;
        for b in a + 1..g.n {
            let t = g.stride(b);
            let o = (field.values[node + s + t].abs()
                + field.values[node + s - t].abs()
                + field.values[node - s + t].abs()
                + field.values[node - s - t].abs())
                / (4.0 * h2);
            err2 += 2.0 * o * o;
        }
    }
    let noise = noise_bound(g.n, k, m.norm(), NOISE_FACTOR * err2.sqrt());
    Ok((m, NodeSym { e, noise }))
}

/// S_i values and rounding bounds at every unknown.
pub fn node_symmetric_functions(field: &Field) -> Result<Vec<NodeSym>> {
    match field.grid.as_ref() {
        AnnularGrid::Radial(g) => Ok((1..g.len() - 1).map(|j| radial_node(field, j).2).collect()),
        AnnularGrid::Cartesian(g) => g
            .active
            .par_iter()
            .map(|&node| cartesian_node(g, field, node).map(|x| x.1))
            .collect(),
    }
}

/// r_p = S_k(D²u(p)) − f(|p|) at every unknown.
pub fn residual(field: &Field) -> Result<Vec<f64>> {
    residual_with_rhs(field, &rhs_vector(field))
}

/// f(|p|) at every unknown.
pub fn rhs_vector(field: &Field) -> Vec<f64> {
    (0..field.len())
        .map(|i| field.problem.rhs(super::field::norm(&field.unknown_point(i))))
        .collect()
}

/// S_k(D²u(p)) − rhs_p at every unknown.
pub fn residual_with_rhs(field: &Field, rhs: &[f64]) -> Result<Vec<f64>> {
    let k = field.problem.k;
    let syms = node_symmetric_functions(field)?;
    Ok(syms.iter().zip(rhs).map(|(s, f)| s.e[k] - f).collect())
}

/// S_k(D²u(p)) at every unknown.
pub fn sk_values(field: &Field) -> Result<Vec<f64>> {
    let k = field.problem.k;
    Ok(node_symmetric_functions(field)?.iter().map(|s| s.e[k]).collect())
}

/// Weights |x|ⁿ that put S_k residuals on the scale of their terms.
pub fn residual_weights(field: &Field) -> Vec<f64> {
    let n = field.problem.n as i32;
    (0..field.len())
        .map(|i| super::field::norm(&field.unknown_point(i)).powi(n))
        .collect()
}

/// Sup-norm of |x|ⁿ·r_p with a fixed reduction order.
pub fn scaled_residual_norm(field: &Field) -> Result<f64> {
    let r = residual(field)?;
    let w = residual_weights(field);
    Ok(r.iter().zip(&w).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max))
}

/// Unknowns where S_1..S_k are not above `margin` (up to rounding bounds).
pub fn gamma_violations(field: &Field, margin: f64) -> Result<Vec<usize>> {
    let syms = node_symmetric_functions(field)?;
    Ok(syms
        .iter()
        .enumerate()
        .filter(|(_, s)| s.violation(margin).is_some())
        .map(|(i, _)| i)
        .collect())
}

/// Jacobian of the residual with respect to the unknowns.
#[derive(Debug, Clone)]
pub enum Jacobian {
    Banded(BandMatrix),
    Sparse(Csr),
}

impl Jacobian {
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Jacobian::Banded(b) => b.mul(x),
            Jacobian::Sparse(c) => c.mul(x),
        }
    }
}

/// Assembles the linearization Σ S_k^{ij}(D²u)(D²δu)_{ij} with zero boundary increment.
pub fn jacobian(field: &Field) -> Result<Jacobian> {
    match field.grid.as_ref() {
        AnnularGrid::Radial(g) => Ok(Jacobian::Banded(radial_jacobian(field, g.len()))),
        AnnularGrid::Cartesian(g) => Ok(Jacobian::Sparse(cartesian_jacobian(field, g)?)),
    }
}

fn radial_jacobian(field: &Field, len: usize) -> BandMatrix {
    let g = field.radial_grid().unwrap();
    let st = field.radial_stencils().unwrap();
    let (n, k) = (field.problem.n, field.problem.k);
    let unknowns = len - 2;
    let mut jac = BandMatrix::new(unknowns, 1, 1);
    for j in 1..len - 1 {
        let (du, d2u, _) = radial_node(field, j);
        let r = g.radii[j];
        let a = du / r;
        let da2 = binomial(n - 1, k - 1) * a.powi(k as i32 - 1);
        let mut da = binomial(n - 1, k) * k as f64 * a.powi(k as i32 - 1);
        if k >= 2 {
            da += (k - 1) as f64 * binomial(n - 1, k - 1) * d2u * a.powi(k as i32 - 2);
        }
        let s = st.start[j];
        for l in 0..st.d1[j].len() {
            let col = s + l;
            if col == 0 || col == len - 1 {
                continue;
            }
            let v = da2 * st.d2[j][l] + da * st.d1[j][l] / r;
            jac.set(j - 1, col - 1, v);
        }
    }
    jac
}

fn cartesian_jacobian(field: &Field, g: &CartesianGrid) -> Result<Csr> {
    let n = g.n;
    let k = field.problem.k;
    let h2 = g.h * g.h;
    let chunks: Vec<Result<(Vec<usize>, Vec<u32>, Vec<f64>)>> = g
        .active
        .par_chunks(CHUNK)
        .map(|rows| {
            let mut lens = Vec::with_capacity(rows.len());
            let mut cols = Vec::with_capacity(rows.len() * 20);
            let mut vals = Vec::with_capacity(rows.len() * 20);
            let mut entries: Vec<(u32, f64)> = Vec::with_capacity(48);
            for &node in rows {
                let (m, sym) = cartesian_node(g, field, node)?;
                let gm = sk_gradient_poly(&m, k, &sym.e);
                entries.clear();
                let push = |q: usize, coef: f64, entries: &mut Vec<(u32, f64)>| match g.kinds[q] {
                    NodeKind::Active => entries.push((g.slot[q], coef)),
                    NodeKind::InnerGhost | NodeKind::OuterGhost => {
                        let rule = &g.ghosts[g.slot[q] as usize];
                        for (&a, w) in rule.nodes.iter().zip(&rule.weights[1..]) {
                            entries.push((g.slot[a], coef * w));
                        }
                    }
                    NodeKind::Unused => {}
                };
                let mut centre = 0.0;
                for a in 0..n {
                    let s = g.stride(a);
                    let gaa = gm.get(a, a);
                    centre -= 2.0 * gaa / h2;
                    push(node + s, gaa / h2, &mut entries);
                    push(node - s, gaa / h2, &mut entries);
                    for b in a + 1..n {
                        let t = g.stride(b);
                        let c = gm.get(a, b) / (2.0 * h2);
                        push(node + s + t, c, &mut entries);
                        push(node - s - t, c, &mut entries);
                        push(node + s - t, -c, &mut entries);
                        push(node - s + t, -c, &mut entries);
                    }
                }
                push(node, centre, &mut entries);
                entries.sort_unstable_by_key(|e| e.0);
                let start = cols.len();
                for &(c, v) in entries.iter() {
                    if cols.len() > start && *cols.last().unwrap() == c {
                        *vals.last_mut().unwrap() += v;
                    } else {
                        cols.push(c);
                        vals.push(v);
                    }
                }
                lens.push(cols.len() - start);
            }
            Ok((lens, cols, vals))
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(g.active.len() + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for c in chunks {
        let (lens, cc, vv) = c?;
        for l in lens {
            let last = *row_ptr.last().unwrap();
            row_ptr.push(last + l);
        }
        cols.extend_from_slice(&cc);
        vals.extend_from_slice(&vv);
    }
    Ok(Csr {
        n: g.active.len(),
        row_ptr,
        cols,
        vals,
    })
}
