//! Level sets of converged fields and their curvature integrals.
//!
//! Level sets {u = t} are sampled either as exact spheres (radial fields),
//! by rays from the origin (Cartesian fields; each ray meets a level once
//! because x·Du > 0), or by marching simplices with a centroid rule. At
//! every sample the curvature functions of the level surface are computed
//! from D²u through H_{m−1} = S_m^{ij}u_iu_j / |Du|^{m+1}.

mod extract;
mod integrals;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{Field, Jet};
use crate::symfun::{matrix_elem_sym_all, sk_gradient, sk_gradient_poly};

pub use extract::{extract, extract_with, marching_facets, Extraction, Facet};
pub use integrals::{
    a0_exponent, area_bound_check, area_bound_series, capacity_pair, coarea_check, i_abk, i_abk_routes,
    inequality_report, inequality_threshold, level_range, monotone_series, AreaBound, CapacityPair, CoareaCheck,
    InequalityReport, MonotoneSeries, AREA_RATIO_LIMIT, INEQUALITY_TOL,
};

/// One quadrature point of a level surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    /// Surface measure carried by the point.
    pub weight: f64,
    pub grad_norm: f64,
    /// Du/|Du|.
    pub normal: Vec<f64>,
    /// H_0, …, H_k of the level surface (eigenbasis route).
    pub curvatures: Vec<f64>,
    /// S_k^{ij}u_iu_j (matrix polynomial route).
    pub flux: f64,
    /// S_k(D²u).
    pub sk: f64,
}

/// How a level set was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Radial field: one point standing for the whole sphere.
    Sphere,
    Rays,
    Marching,
}

/// Quadrature of a level set {u = t}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetSample {
    pub t: f64,
    pub kind: SampleKind,
    pub points: Vec<SamplePoint>,
}

impl LevelSetSample {
    pub fn area(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// Σ weight·f(point).
    pub fn integrate<F: Fn(&SamplePoint) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|p| p.weight * f(p)).sum()
    }
}

/// H_{m−1} of the level surface of a jet: S_m^{ij}(D²u)u_iu_j / |Du|^{m+1}.
/// Zero for m > n.
pub fn curvature_from_jet(jet: &Jet, m: usize) -> Result<f64> {
    let n = jet.grad.len();
    if m == 0 {
        return Err(Error::Domain("curvature index m must be at least 1".into()));
    }
    let g = jet.grad_norm();
    if !(g > 0.0) {
        return Err(Error::Precondition("vanishing gradient: the level surface is singular".into()));
    }
    if m > n {
        return Ok(0.0);
    }
    let t = sk_gradient(&jet.hess, m)?;
    Ok(t.quadratic_form(&jet.grad) / g.powi(m as i32 + 1))
}

/// H_{m−1} of the level surface of `field` through `x`.
pub fn curvature_from_hessian(field: &Field, x: &[f64], m: usize) -> Result<f64> {
    curvature_from_jet(&field.jet_at(x)?, m)
}

/// S_k^{ij}u_iu_j and S_k(D²u) from the characteristic polynomial route.
pub(crate) fn flux_and_sk(jet: &Jet, k: usize) -> (f64, f64) {
    let e = matrix_elem_sym_all(&jet.hess, k);
    let t = sk_gradient_poly(&jet.hess, k, &e);
    (t.quadratic_form(&jet.grad), e[k])
}

/// Builds a sample point carrying `weight` from the jet at `x`.
pub(crate) fn sample_point(x: Vec<f64>, jet: &Jet, k: usize, weight: f64) -> Result<SamplePoint> {
    let g = jet.grad_norm();
    if !(g > 0.0) {
        return Err(Error::Extraction(format!("vanishing gradient at {x:?}")));
    }
    let curvatures = (1..=k + 1).map(|m| curvature_from_jet(jet, m)).collect::<Result<Vec<_>>>()?;
    let (flux, sk) = flux_and_sk(jet, k);
    Ok(SamplePoint {
        normal: jet.grad.iter().map(|v| v / g).collect(),
        x,
        weight,
        grad_norm: g,
        curvatures,
        flux,
        sk,
    })
}
