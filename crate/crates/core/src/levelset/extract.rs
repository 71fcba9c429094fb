//! Sampling of level sets {u = t}.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedforms::unit_sphere_area;
use crate::error::{Error, Result};
use crate::solver::{AnnularGrid, Field, Jet};

use super::integrals::level_range;
use super::quadrature::sphere_rule;
use super::{sample_point, LevelSetSample, SampleKind, SamplePoint};

/// Sampling method for Cartesian fields (radial fields are always exact spheres).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Extraction {
    /// Product Gauss rule in the ray direction with `resolution` polar nodes.
    Rays { resolution: usize },
    /// Marching simplices, one point per facet at its centroid.
    Marching,
}

impl Default for Extraction {
    fn default() -> Self {
        Extraction::Rays { resolution: 32 }
    }
}

/// Samples {u = t} with the default method.
pub fn extract(field: &Field, t: f64) -> Result<LevelSetSample> {
    extract_with(field, t, Extraction::default())
}

pub fn extract_with(field: &Field, t: f64, method: Extraction) -> Result<LevelSetSample> {
    let (lo, hi) = level_range(field);
    let tol = 1e-12 * lo.abs().max(1.0);
    if !(t >= lo - tol && t < hi) {
        return Err(Error::Domain(format!("level {t} outside [{lo}, {hi})")));
    }
    let t = t.max(lo);
    let on_boundary = t - lo <= tol;
    match field.grid.as_ref() {
        AnnularGrid::Radial(_) => radial_level(field, t, on_boundary),
        AnnularGrid::Cartesian(_) => match method {
            Extraction::Rays { resolution } => ray_level(field, t, on_boundary, resolution),
            Extraction::Marching => {
                if on_boundary {
                    return Err(Error::Extraction(
                        "marching extraction needs values on both sides of the level".into(),
                    ));
                }
                marching_level(field, t)
            }
        },
    }
}

/// The sphere {|x| = r(t)} of a radial field.
fn radial_level(field: &Field, t: f64, on_boundary: bool) -> Result<LevelSetSample> {
    let g = field.radial_grid().unwrap();
    let n = field.dim();
    let k = field.problem.k;
    let v = &field.values;
    if let Some(j) = (1..v.len()).find(|&j| !(v[j] > v[j - 1])) {
        return Err(Error::Extraction(format!(
            "values not increasing at radius {} (gradient floor violated)",
            g.radii[j]
        )));
    }
    let r = if on_boundary {
        g.inner()
    } else {
        let j = v.partition_point(|&u| u <= t).clamp(1, v.len() - 1) - 1;
        let (mut a, mut b) = (g.radii[j], g.radii[j + 1]);
        let mut r = a + (b - a) * (t - v[j]) / (v[j + 1] - v[j]);
        for _ in 0..100 {
            let (u, du, _) = field.radial_eval(r)?;
            let f = u - t;
            if f.abs() <= 1e-15 * t.abs().max(1.0) {
                break;
            }
            if f > 0.0 {
                b = r;
            } else {
                a = r;
            }
            let next = r - f / du;
            let next = if next > a && next < b { next } else { 0.5 * (a + b) };
            if (next - r).abs() <= 1e-15 * r {
                r = next;
                break;
            }
            r = next;
        }
        r
    };
    let (u, du, d2u) = field.radial_eval(r)?;
    let mut x = vec![0.0; n];
    x[0] = r;
    let jet = Jet::radial(&x, u, du, d2u);
    let weight = unit_sphere_area(n) * r.powi(n as i32 - 1);
    Ok(LevelSetSample {
        t,
        kind: SampleKind::Sphere,
        points: vec![sample_point(x, &jet, k, weight)?],
    })
}

/// Level set of a Cartesian field by rays from the origin:
/// dA = r^{n−1} dσ / (θ·ν).
fn ray_level(field: &Field, t: f64, on_boundary: bool, resolution: usize) -> Result<LevelSetSample> {
    let n = field.dim();
    let k = field.problem.k;
    let origin = vec![0.0; n];
    let domain = &field.problem.domain;
    if !domain.contains(&origin) {
        return Err(Error::Precondition(
            "ray extraction needs the origin inside the inner domain".into(),
        ));
    }
    let g = field.cartesian_grid().unwrap();
    let big_r = g.outer_radius * (1.0 - 1e-9);
    let step = 0.5 * g.h;
    let mut points = Vec::new();
    for (dir, w) in sphere_rule(n, resolution) {
        let rb = domain.ray_exit(&origin, &dir)?;
        let at = |r: f64| -> Vec<f64> { dir.iter().map(|d| d * r).collect() };
        let (r, jet) = if on_boundary {
            (rb, field.jet_at(&at(rb))?)
        } else {
            // March to a bracket on the cheap interpolant, refine on the jets.
            let mut a = rb;
            let mut ua = field.problem.inner_value();
            let mut b = None;
            while a < big_r {
                let r = (a + step).min(big_r);
                let u = field.value_at(&at(r))?;
                if u < ua - 1e-9 {
                    return Err(Error::Extraction(format!(
                        "field decreases along the ray {dir:?} near r = {r} (gradient floor violated)"
                    )));
                }
                if u >= t {
                    b = Some(r);
                    break;
                }
                a = r;
                ua = u;
            }
            let b = b.ok_or_else(|| Error::Extraction(format!("level {t} not reached along the ray {dir:?}")))?;
            refine_on_ray(field, &dir, t, (a - step).max(rb), (b + step).min(big_r))?
        };
        let x = at(r);
        let gn = jet.grad_norm();
        let cos = dir.iter().zip(&jet.grad).map(|(d, g)| d * g).sum::<f64>() / gn;
        if !(cos > 0.0) {
            return Err(Error::Extraction(format!(
                "level surface not star-shaped at {x:?} (θ·ν = {cos})"
            )));
        }
        let weight = r.powi(n as i32 - 1) * w / cos;
        points.push(sample_point(x, &jet, k, weight)?);
    }
    Ok(LevelSetSample {
        t,
        kind: SampleKind::Rays,
        points,
    })
}

/// Safeguarded Newton iteration for u(rθ) = t on [a, b].
fn refine_on_ray(field: &Field, dir: &[f64], t: f64, mut a: f64, mut b: f64) -> Result<(f64, Jet)> {
    let at = |r: f64| -> Vec<f64> { dir.iter().map(|d| d * r).collect() };
    let fa = field.jet_at(&at(a))?.value - t;
    let fb = field.jet_at(&at(b))?.value - t;
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::Extraction(format!(
            "no sign change of u − t on [{a}, {b}] along {dir:?}"
        )));
    }
    let mut r = a + (b - a) * (-fa) / (fb - fa).max(f64::MIN_POSITIVE);
    let mut jet = field.jet_at(&at(r))?;
    for _ in 0..60 {
        let f = jet.value - t;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            b = r;
        } else {
            a = r;
        }
        let slope: f64 = dir.iter().zip(&jet.grad).map(|(d, g)| d * g).sum();
        let next = r - f / slope;
        let next = if slope > 0.0 && next > a && next < b { next } else { 0.5 * (a + b) };
        let done = (next - r).abs() <= 1e-14 * r || b - a <= 1e-14 * r;
        r = next;
        jet = field.jet_at(&at(r))?;
        if done {
            break;
        }
    }
    Ok((r, jet))
}

/// A facet of a marching-simplex surface.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Index of the lattice cell the facet lies in.
    pub cell: usize,
    pub centroid: Vec<f64>,
    /// Area (n = 3) or length (n = 2).
    pub measure: f64,
}

/// Facets of {u = t} from marching simplices over lattice cells whose corners
/// all carry values (active or ghost nodes), with linear interpolation on edges.
pub fn marching_facets(field: &Field, t: f64) -> Result<Vec<Facet>> {
    let g = field
        .cartesian_grid()
        .ok_or_else(|| Error::Precondition("marching extraction needs a Cartesian field".into()))?;
    let n = g.n;
    let dims = g.dims;
    let corners: Vec<[usize; 3]> = (0..1usize << n)
        .map(|c| [c & 1, (c >> 1) & 1, (c >> 2) & 1])
        .collect();
    // Kuhn simplices: paths from corner 0 to the opposite corner.
    let perms: Vec<Vec<usize>> = if n == 2 {
        vec![vec![0, 1], vec![1, 0]]
    } else {
        vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ]
    };
    let simplices: Vec<Vec<usize>> = perms
        .iter()
        .map(|p| {
            let mut idx = 0usize;
            let mut out = vec![0];
            for &axis in p {
                idx |= 1 << axis;
                out.push(idx);
            }
            out
        })
        .collect();
    let mut facets = Vec::new();
    let mut vals = vec![0.0; corners.len()];
    let mut pos = vec![[0.0; 3]; corners.len()];
    let cells_per_axis = dims - 1;
    let total = cells_per_axis.pow(n as u32);
    for cell in 0..total {
        let mut base = [0usize; 3];
        let mut rem = cell;
        for b in base.iter_mut().take(n) {
            *b = rem % cells_per_axis;
            rem /= cells_per_axis;
        }
        let mut ok = true;
        let mut below = false;
        let mut above = false;
        for (c, off) in corners.iter().enumerate() {
            let idx = [base[0] + off[0], base[1] + off[1], if n == 3 { base[2] + off[2] } else { 0 }];
            let node = g.index_of(&idx);
            let v = field.values[node];
            if !v.is_finite() {
                ok = false;
                break;
            }
            vals[c] = v - t;
            if vals[c] < 0.0 {
                below = true;
            } else {
                above = true;
            }
            g.coords_into(node, &mut pos[c]);
        }
        if !ok || !(below && above) {
            continue;
        }
        let first = facets.len();
        for s in &simplices {
            simplex_facets(n, s, &vals, &pos, &mut facets);
        }
        for f in &mut facets[first..] {
            f.cell = cell;
        }
    }
    Ok(facets)
}

fn edge_point(a: usize, b: usize, vals: &[f64], pos: &[[f64; 3]]) -> [f64; 3] {
    let s = vals[a] / (vals[a] - vals[b]);
    let mut p = [0.0; 3];
    for i in 0..3 {
        p[i] = pos[a][i] + s * (pos[b][i] - pos[a][i]);
    }
    p
}

fn simplex_facets(n: usize, s: &[usize], vals: &[f64], pos: &[[f64; 3]], out: &mut Vec<Facet>) {
    let neg: Vec<usize> = s.iter().copied().filter(|&c| vals[c] < 0.0).collect();
    let nonneg: Vec<usize> = s.iter().copied().filter(|&c| vals[c] >= 0.0).collect();
    if neg.is_empty() || nonneg.is_empty() {
        return;
    }
    if n == 2 {
        let (lone, others) = if neg.len() == 1 { (neg[0], &nonneg) } else { (nonneg[0], &neg) };
        let p = edge_point(lone, others[0], vals, pos);
        let q = edge_point(lone, others[1], vals, pos);
        let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        out.push(Facet {
            cell: 0,
            centroid: vec![0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])],
            measure: len,
        });
        return;
    }
    let tri = |a: [f64; 3], b: [f64; 3], c: [f64; 3], out: &mut Vec<Facet>| {
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cr = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let area = 0.5 * (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
        out.push(Facet {
            cell: 0,
            centroid: (0..3).map(|i| (a[i] + b[i] + c[i]) / 3.0).collect(),
            measure: area,
        });
    };
    if neg.len() == 1 || nonneg.len() == 1 {
        let (lone, others) = if neg.len() == 1 { (neg[0], &nonneg) } else { (nonneg[0], &neg) };
        let p: Vec<[f64; 3]> = others.iter().map(|&o| edge_point(lone, o, vals, pos)).collect();
        tri(p[0], p[1], p[2], out);
    } else {
        let (a, b) = (neg[0], neg[1]);
        let (c, d) = (nonneg[0], nonneg[1]);
        let p = [
            edge_point(a, c, vals, pos),
            edge_point(a, d, vals, pos),
            edge_point(b, d, vals, pos),
            edge_point(b, c, vals, pos),
        ];
        tri(p[0], p[1], p[2], out);
        tri(p[0], p[2], p[3], out);
    }
}

fn marching_level(field: &Field, t: f64) -> Result<LevelSetSample> {
    let k = field.problem.k;
    let facets = marching_facets(field, t)?;
    if facets.is_empty() {
        return Err(Error::Extraction(format!("level {t} does not cross the lattice")));
    }
    // One point per cell: facets merged at their measure-weighted centroid.
    let mut merged: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut last_cell = usize::MAX;
    for f in facets.iter().filter(|f| f.measure > 0.0) {
        if f.cell != last_cell {
            merged.push((vec![0.0; f.centroid.len()], 0.0));
            last_cell = f.cell;
        }
        let m = merged.last_mut().unwrap();
        for (c, x) in m.0.iter_mut().zip(&f.centroid) {
            *c += f.measure * x;
        }
        m.1 += f.measure;
    }
    let points = merged
        .into_par_iter()
        .map(|(mut c, w)| {
            c.iter_mut().for_each(|v| *v /= w);
            let jet = field.jet_at(&c)?;
            sample_point(c, &jet, k, w)
        })
        .collect::<Result<Vec<SamplePoint>>>()?;
    Ok(LevelSetSample {
        t,
        kind: SampleKind::Marching,
        points,
    })
}
