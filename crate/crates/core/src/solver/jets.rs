//! Moving-least-squares jets of Cartesian fields at arbitrary points.
//!
//! A quartic polynomial is fitted around the query point to active node
//! values and to the Dirichlet data at boundary crossing points, with a
//! compactly supported Wendland weight. Extrapolated ghost values are not
//! used.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symfun::SymMatrix;

use super::field::{Field, Jet};
use super::grid::NodeKind;

/// Support radius of the weight, in lattice steps.
const SUPPORT: f64 = 3.6;

fn wendland(d: f64) -> f64 {
    if d >= 1.0 {
        0.0
    } else {
        let t = 1.0 - d;
        t * t * t * t * (4.0 * d + 1.0)
    }
}

/// Multi-indices of total degree ≤ `deg` in n variables, ordered by degree.
fn exponents(n: usize, deg: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=deg {
        for a in (0..=total).rev() {
            if n == 2 {
                out.push([a, total - a, 0]);
            } else {
                for b in (0..=total - a).rev() {
                    out.push([a, b, total - a - b]);
                }
            }
        }
    }
    out
}

/// Value, gradient and Hessian of a Cartesian field at `x` (outside Ω, inside B_R).
pub fn mls_jet(field: &Field, x: &[f64]) -> Result<Jet> {
    let g = field
        .cartesian_grid()
        .ok_or_else(|| Error::Precondition("MLS jets need a Cartesian field".into()))?;
    let n = g.n;
    if x.len() != n {
        return Err(Error::Domain("point dimension does not match the field".into()));
    }
    let mut radius = SUPPORT;
    for attempt in 0..3 {
        let mut pts: Vec<([f64; 3], f64, f64)> = Vec::new();
        let reach = radius.ceil() as i64 + 1;
        let mut centre = [0i64; 3];
        for a in 0..n {
            centre[a] = (x[a] / g.h).round() as i64 + g.half as i64;
        }
        let lo: Vec<i64> = (0..n).map(|a| centre[a] - reach).collect();
        let hi: Vec<i64> = (0..n).map(|a| centre[a] + reach).collect();
        if (0..n).any(|a| lo[a] < 0 || hi[a] >= g.dims as i64) {
            return Err(Error::Domain(format!("point {x:?} too close to the lattice edge")));
        }
        let mut idx = [0usize; 3];
        let mut y = [0.0; 3];
        let mut visit = |idx: &[usize; 3], pts: &mut Vec<([f64; 3], f64, f64)>| {
            let node = g.index_of(idx);
            let (pos, val) = match g.kinds[node] {
                NodeKind::Active => {
                    let mut p = [0.0; 3];
                    g.coords_into(node, &mut p);
                    (p, field.values[node])
                }
                NodeKind::InnerGhost | NodeKind::OuterGhost => {
                    let s = g.slot[node] as usize;
                    (g.ghosts[s].point, field.ghost_data[s])
                }
                NodeKind::Unused => return,
            };
            let mut d2 = 0.0;
            for a in 0..n {
                y[a] = (pos[a] - x[a]) / g.h;
                d2 += y[a] * y[a];
            }
            let w = wendland(d2.sqrt() / radius);
            if w > 0.0 {
                pts.push((y, val, w));
            }
        };
        let ranges: Vec<std::ops::RangeInclusive<i64>> = (0..n).map(|a| lo[a]..=hi[a]).collect();
        for i in ranges[0].clone() {
            idx[0] = i as usize;
            for j in ranges[1].clone() {
                idx[1] = j as usize;
                if n == 2 {
                    visit(&idx, &mut pts);
                } else {
                    for l in ranges[2].clone() {
                        idx[2] = l as usize;
                        visit(&idx, &mut pts);
                    }
                }
            }
        }
        let deg = 4;
        let exps = exponents(n, deg);
        let nb = exps.len();
        if pts.len() < nb + nb / 2 {
            radius *= 1.25;
            if attempt == 2 {
                return Err(Error::Extraction(format!(
                    "only {} data points near {x:?} for a local fit",
                    pts.len()
                )));
            }
            continue;
        }
        let m = pts.len();
        let mut a = DMatrix::<f64>::zeros(m, nb);
        let mut b = DVector::<f64>::zeros(m);
        for (r, (yy, v, w)) in pts.iter().enumerate() {
            let sw = w.sqrt();
            for (c, e) in exps.iter().enumerate() {
                let mut t = 1.0;
                for q in 0..n {
                    t *= yy[q].powi(e[q] as i32);
                }
                a[(r, c)] = sw * t;
            }
            b[r] = sw * v;
        }
        let qr = a.qr();
        let qtb = qr.q().transpose() * b;
        let rmat = qr.r();
        let diag_max = (0..nb).map(|i| rmat[(i, i)].abs()).fold(0.0, f64::max);
        if (0..nb).any(|i| rmat[(i, i)].abs() <= 1e-10 * diag_max) {
            radius *= 1.25;
            if attempt == 2 {
                return Err(Error::Extraction(format!("degenerate local fit near {x:?}")));
            }
            continue;
        }
        let coef = rmat
            .solve_upper_triangular(&qtb)
            .ok_or_else(|| Error::Numerical("singular local fit".into()))?;
        let h = g.h;
        let mut grad = vec![0.0; n];
        let mut hess = SymMatrix::zeros(n);
        let mut value = 0.0;
        for (c, e) in exps.iter().enumerate() {
            let deg: usize = e.iter().sum();
            match deg {
                0 => value = coef[c],
                1 => {
                    let a = (0..n).find(|&q| e[q] == 1).unwrap();
                    grad[a] = coef[c] / h;
                }
                2 => {
                    if let Some(a) = (0..n).find(|&q| e[q] == 2) {
                        hess.set(a, a, 2.0 * coef[c] / (h * h));
                    } else {
                        let mut it = (0..n).filter(|&q| e[q] == 1);
                        let (p, q) = (it.next().unwrap(), it.next().unwrap());
                        hess.set(p, q, coef[c] / (h * h));
                    }
                }
                _ => {}
            }
        }
        return Ok(Jet { value, grad, hess });
    }
    Err(Error::Extraction(format!("local fit failed near {x:?}")))
}
