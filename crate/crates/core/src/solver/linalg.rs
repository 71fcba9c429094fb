//! Linear algebra for the Newton systems: a banded LU for radial grids and a
//! CSR matrix with Jacobi-preconditioned BiCGSTAB for Cartesian grids.
//!
//! All reductions are split into fixed-size chunks whose partial sums are
//! combined in index order, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// Σ a_i b_i with a fixed reduction order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// max |a_i| (order-independent).
pub fn norm_inf(a: &[f64]) -> f64 {
    a.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
}

/// Band matrix with `kl` sub- and `ku` super-diagonals, factored by
/// Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major storage of width kl + ku + 1 + kl (fill-in room).
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // Column offset j - i + kl lies in [0, width).
        i * self.width + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// y = A x using the original band.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solves A x = b in place of a copy; the matrix is consumed.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut x = b.to_vec();
        let up = self.kl + self.ku;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for col in 0..n {
            let last = (col + self.kl).min(n - 1);
            let mut piv = col;
            let mut best = self.get(col, col).abs();
            for r in (col + 1)..=last {
                let v = self.get(r, col).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > 1e-300_f64.max(1e-15 * scale * f64::EPSILON)) {
                return Err(Error::Numerical(format!("singular band matrix at column {col}")));
            }
            let jmax = (col + up).min(n - 1);
            if piv != col {
                for j in col..=jmax {
                    let a = self.get(col, j);
                    let b = self.get(piv, j);
                    let ia = self.idx(col, j);
                    let ib = self.idx(piv, j);
                    self.data[ia] = b;
                    self.data[ib] = a;
                }
                x.swap(col, piv);
            }
            let d = self.get(col, col);
            for r in (col + 1)..=last {
                let f = self.get(r, col) / d;
                if f == 0.0 {
                    continue;
                }
                let ir = self.idx(r, col);
                self.data[ir] = 0.0;
                for j in (col + 1)..=jmax {
                    let v = self.get(col, j);
                    let k = self.idx(r, j);
                    self.data[k] -= f * v;
                }
                x[r] -= f * x[col];
            }
        }
        for i in (0..n).rev() {
            let jmax = (i + up).min(n - 1);
            let mut s = x[i];
            for j in (i + 1)..=jmax {
                s -= self.get(i, j) * x[j];
            }
            x[i] = s / self.get(i, i);
        }
        Ok(x)
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, Default)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Concatenates per-row entry lists (already merged) in row order.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n = rows.len();
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * CHUNK;
            for (o, yi) in out.iter_mut().enumerate() {
                let i = base + o;
                let mut s = 0.0;
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.vals[p] * x[self.cols[p] as usize];
                }
                *yi = s;
            }
        });
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&p| self.cols[p] as usize == i)
                    .map(|p| self.vals[p])
                    .unwrap_or(0.0)
            })
            .collect()
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct KrylovInfo {
    pub iterations: usize,
    pub restarts: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned BiCGSTAB, restarted from the current iterate on
/// breakdown or stagnation. Stops when ‖b − Ax‖₂ ≤ tol·‖b‖₂.
pub fn bicgstab(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, KrylovInfo)> {
    let n = a.n;
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|d| *d == 0.0 || !d.is_finite()) {
        return Err(Error::Numerical(format!("zero or non-finite diagonal in row {i}")));
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            KrylovInfo {
                iterations: 0,
                restarts: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let target = tol * bnorm;
    let mut r = b.to_vec();
    let mut iterations = 0;
    let mut restarts = 0;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut tmp = vec![0.0; n];
    'outer: loop {
        let r_hat = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut t = vec![0.0; n];
        loop {
            if iterations >= max_iter {
                break 'outer;
            }
            iterations += 1;
            let rho_new = dot(&r_hat, &r);
            let rnorm = norm2(&r);
            if rho_new.abs() < 1e-30 * rnorm * rnorm || !rho_new.is_finite() {
                restarts += 1;
                continue 'outer;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            p.par_iter_mut()
                .zip(r.par_iter().zip(v.par_iter()))
                .for_each(|(pi, (ri, vi))| *pi = ri + beta * (*pi - omega * vi));
            y.par_iter_mut()
                .zip(p.par_iter().zip(inv.par_iter()))
                .for_each(|(yi, (pi, di))| *yi = pi * di);
            a.mul_into(&y, &mut v);
            let rv = dot(&r_hat, &v);
            if rv == 0.0 || !rv.is_finite() {
                restarts += 1;
                continue 'outer;
            }
            alpha = rho / rv;
            s.par_iter_mut()
                .zip(r.par_iter().zip(v.par_iter()))
                .for_each(|(si, (ri, vi))| *si = ri - alpha * vi);
            let snorm = norm2(&s);
            if snorm <= target {
                x.par_iter_mut()
                    .zip(y.par_iter())
                    .for_each(|(xi, yi)| *xi += alpha * yi);
                r.copy_from_slice(&s);
                break 'outer;
            }
            z.par_iter_mut()
                .zip(s.par_iter().zip(inv.par_iter()))
                .for_each(|(zi, (si, di))| *zi = si * di);
            a.mul_into(&z, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                restarts += 1;
                continue 'outer;
            }
            omega = dot(&t, &s) / tt;
            x.par_iter_mut()
                .zip(y.par_iter().zip(z.par_iter()))
                .for_each(|(xi, (yi, zi))| *xi += alpha * yi + omega * zi);
            r.par_iter_mut()
                .zip(s.par_iter().zip(t.par_iter()))
                .for_each(|(ri, (si, ti))| *ri = si - omega * ti);
            let rn = norm2(&r);
            if rn <= target {
                break 'outer;
            }
            if rn < 0.9 * best {
                best = rn;
                since_best = 0;
            } else {
                since_best += 1;
            }
            if omega == 0.0 || since_best > 200 {
                // Recompute the true residual and restart.
                a.mul_into(&x, &mut tmp);
                r.par_iter_mut()
                    .zip(b.par_iter().zip(tmp.par_iter()))
                    .for_each(|(ri, (bi, ti))| *ri = bi - ti);
                since_best = 0;
                best = norm2(&r);
                restarts += 1;
                continue 'outer;
            }
        }
    }
    a.mul_into(&x, &mut tmp);
    let true_res: Vec<f64> = b.iter().zip(&tmp).map(|(bi, ti)| bi - ti).collect();
    let rel = norm2(&true_res) / bnorm;
    let info = KrylovInfo {
        iterations,
        restarts,
        relative_residual: rel,
    };
    if rel > 10.0 * tol.max(1e-14) {
        return Err(Error::Numerical(format!(
            "BiCGSTAB stopped at relative residual {rel:.3e} after {iterations} iterations ({restarts} restarts)"
        )));
    }
    Ok((x, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_solve_matches_dense() {
        let n = 7;
        let mut a = BandMatrix::new(n, 1, 1);
        for i in 0..n {
            a.set(i, i, if i % 3 == 0 { 1e-3 } else { 2.0 });
            if i > 0 {
                a.set(i, i - 1, 1.5 + i as f64 * 0.1);
            }
            if i + 1 < n {
                a.set(i, i + 1, -0.7);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let b = a.mul(&x_true);
        let x = a.solve(&b).unwrap();
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn bicgstab_solves_nonsymmetric() {
        let n = 200;
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .map(|i| {
                let mut r = vec![(i as u32, 4.0)];
                if i > 0 {
                    r.insert(0, ((i - 1) as u32, -1.5));
                }
                if i + 1 < n {
                    r.push(((i + 1) as u32, -0.5));
                }
                r
            })
            .collect();
        let a = Csr::from_rows(rows);
        let x_true: Vec<f64> = (0..n).map(|i| (0.1 * i as f64).cos()).collect();
        let b = a.mul(&x_true);
        let (x, info) = bicgstab(&a, &b, 1e-12, 1000).unwrap();
        assert!(info.relative_residual <= 1e-11);
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn dot_is_order_fixed() {
        let a: Vec<f64> = (0..20_000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let d1 = dot(&a, &a);
        let d2 = dot(&a, &a);
        assert_eq!(d1.to_bits(), d2.to_bits());
    }
}
