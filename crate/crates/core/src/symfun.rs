//! Elementary symmetric functions of spectra and symmetric matrices,
//! their derivatives, and membership tests for the Gårding cones Γ_k.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binomial coefficient as a float. Returns 0 when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// An ordered list of eigenvalues.
///
/// Deleted spectra `(λ|i)` of a two-dimensional spectrum have length one,
/// so the constructor accepts any non-empty list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("spectrum must be non-empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite eigenvalue {v}")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Spectrum {
        Spectrum {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries and symmetrizes it.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::Domain(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        let mut m = Self { n, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::Domain("matrix is not square".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(m[(i, j)]);
            }
        }
        Self::new(n, data)
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entries (i, j) and (j, i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Σ_ij A_ij B_ij.
    pub fn contract(&self, other: &SymMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// vᵀ M v.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.data[i * n + j] * v[j];
            }
            s += v[i] * row;
        }
        s
    }

    pub fn mul(&self, other: &SymMatrix) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for l in 0..n {
                let a = self.data[i * n + l];
                for j in 0..n {
                    out[i * n + j] += a * other.data[l * n + j];
                }
            }
        }
        out
    }

    fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    /// Eigenvalues and orthonormal eigenvectors (columns of the returned matrix).
    pub fn eigen(&self) -> Result<(Spectrum, DMatrix<f64>)> {
        let eig = SymmetricEigen::try_new(self.to_nalgebra(), f64::EPSILON, 10_000).ok_or_else(
            || {
                Error::Numerical(format!(
                    "symmetric eigen-decomposition did not converge (n={}, |M|={:.3e})",
                    self.n,
                    self.norm()
                ))
            },
        )?;
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite eigenvalue".into()));
        }
        Ok((Spectrum { values }, eig.eigenvectors))
    }
}

/// All elementary symmetric polynomials e_0, …, e_k of `values`
/// by the one-pass recurrence e_j ← e_j + λ e_{j−1}.
pub fn elem_sym_all(values: &[f64], k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (i, &l) in values.iter().enumerate() {
        let top = k.min(i + 1);
        for j in (1..=top).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e
}

/// The k-th elementary symmetric polynomial S_k(λ), with S_0 = 1.
pub fn elem_sym(lambda: &Spectrum, k: usize) -> Result<f64> {
    if k > lambda.len() {
        return Err(Error::Domain(format!(
            "order k={k} exceeds spectrum length {}",
            lambda.len()
        )));
    }
    Ok(elem_sym_all(lambda.values(), k)[k])
}

/// Spectrum with the entry at zero-based position `i` removed.
pub fn deleted_spectrum(lambda: &Spectrum, i: usize) -> Result<Spectrum> {
    let n = lambda.len();
    if i >= n {
        return Err(Error::Domain(format!("index {i} out of range for length {n}")));
    }
    if n == 1 {
        return Err(Error::Domain("cannot delete from a spectrum of length 1".into()));
    }
    let mut values = lambda.values().to_vec();
    values.remove(i);
    Ok(Spectrum { values })
}

/// Γ_k membership: S_i(λ) > 0 (strict) or ≥ 0 (closure) for 1 ≤ i ≤ k.
/// The sign test is applied to the computed values without tolerance.
pub fn in_gamma_k(lambda: &Spectrum, k: usize, strict: bool) -> Result<bool> {
    check_order(k, lambda.len())?;
    let e = elem_sym_all(lambda.values(), k);
    Ok(if strict {
        e[1..].iter().all(|&s| s > 0.0)
    } else {
        e[1..].iter().all(|&s| s >= 0.0)
    })
}

/// Γ_k membership with an explicit margin: S_i(λ) > margin for 1 ≤ i ≤ k.
pub fn in_gamma_k_margin(e: &[f64], margin: f64) -> bool {
    e[1..].iter().all(|&s| s > margin)
}

fn check_order(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("order k={k} outside 1..={n}")));
    }
    Ok(())
}

/// S_k of the eigenvalues of `m`.
pub fn sk_matrix(m: &SymMatrix, k: usize) -> Result<f64> {
    if k > m.dim() {
        return Err(Error::Domain(format!("order k={k} exceeds dimension {}", m.dim())));
    }
    let (lambda, _) = m.eigen()?;
    elem_sym(&lambda, k)
}

/// The tensor S_k^{ij} = ∂S_k/∂M_ij, computed in the eigenbasis as
/// Q diag(S_{k−1}(λ|i)) Qᵀ.
///
/// The tensor is a polynomial in M, so repeated eigenvalues give equal
/// diagonal entries and any orthonormal eigenbasis yields the same result.
pub fn sk_gradient(m: &SymMatrix, k: usize) -> Result<SymMatrix> {
    let n = m.dim();
    check_order(k, n)?;
    let (lambda, q) = m.eigen()?;
    let mut d = vec![0.0; n];
    for (i, di) in d.iter_mut().enumerate() {
        *di = if n == 1 {
            if k == 1 {
                1.0
            } else {
                0.0
            }
        } else {
            let del = deleted_spectrum(&lambda, i)?;
            elem_sym_all(del.values(), k - 1)[k - 1]
        };
    }
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for (l, dl) in d.iter().enumerate() {
                s += q[(i, l)] * dl * q[(j, l)];
            }
            out.set(i, j, s);
        }
    }
    Ok(out)
}

/// e_0, …, e_k of the eigenvalues of `m` without an eigen-decomposition:
/// principal minors for n ≤ 3, Newton's identities on power traces above.
pub fn matrix_elem_sym_all(m: &SymMatrix, k: usize) -> Vec<f64> {
    let n = m.dim();
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    if k == 0 {
        return e;
    }
    match n {
        1 => e[1] = m.get(0, 0),
        2 => {
            e[1] = m.trace();
            if k >= 2 {
                e[2] = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(0, 1);
            }
        }
        3 => {
            let (a, b, c) = (m.get(0, 0), m.get(1, 1), m.get(2, 2));
            let (x, y, z) = (m.get(0, 1), m.get(0, 2), m.get(1, 2));
            e[1] = a + b + c;
            if k >= 2 {
                e[2] = a * b - x * x + a * c - y * y + b * c - z * z;
            }
            if k >= 3 {
                e[3] = a * (b * c - z * z) - x * (x * c - z * y) + y * (x * z - b * y);
            }
        }
        _ => {
            let mut p = vec![0.0; k + 1];
            let mut pow = m.as_slice().to_vec();
            for (j, pj) in p.iter_mut().enumerate().skip(1) {
                if j > 1 {
                    let mm = SymMatrix { n, data: pow };
                    pow = mm.mul(m);
                }
                *pj = (0..n).map(|i| pow[i * n + i]).sum();
            }
            for j in 1..=k.min(n) {
                let mut s = 0.0;
                for i in 1..=j {
                    let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                    s += sign * e[j - i] * p[i];
                }
                e[j] = s / j as f64;
            }
        }
    }
    e
}

/// S_k^{ij} from the matrix polynomial Σ_{m<k} (−1)^m e_{k−1−m} M^m, given
/// e_0..e_{k−1} of `m`. Agrees with [`sk_gradient`] and avoids eigenvectors.
pub fn sk_gradient_poly(m: &SymMatrix, k: usize, e: &[f64]) -> SymMatrix {
    let n = m.dim();
    let mut out = SymMatrix::identity(n);
    // Horner: G = e_{k-1} I - M (e_{k-2} I - M (...)).
    let mut acc = out.data.clone();
    for step in 1..k {
        // acc ← e_step I − M·acc
        let prod = m.mul(&SymMatrix { n, data: acc });
        acc = prod.iter().map(|v| -v).collect();
        for i in 0..n {
            acc[i * n + i] += e[step];
        }
    }
    out.data = acc;
    out.symmetrize();
    out
}

/// Normalized means S_i(λ)/C(n,i) for i = 1..k.
pub fn maclaurin_means(lambda: &Spectrum, k: usize) -> Result<Vec<f64>> {
    let n = lambda.len();
    check_order(k, n)?;
    if !in_gamma_k(lambda, k, false)? {
        return Err(Error::Precondition(format!(
            "spectrum {:?} is outside the closure of Γ_{k}",
            lambda.values()
        )));
    }
    let e = elem_sym_all(lambda.values(), k);
    Ok((1..=k).map(|i| e[i] / binomial(n, i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn elem_sym_examples() {
        assert_eq!(elem_sym(&sp(&[1.0, 2.0, 3.0]), 2).unwrap(), 11.0);
        assert_eq!(elem_sym(&sp(&[1.0; 6]), 3).unwrap(), 20.0);
        assert_eq!(elem_sym(&sp(&[2.0, 2.0, -1.0]), 3).unwrap(), -4.0);
        assert_eq!(elem_sym(&sp(&[2.0, 2.0, -1.0]), 0).unwrap(), 1.0);
        assert!(elem_sym(&sp(&[1.0, 2.0]), 3).is_err());
    }

    #[test]
    fn deleted_spectrum_examples() {
        let l = sp(&[1.0, 2.0, 3.0]);
        assert_eq!(deleted_spectrum(&l, 0).unwrap().values(), &[2.0, 3.0]);
        let lhs = elem_sym(&l, 2).unwrap();
        let d = deleted_spectrum(&l, 0).unwrap();
        assert_eq!(lhs, 1.0 * elem_sym(&d, 1).unwrap() + elem_sym(&d, 2).unwrap());
        assert_eq!(deleted_spectrum(&sp(&[5.0, 4.0]), 1).unwrap().values(), &[5.0]);
        assert!(deleted_spectrum(&l, 3).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert!(in_gamma_k(&sp(&[1.0, 1.0, 1.0]), 3, true).unwrap());
        assert!(!in_gamma_k(&sp(&[2.0, 2.0, -1.0]), 2, true).unwrap());
        assert!(in_gamma_k(&sp(&[2.0, 2.0, -1.0]), 2, false).unwrap());
        assert!(!in_gamma_k(&sp(&[-1.0, 0.0, 0.0]), 1, true).unwrap());
        assert!(in_gamma_k(&sp(&[1.0]), 2, true).is_err());
    }

    #[test]
    fn sk_matrix_examples() {
        assert!((sk_matrix(&SymMatrix::identity(3), 2).unwrap() - 3.0).abs() < 1e-12);
        let d = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        assert!((sk_matrix(&d, 3).unwrap() - 6.0).abs() < 1e-12);
        let two = SymMatrix::from_diagonal(&[2.0; 4]);
        assert!((sk_matrix(&two, 2).unwrap() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn sk_gradient_examples() {
        let d = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let g = sk_gradient(&d, 2).unwrap();
        for (i, want) in [5.0, 4.0, 3.0].iter().enumerate() {
            assert!((g.get(i, i) - want).abs() < 1e-12);
        }
        assert!((g.contract(&d) - 22.0).abs() < 1e-12);
        let g1 = sk_gradient(&SymMatrix::identity(3), 1).unwrap();
        assert!((g1.get(0, 0) - 1.0).abs() < 1e-14 && g1.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn polynomial_route_matches_eigen_route() {
        let m = SymMatrix::new(
            4,
            vec![
                2.0, 0.3, -0.1, 0.5, 0.3, 1.0, 0.2, 0.0, -0.1, 0.2, 3.0, 0.4, 0.5, 0.0, 0.4, 1.5,
            ],
        )
        .unwrap();
        for k in 1..=4 {
            let e = matrix_elem_sym_all(&m, k);
            assert!((e[k] - sk_matrix(&m, k).unwrap()).abs() < 1e-10);
            let gp = sk_gradient_poly(&m, k, &e);
            let ge = sk_gradient(&m, k).unwrap();
            for (a, b) in gp.as_slice().iter().zip(ge.as_slice()) {
                assert!((a - b).abs() < 1e-10, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gradient_at_repeated_eigenvalues() {
        let m = SymMatrix::from_diagonal(&[2.0, 2.0, 2.0]);
        let g = sk_gradient(&m, 2).unwrap();
        for i in 0..3 {
            assert!((g.get(i, i) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn maclaurin_examples() {
        let m = maclaurin_means(&sp(&[1.0, 1.0, 1.0]), 3).unwrap();
        assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let m = maclaurin_means(&sp(&[1.0, 2.0, 3.0]), 2).unwrap();
        assert!((m[0] - 2.0).abs() < 1e-15 && (m[1] - 11.0 / 3.0).abs() < 1e-14);
        let m = maclaurin_means(&sp(&[4.0, 1.0]), 2).unwrap();
        assert_eq!(m, vec![2.5, 4.0]);
        assert!(maclaurin_means(&sp(&[-1.0, 0.5]), 1).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(4, 0), 1.0);
        assert_eq!(binomial(2, 3), 0.0);
        assert_eq!(binomial(30, 15), 155117520.0);
    }
}
