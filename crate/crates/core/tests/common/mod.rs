//! Shared generators and kernel checks for the integration tests.
//!
//! Each check takes a seed and returns `Err(description)` on failure so the
//! same trial can be driven by proptest or by the acceptance loop.
#![allow(dead_code)]

use khessian::symfun::{
    elem_sym, elem_sym_all, deleted_spectrum, in_gamma_k, sk_gradient, sk_matrix, Spectrum, SymMatrix,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    a.qr().q()
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> SymMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    SymMatrix::from_nalgebra(&((&a + a.transpose()) * 0.5)).unwrap()
}

/// Random spectrum shifted into the open cone Γ_k.
pub fn gamma_spectrum(rng: &mut impl Rng, n: usize, k: usize) -> Vec<f64> {
    let mut l: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let step = rng.gen_range(0.02..0.2);
    while !in_gamma_k(&Spectrum::new(l.clone()).unwrap(), k, true).unwrap() {
        l.iter_mut().for_each(|v| *v += step);
    }
    l
}

pub fn rotated(q: &DMatrix<f64>, diag: &[f64]) -> SymMatrix {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag));
    let m = q * d * q.transpose();
    SymMatrix::from_nalgebra(&((&m + m.transpose()) * 0.5)).unwrap()
}

/// Typical size of S_k terms for a spectrum, used to make tolerances relative.
fn sk_scale(values: &[f64], k: usize) -> f64 {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    elem_sym_all(&abs, k)[k].max(f64::MIN_POSITIVE)
}

fn dims(rng: &mut impl Rng, n_max: usize) -> (usize, usize) {
    let n = rng.gen_range(1..=n_max);
    (n, rng.gen_range(1..=n))
}

pub fn check_homogeneity(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, k) = dims(&mut r, 8);
    let l: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
    let c: f64 = r.gen_range(-3.0..3.0);
    let lhs = elem_sym(&Spectrum::new(l.iter().map(|v| c * v).collect()).unwrap(), k).unwrap();
    let rhs = c.powi(k as i32) * elem_sym(&Spectrum::new(l.clone()).unwrap(), k).unwrap();
    let tol = 1e-12 * c.abs().powi(k as i32) * sk_scale(&l, k);
    if (lhs - rhs).abs() <= tol {
        Ok(())
    } else {
        Err(format!("S_{k}(c·λ) = {lhs} vs c^k S_k(λ) = {rhs} for λ = {l:?}, c = {c}"))
    }
}

pub fn check_expansion(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.gen_range(2..=8);
    let k = r.gen_range(1..=n);
    let l: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
    let s = Spectrum::new(l.clone()).unwrap();
    let full = elem_sym(&s, k).unwrap();
    for i in 0..n {
        let d = deleted_spectrum(&s, i).unwrap();
        let lower = elem_sym(&d, k - 1).unwrap();
        let same = if k <= n - 1 { elem_sym(&d, k).unwrap() } else { 0.0 };
        let rhs = l[i] * lower + same;
        if (full - rhs).abs() > 1e-12 * sk_scale(&l, k) {
            return Err(format!("expansion at i = {i}: {full} vs {rhs} for λ = {l:?}"));
        }
    }
    Ok(())
}

pub fn check_gradient_fd(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, k) = dims(&mut r, 6);
    let q = random_orthogonal(&mut r, n);
    let lam = gamma_spectrum(&mut r, n, k);
    let m = rotated(&q, &lam);
    let g = sk_gradient(&m, k).map_err(|e| e.to_string())?;
    let step = 1e-5;
    let scale = g.norm().max(1.0);
    for i in 0..n {
        for j in i..n {
            let mut p = m.clone();
            let mut mm = m.clone();
            p.set(i, j, m.get(i, j) + step);
            mm.set(i, j, m.get(i, j) - step);
            let fd = (sk_matrix(&p, k).unwrap() - sk_matrix(&mm, k).unwrap()) / (2.0 * step);
            // An off-diagonal perturbation moves both symmetric entries.
            let analytic = if i == j { g.get(i, i) } else { 2.0 * g.get(i, j) };
            if (fd - analytic).abs() > 1e-6 * scale {
                return Err(format!("entry ({i},{j}): fd {fd} vs {analytic}, n = {n}, k = {k}"));
            }
        }
    }
    Ok(())
}

pub fn check_concavity(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, k) = dims(&mut r, 8);
    let a = gamma_spectrum(&mut r, n, k);
    let b = gamma_spectrum(&mut r, n, k);
    let s: f64 = r.gen_range(0.0..=1.0);
    let root = |v: &[f64]| elem_sym(&Spectrum::new(v.to_vec()).unwrap(), k).unwrap().max(0.0).powf(1.0 / k as f64);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + (1.0 - s) * y).collect();
    let lhs = root(&mix);
    let rhs = s * root(&a) + (1.0 - s) * root(&b);
    if lhs >= rhs - 1e-10 {
        Ok(())
    } else {
        Err(format!("concavity fails: {lhs} < {rhs} (λ = {a:?}, μ = {b:?}, s = {s})"))
    }
}

pub fn check_rotation(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, k) = dims(&mut r, 8);
    let m = random_symmetric(&mut r, n);
    let q = random_orthogonal(&mut r, n);
    let rm = q.transpose() * m.to_nalgebra() * &q;
    let rm = SymMatrix::from_nalgebra(&((&rm + rm.transpose()) * 0.5)).unwrap();
    let a = sk_matrix(&m, k).unwrap();
    let b = sk_matrix(&rm, k).unwrap();
    let (lam, _) = m.eigen().unwrap();
    if (a - b).abs() <= 1e-10 * sk_scale(lam.values(), k) {
        Ok(())
    } else {
        Err(format!("S_{k} changes under rotation: {a} vs {b}"))
    }
}

/// S_k of an integer spectrum by explicit subset enumeration.
pub fn brute_force_sk(values: &[i64], k: usize) -> i128 {
    let n = values.len();
    let mut total: i128 = 0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            total += (0..n).filter(|i| mask & (1 << i) != 0).map(|i| values[i] as i128).product::<i128>();
        }
    }
    total
}

pub fn check_brute_force(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.gen_range(1..=8);
    let values: Vec<i64> = (0..n).map(|_| r.gen_range(-20..=20)).collect();
    let s = Spectrum::new(values.iter().map(|&v| v as f64).collect()).unwrap();
    for k in 0..=n {
        let exact = brute_force_sk(&values, k);
        let got = elem_sym(&s, k).unwrap();
        // Every partial sum is an integer below 2^53, so the float result is exact.
        if got != exact as f64 {
            return Err(format!("S_{k}({values:?}) = {got}, exact {exact}"));
        }
    }
    Ok(())
}

pub const KERNEL_CHECKS: [(&str, fn(u64) -> Result<(), String>); 6] = [
    ("homogeneity", check_homogeneity),
    ("expansion identity", check_expansion),
    ("gradient vs finite differences", check_gradient_fd),
    ("S_k^{1/k} concavity", check_concavity),
    ("rotation invariance", check_rotation),
    ("integer brute force", check_brute_force),
];

use khessian::closedforms::{CaseKind, ProblemParams};

pub fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// w^ε − w^0 written with expm1/ln1p so that its O(ε²) size carries full
/// relative precision, together with (w^0)′.
fn profile_split(p: &ProblemParams, r: f64) -> (f64, f64) {
    let (n, k) = (p.n as f64, p.k as f64);
    let (big, e) = (p.enclosure, p.eps);
    let (xr, xb) = ((e / r).powi(2).ln_1p(), (e / big).powi(2).ln_1p());
    match p.case {
        CaseKind::Subcritical => {
            let q = (n - 2.0 * k) / (2.0 * k);
            let g = -(big / r).powf(2.0 * q);
            (g * (q * (xb - xr)).exp_m1(), -2.0 * q * g / r)
        }
        CaseKind::Critical => (0.5 * (xr - xb), 1.0 / r),
        CaseKind::Supercritical => {
            let q = (2.0 * k - n) / (2.0 * k);
            (
                r.powf(2.0 * q) * (q * xr).exp_m1() - big.powf(2.0 * q) * (q * xb).exp_m1(),
                2.0 * q * r.powf(2.0 * q - 1.0),
            )
        }
    }
}

/// Richardson-extrapolated central differences (first, second derivative)
/// of `f` at r over the steps h, h/2, h/4.
pub fn richardson_derivatives<F: Fn(f64) -> f64>(f: F, r: f64, h: f64) -> (f64, f64) {
    let d = |h: f64| {
        let (fp, f0, fm) = (f(r + h), f(r), f(r - h));
        ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
    };
    let (a, b, c) = (d(h), d(h / 2.0), d(h / 4.0));
    let rich = |x: f64, y: f64, z: f64| {
        let xy = (4.0 * y - x) / 3.0;
        let yz = (4.0 * z - y) / 3.0;
        (16.0 * yz - xy) / 15.0
    };
    (rich(a.0, b.0, c.0), rich(a.1, b.1, c.1))
}

/// S_k(D²w^ε) at radius r by finite differences. The radial operator is
/// C(n−1,k−1)·a^{k−1}·(w″ + (n−k)/k·a) with a = w′/r; the ε = 0 profile is
/// annihilated by the bracket, so only w^ε − w^0 is differenced.
pub fn fd_rhs(p: &ProblemParams, r: f64) -> f64 {
    let (n, k) = (p.n, p.k);
    let (dv, d2v) = richardson_derivatives(|s| profile_split(p, s).0, r, 0.05 * r);
    let a = (profile_split(p, r).1 + dv) / r;
    let m = (n - k) as f64 / k as f64;
    choose(n - 1, k - 1) * a.powi(k as i32 - 1) * (d2v + m * dv / r)
}
