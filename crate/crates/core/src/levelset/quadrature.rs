//! Quadrature rules on [−1, 1] and on unit spheres.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m.
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// P_m(z) and P_m′(z).
fn legendre(m: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if m == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=m {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Directions and weights of a product rule on S^{n−1} (n = 2, 3) with
/// `resolution` nodes in the polar variable (2·resolution in azimuth).
/// The weights sum to the sphere area.
pub fn sphere_rule(n: usize, resolution: usize) -> Vec<(Vec<f64>, f64)> {
    let m = resolution.max(2);
    match n {
        2 => {
            let count = 2 * m;
            let w = 2.0 * PI / count as f64;
            (0..count)
                .map(|j| {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / count as f64;
                    (vec![phi.cos(), phi.sin()], w)
                })
                .collect()
        }
        _ => {
            let (zs, ws) = gauss_legendre(m);
            let count = 2 * m;
            let dphi = 2.0 * PI / count as f64;
            let mut out = Vec::with_capacity(m * count);
            for (z, wz) in zs.iter().zip(&ws) {
                let s = (1.0 - z * z).sqrt();
                for j in 0..count {
                    let phi = dphi * (j as f64 + 0.5);
                    out.push((vec![s * phi.cos(), s * phi.sin(), *z], wz * dphi));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for p in 0..14usize {
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
            assert!((q - exact).abs() < 1e-13, "degree {p}: {q} vs {exact}");
        }
    }

    #[test]
    fn sphere_rule_area_and_moments() {
        let r = sphere_rule(3, 12);
        let area: f64 = r.iter().map(|(_, w)| w).sum();
        assert!((area - 4.0 * PI).abs() < 1e-12);
        let z2: f64 = r.iter().map(|(d, w)| w * d[2] * d[2]).sum();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-12);
        let c = sphere_rule(2, 8);
        assert!((c.iter().map(|(_, w)| w).sum::<f64>() - 2.0 * PI).abs() < 1e-12);
    }
}
