//! Finite-difference weights on arbitrary node sets.

/// Fornberg's recursion: weights `w[d][j]` such that
/// f^{(d)}(x0) ≈ Σ_j w[d][j] f(xs[j]) for d = 0..=max_order.
pub fn fornberg(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let m = xs.len();
    let mut c = vec![vec![0.0; m]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..m {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}
