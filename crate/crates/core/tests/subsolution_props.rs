mod common;

use khessian::closedforms::ProblemParams;
use khessian::subsolution::{ConvexDomain, GlueParams, Subsolution};
use khessian::symfun::{in_gamma_k, SymMatrix};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

/// (n, k, domain, r0, R0, ε)
fn setups() -> Vec<(usize, usize, ConvexDomain, f64, f64, f64)> {
    vec![
        (3, 1, ConvexDomain::ellipsoid(vec![0.0; 3], vec![0.6, 0.5, 0.5]).unwrap(), 0.5, 1.25, 0.05),
        (3, 1, ConvexDomain::ball(vec![0.0; 3], 0.5).unwrap(), 0.5, 1.25, 0.2),
        (2, 1, ConvexDomain::ellipsoid(vec![0.0; 2], vec![0.6, 0.4]).unwrap(), 0.4, 1.5, 0.1),
        (3, 2, ConvexDomain::ellipsoid(vec![0.0; 3], vec![0.5, 0.45, 0.4]).unwrap(), 0.4, 1.2, 0.1),
        (5, 2, ConvexDomain::ball(vec![0.0; 5], 0.5).unwrap(), 0.5, 1.25, 0.1),
    ]
}

fn build(i: usize) -> (Subsolution, ProblemParams) {
    let (n, k, dom, r0, big, eps) = setups().swap_remove(i);
    let p = ProblemParams::new(n, k, r0, big, eps, 10.0).unwrap();
    (Subsolution::exterior(p, dom, GlueParams::exterior_default(&p)).unwrap(), p)
}

fn direction(raw: &[f64], n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = raw[..n].to_vec();
    if v.iter().all(|a| a.abs() < 1e-3) {
        v[0] = 1.0;
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / norm).collect()
}

fn fd_hessian(s: &Subsolution, x: &[f64], h: f64) -> SymMatrix {
    let n = x.len();
    let f = |dx: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(a, d) in dx {
            y[a] += d;
        }
        s.value(&y).unwrap()
    };
    let mut m = SymMatrix::zeros(n);
    let f0 = f(&[]);
    for a in 0..n {
        m.set(a, a, (f(&[(a, h)]) - 2.0 * f0 + f(&[(a, -h)])) / (h * h));
        for b in a + 1..n {
            let v = (f(&[(a, h), (b, h)]) - f(&[(a, h), (b, -h)]) - f(&[(a, -h), (b, h)]) + f(&[(a, -h), (b, -h)]))
                / (4.0 * h * h);
            m.set(a, b, v);
        }
    }
    m
}

proptest! {
    #![proptest_config(config(500))]

    #[test]
    fn dominates_both_profiles_in_the_glue_annulus(
        i in 0usize..5, raw in proptest::collection::vec(-1.0f64..1.0, 5), s in 0.0f64..1.0
    ) {
        let (sub, p) = build(i);
        let dir = direction(&raw, p.n);
        let r = 2.0 * p.enclosure / 3.0 + s * (4.0 * p.enclosure / 3.0);
        let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let v = sub.value(&x).unwrap();
        let floor = sub.inner_profile(&x).unwrap().max(sub.outer_profile(&x));
        prop_assert!(v >= floor - 1e-10, "{v} < {floor} at {x:?}");
    }

    #[test]
    fn strictly_k_convex_outside_the_domain(
        i in 0usize..5, raw in proptest::collection::vec(-1.0f64..1.0, 5), s in 0.02f64..1.0
    ) {
        let (sub, p) = build(i);
        let dir = direction(&raw, p.n);
        let exit = sub.domain().ray_exit(&vec![0.0; p.n], &dir).unwrap();
        let r = exit + s * (2.5 * p.enclosure - exit);
        let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let m = fd_hessian(&sub, &x, 1e-4 * r);
        let (lam, _) = m.eigen().unwrap();
        prop_assert!(in_gamma_k(&lam, p.k, true).unwrap(), "spectrum {:?} at {x:?}", lam.values());
    }

    #[test]
    fn boundary_data_is_exact(i in 0usize..5, raw in proptest::collection::vec(-1.0f64..1.0, 5)) {
        let (sub, p) = build(i);
        let dir = direction(&raw, p.n);
        let exit = sub.domain().ray_exit(&vec![0.0; p.n], &dir).unwrap();
        let x: Vec<f64> = dir.iter().map(|d| d * exit).collect();
        prop_assert!((sub.value(&x).unwrap() - p.case.boundary_value()).abs() <= 1e-10);
    }

    #[test]
    fn glue_is_c1_across_band_edges(i in 0usize..5, raw in proptest::collection::vec(-1.0f64..1.0, 5)) {
        let (sub, p) = build(i);
        let dir = direction(&raw, p.n);
        let delta = sub.glue().delta;
        let at = |r: f64| -> Vec<f64> { dir.iter().map(|d| d * r).collect() };
        let gap = |r: f64| sub.outer_profile(&at(r)) - sub.inner_profile(&at(r)).unwrap();
        // Locate the edges gap = ±δ along the ray by bisection.
        let exit = sub.domain().ray_exit(&vec![0.0; p.n], &dir).unwrap();
        let (lo_r, hi_r) = (exit * 1.0001, 2.0 * p.enclosure);
        let value = |r: f64| sub.value(&at(r)).unwrap();
        for target in [-delta, delta] {
            let f = |r: f64| gap(r) - target;
            if f(lo_r).signum() == f(hi_r).signum() {
                continue;
            }
            let (mut a, mut b) = (lo_r, hi_r);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m).signum() == f(a).signum() { a = m } else { b = m }
            }
            let edge = 0.5 * (a + b);
            if edge - 4e-3 <= exit || edge + 4e-3 >= 2.0 * p.enclosure {
                continue;
            }
            // Second-order one-sided derivatives from either side of the edge;
            // their mismatch must shrink like η².
            let jump = |eta: f64| {
                let left = (3.0 * value(edge) - 4.0 * value(edge - eta) + value(edge - 2.0 * eta)) / (2.0 * eta);
                let right = (-3.0 * value(edge) + 4.0 * value(edge + eta) - value(edge + 2.0 * eta)) / (2.0 * eta);
                (left - right).abs()
            };
            let (coarse, fine) = (jump(1e-3), jump(5e-4));
            prop_assert!(fine <= 1e-10 || coarse / fine > 3.0, "edge {edge}: jumps {coarse:e}, {fine:e}");
        }
    }
}
