use std::sync::Arc;

use khessian::closedforms::{w_profile, ProblemParams};
use khessian::solver::checkpoint;
use khessian::solver::*;
use khessian::subsolution::ConvexDomain;
use khessian::Result;

fn ball(n: usize) -> ConvexDomain {
    ConvexDomain::ball(vec![0.0; n], 1.0).unwrap()
}

fn radial_grid(n: usize, r_in: f64, r_out: f64, intervals: usize) -> Arc<AnnularGrid> {
    Arc::new(AnnularGrid::Radial(RadialGrid::geometric(n, r_in, r_out, intervals).unwrap()))
}

/// Sup error of the ε = 0 Laplace solve on 1 < r < 10 in R³ against
/// α + β/r with the same Dirichlet data.
fn harmonic_error(intervals: usize) -> f64 {
    let p = ProblemParams::new(3, 1, 1.0, 2.5, 0.0, 10.0).unwrap();
    let prob = Problem::exterior(p, ball(3), None).unwrap();
    let (field, _) = solve(&prob, radial_grid(3, 1.0, 10.0, intervals), &SolveConfig::default()).unwrap();
    let outer = w_profile(&p, 10.0);
    // α + β = −1, α + β/10 = outer
    let beta = (-1.0 - outer) / 0.9;
    let alpha = -1.0 - beta;
    let g = field.radial_grid().unwrap();
    g.radii
        .iter()
        .zip(&field.values)
        .map(|(r, u)| (u - alpha - beta / r).abs())
        .fold(0.0, f64::max)
}

#[test]
fn radial_mesh_convergence_order() {
    let errs: Vec<f64> = [10, 20, 40].iter().map(|&m| harmonic_error(m)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "observed order {order} (errors {errs:?})");
    }
}

fn gamma_preserved_along_newton(prob: Problem, grid: Arc<AnnularGrid>) {
    let cfg = SolveConfig::default();
    let mut field = Field::initial(grid, prob).unwrap();
    let flagged = gamma_violations(&field, 0.0).unwrap();
    for it in 0..30 {
        if scaled_residual_norm(&field).unwrap() <= cfg.newton_tol {
            return;
        }
        let (next, info) = newton_step(&field, &cfg).unwrap();
        let bad: Vec<usize> = gamma_violations(&next, 0.0)
            .unwrap()
            .into_iter()
            .filter(|i| !flagged.contains(i))
            .collect();
        assert!(bad.is_empty(), "step {it}: Γ_k lost at {bad:?}");
        if info.step_length == 0.0 {
            return;
        }
        field = next;
    }
}

#[test]
fn newton_steps_stay_in_cone_radial() {
    for (n, k, r) in [(3, 1, 100.0), (5, 2, 100.0), (3, 2, 100.0)] {
        let p = ProblemParams::new(n, k, 1.0, 2.5, 0.1, r).unwrap();
        let prob = Problem::exterior(p, ball(n), None).unwrap();
        gamma_preserved_along_newton(prob, radial_grid(n, 1.0, r, 200));
    }
}

#[test]
fn newton_steps_stay_in_cone_cartesian() {
    let dom = ConvexDomain::ellipsoid(vec![0.0, 0.0], vec![0.6, 0.5]).unwrap();
    let p = ProblemParams::new(2, 1, 0.5, 1.25, 0.1, 1.45).unwrap();
    let prob = Problem::exterior(p, dom.clone(), None).unwrap();
    let grid = Arc::new(AnnularGrid::Cartesian(CartesianGrid::build(2, 1.0 / 32.0, 1.45, &dom).unwrap()));
    gamma_preserved_along_newton(prob, grid);
}

#[test]
fn smaller_eps_gives_larger_ring_solution() {
    let grid = radial_grid(3, 1.0, 3.0, 300);
    let mut prev: Option<Field> = None;
    for eps in [0.5, 1.0, 2.0] {
        let prob = Problem::ring(1, ball(3), 3.0, eps, None, None).unwrap();
        let (f, _) = solve(&prob, grid.clone(), &SolveConfig::default()).unwrap();
        if let Some(p) = &prev {
            for (a, b) in p.values.iter().zip(&f.values) {
                assert!(a - b >= -1e-8, "u^ε₁ − u^ε₂ = {}", a - b);
            }
        }
        prev = Some(f);
    }
}

#[test]
fn larger_truncation_gives_larger_solution() {
    let step = 0.02;
    let mut prev: Option<Field> = None;
    for m in [200usize, 300] {
        let r = (step * m as f64).exp();
        let p = ProblemParams::new(3, 1, 1.0, 2.5, 0.05, r).unwrap();
        let prob = Problem::exterior(p, ball(3), None).unwrap();
        let g = Arc::new(AnnularGrid::Radial(RadialGrid::geometric_step(3, 1.0, r, step).unwrap()));
        let (f, _) = solve(&prob, g, &SolveConfig::default()).unwrap();
        if let Some(p) = &prev {
            for j in 0..p.values.len() {
                assert!(f.values[j] - p.values[j] >= -1e-8);
            }
        }
        prev = Some(f);
    }
}

#[test]
fn cartesian_checkpoint_round_trip() {
    let dom = ConvexDomain::ellipsoid(vec![0.0; 3], vec![0.6, 0.5, 0.5]).unwrap();
    let p = ProblemParams::new(3, 1, 0.5, 1.25, 0.05, 1.45).unwrap();
    let prob = Problem::exterior(p, dom.clone(), None).unwrap();
    let grid = Arc::new(AnnularGrid::Cartesian(CartesianGrid::build(3, 1.0 / 8.0, 1.45, &dom).unwrap()));
    let field = Field::initial(grid, prob).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ckpt");
    checkpoint::save(&path, &field, 1, None, None, serde_json::Value::Null).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.field.values.len(), field.values.len());
    for (a, b) in back.field.values.iter().zip(&field.values) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(back.field.problem, field.problem);
}

#[test]
fn resumed_continuation_is_bitwise_identical() {
    let p = ProblemParams::new(3, 1, 1.0, 2.5, 0.1, 300.0).unwrap();
    let prob = Problem::exterior(p, ball(3), None).unwrap();
    let cfg = SolveConfig {
        eps_schedule: vec![0.1, 0.03, 0.0],
        r_schedule: vec![300.0, 600.0],
        ..SolveConfig::default()
    };
    let factory = |pr: &Problem| -> Result<Arc<AnnularGrid>> { Ok(radial_grid(3, 1.0, pr.outer_radius, 250)) };
    let probes = probe_points(3, &[2.0, 10.0], false);
    let (full, rep) = continue_to_limit(&prob, &factory, &cfg, &probes).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ckpt");
    let stop = |f: &Field, r: &StageRecord| -> Result<()> {
        if r.stage == 0 {
            let mut rep = ContinuationReport::default();
            rep.stages.push(r.clone());
            checkpoint::save(&path, f, 1, Some(&cfg), Some(&rep), serde_json::Value::Null)?;
            return Err(khessian::Error::Config("interrupted".into()));
        }
        Ok(())
    };
    let err = continue_from(&prob, &factory, &cfg, &probes, 0, None, ContinuationReport::default(), stop).unwrap_err();
    assert_eq!(err.report.stages.len(), 1);
    let ck = checkpoint::load(&path).unwrap();
    let partial = ck.meta.report.unwrap();
    let (resumed, rep2) = continue_from(
        &prob,
        &factory,
        &cfg,
        &probes,
        ck.meta.next_stage,
        Some(ck.field),
        partial,
        |_, _| Ok(()),
    )
    .unwrap();
    assert_eq!(rep.stages.len(), rep2.stages.len());
    let last = |r: &ContinuationReport| r.stages.last().unwrap().probe_values.clone();
    for (a, b) in last(&rep).iter().zip(&last(&rep2)) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in full.values.iter().zip(&resumed.values) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
