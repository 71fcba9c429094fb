//! The four subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use khessian::closedforms::{green, CaseKind};
use khessian::decay::{fit_power_law, trimmed_window};
use khessian::levelset::{
    area_bound_series, capacity_pair, inequality_report, inequality_threshold, level_range, monotone_series,
};
use khessian::solver::checkpoint;
use khessian::solver::continuation::stage_schedule;
use khessian::solver::{
    continue_from, diagnostics, probe_points, renormalized, solve, AnnularGrid, ContinuationReport, Field, Problem,
    StageRecord,
};

use crate::config::{GridKind, RunConfig};
use crate::report::{num, opt, precheck, write_tables, Table};
use crate::CliError;

pub const CHECKPOINT_NAME: &str = "solution.ckpt";
/// Relative tolerance on forward increases of the monotone quantity.
pub const MONOTONE_TOL: f64 = 1e-3;
/// |gap| / boundary capacity.
pub const CAPACITY_TOL: f64 = 0.01;
/// Relative tolerance on fitted decay slopes.
pub const SLOPE_TOL: f64 = 0.05;
/// Bound on sup |u − G| reported by fit-decay.
pub const GREEN_OFFSET_BOUND: f64 = 2.0;
/// Required log10 span R / r_in for decay fits.
pub const MIN_DECADES: f64 = 1.5;
pub const DECAY_SHELLS: usize = 48;
/// Allowed violation of u^{ε₁} ≥ u^{ε₂} (ε₁ < ε₂) in ring mode.
pub const ORDER_TOL: f64 = 1e-8;

const STOP: &str = "stage limit reached";

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub force: bool,
    pub probe_radii: Option<Vec<f64>>,
    /// Stop after this many newly solved stages (resume later).
    pub max_stages: Option<usize>,
}

impl Options {
    fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join(CHECKPOINT_NAME))
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn load_checkpoint(path: &Path) -> Result<checkpoint::Checkpoint, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(format!("checkpoint {} not found", path.display())));
    }
    checkpoint::load(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))
}

fn default_probe_radii(cfg: &RunConfig) -> Vec<f64> {
    let r = match &cfg.domain {
        crate::config::DomainBlock::Ball { radius, .. } => *radius,
        _ => cfg.problem.enclosure / 2.0,
    };
    let limit = cfg.schedule.radius[0];
    [2.0 * r, 10.0 * r].into_iter().filter(|x| *x < limit).collect()
}

/// Identifies the run a checkpoint belongs to.
fn fingerprint(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "problem": cfg.problem,
        "domain": cfg.domain,
        "schedule": cfg.schedule,
        "solver": cfg.solver,
    })
}

pub fn cmd_solve(opts: &Options) -> Result<String, CliError> {
    let cfg = load_config(opts.config.as_deref())?;
    precheck(&opts.out, &["stages.csv", "probes.csv", "diagnostics.csv"], opts.force)?;
    let problem = cfg.problem()?;
    let solve_cfg = cfg.solve_config();
    let domain = problem.domain.clone();
    let factory = |pr: &Problem| -> khessian::Result<Arc<AnnularGrid>> { Ok(Arc::new(cfg.grid(&domain, pr.outer_radius)?)) };
    let radii = opts
        .probe_radii
        .clone()
        .or_else(|| (!cfg.analysis.probe_radii.is_empty()).then(|| cfg.analysis.probe_radii.clone()))
        .unwrap_or_else(|| default_probe_radii(&cfg));
    let probes = probe_points(cfg.problem.n, &radii, cfg.solver.grid == GridKind::Cartesian);
    let ck_path = opts.checkpoint_path();
    let extra = json!({ "run": fingerprint(&cfg) });

    let (start, previous, report) = if ck_path.exists() && !opts.force {
        let ck = load_checkpoint(&ck_path)?;
        if ck.meta.extra.get("run") != extra.get("run") {
            return Err(CliError::Config(format!(
                "checkpoint {} belongs to a different configuration (pass --force to restart)",
                ck_path.display()
            )));
        }
        let rep = ck.meta.report.unwrap_or_default();
        if rep.probe_points != probes {
            return Err(CliError::Config(format!(
                "probe radii differ from those in checkpoint {}",
                ck_path.display()
            )));
        }
        eprintln!("resuming from {} at stage {}", ck_path.display(), ck.meta.next_stage);
        (ck.meta.next_stage, Some(ck.field), rep)
    } else {
        (0, None, ContinuationReport::default())
    };

    if let Some(dir) = ck_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    let total = stage_schedule(&problem, &solve_cfg).len();
    let mut partial = report.clone();
    partial.probe_points = probes.clone();
    let mut solved = 0usize;
    let on_stage = |f: &Field, r: &StageRecord| -> khessian::Result<()> {
        partial.stages.push(r.clone());
        checkpoint::save(&ck_path, f, r.stage + 1, Some(&solve_cfg), Some(&partial), extra.clone())?;
        eprintln!(
            "stage {}: eps {} R {} iterations {} residual {:.3e}",
            r.stage, r.eps, r.radius, r.solve.iterations, r.solve.residual
        );
        solved += 1;
        if opts.max_stages.is_some_and(|m| solved >= m) && r.stage + 1 < total {
            return Err(khessian::Error::Config(STOP.into()));
        }
        Ok(())
    };
    let (field, rep) = match continue_from(&problem, &factory, &solve_cfg, &probes, start, previous, report, on_stage) {
        Ok(v) => v,
        Err(f) => {
            if matches!(&f.error, khessian::Error::Config(m) if m == STOP) {
                return Ok(format!(
                    "stopped after stage {} of {total}; rerun to resume from {}",
                    f.report.stages.len(),
                    ck_path.display()
                ));
            }
            if let khessian::Error::Config(m) = f.error {
                return Err(CliError::Config(m));
            }
            return Err(CliError::Failed(f.to_string()));
        }
    };

    let mut stages = Table::new(
        "stages",
        &["stage", "eps", "radius", "unknowns", "iterations", "residual", "homotopy_stages", "subsolution_gap", "gamma_min", "probe_delta"],
    );
    let mut probe_tab = Table::new("probes", &["stage", "probe", "radius", "axis", "value"]);
    for s in &rep.stages {
        stages.push(vec![
            s.stage.to_string(),
            num(s.eps),
            num(s.radius),
            s.unknowns.to_string(),
            s.solve.iterations.to_string(),
            num(s.solve.residual),
            s.solve.homotopy_stages.to_string(),
            num(s.solve.subsolution_gap),
            num(s.solve.gamma_min),
            opt(s.probe_delta),
        ]);
        for (i, (x, v)) in rep.probe_points.iter().zip(&s.probe_values).enumerate() {
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            let axis = x.iter().position(|c| *c != 0.0).map(|a| if x[a] > 0.0 { format!("+{a}") } else { format!("-{a}") });
            probe_tab.push(vec![s.stage.to_string(), i.to_string(), num(r), axis.unwrap_or_default(), num(*v)]);
        }
    }
    let d = diagnostics(&field, cfg.analysis.shells)?;
    let mut diag = Table::new(
        "diagnostics",
        &["r_lo", "r_hi", "nodes", "decay_min", "decay_max", "grad_min", "grad_max", "hess_max", "p_min", "p_max", "floor_min", "gamma_min"],
    );
    for s in &d.shells {
        diag.push(vec![
            num(s.r_lo),
            num(s.r_hi),
            s.nodes.to_string(),
            num(s.decay_min),
            num(s.decay_max),
            num(s.grad_min),
            num(s.grad_max),
            num(s.hess_max),
            num(s.p_min),
            num(s.p_max),
            num(s.floor_min),
            num(s.gamma_min),
        ]);
    }
    write_tables(&opts.out, &[stages, probe_tab, diag], opts.force)?;
    let mut msg = format!(
        "solved {} stage(s); final probe change {} (settled: {}); diagnostics: decay {}, floor {}, gamma {}, dominance {}",
        rep.stages.len(),
        rep.stages.last().and_then(|s| s.probe_delta).map_or("n/a".into(), |d| format!("{d:.3e}")),
        rep.converged,
        ok(d.decay_ok),
        ok(d.floor_ok),
        ok(d.gamma_ok),
        ok(d.dominance_ok)
    );
    for f in &d.flags {
        msg.push_str(&format!("\n  flag: {f}"));
    }
    Ok(msg)
}

fn ok(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

fn field_params(field: &Field) -> Result<khessian::closedforms::ProblemParams, CliError> {
    Ok(*field.problem.exterior_params()?)
}

/// Levels for the monotone series when none are configured.
fn auto_levels(field: &Field, case: CaseKind) -> Vec<f64> {
    let (lo, hi) = level_range(field);
    let hi = match case {
        CaseKind::Subcritical => hi.min(0.0),
        _ => hi,
    };
    (0..12).map(|i| lo + (hi - lo) * i as f64 / 12.0).collect()
}

/// Exponents used when the configuration lists none.
fn default_exponents(field: &Field) -> Result<Vec<f64>, CliError> {
    let p = field_params(field)?;
    Ok(match inequality_threshold(&p) {
        Some((th, false)) => vec![th],
        Some((th, true)) => vec![th + 0.5],
        None => vec![1.0 - p.k as f64],
    })
}

pub fn cmd_verify(opts: &Options) -> Result<(bool, String), CliError> {
    let cfg = load_config(opts.config.as_deref())?;
    cfg.check_exponents()?;
    let ck = load_checkpoint(&opts.checkpoint_path())?;
    let case = cfg.case()?;
    let has_capacity = case == CaseKind::Subcritical;
    let mut names = vec!["inequality.csv", "monotone.csv"];
    if has_capacity {
        names.push("capacity.csv");
    }
    precheck(&opts.out, &names, opts.force)?;
    let raw = ck.field;
    let p = field_params(&raw)?;
    if p.n != cfg.problem.n || p.k != cfg.problem.k {
        return Err(CliError::Config(format!(
            "checkpoint holds (n, k) = ({}, {}) but the configuration has ({}, {})",
            p.n, p.k, cfg.problem.n, cfg.problem.k
        )));
    }
    let field = if cfg.analysis.renormalize {
        renormalized(&raw, 0.75, 0.95)?.0
    } else {
        raw
    };
    let bs = if cfg.analysis.b.is_empty() {
        default_exponents(&field)?
    } else {
        cfg.analysis.b.clone()
    };
    let ts = if cfg.analysis.t.is_empty() {
        auto_levels(&field, case)
    } else {
        cfg.analysis.t.clone()
    };

    let mut lines = Vec::new();
    let mut all = true;
    let mut ineq = Table::new("inequality", &["b", "lhs", "rhs", "slack", "relative_slack", "tolerance", "pass"]);
    if inequality_threshold(&p).is_some() {
        for &b in &bs {
            let r = inequality_report(&field, b)?;
            all &= r.pass;
            lines.push(format!("{} inequality b={b}: relative slack {:.3e}", ok(r.pass), r.relative_slack));
            ineq.push(vec![
                num(b),
                num(r.lhs),
                num(r.rhs),
                num(r.slack),
                num(r.relative_slack),
                num(r.tolerance),
                r.pass.to_string(),
            ]);
        }
    } else {
        lines.push("note: no boundary inequality for k > n/2 (report only)".into());
    }

    let areas = area_bound_series(&field, &ts)?;
    let area_ok = areas.iter().all(|a| a.within);
    all &= area_ok;
    lines.push(format!("{} area bound over {} levels", ok(area_ok), ts.len()));
    let mut mono = Table::new("monotone", &["b", "t", "i_abk", "area", "area_ratio", "area_within"]);
    for &b in &bs {
        let s = monotone_series(&field, b, &ts)?;
        let scale = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let pass = s.max_forward_increase <= MONOTONE_TOL * scale;
        // No monotonicity statement is gated for k > n/2.
        let gated = case != CaseKind::Supercritical;
        all &= pass || !gated;
        lines.push(format!(
            "{} monotone b={b}: max forward increase {:.3e} (scale {:.3e})",
            if gated { ok(pass) } else { "report" },
            s.max_forward_increase,
            scale
        ));
        for ((t, v), a) in s.t.iter().zip(&s.values).zip(&areas) {
            mono.push(vec![num(b), num(*t), num(*v), num(a.area), num(a.ratio), a.within.to_string()]);
        }
    }
    let mut tables = vec![ineq, mono];
    if has_capacity {
        let c = capacity_pair(&field)?;
        let rel = c.gap.abs() / c.boundary.abs();
        let pass = rel <= CAPACITY_TOL;
        all &= pass;
        lines.push(format!("{} capacity: volume+tail {:.6e}, boundary {:.6e}", ok(pass), c.volume + c.tail, c.boundary));
        let mut cap = Table::new("capacity", &["volume", "tail", "boundary", "gap", "relative_gap", "pass"]);
        cap.push(vec![num(c.volume), num(c.tail), num(c.boundary), num(c.gap), num(rel), pass.to_string()]);
        tables.push(cap);
    }
    write_tables(&opts.out, &tables, opts.force)?;
    lines.push(format!("verify: {}", if all { "PASS" } else { "FAIL" }));
    Ok((all, lines.join("\n")))
}

struct Shell {
    r: f64,
    value: f64,
    grad: f64,
    hess: f64,
    offset: f64,
}

pub fn cmd_fit_decay(opts: &Options) -> Result<(bool, String), CliError> {
    let renormalize = match &opts.config {
        Some(path) => load_config(Some(path))?.analysis.renormalize,
        None => true,
    };
    let ck = load_checkpoint(&opts.checkpoint_path())?;
    precheck(&opts.out, &["decay.csv"], opts.force)?;
    let field = if renormalize {
        renormalized(&ck.field, 0.75, 0.95)?.0
    } else {
        ck.field
    };
    let p = field_params(&field)?;
    let r_in = match field.grid.as_ref() {
        AnnularGrid::Radial(g) => g.inner(),
        AnnularGrid::Cartesian(_) => field.problem.domain.r_out,
    };
    let r_out = field.grid.outer_radius();
    let decades = (r_out / r_in).log10();
    if decades < MIN_DECADES {
        return Err(CliError::Failed(format!(
            "insufficient radial span: {decades:.2} decades, need {MIN_DECADES}"
        )));
    }
    let mut shells: Vec<Option<Shell>> = (0..DECAY_SHELLS).map(|_| None).collect();
    let width = (r_out / r_in).ln() / DECAY_SHELLS as f64;
    let values = field.unknowns();
    for (i, u) in values.iter().enumerate() {
        let x = field.unknown_point(i);
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r < r_in {
            continue;
        }
        let j = (((r / r_in).ln() / width) as usize).min(DECAY_SHELLS - 1);
        let g = field.gradient_at(i)?.iter().map(|c| c * c).sum::<f64>().sqrt();
        let h = field.hessian_at(i)?.norm();
        let v = match p.case {
            CaseKind::Subcritical => -u,
            _ => *u,
        };
        let off = (u - green(&p, r)?).abs();
        let s = shells[j].get_or_insert(Shell {
            r: r_in * ((j as f64 + 0.5) * width).exp(),
            value: 0.0,
            grad: 0.0,
            hess: 0.0,
            offset: 0.0,
        });
        s.value = s.value.max(v);
        s.grad = s.grad.max(g);
        s.hess = s.hess.max(h);
        s.offset = s.offset.max(off);
    }
    let shells: Vec<Shell> = shells.into_iter().flatten().collect();
    let rs: Vec<f64> = shells.iter().map(|s| s.r).collect();
    let (lo, hi) = trimmed_window(r_in, r_out, 0.2);
    let expected = p.decay_exponents();
    let mut tab = Table::new("decay", &["quantity", "kind", "value", "expected", "deviation", "samples", "pass"]);
    let mut all = true;
    let mut lines = vec![format!("fit window [{lo:.4e}, {hi:.4e}] over {} shells", shells.len())];
    let mut fit = |name: &str, ys: Vec<f64>, e: f64, tab: &mut Table| -> Result<(), CliError> {
        let f = fit_power_law(&rs, &ys, lo, hi)?;
        let dev = (f.slope - e) / e.abs();
        let pass = dev.abs() <= SLOPE_TOL;
        all &= pass;
        lines.push(format!("{} {name}: slope {:.4} vs {:.4}", ok(pass), f.slope, e));
        tab.push(vec![name.into(), "slope".into(), num(f.slope), num(e), num(dev), f.samples.to_string(), pass.to_string()]);
        Ok(())
    };
    match p.case {
        CaseKind::Subcritical => fit("-u", shells.iter().map(|s| s.value).collect(), expected[0], &mut tab)?,
        CaseKind::Supercritical => fit("u", shells.iter().map(|s| s.value).collect(), expected[0], &mut tab)?,
        CaseKind::Critical => {}
    }
    fit("|Du|", shells.iter().map(|s| s.grad).collect(), expected[1], &mut tab)?;
    fit("|D2u|", shells.iter().map(|s| s.hess).collect(), expected[2], &mut tab)?;
    if p.case != CaseKind::Subcritical {
        let sup = shells.iter().map(|s| s.offset).fold(0.0, f64::max);
        let pass = sup <= GREEN_OFFSET_BOUND;
        all &= pass;
        lines.push(format!("{} sup|u-G| = {sup:.4} (bound {GREEN_OFFSET_BOUND})", ok(pass)));
        tab.push(vec![
            "|u-G|".into(),
            "bound".into(),
            num(sup),
            num(GREEN_OFFSET_BOUND),
            num(sup - GREEN_OFFSET_BOUND),
            shells.len().to_string(),
            pass.to_string(),
        ]);
    }
    write_tables(&opts.out, &[tab], opts.force)?;
    Ok((all, lines.join("\n")))
}

pub fn cmd_ring(opts: &Options) -> Result<(bool, String), CliError> {
    let cfg = load_config(opts.config.as_deref())?;
    let ring = cfg
        .ring
        .clone()
        .ok_or_else(|| CliError::Config("ring: the [ring] block is required".into()))?;
    precheck(&opts.out, &["ring.csv"], opts.force)?;
    let domain = cfg.domain()?;
    let grid = Arc::new(cfg.grid(&domain, ring.outer_radius)?);
    let mut solve_cfg = cfg.solve_config();
    solve_cfg.eps_schedule.clear();
    solve_cfg.r_schedule.clear();
    let mut tab = Table::new(
        "ring",
        &["eps", "iterations", "residual", "u_min", "u_max", "min_below_previous", "ordered"],
    );
    let mut prev: Option<Field> = None;
    let mut all = true;
    let mut lines = Vec::new();
    for &eps in &ring.eps {
        let prob = Problem::ring(cfg.problem.k, domain.clone(), ring.outer_radius, eps, None, ring.k1)?;
        let (f, rep) = solve(&prob, grid.clone(), &solve_cfg).map_err(|e| CliError::Failed(format!("ring eps={eps}: {e}")))?;
        let vals = f.unknowns();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // min over nodes of u^{previous ε} − u^{ε}; ordering needs ≥ 0.
        let gap = prev.as_ref().map(|p| {
            p.unknowns()
                .iter()
                .zip(&vals)
                .map(|(a, b)| a - b)
                .fold(f64::INFINITY, f64::min)
        });
        let ordered = gap.map_or(true, |g| g >= -ORDER_TOL);
        all &= ordered;
        lines.push(format!(
            "{} eps={eps}: {} iterations, residual {:.3e}{}",
            ok(ordered),
            rep.iterations,
            rep.residual,
            gap.map(|g| format!(", min(u_prev - u) {g:.3e}")).unwrap_or_default()
        ));
        tab.push(vec![
            num(eps),
            rep.iterations.to_string(),
            num(rep.residual),
            num(lo),
            num(hi),
            opt(gap),
            ordered.to_string(),
        ]);
        prev = Some(f);
    }
    write_tables(&opts.out, &[tab], opts.force)?;
    Ok((all, lines.join("\n")))
}
