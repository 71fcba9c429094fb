use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use khessian_cli::config::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_khessian"))
}

fn ball_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ball_3_1.toml")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_variant(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(ball_config()).unwrap();
    assert!(text.contains(from));
    let p = dir.join("variant.toml");
    fs::write(&p, text.replace(from, to)).unwrap();
    p
}

#[test]
fn shipped_configs_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(dir).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let a = RunConfig::parse(&text).unwrap();
        let b = RunConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn ball_solve_verify_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["solve"], &ball_config(), &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("decay pass, floor pass, gamma pass, dominance pass"));
    let o = run(&["verify"], &ball_config(), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["fit-decay"], &ball_config(), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let decay = fs::read_to_string(out.join("decay.csv")).unwrap();
    assert!(decay.starts_with("# khessian decay v1\nquantity,kind,value,expected,deviation,samples,pass\n"));
    for name in ["stages", "probes", "diagnostics", "inequality", "monotone", "capacity"] {
        let text = fs::read_to_string(out.join(format!("{name}.csv"))).unwrap();
        assert!(text.starts_with(&format!("# khessian {name} v1\n")));
    }
}

#[test]
fn decreasing_radius_schedule_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_variant(dir.path(), "radius = [300.0, 1000.0]", "radius = [1000.0, 300.0]");
    let o = run(&["solve"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("schedule.radius"), "{}", stderr(&o));
}

#[test]
fn case_mismatch_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_variant(dir.path(), "case = \"subcritical\"", "case = \"critical\"");
    let o = run(&["solve"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("problem.case"), "{}", stderr(&o));
}

#[test]
fn exponent_below_threshold_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_variant(dir.path(), "b = [0.5, 1.0]", "b = [0.25]");
    let o = run(&["verify"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("b >= k(n-k-1)/(n-k)"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_exit_66() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["verify"], &ball_config(), &out).status.code(), Some(66));
    assert_eq!(run(&["fit-decay"], &ball_config(), &out).status.code(), Some(66));
    let o = run(&["solve"], &dir.path().join("nope.toml"), &out);
    assert_eq!(o.status.code(), Some(66));
}

#[test]
fn bad_arguments_exit_64() {
    let o = bin().args(["solve", "--threads", "x"]).output().unwrap();
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn reports_are_not_overwritten_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["ring"], &ball_config(), &out).status.code(), Some(0));
    let before = fs::read(out.join("ring.csv")).unwrap();
    let o = run(&["ring"], &ball_config(), &out);
    assert_eq!(o.status.code(), Some(74));
    assert!(stderr(&o).contains("--force"));
    assert_eq!(fs::read(out.join("ring.csv")).unwrap(), before);
    assert_eq!(run(&["ring", "--force"], &ball_config(), &out).status.code(), Some(0));
    assert_eq!(fs::read(out.join("ring.csv")).unwrap(), before);
}

const REPORTS: [&str; 3] = ["stages.csv", "probes.csv", "diagnostics.csv"];

#[test]
fn repeated_runs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["solve"], &ball_config(), &a).status.code(), Some(0));
    assert_eq!(run(&["solve", "--threads", "1"], &ball_config(), &b).status.code(), Some(0));
    for f in REPORTS.iter().chain(&["solution.ckpt"]) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn resumed_solve_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let (full, resumed) = (dir.path().join("full"), dir.path().join("resumed"));
    assert_eq!(run(&["solve"], &ball_config(), &full).status.code(), Some(0));
    let o = run(&["solve", "--max-stages", "1"], &ball_config(), &resumed);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("stopped after stage 1 of 3"));
    assert!(!resumed.join("stages.csv").exists());
    let o = run(&["solve"], &ball_config(), &resumed);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("resuming"));
    for f in REPORTS.iter().chain(&["solution.ckpt"]) {
        assert_eq!(fs::read(full.join(f)).unwrap(), fs::read(resumed.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn checkpoint_from_other_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["solve", "--max-stages", "1"], &ball_config(), &out).status.code(), Some(0));
    let cfg = write_variant(dir.path(), "nodes = 400", "nodes = 200");
    let o = run(&["solve"], &cfg, &out);
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("different configuration"));
}

#[test]
fn ring_solutions_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["ring"], &ball_config(), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = fs::read_to_string(out.join("ring.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 3);
    assert!(text.lines().skip(2).all(|l| l.ends_with(",true")));
}
