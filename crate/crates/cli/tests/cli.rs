use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn blindcal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blindcal"))
        .args(args)
        .current_dir(dir)
        .env_remove("BLINDCAL_JOBS")
        .output()
        .expect("run blindcal")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["gen", "--out", out];
    args.extend_from_slice(extra);
    blindcal(&args, dir)
}

#[test]
fn gen_is_deterministic_and_reports_summary() {
    let dir = TempDir::new().unwrap();
    let flags = ["--n", "100", "--m", "80", "--l", "5", "--k", "8", "--sigma", "0.1", "--pc", "1", "--seed", "9"];
    let a = gen(dir.path(), "a.json", &flags);
    let b = gen(dir.path(), "b.json", &flags);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0);
    assert_eq!(
        std::fs::read(dir.path().join("a.json")).unwrap(),
        std::fs::read(dir.path().join("b.json")).unwrap()
    );
    let out = stdout(&a);
    assert!(out.contains("delta=0.8"), "{out}");
    assert!(out.contains("rho=0.1"), "{out}");
    assert!(out.contains("delta_cf=1.2475"), "{out}");
}

#[test]
fn gen_rejects_bad_parameters() {
    let dir = TempDir::new().unwrap();
    let o = gen(dir.path(), "x.json", &["--n", "4", "--m", "8", "--l", "2", "--k", "5"]);
    assert_eq!(code(&o), 2);
    let o = gen(dir.path(), "x.json", &["--n", "4", "--m", "8", "--l", "2", "--k", "1", "--pc", "2"]);
    assert_eq!(code(&o), 2);
    let o = blindcal(&["gen", "--n", "4", "--bogus", "1"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn gen_without_truth_blinds_solve() {
    let dir = TempDir::new().unwrap();
    let o = gen(dir.path(), "blind.json", &["--n", "4", "--m", "8", "--l", "2", "--k", "2", "--no-truth"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("blind.json")).unwrap();
    assert!(!text.contains("\"signals\""));
    let o = blindcal(&["solve", "--solver", "closed-form", "--instance", "blind.json", "--out", "r.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("no ground truth"));
}

#[test]
fn solve_exit_codes() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    gen(p, "over.json", &["--n", "4", "--m", "8", "--l", "2", "--k", "2", "--sigma", "0.5", "--pc", "1", "--seed", "1"]);
    let o = blindcal(&["solve", "--solver", "closed-form", "--instance", "over.json", "--out", "r.json"], p);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("perfect=true"));
    let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(result["solver"], "closed-form");

    gen(p, "sparse.json", &["--n", "6", "--m", "5", "--l", "2", "--k", "1", "--pc", "1", "--seed", "2"]);
    let o = blindcal(
        &["solve", "--solver", "pcal", "--instance", "sparse.json", "--out", "r.json", "--max-iter", "1"],
        p,
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    let o = blindcal(&["solve", "--solver", "nope", "--instance", "over.json", "--out", "r.json"], p);
    assert_eq!(code(&o), 2);

    // below the closed-form threshold
    let o = blindcal(&["solve", "--solver", "closed-form", "--instance", "sparse.json", "--out", "r.json"], p);
    assert_eq!(code(&o), 2);

    let o = blindcal(&["solve", "--solver", "bp", "--instance", "missing.json", "--out", "r.json"], p);
    assert_eq!(code(&o), 4);
}

#[test]
fn solve_complete_closed_form() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    gen(p, "over.json", &["--n", "4", "--m", "8", "--l", "3", "--k", "2", "--sigma", "0.5", "--pc", "1", "--seed", "4"]);
    let o = blindcal(
        &["solve", "--solver", "closed-form", "--mode", "complete", "--instance", "over.json", "--out", "r.json"],
        p,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("perfect=true"));
}

#[test]
fn scalable_with_one_signal_delegates_with_notice() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    gen(p, "one.json", &["--n", "4", "--m", "4", "--l", "1", "--k", "1", "--pc", "1", "--seed", "3"]);
    let o = blindcal(&["solve", "--solver", "pcal-s", "--instance", "one.json", "--out", "r.json"], p);
    assert!(matches!(code(&o), 0 | 3), "{}", stderr(&o));
    assert!(stderr(&o).contains("note:"), "{}", stderr(&o));
    let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(result["solver"], "pcal-s");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    gen(p, "sparse.json", &["--n", "6", "--m", "5", "--l", "2", "--k", "1", "--pc", "1", "--seed", "2"]);
    std::fs::write(p.join("cfg.json"), r#"{"max_iter": 1, "adaptive_penalty": false}"#).unwrap();
    let o = blindcal(
        &["solve", "--solver", "pcal", "--instance", "sparse.json", "--out", "r.json", "--config", "cfg.json"],
        p,
    );
    assert_eq!(code(&o), 3);
    let o = blindcal(
        &[
            "solve", "--solver", "bp", "--instance", "sparse.json", "--out", "r.json", "--config", "cfg.json", "--max-iter",
            "4000",
        ],
        p,
    );
    let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert!(result["iterations"].as_u64().unwrap() > 1, "{}", stderr(&o));

    std::fs::write(p.join("bad.json"), r#"{"max_iters": 1}"#).unwrap();
    let o = blindcal(
        &["solve", "--solver", "bp", "--instance", "sparse.json", "--out", "r.json", "--config", "bad.json"],
        p,
    );
    assert_eq!(code(&o), 2);
}

fn sweep_args<'a>(out: &'a str, jobs: &'a str) -> Vec<&'a str> {
    vec![
        "sweep", "--solver", "acal", "--n", "6", "--l", "2", "--sigma", "0.1", "--pc", "0", "--delta-grid", "0.5:0.25:1",
        "--rho-grid", "0.2:0.2:0.4", "--trials", "2", "--seed", "5", "--quiet", "--out", out, "--jobs", jobs,
    ]
}

#[test]
fn sweep_is_invariant_to_jobs() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let a = blindcal(&sweep_args("a.csv", "1"), p);
    let b = blindcal(&sweep_args("b.csv", "8"), p);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0);
    let a = std::fs::read_to_string(p.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(p.join("b.csv")).unwrap());
    assert_eq!(a.lines().count(), 1 + 3 * 2);
}

#[test]
fn sweep_jobs_from_environment() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let mut args = sweep_args("a.csv", "1");
    args.truncate(args.len() - 2);
    let o = Command::new(env!("CARGO_BIN_EXE_blindcal"))
        .args(&args)
        .current_dir(p)
        .env("BLINDCAL_JOBS", "0x")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_blindcal"))
        .args(&args)
        .current_dir(p)
        .env("BLINDCAL_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn sweep_heatmap_matches_grid() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    std::fs::write(p.join("curve.txt"), "0.5 0.2\n1.0 0.4\n").unwrap();
    let mut args = sweep_args("s.csv", "2");
    args.extend(["--heatmap", "h.pgm", "--ticks", "t.txt", "--overlay", "curve.txt", "--svg", "h.svg"]);
    let o = blindcal(&args, p);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let pgm = blindcal::harness::Pgm::decode(&std::fs::read(p.join("h.pgm")).unwrap()).unwrap();
    assert_eq!((pgm.width, pgm.height), (3, 2));
    assert!(pgm.comments[0].starts_with("sweep "));
    let ticks = std::fs::read_to_string(p.join("t.txt")).unwrap();
    assert_eq!(ticks, "delta 0.5 0.75 1\nrho 0.4 0.2\n");
    assert!(std::fs::read_to_string(p.join("h.svg")).unwrap().contains("<polyline"));
}

#[test]
fn sweep_smoke_and_empty_grid() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let ok = [
        "sweep", "--solver", "closed-form", "--n", "4", "--l", "2", "--delta-grid", "1.75", "--rho-grid", "0.25", "--trials",
        "1", "--out", "one.csv", "--quiet",
    ];
    let o = blindcal(&ok, p);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = blindcal::harness::read_csv(&p.join("one.csv")).unwrap();
    assert_eq!((csv.len(), csv[0].successes), (1, 1));

    let mut empty = ok;
    empty[8] = "1:0.1:0.5";
    assert_eq!(code(&blindcal(&empty, p)), 2);
}

#[test]
fn bench_reports_slopes() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let o = blindcal(
        &["bench", "--solvers", "pcal,pcal-s", "--l-list", "4,8", "--n", "16", "--trials", "1", "--max-iter", "10", "--out", "b.csv"],
        p,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let slope = |name: &str| -> f64 {
        let line = out.lines().find(|l| l.starts_with(&format!("{name} slope="))).expect(name);
        line.split_whitespace().nth(1).unwrap().trim_start_matches("slope=").parse().unwrap()
    };
    assert!(slope("pcal") > slope("pcal-s"), "{out}");
    let csv = std::fs::read_to_string(p.join("b.csv")).unwrap();
    assert!(csv.starts_with("solver,n,l,trials,per_iteration_ms,slope,fit_residual\n"));
    assert_eq!(csv.lines().count(), 5);

    let o = blindcal(&["bench", "--l-list", "4", "--out", "b.csv"], p);
    assert_eq!(code(&o), 2);
}
