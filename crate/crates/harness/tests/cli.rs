use std::path::Path;
use std::process::Command;

use lcbo_harness::report::{aggregate_dir, read_aggregate, read_trace, write_trace, TraceRow};

fn lcbo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lcbo"))
}

fn run_ok(args: &[&str]) -> String {
    let out = lcbo().args(args).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(args: &[&str]) -> i32 {
    lcbo().args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn trace_schema_golden() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace_seed3.csv");
    let rows = [
        TraceRow { eval: 1, seed: 3, best_feasible: f64::INFINITY, rs_hat: f64::NAN, rf_hat: f64::NAN },
        TraceRow { eval: 2, seed: 3, best_feasible: -0.5, rs_hat: 0.25, rf_hat: 1e-3 },
    ];
    write_trace(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "eval,seed,best_feasible,rs_hat,rf_hat\n1,3,inf,NaN,NaN\n2,3,-0.5,0.25,0.001\n");
    let back = read_trace(&path).unwrap();
    assert_eq!(back[1], rows[1]);
    assert!(back[0].best_feasible.is_infinite() && back[0].rs_hat.is_nan());

    aggregate_dir(dir.path(), false).unwrap();
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg, "eval,median,q25,q75\n1,inf,inf,inf\n2,-0.5,-0.5,-0.5\n");
}

#[test]
fn run_writes_traces_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rs");
    let o = out.to_str().unwrap();
    run_ok(&["run", "--problem", "toy-circle", "--method", "random-search", "--budget", "500", "--reps", "3", "--seed", "7", "--out", o, "--plots"]);
    for seed in 7..10 {
        let rows = read_trace(&out.join(format!("trace_seed{seed}.csv"))).unwrap();
        assert_eq!(rows.len(), 500);
        assert!(rows.iter().enumerate().all(|(i, r)| r.eval == i + 1 && r.seed == seed));
        assert!(rows.windows(2).all(|w| w[1].best_feasible <= w[0].best_feasible));
    }
    let agg = read_aggregate(&out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.len(), 500);
    assert!(agg.iter().all(|r| r.q25 <= r.median && r.median <= r.q75));
    assert!(std::fs::read_to_string(out.join("convergence.svg")).unwrap().starts_with("<svg"));

    // re-aggregation from the written traces reproduces the file exactly
    let before = std::fs::read(out.join("aggregate.csv")).unwrap();
    run_ok(&["aggregate", o]);
    assert_eq!(before, std::fs::read(out.join("aggregate.csv")).unwrap());
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "problem = \"truss\"\nmethod = \"lcbo\"\nbudget = 40\nrepetitions = 1\nout = \"{}\"\n[lcbo]\nrestarts = 1\nacq_steps = 2\n",
            dir.path().join("ignored").display()
        ),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert!(run_ok(&["validate-config", c]).contains("ok"));
    run_ok(&["run", "--config", c, "--budget", "30", "--out", out.to_str().unwrap()]);
    assert!(!Path::new(&dir.path().join("ignored")).exists());
    assert_eq!(read_trace(&out.join("trace_seed0.csv")).unwrap().len(), 30);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "budget = \"lots\"\n").unwrap();
    assert_eq!(exit_code(&["validate-config", bad.to_str().unwrap()]), 2);
    assert_eq!(exit_code(&["validate-config", dir.path().join("missing.toml").to_str().unwrap()]), 2);
    assert_eq!(exit_code(&["run", "--problem", "nope"]), 2);
    assert_eq!(exit_code(&["run", "--problem", "toy-circle", "--budget", "1"]), 2);
    assert_eq!(exit_code(&["aggregate", dir.path().to_str().unwrap()]), 3);
}
