use std::process::{Command, Output};

use agglab::harness::instances;

fn agglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agglab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn fixed_ew_example_emits_one_row() {
    let o = agglab(&["check", "--thm", "fixed-ew", "--n", "200", "--M", "10", "--sigma", "1", "--reps", "2000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "experiment,estimator,seed,reps,n,M,d,beta,delta,bound,empirical,stderr,margin,pass");
    assert!(lines[1].starts_with("fixed-ew,ew,7,2000,200,10,0,25,"));
    assert!(lines[1].ends_with(",true"));
}

#[test]
fn usage_errors_exit_one() {
    let o = agglab(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(agglab(&["check", "--thm", "nope"]).status.code(), Some(1));
    assert_eq!(agglab(&["check", "--thm", "fixed-ew", "--unknown", "3"]).status.code(), Some(1));
    assert_eq!(agglab(&["complexity", "--risks", "0,-1"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    let o = agglab(&["check", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("[default: 2000]"));
    assert_eq!(agglab(&["--version"]).status.code(), Some(0));
}

#[test]
fn vc_thresholds_example() {
    let o = agglab(&["vc", "--class", "thresholds", "--m", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "vc=1, star=2\n");
    assert_eq!(stdout(&agglab(&["vc", "--class", "singletons", "--m", "6"])), "vc=1, star=6\n");
}

#[test]
fn failed_check_exits_two() {
    // excess saturates near the gap at M = 200 but not at M = 2
    let o = agglab(&["check", "--thm", "model-agg", "--n", "50", "--sweep", "2,200", "--reps", "50"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).trim_end().ends_with(",false"));
}

#[test]
fn unwritable_output_exits_three() {
    let o = agglab(&["check", "--thm", "fixed-ew", "--n", "20", "--M", "3", "--reps", "10", "--output", "/nonexistent/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn solver_non_convergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("class.json");
    std::fs::write(&path, r#"{"rows": [[0.0, 0.3, 1.0], [2.0, 1.1, -1.0], [0.5, 0.5, 0.5]], "y": [1.0, 0.2, 0.4]}"#).unwrap();
    let p = path.to_str().unwrap();
    let o = agglab(&["estimate", "--config", p, "--estimator", "qagg", "--beta", "3", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = agglab(&["estimate", "--config", p, "--estimator", "qagg", "--beta", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let w: Vec<f64> = v["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(w.len(), 3);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(v["objective"].as_f64().is_some());
    let o = agglab(&["estimate", "--config", p, "--estimator", "ew", "--beta", "0"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for x in v["weights"].as_array().unwrap() {
        assert!((x.as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    let spec = instances::fixed_dictionary(40, 3, 0.5, 11);
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let p = path.to_str().unwrap();
    let from_file = stdout(&agglab(&["check", "--thm", "fixed-ew", "--config", p, "--reps", "20"]));
    assert!(from_file.lines().nth(1).unwrap().starts_with("fixed-ew,ew,11,20,40,3,"));
    let overridden = stdout(&agglab(&["check", "--thm", "fixed-ew", "--config", p, "--reps", "20", "--n", "60", "--seed", "5"]));
    assert!(overridden.lines().nth(1).unwrap().starts_with("fixed-ew,ew,5,20,60,3,"));
}

#[test]
fn json_output_and_file_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = agglab(&[
        "check", "--thm", "ridge", "--n", "30", "--reps", "20", "--lambda", "0.5", "--format", "json", "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["experiment"], "ridge-fw");
    assert_eq!(rows[0]["M"], 0);
    assert_eq!(rows[0]["d"], 2);
}

#[test]
fn experiment_command_runs_estimators() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    let spec = instances::random_dictionary(30, 4, 5, 1.0, true, 3).unwrap();
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let p = path.to_str().unwrap();
    for est in ["ew", "qagg", "progressive", "prior-mean"] {
        let o = agglab(&["experiment", "--config", p, "--estimator", est, "--reps", "20"]);
        assert_eq!(o.status.code(), Some(0), "{est}");
        assert!(stdout(&o).lines().nth(1).unwrap().starts_with(&format!("mc,{est},3,20,30,4,1,")));
    }
    // linear estimators fit on the covariates and ignore the class
    let o = agglab(&["experiment", "--config", p, "--estimator", "ridge", "--reps", "20"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn complexity_command_output() {
    let o = agglab(&["complexity", "--risks", "0,1", "--betas", "0,1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "beta,global,local\n0,0.5,0.5\n1,0.379885493042,0.26894142137\n");
}

#[test]
fn identical_argv_gives_identical_bytes() {
    let args = ["check", "--thm", "fixed-q", "--n", "60", "--M", "5", "--reps", "50", "--seed", "3"];
    assert_eq!(agglab(&args).stdout, agglab(&args).stdout);
}
