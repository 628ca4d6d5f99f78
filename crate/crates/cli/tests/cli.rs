use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn instances() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deadend-mdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn instance(name: &str) -> String {
    instances().join(name).to_string_lossy().into_owned()
}

const DEAD_START: &str = r#"{
  "states": ["s", "g"],
  "actions": ["loop"],
  "goals": ["g"],
  "start": "s",
  "penalty": 7,
  "transitions": [
    {"state": "s", "action": "loop", "cost": 1, "outcomes": [{"next": "s", "p": 1}]}
  ]
}"#;

#[test]
fn solve_three_state_all_algorithms() {
    let input = instance("three_state.json");
    for algo in ["vi-fsspude", "ivi", "lrtdp", "shs"] {
        let out = run(&["solve", "--algo", algo, "--input", &input]);
        assert_eq!(
            code(&out),
            0,
            "{algo}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v = json(&out);
        assert_eq!(v["converged"], true);
        assert_eq!(v["start"], "s0");
        assert!(
            (v["start_value"].as_f64().unwrap() - 3.0).abs() < 1e-6,
            "{algo}: {v}"
        );
    }
    for algo in ["vi-mp", "fret"] {
        let v = json(&run(&["solve", "--algo", algo, "--input", &input]));
        assert!(
            (v["start_prob"].as_f64().unwrap() - 1.0).abs() < 1e-6,
            "{algo}: {v}"
        );
    }
    let v = json(&run(&["solve", "--algo", "ivi", "--input", &input]));
    assert_eq!(v["policy"]["s0"], "a_g");
}

#[test]
fn solve_writes_policy_that_simulates() {
    let dir = tempfile::tempdir().unwrap();
    let pol = dir.path().join("p.json");
    let input = instance("grid_open.json");
    let out = run(&[
        "solve",
        "--algo",
        "vi-ssp",
        "--input",
        &input,
        "--out",
        pol.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&pol).unwrap()).unwrap();
    assert!(doc["policy"].as_object().unwrap().len() >= 35);

    let sim = run(&[
        "simulate",
        "--input",
        &input,
        "--policy",
        pol.to_str().unwrap(),
        "--trials",
        "2000",
        "--horizon",
        "10000",
        "--seed",
        "5",
    ]);
    assert_eq!(code(&sim), 0);
    let r = json(&sim);
    assert_eq!(r["goal_hits"], 2000);
    assert_eq!(r["seed"], 5);
}

#[test]
fn budget_exhaustion_exits_2() {
    let input = instance("grid_hazard.json");
    for algo in ["vi-fsspude", "lrtdp"] {
        let out = run(&[
            "solve",
            "--algo",
            algo,
            "--input",
            &input,
            "--penalty",
            "500",
            "--max-backups",
            "50",
        ]);
        assert_eq!(code(&out), 2, "{algo}");
        assert_eq!(json(&out)["converged"], false);
    }
}

#[test]
fn dead_start_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dead.json");
    std::fs::write(&path, DEAD_START).unwrap();
    let out = run(&[
        "solve",
        "--algo",
        "vi-fsspude",
        "--input",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
    let v = json(&out);
    assert_eq!(v["dead_start"], true);
    assert!((v["start_value"].as_f64().unwrap() - 7.0).abs() < 1e-9);
}

#[test]
fn input_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = run(&[
        "solve",
        "--algo",
        "ivi",
        "--input",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"states": ["a"], "goals": ["zz"]}"#).unwrap();
    assert_eq!(
        code(&run(&[
            "solve",
            "--algo",
            "ivi",
            "--input",
            bad.to_str().unwrap()
        ])),
        3
    );

    let input = instance("three_state.json");
    assert_eq!(
        code(&run(&["solve", "--algo", "nope", "--input", &input])),
        3
    );
    assert_eq!(
        code(&run(&[
            "solve",
            "--algo",
            "ivi",
            "--input",
            &input,
            "--penalty",
            "-1"
        ])),
        3
    );
    assert_eq!(code(&run(&["frobnicate"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn oracle_reports_tie() {
    let input = instance("three_state.json");
    let out = run(&["oracle", "--criterion", "finite-penalty", "--input", &input]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["optimal"].as_array().unwrap().len(), 2);
    assert!((v["start_value"].as_f64().unwrap() - 3.0).abs() < 1e-9);

    let lex = json(&run(&["oracle", "--criterion", "lex", "--input", &input]));
    assert_eq!(lex["optimal"].as_array().unwrap().len(), 1);
    assert_eq!(lex["start_prob"], 1.0);

    let inf = instance("half_chance.json");
    assert_eq!(
        code(&run(&[
            "oracle",
            "--criterion",
            "finite-penalty",
            "--input",
            &inf
        ])),
        3
    );
}

#[test]
fn sweep_penalty_on_three_state() {
    let input = instance("three_state.json");
    let out = run(&[
        "sweep-penalty",
        "--input",
        &input,
        "--dmin",
        "1",
        "--dmax",
        "100",
        "--steps",
        "9",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json(&out).is_object());
    assert_eq!(
        code(&run(&[
            "sweep-penalty",
            "--input",
            &input,
            "--dmin",
            "10",
            "--dmax",
            "1",
            "--steps",
            "3",
        ])),
        3
    );
}

#[test]
fn gen_grid_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = instance("grid_pits.spec.json");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = run(&[
            "gen-grid",
            "--spec",
            &spec,
            "--seed",
            "9",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        assert_eq!(json(&out)["pits"], 8);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    std::fs::write(
        &manifest,
        r#"{"config": {"penalty": 50},
            "instances": [{"name": "tiny", "grid": {"width": 4, "height": 4, "start": [0, 0], "goal": [3, 3], "p_slip": 0.1}}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    std::fs::create_dir(&out_dir).unwrap();
    let out = run(&[
        "bench",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("tiny"));
    let table: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("bench.json")).unwrap())
            .unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 1);
    assert!(out_dir.join("bench.txt").exists());
}
