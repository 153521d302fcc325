//! End-to-end runs of the `prospect-mdp` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prospect_mdp::cli::{LearnSummary, SolveOutcome, SolveReport, SWEEP_HEADER};
use prospect_mdp::environments::{build_betting_game, BettingGameSpec};
use prospect_mdp::learning::LearnTrace;
use prospect_mdp::maps::ExpectationMap;
use prospect_mdp::solvers::value_iteration_discounted;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prospect-mdp"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: Option<&Path>) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--config").arg(config);
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BETTING: &str = r#"{"mdp": {"source": "betting"}, "criterion": "discounted:0.99", "tolerance": 1e-10}"#;

const TWO_CYCLE: &str = r#"{"n_states": 2, "n_actions": 1,
    "transitions": [[[0.0, 1.0]], [[1.0, 0.0]]], "rewards": [[0.0], [2.0]]}"#;

#[test]
fn solve_writes_a_result_matching_the_library() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", BETTING);
    let out = dir.path().join("out");
    let o = run(&["solve"], &cfg, Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let text = fs::read_to_string(out.join("result.json")).unwrap();
    let report: SolveReport = serde_json::from_str(&text).unwrap();
    let m = build_betting_game(&BettingGameSpec::default()).unwrap();
    let want = value_iteration_discounted(&m, &ExpectationMap, 0.99, &[0.0; 6], 1e-10, 1_000_000).unwrap();
    let SolveOutcome::Discounted(got) = &report.result else { panic!("wrong outcome kind") };
    assert_eq!(got.value, want.value);
    assert_eq!(report.start_value, want.value[0]);
    // JSON round trip is lossless
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);

    let policy = fs::read_to_string(out.join("policy.txt")).unwrap();
    assert!(policy.contains("no") && policy.contains("bet"));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp": {"source": "gridworld", "side": 5, "danger_cells": [[3, 1]]},
            "map": {"kind": "entropic", "lambda": -0.2},
            "learning": {"trials": 3, "episodes": 20, "steps_per_episode": 40}}"#,
    );
    for args in [["solve"], ["learn"]] {
        let a = dir.path().join(format!("{}_a", args[0]));
        let b = dir.path().join(format!("{}_b", args[0]));
        assert_eq!(run(&args, &cfg, Some(&a)).status.code(), Some(0));
        assert_eq!(run(&args, &cfg, Some(&b)).status.code(), Some(0));
        for entry in fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
        }
    }
    // a different seed changes the learning run
    let c = dir.path().join("learn_c");
    let o = bin().args(["learn", "--seed", "7", "--config"]).arg(&cfg).arg("--out").arg(&c).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(
        fs::read(dir.path().join("learn_a/qtable.json")).unwrap(),
        fs::read(c.join("qtable.json")).unwrap()
    );
}

#[test]
fn learn_outputs_have_the_documented_shape() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp": {"source": "gridworld", "side": 4, "danger_cells": []},
            "learning": {"algorithm": "dyna_q", "trials": 2, "episodes": 5, "steps_per_episode": 20}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["learn"], &cfg, Some(&out)).status.code(), Some(0));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some(LearnTrace::CSV_HEADER));
    assert_eq!(trace.lines().count(), 6);
    let summary: LearnSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.trials, 2);
    assert!(summary.v1_star > 0.0);
}

#[test]
fn q_learning_requires_an_entropic_map() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"mdp": {"source": "gridworld"}, "learning": {"algorithm": "q_learning"}}"#);
    let o = run(&["learn"], &cfg, None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("E_INPUT"));
}

#[test]
fn sweep_csv_header_and_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp": {"source": "betting"}, "map": {"kind": "entropic", "lambda": 1},
            "criterion": "discounted:0.99",
            "sweep": {"param": "lambda", "values": [-0.1, 0.1]}}"#,
    );
    let o = run(&["sweep"], &cfg, None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SWEEP_HEADER.join(","));
    assert!(lines.next().unwrap().starts_with("-0.1,2.52512499417,\"no,no\","));
    assert!(lines.next().unwrap().contains("\"bet,bet\""));
}

#[test]
fn sweep_input_errors() {
    let dir = TempDir::new().unwrap();
    for body in [
        r#"{"mdp": {"source": "betting"}, "sweep": {"param": "lambda", "values": []}}"#,
        r#"{"mdp": {"source": "betting"}, "sweep": {"param": "colour", "values": [1]}}"#,
        r#"{"mdp": {"source": "betting"}}"#,
    ] {
        let cfg = write(dir.path(), "c.json", body);
        let o = run(&["sweep"], &cfg, None);
        assert_eq!(o.status.code(), Some(1), "{body}");
        assert!(stderr(&o).contains("E_INPUT"));
    }
}

#[test]
fn malformed_inputs_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("{\"mdp\": ", "E_PARSE"),
        (r#"{"mdp": {"source": "betting"}, "colour": 1}"#, "E_PARSE"),
        (r#"{"mdp": {"source": "inline", "mdp": {"n_states": 1, "n_actions": 1, "transitions": [[[0.5]]], "rewards": [[0]]}}}"#, "E_PARSE"),
        (r#"{"mdp": {"source": "betting"}, "map": {"kind": "cvar", "tau": 0}}"#, "E_INPUT"),
        (r#"{"mdp": {"source": "file", "path": "missing.json"}}"#, "E_IO"),
    ];
    for (body, code) in cases {
        let cfg = write(dir.path(), "c.json", body);
        let o = run(&["solve"], &cfg, None);
        assert_eq!(o.status.code(), Some(1), "{body}");
        assert!(stderr(&o).contains(code), "{body}: {}", stderr(&o));
    }
    let o = run(&["solve"], &dir.path().join("nope.json"), None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("E_IO"));
}

#[test]
fn periodic_average_reports_nonconvergence_then_recovers() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cycle.json", TWO_CYCLE);
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp": {"source": "file", "path": "cycle.json"}, "criterion": "average", "max_iter": 500}"#,
    );
    let o = run(&["solve"], &cfg, Some(&dir.path().join("a")));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("E_NOCONV") && err.contains("hint:") && err.contains("--aperiodicity"));
    // the partial result is still written
    assert!(dir.path().join("a/result.json").exists());

    let out = dir.path().join("b");
    let o = bin()
        .args(["solve", "--aperiodicity", "0.1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: SolveReport = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    let SolveOutcome::Average(r) = report.result else { panic!("wrong outcome kind") };
    assert!((r.gain - 1.0).abs() < 1e-6);
}

#[test]
fn mdp_flag_overrides_the_configured_source() {
    let dir = TempDir::new().unwrap();
    let mdp = write(dir.path(), "cycle.json", TWO_CYCLE);
    let cfg = write(dir.path(), "c.json", BETTING);
    let o = bin().args(["solve", "--config"]).arg(&cfg).arg("--mdp").arg(&mdp).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"start_value\": 99.49"), "{text}");
}

#[test]
fn check_exit_codes_follow_the_axioms() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "good.json", r#"{"mdp": {"source": "betting"}, "map": {"kind": "entropic", "lambda": -1}}"#);
    let out = dir.path().join("good");
    assert_eq!(run(&["check"], &good, Some(&out)).status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("axioms.json")).unwrap()).unwrap();
    assert_eq!(report["homogeneity"]["passed"], false);
    assert_eq!(report["risk_class"], "averse");

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"mdp": {"source": "betting"},
            "map": {"kind": "probability_weighting", "weighting": {"kind": "power", "exponent": 2}}}"#,
    );
    let out = dir.path().join("bad");
    let o = run(&["check"], &bad, Some(&out));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("E_AXIOM") && stderr(&o).contains("translation"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("axioms.json")).unwrap()).unwrap();
    assert_eq!(report["translation"]["passed"], false);
    assert!(report["translation"]["witness"]["scalar"].is_number());
}

#[test]
fn finite_criterion_writes_every_stage() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"mdp": {"source": "betting"}, "criterion": "finite:3"}"#);
    let out = dir.path().join("out");
    assert_eq!(run(&["solve"], &cfg, Some(&out)).status.code(), Some(0));
    let policy = fs::read_to_string(out.join("policy.txt")).unwrap();
    assert_eq!(policy.matches("stage ").count(), 4);
}
