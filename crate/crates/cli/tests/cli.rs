mod common;

use std::path::Path;
use std::process::{Command, Output};

fn recourse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recourse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = recourse(args);
    assert!(
        out.status.success(),
        "recourse {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn evaluate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let toy = common::config("toy2");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "evaluate", "--config", p(&toy), "--seed", "4", "--out", p(out), "--generator", "exhaustive",
            "--users", "10", "--q", "3", "--k", "2,3",
        ]);
    }
    for file in ["curves.csv", "summary.csv", "errors.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
    let curves = std::fs::read_to_string(a.join("curves.csv")).unwrap();
    // header plus q = 0..=3 for two set sizes
    assert_eq!(curves.lines().count(), 1 + 2 * 4);
}

#[test]
fn missing_model_is_a_clear_error() {
    let dir = tempfile::tempdir().unwrap();
    let toy = common::config("toy2");
    let out = recourse(&["evaluate", "--config", p(&toy), "--out", p(dir.path()), "--generator", "wfare"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model artifact not found"), "{err}");

    let out = recourse(&["evaluate", "--config", p(&toy), "--out", p(dir.path()), "--generator", "bogus"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown generator"));
}

#[test]
fn simulated_transcripts_replay_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let toy = common::config("toy2");
    let common_args = ["--config", p(&toy), "--seed", "2", "--generator", "exhaustive", "--users", "5", "--q", "3"];
    let sim = dir.path().join("sim");
    let mut args = vec!["simulate", "--out", p(&sim)];
    args.extend(common_args);
    ok(&args);
    let transcripts = sim.join("transcripts");
    let count = std::fs::read_dir(&transcripts).unwrap().count();
    assert!(count >= 5, "{count} transcripts");

    let rep = dir.path().join("replay");
    let mut args = vec!["evaluate", "--out", p(&rep), "--transcripts", p(&transcripts)];
    args.extend(common_args);
    let stdout = ok(&args);
    assert!(stdout.contains(", 0 diverged"), "{stdout}");
    let csv = std::fs::read_to_string(rep.join("replay.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")), "{csv}");

    // a tampered choice no longer reproduces the recorded rounds
    let first = std::fs::read_dir(&transcripts).unwrap().next().unwrap().unwrap().path();
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let rounds = doc["transcript"]["rounds"].as_array_mut().unwrap();
    let chosen = rounds[0]["chosen"].as_u64().unwrap();
    rounds[0]["chosen"] = serde_json::json!(1 - chosen.min(1));
    std::fs::write(&first, serde_json::to_vec(&doc).unwrap()).unwrap();
    let mut args = vec!["evaluate", "--out", p(&rep), "--transcripts", p(&transcripts)];
    args.extend(common_args);
    let out = recourse(&args);
    assert!(!out.status.success());
}

#[test]
fn train_extract_and_evaluate_with_learned_generators() {
    let dir = tempfile::tempdir().unwrap();
    let toy = common::config("toy2");
    let out = dir.path();
    let stdout = ok(&["train", "--config", p(&toy), "--seed", "1", "--out", p(out)]);
    assert!(stdout.contains("validity"), "{stdout}");
    assert!(out.join("wfare.json").is_file());
    assert!(out.join("training.csv").is_file());
    ok(&["extract-efare", "--config", p(&toy), "--seed", "1", "--out", p(out), "--traces", "120"]);
    assert!(out.join("wefare.json").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("extract_report.json")).unwrap()).unwrap();
    assert!(report["transition_fidelity"].as_f64().unwrap() > 0.5, "{report}");
    for generator in ["wfare", "wefare"] {
        let eval = out.join(generator);
        ok(&[
            "evaluate", "--config", p(&toy), "--out", p(&eval), "--models", p(out), "--generator", generator,
            "--users", "4", "--q", "2", "--k", "2",
        ]);
        assert!(eval.join("summary.csv").is_file());
    }
}
