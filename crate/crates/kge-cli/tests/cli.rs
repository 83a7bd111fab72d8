//! End-to-end tests of the `kge` binary: command plumbing, output files,
//! exit codes, and manifest reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kge"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary runs").status.code().unwrap_or(-1)
}

fn synth(dir: &Path, pattern: &str, entities: usize, pairs: usize, fan: usize) -> PathBuf {
    let ds = dir.join("ds");
    run_ok(kge()
        .arg("synth")
        .args(["--pattern", pattern])
        .args(["--entities", &entities.to_string()])
        .args(["--pairs", &pairs.to_string()])
        .args(["--fan", &fan.to_string()])
        .args(["--seed", "3"])
        .arg("--out")
        .arg(&ds));
    ds
}

fn train_small(dir: &Path, ds: &Path, out_name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(out_name);
    let mut cmd = kge();
    cmd.arg("train")
        .args(["--model", "distmult", "--dim", "8", "--k", "2"])
        .arg("--dataset")
        .arg(ds)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "5", "--max-epochs", "3", "--batches", "5", "--eta", "2"])
        .args(extra);
    run_ok(&mut cmd);
    out
}

#[test]
fn synth_round_trips_through_the_loader() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "symmetric", 100, 200, 1);
    for file in ["train.txt", "valid.txt", "test.txt", "manifest.json"] {
        assert!(ds.join(file).is_file(), "{file} missing");
    }
    // Loadable: training on it succeeds.
    train_small(tmp.path(), &ds, "run", &[]);
}

#[test]
fn synth_n1_respects_fan() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "n-1", 100, 12, 5);
    let mut heads_per_tail = std::collections::HashMap::new();
    for file in ["train.txt", "valid.txt", "test.txt"] {
        let text = std::fs::read_to_string(ds.join(file)).unwrap();
        for line in text.lines() {
            let tail = line.split('\t').nth(2).unwrap().to_string();
            *heads_per_tail.entry(tail).or_insert(0usize) += 1;
        }
    }
    assert_eq!(heads_per_tail.len(), 12);
    assert!(heads_per_tail.values().all(|&c| c == 5));
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), "mixed", 60, 300, 2);
    let b_dir = tempfile::tempdir().unwrap();
    let b = synth(b_dir.path(), "mixed", 60, 300, 2);
    for file in ["train.txt", "valid.txt", "test.txt"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn train_writes_checkpoint_curves_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let run = train_small(tmp.path(), &ds, "run", &[]);
    assert!(run.join("run-0.kgee").is_file());
    assert!(run.join("run-0-replica-0.curve.csv").is_file());
    assert!(run.join("run-0-replica-1.curve.csv").is_file());
    assert!(run.join("manifest.json").is_file());
    assert!(run.join("config.conf").is_file());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["resolved"]["dim"], "8");
    // Fully resolved: defaults are explicit.
    assert_eq!(manifest["resolved"]["lr"], "0.0003");
    assert_eq!(manifest["resolved"]["patience"], "3");
    let curve = std::fs::read_to_string(run.join("run-0-replica-0.curve.csv")).unwrap();
    assert!(curve.starts_with("epoch,mean_loss,valid_mrr,wall_seconds\n"));
    assert_eq!(curve.lines().count(), 4); // header + 3 epochs
}

#[test]
fn training_is_reproducible_from_the_manifest_config() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let run1 = train_small(tmp.path(), &ds, "run1", &[]);
    let run2 = tmp.path().join("run2");
    run_ok(kge()
        .arg("train")
        .arg("--config")
        .arg(run1.join("config.conf"))
        .arg("--out")
        .arg(&run2));
    assert_eq!(
        std::fs::read(run1.join("run-0.kgee")).unwrap(),
        std::fs::read(run2.join("run-0.kgee")).unwrap(),
        "checkpoints differ between original run and manifest replay"
    );
}

#[test]
fn repeated_training_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let run1 = train_small(tmp.path(), &ds, "run1", &[]);
    let run2 = train_small(tmp.path(), &ds, "run2", &[]);
    assert_eq!(
        std::fs::read(run1.join("run-0.kgee")).unwrap(),
        std::fs::read(run2.join("run-0.kgee")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let conf = tmp.path().join("base.conf");
    std::fs::write(&conf, "model=distmult\ndim=8\nk=1\nmax-epochs=2\nbatches=5\neta=2\nseed=9\n")
        .unwrap();
    let out = tmp.path().join("run");
    let mut cmd = kge();
    cmd.arg("train")
        .arg("--config")
        .arg(&conf)
        .arg("--dataset")
        .arg(&ds)
        .arg("--out")
        .arg(&out)
        .args(["--k", "3"]);
    run_ok(&mut cmd);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["resolved"]["k"], "3"); // flag wins
    assert_eq!(manifest["resolved"]["seed"], "9"); // file beats default
}

#[test]
fn eval_single_checkpoint_emits_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let run = train_small(tmp.path(), &ds, "run", &[]);
    let eval_dir = tmp.path().join("eval");
    run_ok(kge()
        .arg("eval")
        .arg("--dataset")
        .arg(&ds)
        .arg("--out")
        .arg(&eval_dir)
        .arg(run.join("run-0.kgee")));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["k"], 2);
    assert_eq!(metrics["seed_count"], 1);
    assert!(metrics["aggregate"]["mrr"]["mean"].as_f64().unwrap() > 0.0);
    assert!(metrics["runs"][0]["hits"]["10"].is_number());
    // Per-triple ranks are retained for a single run.
    assert!(!metrics["runs"][0]["ranks"].as_array().unwrap().is_empty());
    let summary = std::fs::read_to_string(eval_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("model,kind,d_l,k,seed_count,mrr_mean,mrr_std,"));
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("MDistMult,DistMult,8,2,1,"));
}

#[test]
fn eval_aggregates_seed_varied_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let run = train_small(tmp.path(), &ds, "run", &["--runs", "3"]);
    let eval_dir = tmp.path().join("eval");
    run_ok(kge()
        .arg("eval")
        .arg("--dataset")
        .arg(&ds)
        .arg("--out")
        .arg(&eval_dir)
        .arg(run.join("run-0.kgee"))
        .arg(run.join("run-1.kgee"))
        .arg(run.join("run-2.kgee")));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["seed_count"], 3);
    assert!(metrics["aggregate"]["mrr"]["std"].as_f64().unwrap() >= 0.0);
    let summary = std::fs::read_to_string(eval_dir.join("summary.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    assert!(row.contains(",3,"), "seed_count column should be 3: {row}");
}

#[test]
fn eval_rejects_wrong_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let run = train_small(tmp.path(), &ds, "run", &[]);
    let other_dir = tempfile::tempdir().unwrap();
    let other = other_dir.path().join("ds");
    run_ok(kge()
        .arg("synth")
        .args(["--pattern", "mixed", "--entities", "80", "--pairs", "300", "--fan", "2", "--seed", "4"])
        .arg("--out")
        .arg(&other));
    let code = exit_code(kge()
        .arg("eval")
        .arg("--dataset")
        .arg(&other)
        .arg("--out")
        .arg(tmp.path().join("eval"))
        .arg(run.join("run-0.kgee")));
    assert_eq!(code, 2);
}

#[test]
fn analyze_without_checkpoint_writes_two_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let out = tmp.path().join("analysis");
    run_ok(kge()
        .arg("analyze")
        .arg("--dataset")
        .arg(&ds)
        .arg("--out")
        .arg(&out)
        .args(["--sym-threshold", "0.6"]));
    assert!(out.join("categories.csv").is_file());
    assert!(out.join("rules.csv").is_file());
    assert!(!out.join("breakdown.csv").exists());
    let rules = std::fs::read_to_string(out.join("rules.csv")).unwrap();
    assert!(rules.lines().count() >= 2, "symmetric relation not mined: {rules}");
    assert!(rules.contains("r_sym"));
    let cats = std::fs::read_to_string(out.join("categories.csv")).unwrap();
    for label in ["1-1", "1-n", "n-1", "n-n"] {
        assert!(cats.contains(label), "missing {label} in {cats}");
    }
}

#[test]
fn analyze_with_checkpoint_adds_breakdown() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let run = train_small(tmp.path(), &ds, "run", &[]);
    let out = tmp.path().join("analysis");
    run_ok(kge()
        .arg("analyze")
        .arg("--dataset")
        .arg(&ds)
        .arg("--checkpoint")
        .arg(run.join("run-0.kgee"))
        .arg("--out")
        .arg(&out));
    let breakdown = std::fs::read_to_string(out.join("breakdown.csv")).unwrap();
    assert!(breakdown.starts_with("category,test_triples,mrr,"));
    assert_eq!(breakdown.lines().count(), 6); // header + 4 categories + symmetric
}

#[test]
fn impossible_symmetric_threshold_mines_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let out = tmp.path().join("analysis");
    run_ok(kge()
        .arg("analyze")
        .arg("--dataset")
        .arg(&ds)
        .arg("--out")
        .arg(&out)
        .args(["--sym-threshold", "1.01"]));
    let rules = std::fs::read_to_string(out.join("rules.csv")).unwrap();
    assert_eq!(rules.lines().count(), 1, "expected only the header: {rules}");
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);

    // 1: usage errors.
    assert_eq!(exit_code(kge().arg("train").arg("--no-such-flag")), 1);
    assert_eq!(
        exit_code(kge().args(["train", "--model", "nosuch", "--dataset", "x", "--out", "y"])),
        1
    );
    let code = exit_code(kge()
        .args(["train", "--model", "rotate", "--dim", "7"])
        .arg("--dataset")
        .arg(&ds)
        .arg("--out")
        .arg(tmp.path().join("run")));
    assert_eq!(code, 1, "odd complex dim is a usage error");

    // 2: data errors.
    assert_eq!(
        exit_code(kge()
            .args(["train", "--model", "transe"])
            .arg("--dataset")
            .arg(tmp.path().join("nonexistent"))
            .arg("--out")
            .arg(tmp.path().join("run"))),
        2
    );
    let truncated = tmp.path().join("broken.kgee");
    std::fs::write(&truncated, b"KGEE\x01\x00garbage").unwrap();
    assert_eq!(
        exit_code(kge()
            .arg("eval")
            .arg("--dataset")
            .arg(&ds)
            .arg("--out")
            .arg(tmp.path().join("eval"))
            .arg(&truncated)),
        2
    );

    // 0: success (and --help).
    assert_eq!(exit_code(kge().arg("--help")), 0);
}

#[test]
fn kge_threads_env_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth(tmp.path(), "mixed", 60, 300, 2);
    let out = tmp.path().join("run");
    let mut cmd = kge();
    cmd.env("KGE_THREADS", "1")
        .arg("train")
        .args(["--model", "distmult", "--dim", "8", "--k", "2", "--workers", "4"])
        .arg("--dataset")
        .arg(&ds)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "5", "--max-epochs", "2", "--batches", "5", "--eta", "2"]);
    run_ok(&mut cmd);
    assert!(out.join("run-0.kgee").is_file());
}
