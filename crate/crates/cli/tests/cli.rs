use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn ctd(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctd"))
        .args(args)
        .env("CTD_OUT", out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("ctd runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config(dir: &Path) -> String {
    let phase = json!({"sizes": {"train": 40, "val": 20, "test": 20}, "epochs": 1, "patience": 1});
    let cfg = json!({
        "arch": {"hidden": 16, "latent": 32},
        "decompose": phase,
        "compose": phase,
    });
    let p = dir.join("tiny.json");
    std::fs::write(&p, cfg.to_string()).unwrap();
    p.display().to_string()
}

#[test]
fn dry_run_prints_one_config_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctd(&["train", "--regime", "D", "--seed", "1,2", "--dry-run"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(s.matches("# config").count(), 2);
    assert!(s.contains("\"seed\": 1") && s.contains("\"seed\": 2"));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none(), "dry run wrote files");
}

#[test]
fn train_needs_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = ctd(&["train", "--config", &cfg, "--regime", "D"], &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ctd gen"), "{}", stderr(&o));
}

#[test]
fn ctd_without_decompose_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("out");
    assert!(ctd(&["gen", "--config", &cfg], &out).status.success());
    let o = ctd(&["train", "--config", &cfg, "--regime", "CTD"], &out);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("checkpoint"), "{}", stderr(&o));
}

#[test]
fn full_pipeline_writes_runs_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("out");
    let o = ctd(&["gen", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = ctd(&["train", "--config", &cfg, "--regime", "D,CTD,CTDZS,CD"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);

    let d = out.join("runs/thing-cb-D-seed0");
    for f in ["config.json", "report.json", "corpus.jsonl", "checkpoint.ctd", "codebook.json"] {
        assert!(d.join(f).exists(), "missing {f}");
    }
    let zs = out.join("runs/thing-cb-CTDZS-seed0");
    assert!(zs.join("report.json").exists() && !zs.join("checkpoint.ctd").exists());

    let ckpt = d.join("checkpoint.ctd").display().to_string();
    let data = out.join("data/thing-seed0/compose.jsonl").display().to_string();
    let o = ctd(&["eval", "--config", &cfg, "--checkpoint", &ckpt, "--data", &data, "--zero-shot"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let eval: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("eval.json")).unwrap()).unwrap();
    let zs_report: serde_json::Value = serde_json::from_slice(&std::fs::read(zs.join("report.json")).unwrap()).unwrap();
    assert_eq!(eval["test"], zs_report["test"]);

    let corpus = d.join("corpus.jsonl").display().to_string();
    let o = ctd(&["eval", "--corpus-only", "--corpus", &corpus, "--acc", "0.5"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(m["ACC"], 0.5);

    let table = out.join("table.csv");
    let o = ctd(&["report", &out.join("runs").display().to_string(), "--output", &table.display().to_string()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(table).unwrap();
    let regimes: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(regimes, ["D", "C/D", "CtD", "CtD-ZS"]);
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let bytes = |name: &str| {
        let out = dir.path().join(name);
        assert!(ctd(&["gen", "--config", &cfg], &out).status.success());
        assert!(ctd(&["train", "--config", &cfg, "--regime", "D"], &out).status.success());
        std::fs::read(out.join("runs/thing-cb-D-seed0/checkpoint.ctd")).unwrap()
    };
    assert_eq!(bytes("a"), bytes("b"));
}

fn report(regime: &str, seed: u64, acc: f64, cbm: f64) -> serde_json::Value {
    json!({
        "schema": 1, "regime": regime, "dataset": "THING", "comm": "CB", "seed": seed,
        "config_hash": "00", "#v": 50, "#c": 50, "#p": 958, "l": 5, "phases": [],
        "test": {
            "ACC": acc, "AMI": 1.0, "POS": 0.04, "BOS": 0.98, "CI": 1.0, "CBM": cbm,
            "#w": 50, "#m": 958, "ratio": 1.0, "ci_converged": true, "ambiguous": 0.0, "paraphrase": 0.0
        }
    })
}

#[test]
fn aggregate_table_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [
        ("CtD", 0, 1.0, 1.0),
        ("CtD", 1, 0.98, 0.96),
        ("C/D", 0, 0.3, 0.2),
        ("C/D", 1, 0.2, 0.3),
        ("CtD-ZS", 0, 1.0, 1.0),
    ];
    for (i, &(r, s, acc, cbm)) in runs.iter().enumerate() {
        let d = dir.path().join(format!("run{i}"));
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(d.join("report.json"), report(r, s, acc, cbm).to_string()).unwrap();
    }
    let o = ctd(&["report", "--aggregate", &dir.path().display().to_string()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/aggregate.csv")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn report_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctd(&["report", &dir.path().display().to_string()], dir.path());
    assert!(!o.status.success());
}
