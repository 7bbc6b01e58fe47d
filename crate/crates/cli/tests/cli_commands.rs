//! End-to-end tests that drive the compiled binary the way a user would:
//! real files, real exit codes, captured output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sugmine::metrics::MetricReport;
use sugmine::predictions::PredictionSet;

fn sugmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sugmine"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn out_str(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn err_str(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

const TRAIN_CSV: &str = "id,sentence,label\n\
t1,please add a dark mode,1\n\
t2,you should support offline use,1\n\
t3,it would help to allow custom fonts,1\n\
t4,i wish it could export to pdf,1\n\
t5,the app crashed twice today,0\n\
t6,the screen stays blank after login,0\n\
t7,my battery drains fast with this,0\n\
t8,the update broke my saved files,0\n";

const VAL_CSV: &str = "id,sentence,label\n\
v1,please allow bigger fonts,1\n\
v2,you should add a search bar,1\n\
v3,the login page keeps crashing,0\n\
v4,my files vanished after the update,0\n";

fn write_tiny_setup(dir: &Path) -> PathBuf {
    fs::write(dir.join("train.csv"), TRAIN_CSV).unwrap();
    fs::write(dir.join("val.csv"), VAL_CSV).unwrap();
    let cfg = serde_json::json!({
        "model": {
            "encoder": {
                "num_layers": 1,
                "bidirectional": true,
                "hidden_size": 6,
                "inter_layer_dropout": 0.0,
                "attention": true
            },
            "embedding_dim": 4,
            "dropout_embed": 0.0,
            "dropout_attn": 0.0,
            "num_classes": 2,
            "class_weights": [1.0, 1.0]
        },
        "train": {"epochs": 3, "learning_rate": 0.01, "seed": 7, "optimizer": "adam"},
        "data": {"train": "train.csv", "val": "val.csv"}
    });
    let p = dir.join("exp.json");
    fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

#[test]
fn preprocess_tokenizes_and_reports_stage_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    fs::write(&input, "id,sentence,label\na,\"I'll love it, won't I?\",1\n").unwrap();
    let before = fs::read(&input).unwrap();
    let out = dir.path().join("out.csv");

    let o = sugmine(&["preprocess", &s(&input), "--out", &s(&out)]);
    assert!(o.status.success(), "{}", err_str(&o));
    let stdout = out_str(&o);
    assert!(stdout.contains("expand_phrase"), "{stdout}");
    assert!(stdout.contains("wrote 1 rows"), "{stdout}");

    let written = fs::read_to_string(&out).unwrap();
    assert!(
        written.contains("\"i will love it , will not i ?\""),
        "{written}"
    );
    assert_eq!(fs::read(&input).unwrap(), before, "input was mutated");
}

#[test]
fn preprocess_empty_input_warns_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let out = dir.path().join("out.csv");

    let o = sugmine(&["preprocess", &s(&input), "--out", &s(&out)]);
    assert!(o.status.success());
    assert!(err_str(&o).contains("empty"), "{}", err_str(&o));
    assert_eq!(fs::read_to_string(&out).unwrap(), "id,sentence,label\n");
}

#[test]
fn preprocess_malformed_row_fails_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "id,sentence,label\na,\"unclosed quote,1\n").unwrap();
    let out = dir.path().join("out.csv");

    let o = sugmine(&["preprocess", &s(&input), "--out", &s(&out)]);
    assert!(!o.status.success());
    let stderr = err_str(&o);
    assert!(stderr.contains("bad.csv"), "{stderr}");
    assert!(stderr.contains('2'), "{stderr}");
}

#[test]
fn train_rejects_invalid_configs_before_any_compute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_tiny_setup(dir.path());

    // dangling data path
    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["data"]["train"] = serde_json::json!("missing.csv");
    let bad = dir.path().join("bad1.json");
    fs::write(&bad, cfg.to_string()).unwrap();
    let o = sugmine(&["train", "--config", &s(&bad), "--out", &s(&dir.path().join("r1"))]);
    assert!(!o.status.success());
    assert!(err_str(&o).contains("data.train"), "{}", err_str(&o));

    // pretrained source without a vectors path
    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["embedding"] = serde_json::json!({"source": "pretrained_file"});
    let bad = dir.path().join("bad2.json");
    fs::write(&bad, cfg.to_string()).unwrap();
    let o = sugmine(&["train", "--config", &s(&bad), "--out", &s(&dir.path().join("r2"))]);
    assert!(!o.status.success());
    assert!(err_str(&o).contains("embedding.path"), "{}", err_str(&o));

    // unknown field
    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["momentum"] = serde_json::json!(0.9);
    let bad = dir.path().join("bad3.json");
    fs::write(&bad, cfg.to_string()).unwrap();
    let o = sugmine(&["train", "--config", &s(&bad), "--out", &s(&dir.path().join("r3"))]);
    assert!(!o.status.success());
    assert!(err_str(&o).contains("momentum"), "{}", err_str(&o));

    // no run directories should have appeared
    assert!(!dir.path().join("r1").exists());
}

#[test]
fn train_predict_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_tiny_setup(dir.path());
    let train_before = fs::read(dir.path().join("train.csv")).unwrap();
    let val_before = fs::read(dir.path().join("val.csv")).unwrap();
    let run = dir.path().join("run");

    let o = sugmine(&["train", "--config", &s(&cfg_path), "--out", &s(&run)]);
    assert!(o.status.success(), "{}", err_str(&o));
    assert!(run.join("model.sgm").is_file());
    assert!(run.join("train_log.jsonl").is_file());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["train"]["epochs"], 3);
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["inputs"][0]["role"], "train");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let log = fs::read_to_string(run.join("train_log.jsonl")).unwrap();
    let epochs: Vec<serde_json::Value> = log
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(epochs.len(), 3);
    assert_eq!(epochs[0]["epoch"], 1);
    assert!(epochs[0]["train_loss"].is_f64());

    let preds = dir.path().join("preds.csv");
    let o = sugmine(&[
        "predict",
        "--checkpoint",
        &s(&run.join("model.sgm")),
        "--data",
        &s(&dir.path().join("val.csv")),
        "--out",
        &s(&preds),
    ]);
    assert!(o.status.success(), "{}", err_str(&o));
    let set = PredictionSet::from_csv(&preds).unwrap();
    assert_eq!(set.len(), 4);

    let evald = dir.path().join("evald");
    let o = sugmine(&[
        "evaluate",
        &s(&preds),
        &s(&dir.path().join("val.csv")),
        "--out",
        &s(&evald),
    ]);
    assert!(o.status.success(), "{}", err_str(&o));
    assert!(out_str(&o).contains("binary F1"), "{}", out_str(&o));
    assert!(evald.join("report.txt").is_file());
    assert!(evald.join("errors.json").is_file());

    // the written JSON report re-parses to exactly the in-memory report
    let written: MetricReport =
        serde_json::from_str(&fs::read_to_string(evald.join("report.json")).unwrap()).unwrap();
    let gold = [1u8, 1, 0, 0];
    let recomputed = sugmine::metrics::report(&set.labels(), &gold).unwrap();
    assert_eq!(written, recomputed);

    // nothing upstream was modified
    assert_eq!(fs::read(dir.path().join("train.csv")).unwrap(), train_before);
    assert_eq!(fs::read(dir.path().join("val.csv")).unwrap(), val_before);
}

#[test]
fn train_seed_flag_overrides_config_and_stays_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_tiny_setup(dir.path());
    let (r1, r2, r3) = (
        dir.path().join("r1"),
        dir.path().join("r2"),
        dir.path().join("r3"),
    );
    for (run, seed) in [(&r1, "123"), (&r2, "123"), (&r3, "124")] {
        let o = sugmine(&[
            "train", "--config", &s(&cfg_path), "--out", &s(run), "--seed", seed,
        ]);
        assert!(o.status.success(), "{}", err_str(&o));
    }
    let b1 = fs::read(r1.join("model.sgm")).unwrap();
    let b2 = fs::read(r2.join("model.sgm")).unwrap();
    let b3 = fs::read(r3.join("model.sgm")).unwrap();
    assert_eq!(b1, b2, "same seed must give identical checkpoints");
    assert_ne!(b1, b3, "different seed should change the parameters");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(r1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 123);
    assert_eq!(manifest["members"][0]["seed"], 123);
}

#[test]
fn predict_rejects_a_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("val.csv"), VAL_CSV).unwrap();
    let fake = dir.path().join("fake.sgm");
    fs::write(&fake, b"not a checkpoint at all").unwrap();
    let o = sugmine(&[
        "predict",
        "--checkpoint",
        &s(&fake),
        "--data",
        &s(&dir.path().join("val.csv")),
        "--out",
        &s(&dir.path().join("p.csv")),
    ]);
    assert!(!o.status.success());
    assert!(err_str(&o).contains("magic"), "{}", err_str(&o));
}

#[test]
fn ensemble_of_one_member_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let member = dir.path().join("m.csv");
    fs::write(
        &member,
        "id,p_neg,p_pos,label\na,0.300000000,0.700000000,1\nb,0.900000000,0.100000000,0\n",
    )
    .unwrap();
    for method in ["mean", "vote"] {
        let out = dir.path().join(format!("out_{method}.csv"));
        let o = sugmine(&["ensemble", "--method", method, &s(&member), "--out", &s(&out)]);
        assert!(o.status.success(), "{}", err_str(&o));
        assert_eq!(
            fs::read(&out).unwrap(),
            fs::read(&member).unwrap(),
            "{method} over one member should echo its input"
        );
    }
}

#[test]
fn ensemble_misaligned_ids_exit_nonzero_with_the_ids() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = dir.path().join("m1.csv");
    let m2 = dir.path().join("m2.csv");
    fs::write(&m1, "id,p_neg,p_pos,label\na,0.4,0.6,1\n").unwrap();
    fs::write(&m2, "id,p_neg,p_pos,label\nzz,0.4,0.6,1\n").unwrap();
    let o = sugmine(&[
        "ensemble",
        &s(&m1),
        &s(&m2),
        "--out",
        &s(&dir.path().join("out.csv")),
    ]);
    assert!(!o.status.success());
    let stderr = err_str(&o);
    assert!(stderr.contains("zz"), "{stderr}");
    assert!(!dir.path().join("out.csv").exists());
}

#[test]
fn evaluate_misaligned_files_fail() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.csv");
    fs::write(&preds, "id,p_neg,p_pos,label\nq9,0.4,0.6,1\n").unwrap();
    let gold = dir.path().join("g.csv");
    fs::write(&gold, "id,sentence,label\na,good idea,1\n").unwrap();
    let o = sugmine(&["evaluate", &s(&preds), &s(&gold), "--out", &s(&dir.path().join("e"))]);
    assert!(!o.status.success());
    assert!(err_str(&o).contains("q9"), "{}", err_str(&o));
}

#[test]
fn shipped_presets_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for preset in ["subtask_a.json", "subtask_b.json"] {
        let exp = sugmine_cli::config::Experiment::load(root.join("configs").join(preset))
            .unwrap_or_else(|e| panic!("{preset}: {e}"));
        assert_eq!(exp.cfg.model.encoder.hidden_size, 32, "{preset}");
        assert!(exp.cfg.train.epochs <= 200, "{preset}");
    }
}
