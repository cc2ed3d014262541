use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use grownet::data::{load_delimited, write_delimited, write_svmlight};
use grownet::synthetic::{friedman1, ranking, xor_blobs};
use grownet::{store, GrowNetModel, RngState, TaskKind};
use tempfile::TempDir;

fn grownet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grownet"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GROWNET_SEED")
        .output()
        .expect("spawn grownet")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "grownet failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn failure(out: &Output) -> String {
    assert!(!out.status.success(), "expected failure, got {}", String::from_utf8_lossy(&out.stdout));
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn regression_files(dir: &Path) -> (PathBuf, PathBuf) {
    let mut rng = RngState::new(1);
    let train = dir.join("train.csv");
    let val = dir.join("val.csv");
    write_delimited(&friedman1(300, 1.0, &mut rng).unwrap(), &train, b',', true).unwrap();
    write_delimited(&friedman1(100, 1.0, &mut rng).unwrap(), &val, b',', true).unwrap();
    (train, val)
}

const SMALL: &[&str] = &["--hidden-dims", "4,4", "--batch-size", "64", "--record-timing", "false"];

fn train_regression(dir: &Path, stages: &str, log: &str, model: &str) -> String {
    let (train, val) = regression_files(dir);
    let mut args = vec![
        "train",
        "--task",
        "regression",
        "--train",
        train.to_str().unwrap(),
        "--val",
        val.to_str().unwrap(),
        "--header",
        "true",
        "--num-stages",
        stages,
        "--log-out",
        log,
        "--model-out",
        model,
    ];
    args.extend_from_slice(SMALL);
    ok(&grownet(&args, dir))
}

#[test]
fn train_writes_one_log_row_per_stage() {
    let dir = TempDir::new().unwrap();
    let stdout = train_regression(dir.path(), "3", "log.csv", "m.gnet");
    assert!(stdout.contains("selected prefix:"), "{stdout}");
    let text = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "stage,stage_loss,corrective_loss,val_metric,alpha_0,alpha_1,alpha_2,seconds"
    );

    let parsed = load_delimited(dir.path().join("log.csv"), 0, b',', true).unwrap();
    assert_eq!(parsed.len(), 3);
    assert_eq!(parsed.targets, vec![0.0, 1.0, 2.0]);
    let model = store::load(dir.path().join("m.gnet")).unwrap();
    assert_eq!(model.num_learners(), 3);
}

#[test]
fn same_seed_gives_identical_logs() {
    let dir = TempDir::new().unwrap();
    train_regression(dir.path(), "3", "a.csv", "a.gnet");
    train_regression(dir.path(), "3", "b.csv", "b.gnet");
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(dir.path().join("a.gnet")).unwrap(),
        std::fs::read(dir.path().join("b.gnet")).unwrap()
    );
}

#[test]
fn config_file_keys_are_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let (train, _) = regression_files(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "task = \"regression\"\ntrain = {:?}\nheader = true\nnum-stages = 5\nhidden-dims = [4]\nbatch-size = 64\nrecord-timing = false\nlog-out = \"cfg.csv\"\n",
            train.to_str().unwrap()
        ),
    )
    .unwrap();
    ok(&grownet(&["train", "--config", "run.toml", "--num-stages", "2"], dir.path()));
    let text = std::fs::read_to_string(dir.path().join("cfg.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(dir.path().join("model.gnet").is_file());

    std::fs::write(&cfg, "task = \"regression\"\nnum-stagez = 5\n").unwrap();
    let err = failure(&grownet(&["train", "--config", "run.toml"], dir.path()));
    assert!(err.contains("num-stagez"), "{err}");
}

#[test]
fn predict_prior_only_model_gives_constant_column() {
    let dir = TempDir::new().unwrap();
    let model = GrowNetModel::new(TaskKind::Regression, 2.5, 10, true);
    store::save(&model, dir.path().join("prior.gnet")).unwrap();
    let (_, val) = regression_files(dir.path());
    let out = ok(&grownet(
        &["predict", "--model", "prior.gnet", "--data", val.to_str().unwrap(), "--header", "true"],
        dir.path(),
    ));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "score");
    assert_eq!(lines.len(), 101);
    assert!(lines[1..].iter().all(|l| *l == "2.5"));
}

#[test]
fn predict_prefix_matches_library_prediction() {
    let dir = TempDir::new().unwrap();
    train_regression(dir.path(), "6", "log.csv", "m.gnet");
    let val = dir.path().join("val.csv");
    ok(&grownet(
        &[
            "predict", "--model", "m.gnet", "--data", "val.csv", "--header", "true", "--num-learners", "5",
            "--output", "pred.csv",
        ],
        dir.path(),
    ));
    let pred = std::fs::read_to_string(dir.path().join("pred.csv")).unwrap();
    let scores: Vec<f64> = pred.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    let model = store::load(dir.path().join("m.gnet")).unwrap();
    let data = load_delimited(&val, 0, b',', true).unwrap();
    assert_eq!(scores.len(), data.len());
    assert_eq!(scores, model.predict(&data.features, Some(5)).unwrap());
    assert_ne!(scores, model.predict(&data.features, None).unwrap());

    let err = failure(&grownet(
        &["predict", "--model", "m.gnet", "--data", "val.csv", "--header", "true", "--num-learners", "7"],
        dir.path(),
    ));
    assert!(err.contains('7') && err.contains('6'), "{err}");
}

#[test]
fn predict_rejects_wider_data_naming_both_dims() {
    let dir = TempDir::new().unwrap();
    let model = GrowNetModel::new(TaskKind::Regression, 0.0, 3, true);
    store::save(&model, dir.path().join("m.gnet")).unwrap();
    let (_, val) = regression_files(dir.path());
    let err = failure(&grownet(
        &["predict", "--model", "m.gnet", "--data", val.to_str().unwrap(), "--header", "true"],
        dir.path(),
    ));
    assert!(err.contains("10 features") && err.contains("expects 3"), "{err}");
}

#[test]
fn classification_predictions_carry_probabilities() {
    let dir = TempDir::new().unwrap();
    let mut rng = RngState::new(3);
    write_svmlight(&xor_blobs(200, 1.0, 0.5, &mut rng).unwrap(), dir.path().join("xor.svm")).unwrap();
    let mut args = vec!["train", "--task", "classification", "--train", "xor.svm", "--num-stages", "2"];
    args.extend_from_slice(SMALL);
    let stdout = ok(&grownet(&args, dir.path()));
    assert!(stdout.contains("validation auc"), "{stdout}");
    let out = ok(&grownet(&["predict", "--model", "model.gnet", "--data", "xor.svm"], dir.path()));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("score,probability"));
    for line in lines {
        let (s, p) = line.split_once(',').unwrap();
        let (s, p): (f64, f64) = (s.parse().unwrap(), p.parse().unwrap());
        assert!((p - 1.0 / (1.0 + (-2.0 * s).exp())).abs() < 1e-12);
    }

    let err = failure(&grownet(
        &["evaluate", "--model", "model.gnet", "--data", "xor.svm", "--metric", "ndcg"],
        dir.path(),
    ));
    assert!(err.contains("ndcg"), "{err}");
    let out = ok(&grownet(&["evaluate", "--model", "model.gnet", "--data", "xor.svm"], dir.path()));
    assert!(out.starts_with("auc: "), "{out}");
}

#[test]
fn ranking_evaluation_prints_two_ndcg_values() {
    let dir = TempDir::new().unwrap();
    let mut rng = RngState::new(4);
    write_svmlight(&ranking(30, 10, 5, &mut rng).unwrap(), dir.path().join("rank.svm")).unwrap();
    let mut args = vec!["train", "--task", "ranking", "--train", "rank.svm", "--num-stages", "2"];
    args.extend_from_slice(SMALL);
    ok(&grownet(&args, dir.path()));
    let out = ok(&grownet(&["evaluate", "--model", "model.gnet", "--data", "rank.svm"], dir.path()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2, "{out}");
    assert!(lines[0].starts_with("ndcg@5: ") && lines[1].starts_with("ndcg@10: "), "{out}");
    for line in lines {
        let v: f64 = line.split_once(": ").unwrap().1.parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn ranking_requires_query_ids() {
    let dir = TempDir::new().unwrap();
    let (train, _) = regression_files(dir.path());
    let err = failure(&grownet(
        &["train", "--task", "ranking", "--train", train.to_str().unwrap(), "--header", "true"],
        dir.path(),
    ));
    assert!(err.contains("query ids"), "{err}");
}

#[test]
fn ablate_prints_comparison_table() {
    let dir = TempDir::new().unwrap();
    let (train, val) = regression_files(dir.path());
    let mut args = vec![
        "ablate",
        "--task",
        "regression",
        "--train",
        train.to_str().unwrap(),
        "--val",
        val.to_str().unwrap(),
        "--header",
        "true",
        "--num-stages",
        "2",
        "--variants",
        "full,no_cs",
        "--output",
        "table.csv",
    ];
    args.extend_from_slice(SMALL);
    let out = ok(&grownet(&args, dir.path()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3, "{out}");
    assert_eq!(lines[0], "variant,val_metric");
    assert!(lines[1].starts_with("full,") && lines[2].starts_with("no_cs,"));
    assert_eq!(std::fs::read_to_string(dir.path().join("table.csv")).unwrap(), out);

    args[12] = "full,bogus";
    let err = failure(&grownet(&args, dir.path()));
    assert!(err.contains("bogus") && err.contains("constant_alpha") && err.contains("cs_every_5"), "{err}");
}

#[test]
fn missing_data_file_is_reported() {
    let dir = TempDir::new().unwrap();
    let err = failure(&grownet(&["train", "--task", "regression", "--train", "nope.csv"], dir.path()));
    assert!(err.contains("nope.csv"), "{err}");
    assert!(!dir.path().join("model.gnet").exists());
}

#[test]
fn seed_env_var_sets_default_seed() {
    let dir = TempDir::new().unwrap();
    let (train, _) = regression_files(dir.path());
    let run = |seed: Option<&str>, log: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_grownet"));
        cmd.current_dir(dir.path()).env_remove("GROWNET_SEED");
        if let Some(s) = seed {
            cmd.env("GROWNET_SEED", s);
        }
        cmd.args(["train", "--task", "regression", "--train", train.to_str().unwrap(), "--header", "true"])
            .args(["--num-stages", "2", "--log-out", log])
            .args(SMALL);
        ok(&cmd.output().unwrap());
        std::fs::read(dir.path().join(log)).unwrap()
    };
    let default = run(None, "d.csv");
    assert_eq!(default, run(Some("0"), "z.csv"));
    assert_ne!(default, run(Some("9"), "n.csv"));
}

