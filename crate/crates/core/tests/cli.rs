use std::path::Path;
use std::process::{Command, Output};

use aosi::engine::results::parse_results;
use aosi::semantics::SimilarityTable;

fn aosi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aosi"))
        .args(args)
        .output()
        .unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "[sim]\nsources = 2\nhorizon_periods = 20\n\n[dqn]\nhidden_layers = [8, 8, 8]\nminibatch = 8\n\
         episodes = 3\nsteps_per_episode = 20\nwarmup_transitions = 10\neval_episodes = 2\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();

    assert_eq!(aosi(&["sweep", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        aosi(&["train", "--policy", "nonsense", "--out", out])
            .status
            .code(),
        Some(2)
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[sim]\nsources = 0\n").unwrap();
    let o = aosi(&["oracle", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sources"));

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "[sim]\nsourcez = 2\n").unwrap();
    assert_eq!(
        aosi(&["oracle", "--config", typo.to_str().unwrap(), "--out", out])
            .status
            .code(),
        Some(3)
    );

    let cfg = small_config(dir.path());
    let o = aosi(&[
        "eval",
        "--config",
        &cfg,
        "--checkpoint",
        "/nonexistent.bin",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!Path::new(out).exists());
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = dir.path().join("run");
    let o = aosi(&[
        "train",
        "--config",
        &cfg,
        "--policy",
        "max-aosi",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rewards = std::fs::read_to_string(run.join("rewards.csv")).unwrap();
    assert_eq!(rewards.lines().count(), 1 + 3);
    assert!(run.join("config.toml").exists());

    let csv = dir.path().join("eval.csv");
    let ckpt = run.join("checkpoint.bin");
    let o = aosi(&[
        "eval",
        "--config",
        &cfg,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_results(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r.policy == "max-aosi" && r.sources == 2));
    assert!(rows
        .iter()
        .all(|r| (r.mean_reward + r.long_term_avg_aosi).abs() < 1e-12));

    // A different seed only changes the evaluation episodes.
    let o = aosi(&[
        "eval",
        "--config",
        &cfg,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());

    // A checkpoint for two sources does not fit a three-source run.
    let three = dir.path().join("three.toml");
    std::fs::write(
        &three,
        std::fs::read_to_string(&cfg)
            .unwrap()
            .replace("sources = 2", "sources = 3"),
    )
    .unwrap();
    let o = aosi(&[
        "eval",
        "--config",
        three.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_rows_cover_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let csv = dir.path().join("sweep.csv");
    let o = aosi(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "tau",
        "--reps",
        "2",
        "--policy",
        "random",
        "--policy",
        "dqn-joint",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_results(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 5 * 2 * 2);
    let fp = &rows[0].config_fingerprint;
    assert_eq!(fp.len(), 16);
    assert!(rows
        .iter()
        .all(|r| &r.config_fingerprint == fp && r.episode.is_none()));
}

#[test]
fn exported_similarity_table_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("xi.csv");
    let o = aosi(&[
        "export-similarity",
        "--snr-db-min",
        "-5",
        "--snr-db-max",
        "25",
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let parsed = SimilarityTable::load(&table).unwrap();
    assert_eq!(parsed.ks().len(), 8);
    assert_eq!(parsed.snr_db().len(), 31);

    // A config that references the table by a path relative to itself.
    let cfg = dir.path().join("tabled.toml");
    std::fs::write(
        &cfg,
        "[sim]\nsources = 1\nmax_symbols_per_word = 2\n\n[sim.similarity_model]\nkind = \"table\"\npath = \"xi.csv\"\n",
    )
    .unwrap();
    let report = dir.path().join("oracle.json");
    let o = aosi(&[
        "oracle",
        "--config",
        cfg.to_str().unwrap(),
        "--periods",
        "3",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["periods"], 3);
    assert_eq!(json["optimum_actions"].as_array().unwrap().len(), 3);
    for p in json["policies"].as_array().unwrap() {
        assert!(p["gap"].as_f64().unwrap() >= 0.0);
    }
}
