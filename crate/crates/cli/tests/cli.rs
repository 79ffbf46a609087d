//! End-to-end behavior of the `session-miner` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_session-miner"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes a small corpus and extracts its intent-v1 matrix.
fn corpus(dir: &Path, seed: u64, sessions: usize) -> (PathBuf, PathBuf) {
    let c = dir.join(format!("corpus-{seed}"));
    ok(&["synth", "--out", s(&c), "--seed", &seed.to_string(), "--sessions", &sessions.to_string()]);
    let f = dir.join(format!("features-{seed}.csv"));
    ok(&["extract", "--log", s(&c.join("events.log")), "--labels", s(&c.join("labels.tsv")), "--out", s(&f)]);
    (c, f)
}

/// Distinct rows, so a fully grown tree can memorize them.
fn distinct_matrix(path: &Path) {
    let labels = ["navigational", "informational", "transactional"];
    let mut text = String::from("#session-miner-features v1 fixture\nsession_id,label,a,b,c\n");
    for i in 0..60u64 {
        let h = i.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        text += &format!("s{i},{},{},{},{}\n", labels[(h >> 61) as usize % 3], h % 97, (h >> 8) % 89, i);
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn memorizing_tree_scores_perfectly_on_its_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("fixture.csv");
    distinct_matrix(&f);
    let model = dir.path().join("dt.json");
    let report = dir.path().join("report.json");
    ok(&["train", "--features", s(&f), "--family", "DT", "--hyperparams", "{}", "--seed", "0", "--out", s(&model)]);
    let out = ok(&["evaluate", "--model", s(&model), "--features", s(&f), "--report", s(&report)]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().nth(2).unwrap().trim_end().ends_with("1.000"), "{table}");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["fmt"], "session-miner-report");
    assert_eq!(v["models"][0]["report"]["accuracy"], 1.0);
}

#[test]
fn empty_training_file_exits_2_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    for content in ["", "#session-miner-features v1 intent-v1\n"] {
        let f = dir.path().join("empty.csv");
        std::fs::write(&f, content).unwrap();
        let out =
            run(&["train", "--features", s(&f), "--family", "RF", "--seed", "1", "--out", s(&dir.path().join("m"))]);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyTrainingSet"));
    }
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let (_, f) = corpus(dir.path(), 4, 30);
    let m = dir.path().join("m.json");
    let cases: [&[&str]; 5] = [
        &["train", "--features", s(&f), "--family", "DT", "--out", s(&m)],
        &["train", "--features", s(&f), "--family", "KNN", "--seed", "1", "--out", s(&m)],
        &[
            "train",
            "--features",
            s(&f),
            "--family",
            "DT",
            "--seed",
            "1",
            "--hyperparams",
            r#"{"depth":2}"#,
            "--out",
            s(&m),
        ],
        &["extract", "--log", s(&f), "--catalog", "intent-v9", "--out", s(&m)],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(run(args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.log");
    std::fs::write(&bad, "not a log\n").unwrap();
    let out = run(&["extract", "--log", s(&bad), "--out", s(&dir.path().join("f.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let out = run(&["evaluate", "--model", s(&missing), "--features", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (c, f) = corpus(dir.path(), 9, 90);
    let log = c.join("events.log");
    let know = c.join("knowledge.tsv");
    let mut runs = Vec::new();
    for (i, jobs) in ["1", "3", "1"].iter().enumerate() {
        let d = dir.path().join(format!("run{i}"));
        let syn = d.join("c");
        ok(&["--jobs", jobs, "synth", "--out", s(&syn), "--seed", "9", "--sessions", "90"]);
        let feat = d.join("f.csv");
        ok(&["--jobs", jobs, "extract", "--log", s(&log), "--labels", s(&c.join("labels.tsv")), "--out", s(&feat)]);
        let kfeat = d.join("k.csv");
        ok(&["--jobs", jobs, "extract", "--log", s(&log), "--catalog", "knowledge-v1", "--out", s(&kfeat)]);
        let model = d.join("rf.json");
        let grid = r#"[{"n_trees":5},{"n_trees":7,"max_depth":3}]"#;
        let grid_file = d.join("grid.json");
        std::fs::write(&grid_file, grid).unwrap();
        ok(&[
            "--jobs",
            jobs,
            "train",
            "--features",
            s(&f),
            "--family",
            "RF",
            "--grid",
            s(&grid_file),
            "--k-folds",
            "3",
            "--seed",
            "5",
            "--out",
            s(&model),
        ]);
        let pred = d.join("pred.csv");
        ok(&["--jobs", jobs, "predict", "--model", s(&model), "--log", s(&log), "--out", s(&pred)]);
        let kr = d.join("kr.json");
        ok(&[
            "--jobs",
            jobs,
            "knowledge",
            "--features",
            s(&kfeat),
            "--knowledge",
            s(&know),
            "--family",
            "NB",
            "--select",
            "greedy-forward",
            "--budget",
            "3",
            "--k-folds",
            "3",
            "--seed",
            "2",
            "--report",
            s(&kr),
        ]);
        let files = [
            syn.join("events.log"),
            syn.join("labels.tsv"),
            syn.join("knowledge.tsv"),
            syn.join("config.toml"),
            feat,
            kfeat,
            model.clone(),
            PathBuf::from(format!("{}.grid.json", model.display())),
            pred,
            kr,
        ];
        runs.push(files.map(|p| std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))));
    }
    assert_eq!(runs[0], runs[1], "--jobs 1 vs --jobs 3");
    assert_eq!(runs[0], runs[2], "repeat run");
}

#[test]
fn outputs_carry_format_headers_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let (c, f) = corpus(dir.path(), 5, 60);
    let model = dir.path().join("lr.json");
    ok(&["train", "--features", s(&f), "--family", "LR", "--k-folds", "3", "--seed", "1", "--out", s(&model)]);
    let pred = dir.path().join("p.csv");
    ok(&["predict", "--model", s(&model), "--features", s(&f), "--out", s(&pred)]);
    let rank = dir.path().join("rank.json");
    ok(&["rank", "--features", s(&f), "--report", s(&rank)]);

    let starts = |p: &Path, prefix: &str| {
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with(prefix), "{}: {:?}", p.display(), &text[..text.len().min(60)]);
    };
    starts(&c.join("events.log"), "#session-miner-log v1\n");
    starts(&c.join("labels.tsv"), "#session-miner-labels v1\n");
    starts(&c.join("knowledge.tsv"), "#session-miner-knowledge v1\n");
    starts(&c.join("config.toml"), "#session-miner-synth-config v1\n");
    starts(&f, "#session-miner-features v1 intent-v1\n");
    starts(&model, r#"{"fmt":"session-miner-model","v":1,"#);
    starts(Path::new(&format!("{}.grid.json", model.display())), "{\n  \"fmt\": \"session-miner-grid\",\n  \"v\": 1,");
    starts(&pred, "#session-miner-predictions v1 intent-v1\nsession_id,predicted,score_navigational,");
    starts(&rank, "{\n  \"fmt\": \"session-miner-ranking\",\n  \"v\": 1,");

    for m in [c.join("manifest.json"), PathBuf::from(format!("{}.manifest.json", model.display()))] {
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&m).unwrap()).unwrap();
        assert_eq!(v["fmt"], "session-miner-manifest");
        assert!(v["seed"].is_u64());
        for o in v["outputs"].as_array().unwrap() {
            let bytes = std::fs::read(o["path"].as_str().unwrap()).unwrap();
            assert_eq!(o["bytes"].as_u64(), Some(bytes.len() as u64));
        }
    }
    let train_manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(format!("{}.manifest.json", model.display())).unwrap()).unwrap();
    assert_eq!(train_manifest["inputs"][0]["path"], s(&f));
    assert_eq!(train_manifest["catalogs"][0], "intent-v1");
}

#[test]
fn predict_rejects_a_model_for_another_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let (c, f) = corpus(dir.path(), 6, 45);
    let model = dir.path().join("nb.json");
    ok(&["train", "--features", s(&f), "--family", "NB", "--hyperparams", "{}", "--seed", "0", "--out", s(&model)]);
    let k = dir.path().join("k.csv");
    ok(&["extract", "--log", s(&c.join("events.log")), "--catalog", "knowledge-v1", "--out", s(&k)]);
    let out = run(&["predict", "--model", s(&model), "--features", s(&k), "--out", s(&dir.path().join("p.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CatalogMismatch"));
}
