use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dqrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqrank")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = dqrank(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &[&str]) -> String {
    let out = dqrank(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = err.lines().filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(lines.len(), 1, "one-line error expected: {err}");
    err
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{"episodes": 6, "T": 3, "pretrain_epochs": 3, "dim": 64, "hidden": 16, "seed": 5}"#,
    )
    .unwrap();
    p(&path).to_string()
}

fn synth(dir: &Path) -> String {
    let data = dir.join("data");
    ok(&["synth", "--seed", "7", "--topics", "2", "--out", p(&data)]);
    p(&data).to_string()
}

#[test]
fn synth_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--seed", "7", "--out", p(&a)]);
    ok(&["synth", "--seed", "7", "--out", p(&b)]);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
    let c = dir.path().join("c");
    ok(&["synth", "--seed", "8", "--out", p(&c)]);
    assert_ne!(fs::read(a.join("corpus.jsonl")).unwrap(), fs::read(c.join("corpus.jsonl")).unwrap());
}

fn csv_rows(out: &str) -> Vec<Vec<String>> {
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), dqrank::cli::BENCH_HEADER);
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn bench_window_counts() {
    let rows = csv_rows(&ok(&["bench-window", "--g", "10", "--m", "4", "--dim", "64", "--hidden", "16"]));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], "28");
    assert_eq!(rows[0][5], "", "no exhaustive column above six documents");
    for (g, m, want) in [(5, 2, 8), (8, 3, 18), (6, 6, 6)] {
        let rows = csv_rows(&ok(&[
            "bench-window", "--g", &g.to_string(), "--m", &m.to_string(), "--dim", "64", "--hidden", "16", "--repeats", "3",
        ]));
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert_eq!(r[2], want.to_string());
            let (qi, qw): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
            assert!(qw >= qi);
            if g <= 6 {
                let qe: f64 = r[5].parse().unwrap();
                assert!(qw <= qe + 1e-12);
            }
        }
    }
    fail(&["bench-window", "--g", "3", "--m", "4"]);
}

#[test]
fn eval_bm25_on_ideal_order_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("corpus.jsonl"),
        concat!(
            r#"{"doc_id":"a","text":"Apple pie. Apple tart with apple."}"#, "\n",
            r#"{"doc_id":"b","text":"An apple a day. Keeps doctors away from the orchard today."}"#, "\n",
            r#"{"doc_id":"c","text":"Cherry trees bloom."}"#, "\n",
        ),
    )
    .unwrap();
    fs::write(d.join("queries.tsv"), "q1\tapple\n").unwrap();
    fs::write(d.join("qrels.tsv"), "q1\t0\ta\t2\nq1\t0\tb\t1\nq1\t0\tc\t0\n").unwrap();
    let out = ok(&["eval", "--data", p(d), "--mode", "bm25"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["ndcg_at_10"], 1.0);
    assert_eq!(v["mrr"], 1.0);
    let err = fail(&["eval", "--data", p(d), "--mode", "dqrank"]);
    assert!(err.contains("--checkpoint"), "{err}");
    let err = fail(&["eval", "--data", p(d), "--mode", "bogus"]);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn errors_are_one_line_and_name_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let err = fail(&["train", "--out", p(dir.path())]);
    assert!(err.contains("--corpus"), "{err}");
    let data = synth(dir.path());
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"episodes": 3, "learning_rate": 0.1}"#).unwrap();
    let err = fail(&["train", "--data", &data, "--config", p(&bad), "--out", p(dir.path())]);
    assert!(err.contains("learning_rate"), "{err}");
    fs::write(&bad, r#"{"gamma": 1.5}"#).unwrap();
    let err = fail(&["train", "--data", &data, "--config", p(&bad), "--out", p(dir.path())]);
    assert!(err.contains("gamma"), "{err}");
    let err = fail(&["ingest", "--corpus", "/no/such/file.jsonl", "--out", p(&dir.path().join("x"))]);
    assert!(err.contains("/no/such/file.jsonl"), "{err}");
    let out = dqrank(&["train", "--no-such-flag"]);
    assert!(!out.status.success());
}

#[test]
fn help_lists_flags_with_defaults() {
    let cases: &[(&str, &[&str])] = &[
        ("ingest", &["--corpus", "--out"]),
        ("synth", &["--seed", "--out", "--topics", "[default: 8]"]),
        ("pretrain-u", &["--config", "--seed", "--out", "--data"]),
        ("train", &["--corpus", "--queries", "--qrels", "--logged", "--config", "--seed", "--out"]),
        ("eval", &["--mode", "[default: dqrank]", "--checkpoint", "--pool"]),
        ("serve", &["--port", "[default: 8080]", "--checkpoint", "--pool", "[default: 1800]"]),
        ("bench-window", &["--g", "--m", "--seed", "[default: 256]"]),
        ("kfold", &["--k", "[default: 5]", "--seed"]),
    ];
    for (cmd, flags) in cases {
        let help = ok(&[cmd, "--help"]);
        for f in *flags {
            assert!(help.contains(f), "{cmd} help lacks {f}:\n{help}");
        }
    }
}

#[test]
fn pipeline_artifacts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let config = small_config(dir.path());

    let idx = dir.path().join("index.jsonl");
    ok(&["ingest", "--corpus", &format!("{data}/corpus.jsonl"), "--out", p(&idx)]);
    assert_eq!(fs::read(&idx).unwrap(), fs::read(format!("{data}/corpus.jsonl")).unwrap());

    let u = dir.path().join("u.ckpt");
    let report: serde_json::Value = serde_json::from_str(&ok(&["pretrain-u", "--data", &data, "--config", &config, "--out", p(&u)])).unwrap();
    assert!(report["final_loss"].as_f64().unwrap() < report["initial_loss"].as_f64().unwrap());
    let ckpt = dqrank::checkpoint::Checkpoint::load(&u).unwrap();
    let (_, q) = ckpt.into_models(&dqrank::encoder::HashEncoder::new(64).unwrap()).unwrap();
    assert!(q.is_none());

    let (a, b) = (dir.path().join("run_a"), dir.path().join("run_b"));
    for out in [&a, &b] {
        ok(&["train", "--data", &data, "--config", &config, "--out", p(out)]);
    }
    for f in ["model.ckpt", "traces.jsonl", "pool.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("run_c");
    ok(&["train", "--data", &data, "--config", &config, "--seed", "6", "--out", p(&c)]);
    assert_ne!(fs::read(a.join("traces.jsonl")).unwrap(), fs::read(c.join("traces.jsonl")).unwrap());

    let ck = a.join("model.ckpt");
    for mode in ["u_only", "dqrank"] {
        let out = ok(&["eval", "--data", &data, "--config", &config, "--mode", mode, "--checkpoint", p(&ck), "--pool", p(&a.join("pool.jsonl"))]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let x = v["ndcg_at_10"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&x));
        assert_eq!(v["per_query"].as_object().unwrap().len(), 16);
    }

    let out = ok(&["kfold", "--data", &data, "--config", &config, "--k", "2"]);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["fold"], i);
        assert_eq!(l["test_queries"], 8);
        for m in ["bm25", "u_only", "dqrank"] {
            assert!(l[m]["ndcg_at_10"].is_f64());
        }
    }
}
