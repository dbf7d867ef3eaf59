use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repal"))
        .args(args)
        .env_remove("REPAL_HTTP_TIMEOUT_MS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = repal(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = repal(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty(), "stdout must stay clean on failure");
    String::from_utf8(out.stderr).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Bench {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Bench {
    fn new(n_pairs: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let b = Self { _dir: dir, root };
        let dev_pairs = (n_pairs.parse::<usize>().unwrap() / 2).to_string();
        ok(&[
            "gen-synthetic", "--n-pairs", n_pairs, "--out", p(&b.path("test.tsv")),
            "--dev-out", p(&b.path("dev.tsv")), "--dev-pairs", &dev_pairs,
        ]);
        b
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let path = self.path(name);
        fs::write(&path, content).unwrap();
        path
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn mask_is_line_by_line() {
    let b = Bench::new("10");
    let input = b.write("in.txt", "The cat sat on the mat\nA dog barked loudly\nThe cat and the dog\n");
    let out = ok(&["mask", "--input", p(&input)]);
    assert_eq!(out.lines().count(), 3);
    assert_eq!(out.lines().next().unwrap(), "The cat [MASK] on the [MASK]");

    let alt = ok(&["mask", "--input", p(&input), "--mask-token", "<mask>"]);
    assert_eq!(alt, out.replace("[MASK]", "<mask>"));

    let file = b.path("masked.txt");
    assert_eq!(ok(&["mask", "--input", p(&input), "--out", p(&file)]), "");
    assert_eq!(fs::read_to_string(&file).unwrap(), out);

    // a corpus where "cat" is everywhere makes it less of a keyword
    let corpus = b.write("corpus.txt", "cat one\ncat two\ncat three\ncat sat mat\n");
    let other = ok(&["mask", "--input", p(&input), "--tfidf-corpus", p(&corpus)]);
    assert_ne!(other, out);
}

#[test]
fn mask_rejects_bad_input() {
    let b = Bench::new("10");
    let empty = b.write("empty.txt", "");
    assert!(fails(&["mask", "--input", p(&empty)], 2).contains("empty input"));
    let gap = b.write("gap.txt", "one line\n\nthird line\n");
    assert!(fails(&["mask", "--input", p(&gap)], 2).contains("line 2"));
    let input = b.write("in.txt", "a b c\n");
    fails(&["mask", "--input", p(&input), "--mask-ratio", "1.5"], 2);
    fails(&["mask", "--input", p(&b.path("missing.txt"))], 2);
}

#[test]
fn pretokenized_input_keeps_chunks() {
    let b = Bench::new("10");
    let input = b.write("zh.txt", "我们 喜欢 自然语言 处理\n他们 喜欢 音乐\n");
    let out = ok(&["mask", "--input", p(&input), "--pretokenized"]);
    assert_eq!(out.lines().next().unwrap().split(' ').count(), 4);
}

#[test]
fn tune_then_eval_round_trips() {
    let b = Bench::new("40");
    let report = b.path("tune.json");
    let stdout = ok(&[
        "tune", "--dev", p(&b.path("dev.tsv")), "--grid1", "0:1:0.25", "--grid2", "0:2:0.5",
        "--encoder", "mock:32", "--out", p(&report),
    ]);
    assert!(stdout.starts_with("best lambda1="), "{stdout}");
    let tuned = json(&report);
    assert_eq!(tuned["surface"].as_array().unwrap().len(), 25);
    assert_eq!(tuned["encoder"], "mock:32:0");
    assert_eq!(tuned["seed"], 42);

    let eval = b.path("eval.json");
    ok(&[
        "eval", "--dataset", p(&b.path("dev.tsv")), "--params", p(&report),
        "--encoder", "mock:32", "--out", p(&eval),
    ]);
    let evaluated = json(&eval);
    for key in ["lambda1", "lambda2", "spearman_raw", "spearman_refined", "dataset"] {
        assert_eq!(evaluated[key], tuned[key], "{key}");
    }
    let keys: Vec<&str> = evaluated.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["ablation", "dataset", "encoder", "lambda1", "lambda2", "seed", "spearman_raw", "spearman_refined"]
    );
}

#[test]
fn tune_edge_cases() {
    let b = Bench::new("20");
    let dev = b.path("dev.tsv");
    let single = ok(&[
        "tune", "--dev", p(&dev), "--grid1", "0.35", "--grid2", "1.25", "--encoder", "mock:16",
    ]);
    assert!(single.starts_with("best lambda1=0.35 lambda2=1.25"), "{single}");
    let err = fails(&["tune", "--dev", p(&dev), "--grid1", "0:1:-1", "--encoder", "mock"], 2);
    assert!(err.contains("bad grid spec"), "{err}");
    fails(&["tune", "--encoder", "mock"], 2);

    let test = b.path("test.tsv");
    let out = repal(&["tune", "--test", p(&test), "--tune-on-test", "--grid1", "0,1", "--grid2", "0", "--encoder", "mock"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn eval_identity_and_ablation() {
    let b = Bench::new("30");
    let test = b.path("test.tsv");
    let zero = ok(&["eval", "--test", p(&test), "--encoder", "mock:16"]);
    let (name, scores) = zero.trim().split_once(": ").unwrap();
    assert_eq!(name, "test");
    let (before, rest) = scores.split_once(" -> ").unwrap();
    assert!(rest.starts_with(before), "{zero}");
    assert!(rest.ends_with("(+0.00)"), "{zero}");

    let no_sen = ok(&["eval", "--test", p(&test), "--encoder", "mock:16", "--lambda1", "0.8", "--lambda2", "1.1", "--ablation", "no-sen"]);
    let forced = ok(&["eval", "--test", p(&test), "--encoder", "mock:16", "--lambda1", "0", "--lambda2", "1.1"]);
    assert_eq!(no_sen, forced);
    fails(&["eval", "--test", p(&test), "--encoder", "mock", "--ablation", "both"], 2);
    fails(&["eval", "--test", p(&test), "--encoder", "nope"], 2);
}

#[test]
fn file_encoder_reproduces_mock() {
    let b = Bench::new("20");
    let test = b.path("test.tsv");
    let cache = b.path("cache.jsonl");
    let summary = ok(&[
        "encode-cache", "--encoder", "mock:16:3", "--dataset", p(&test), "--deletions", "--out", p(&cache),
    ]);
    assert!(summary.contains("dim 16"), "{summary}");
    let spec = format!("file:{}", p(&cache));
    let args = |enc: &str| {
        vec![
            "eval".to_string(), "--test".into(), p(&test).into(), "--encoder".into(), enc.into(),
            "--lambda1".into(), "0.7".into(), "--lambda2".into(), "0.4".into(),
        ]
    };
    let run = |enc: &str| {
        let a = args(enc);
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert_eq!(run(&spec), run("mock:16:3"));

    let importance = |enc: &str| {
        ok(&["diagnose", "importance", "--dataset", p(&test), "--encoder", enc, "--lambda1", "0.5"])
    };
    assert_eq!(importance(&spec), importance("mock:16:3"));

    // extending the store keeps it stable
    let before = fs::read(&cache).unwrap();
    ok(&["encode-cache", "--encoder", "mock:16:3", "--dataset", p(&test), "--out", p(&cache)]);
    assert_eq!(fs::read(&cache).unwrap(), before);

    // a store missing texts is an encoder failure
    let dev = b.path("dev.tsv");
    let err = fails(&["eval", "--test", p(&dev), "--encoder", &spec], 3);
    assert!(err.contains("no stored embedding"), "{err}");
    fails(&["eval", "--test", p(&dev), "--encoder", "file:/does/not/exist"], 2);
}

#[test]
fn encode_cache_needs_inputs() {
    let b = Bench::new("10");
    fails(&["encode-cache", "--encoder", "mock", "--out", p(&b.path("c.jsonl"))], 2);
    let lines = b.write("lines.txt", "first sentence here\nsecond one\n");
    let out = ok(&["encode-cache", "--encoder", "mock:8", "--input", p(&lines), "--out", p(&b.path("c.jsonl"))]);
    assert!(out.starts_with("4 embeddings"), "{out}");
}

#[test]
fn diagnose_commands() {
    let b = Bench::new("30");
    let test = b.path("test.tsv");
    let sweep = ok(&["diagnose", "sweep", "--dataset", p(&test), "--encoder", "mock:16", "--values", "0.5"]);
    assert_eq!(sweep.lines().count(), 2);
    assert_eq!(sweep.lines().next().unwrap(), "lambda,spearman,lambda_max,trace_bound");
    fails(&["diagnose", "sweep", "--dataset", p(&test), "--encoder", "mock", "--axis", "lambda3"], 2);

    let overlap = |out: &Path| {
        ok(&[
            "diagnose", "overlap", "--dataset", p(&test), "--encoder", "mock:16", "--lambda1", "0.9",
            "--sample", "10", "--seed", "42", "--out", p(out),
        ])
    };
    let (o1, o2) = (b.path("o1.json"), b.path("o2.json"));
    assert_eq!(overlap(&o1), overlap(&o2));
    assert_eq!(fs::read(&o1).unwrap(), fs::read(&o2).unwrap());
    assert_eq!(json(&o1)["pairs"].as_array().unwrap().len(), 10);

    let white = b.path("white.json");
    let line = ok(&["diagnose", "whitening", "--dataset", p(&test), "--encoder", "mock:16", "--out", p(&white)]);
    assert!(line.starts_with("whitening test: "), "{line}");
    assert_eq!(json(&white)["method"], "whitening");
}

#[test]
fn importance_skips_one_token_sentences() {
    let b = Bench::new("10");
    let ds = b.write("short.tsv", "hello\tworld again\t0.5\nthe cat sat\tthe dog sat\t0.9\nsome more words\tand others\t0.1\n");
    let out = repal(&["diagnose", "importance", "--dataset", p(&ds), "--encoder", "mock:8", "--lambda1", "0.5"]);
    assert!(out.status.success());
    let tsv = String::from_utf8(out.stdout).unwrap();
    assert!(tsv.ends_with("# skipped 1 pair(s): first sentence shorter than 2 tokens\n"), "{tsv}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: skipped 1"));
}

#[test]
fn gen_synthetic_contract() {
    let a = ok(&["gen-synthetic", "--n-pairs", "25"]);
    assert_eq!(a, ok(&["gen-synthetic", "--n-pairs", "25", "--seed", "42"]));
    assert_ne!(a, ok(&["gen-synthetic", "--n-pairs", "25", "--seed", "7"]));
    assert_eq!(a.lines().count(), 25);
    for line in a.lines() {
        let gold: f64 = line.rsplit('\t').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&gold));
    }
    fails(&["gen-synthetic", "--n-pairs", "9"], 2);
    let b = Bench::new("10");
    fails(&["gen-synthetic", "--n-pairs", "10", "--dev-out", p(&b.path("d.tsv")), "--dev-pairs", "9"], 2);
}

#[test]
fn timeout_env_is_validated() {
    let b = Bench::new("10");
    let out = Command::new(env!("CARGO_BIN_EXE_repal"))
        .args(["eval", "--test", p(&b.path("test.tsv")), "--encoder", "http://127.0.0.1:9"])
        .env("REPAL_HTTP_TIMEOUT_MS", "soon")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("REPAL_HTTP_TIMEOUT_MS"));
}
