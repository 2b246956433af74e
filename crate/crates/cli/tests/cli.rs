use std::path::Path;
use std::process::{Command, Output};

use pcvote_core::pool::write_pool;
use pcvote_core::sim::{synthetic_pool, SyntheticPoolSpec};
use pcvote_core::Kernel;

fn pcvote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcvote")).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_pool(dir: &Path) -> String {
    let kernel = Kernel::binary(0.45, 0.8, 0.4).unwrap();
    let spec = SyntheticPoolSpec { problems: 8, n: 16, k: 1, tau: 0.75, initial_tokens: 200 };
    let path = dir.join("pool.jsonl");
    write_pool(&synthetic_pool(&kernel, &spec, 3).unwrap(), &path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_without_rw_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcvote(&["simulate", "--rc", "0.8", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--rw"), "{}", stderr(&out));
}

#[test]
fn unknown_method_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = pcvote(&["eval", "curves", "--pool", "x.jsonl", "--out", d, "--methods", "mv,bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bogus") && err.contains("pc-cubic"), "{err}");
}

#[test]
fn theory_reports_binary_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    std::fs::write(&path, r#"{"m": 2, "correct": 0, "pi": [0.4, 0.6], "T": [[0.8, 0.2], [0.6, 0.4]]}"#).unwrap();
    let p = path.to_str().unwrap();

    let out = pcvote(&["theory", "--kernel", p]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("threshold 0.333333"), "{text}");
    assert!(text.contains("0*"), "{text}");

    let exact = stdout(&pcvote(&["theory", "--kernel", p, "--exact"]));
    assert!(exact.contains("threshold 1/3"), "{exact}");
}

#[test]
fn bad_kernel_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"m": 2, "correct": 0, "pi": [0.5, 0.6], "T": [[1, 0], [0, 1]]}"#).unwrap();
    let out = pcvote(&["theory", "--kernel", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.json"), "{}", stderr(&out));
}

#[test]
fn schema_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let pool = small_pool(dir.path());
    let mut text = std::fs::read_to_string(&pool).unwrap();
    text.push_str("{\"id\": 3}\n");
    std::fs::write(&pool, text).unwrap();
    let out = pcvote(&["eval", "rates", "--pool", &pool, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 10"), "{}", stderr(&out));
}

#[test]
fn eval_commands_write_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let pool = small_pool(dir.path());
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();

    let run = pcvote(&["eval", "rates", "--pool", &pool, "--out", o]);
    assert!(run.status.success(), "{}", stderr(&run));
    let rates = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    assert!(rates.starts_with("benchmark,tau,r_c,r_w,d,problems\n"), "{rates}");

    let run = pcvote(&["eval", "auroc", "--pool", &pool, "--out", o]);
    assert!(run.status.success(), "{}", stderr(&run));
    let auroc = std::fs::read_to_string(out.join("auroc.csv")).unwrap();
    assert!(auroc.lines().nth(1).unwrap().starts_with("prefix-consistency,"), "{auroc}");

    // pi(a*) = 0.45 sends majority voting to the wrong answer, so no target exists
    let run = pcvote(&["eval", "ratios", "--pool", &pool, "--out", o, "--trials", "20", "--replicates", "20"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let ratios = std::fs::read_to_string(out.join("ratios.csv")).unwrap();
    assert!(ratios.lines().any(|l| l == "pc-cubic,0.9,,,"), "{ratios}");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "eval ratios");
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}
