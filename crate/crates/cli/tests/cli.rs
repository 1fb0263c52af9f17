use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bn2o::io::curves_from_csv;

fn bn2o(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bn2o"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = bn2o(dir, args);
    assert!(
        out.status.success(),
        "bn2o {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn gen_net_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = ok(d, &["gen-net", "--preset", "desk", "--seed", "7", "--out", "a.json"]);
    let b = ok(d, &["gen-net", "--preset", "desk", "--seed", "7", "--out", "b.json"]);
    assert_eq!(read(d.join("a.json")), read(d.join("b.json")));
    assert_eq!(a.stdout, b.stdout);
    assert!(d.join("a.json.manifest.json").exists());
    ok(d, &["gen-net", "--preset", "desk", "--seed", "8", "--out", "c.json"]);
    assert_ne!(read(d.join("a.json")), read(d.join("c.json")));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bn2o(dir.path(), &["gen-net", "--seed", "1", "--out", "x.json", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = bn2o(dir.path(), &["gen-net", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2), "--seed is mandatory");
    let out = bn2o(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_data_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = bn2o(d, &["gen-bench", "--net", "missing.json", "--p-plus", "0.5", "--p-minus", "1", "--seed", "1", "--out", "b.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(d.join("net.json"), "{\"K\": 2}\n").unwrap();
    let out = bn2o(d, &["gen-bench", "--net", "net.json", "--p-plus", "0.5", "--p-minus", "1", "--seed", "1", "--out", "b.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    ok(d, &["gen-net", "--preset", "tiny", "--seed", "1", "--out", "net.json"]);
    let out = bn2o(d, &["gen-bench", "--net", "net.json", "--p-plus", "1.5", "--p-minus", "1", "--seed", "1", "--out", "b.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.join("b.jsonl").exists());
}

#[test]
fn paper_scale_grid_only_echoes_its_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["bias-grid", "--scale", "paper", "--seed", "1", "--out-dir", "g"]);
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["cases"], 1000);
    assert_eq!(plan["train_samples"], 10_000_000);
    assert_eq!(plan["network"]["num_diseases"], 600);
    assert_eq!(plan["cells"].as_array().unwrap().len(), 8);
    assert!(!dir.path().join("g").exists());
}

/// Every generating command, run with different worker counts.
fn pipeline(d: &Path, threads: &str) {
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_bn2o"))
            .current_dir(d)
            .env("BN2O_THREADS", threads)
            .args(args)
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["gen-net", "--preset", "tiny", "--seed", "5", "--out", "net.json"]);
    run(&["gen-bench", "--net", "net.json", "--p-plus", "0.5", "--p-minus", "1", "--cases", "100", "--diseases", "2", "--seed", "6", "--out", "bench.jsonl"]);
    run(&["train", "--net", "net.json", "--kind", "lr", "--samples", "20000", "--seed", "7", "--out", "lr.json"]);
    run(&["train", "--net", "net.json", "--kind", "mlp", "--init-from", "lr.json", "--hidden", "8", "--samples", "20000", "--seed", "8", "--out", "mlp.json"]);
    run(&["train", "--net", "net.json", "--kind", "lr", "--samples", "5000", "--seed", "7", "--dtype", "f32", "--out", "lr32.json"]);
    run(&["infer", "--method", "jj99", "--net", "net.json", "--cases", "bench.jsonl", "--out", "jj99.jsonl"]);
    run(&["infer", "--method", "aisbn", "--net", "net.json", "--cases", "bench.jsonl", "--phase1", "2000", "--phase2", "8000", "--block-size", "500", "--seed", "9", "--out", "aisbn.jsonl"]);
    run(&["infer", "--method", "lr", "--model", "lr.json", "--net", "net.json", "--cases", "bench.jsonl", "--out", "lr.m.jsonl"]);
    run(&["infer", "--method", "mlp", "--model", "mlp.json", "--net", "net.json", "--cases", "bench.jsonl", "--out", "mlp.m.jsonl"]);
    run(&["infer", "--method", "prior", "--net", "net.json", "--cases", "bench.jsonl", "--out", "prior.jsonl"]);
    run(&["oracle", "--net", "net.json", "--case-file", "bench.jsonl", "--mode", "enum", "--out", "exact.jsonl"]);
    run(&["oracle", "--net", "net.json", "--case-file", "bench.jsonl", "--mode", "quickscore", "--out", "qs.jsonl"]);
    run(&[
        "eval", "--net", "net.json", "--cases", "bench.jsonl", "--marginals", "exact.jsonl", "jj99.jsonl", "aisbn.jsonl",
        "lr.m.jsonl", "mlp.m.jsonl", "prior.jsonl", "--n", "100", "--out", "curves.csv",
    ]);
}

const OUTPUTS: [&str; 16] = [
    "net.json", "bench.jsonl", "lr.json", "mlp.json", "lr32.json", "jj99.jsonl", "aisbn.jsonl", "lr.m.jsonl",
    "mlp.m.jsonl", "prior.jsonl", "exact.jsonl", "qs.jsonl", "curves.csv", "curves.cases.jsonl",
    "net.json.manifest.json", "curves.csv.manifest.json",
];

#[test]
fn small_pipeline_is_deterministic_and_exact_oracle_dominates() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "4");
    for name in OUTPUTS {
        assert!(a.path().join(name).exists(), "{name} missing");
        if name.ends_with(".manifest.json") {
            continue;
        }
        assert_eq!(read(a.path().join(name)), read(b.path().join(name)), "{name} differs across thread counts");
    }

    let table = curves_from_csv(&String::from_utf8(read(a.path().join("curves.csv"))).unwrap()).unwrap();
    assert_eq!(table.n_cases, 100);
    for method in &table.methods {
        let m = table.method_index(method).unwrap();
        for w in table.mean[m].windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "{method} curve decreases");
        }
    }
    for r in 1..=table.ranks() {
        let exact = table.value("exact", r).unwrap();
        assert!(exact >= table.value("prior", r).unwrap(), "rank {r}");
    }
    let area = |m: &str| (1..=table.ranks()).map(|r| table.value(m, r).unwrap()).sum::<f64>();
    for m in ["jj99", "aisbn", "lr", "mlp", "prior"] {
        assert!(area("exact") >= area(m), "exact oracle loses to {m}");
    }

    let manifest: serde_json::Value = serde_json::from_slice(&read(a.path().join("curves.csv.manifest.json"))).unwrap();
    assert_eq!(manifest["subcommand"], "eval");
    let hash = bn2o::io::sha256_hex(&read(a.path().join("bench.jsonl")));
    assert_eq!(manifest["inputs"]["bench.jsonl"], hash.as_str());
}
