use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oodratio::datasets::encode_idx_images;
use oodratio::evaluation::auroc;
use oodratio::scoring::read_scores_csv;
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oodratio"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn oodratio")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

/// `n` 8×8 images: a bright square at an index-dependent offset.
fn write_images(dir: &Path, name: &str, n: usize) -> PathBuf {
    let images: Vec<Vec<u8>> = (0..n)
        .map(|i| {
            let (r0, c0) = (i % 5, (i / 5) % 5);
            (0..64)
                .map(|p| {
                    let (r, c) = (p / 8, p % 8);
                    if (r0..r0 + 3).contains(&r) && (c0..c0 + 3).contains(&c) {
                        200 + (i % 50) as u8
                    } else {
                        (i * 7 + p) as u8 % 20
                    }
                })
                .collect()
        })
        .collect();
    let p = dir.join(name);
    std::fs::write(&p, encode_idx_images(8, 8, &images)).unwrap();
    p
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn scores(p: impl AsRef<Path>) -> Vec<f64> {
    let text = String::from_utf8(read(p)).unwrap();
    read_scores_csv(&text, "test").unwrap().into_iter().map(|r| r.log_ratio).collect()
}

fn local_config(dir: &Path, n: usize) -> PathBuf {
    let imgs = write_images(dir, "imgs.idx", n);
    write_json(
        dir,
        "local.json",
        &json!({
            "seed": 1,
            "in_dataset": {"format": "idx", "path": imgs},
            "base": {"mode": "local"},
            "eval": {"id_test": {"format": "idx", "path": imgs}},
        }),
    )
}

/// Vector in-dataset against a broad synthetic universal base, small enough to train in seconds.
fn vector_config(dir: &Path) -> PathBuf {
    write_json(
        dir,
        "vec.json",
        &json!({
            "seed": 0,
            "in_dataset": {"format": "synthetic", "count": 600,
                           "distribution": {"mean": [1.0, 1.0], "variance": [0.5, 0.5]}},
            "base": {"mode": "universal",
                     "universal": {"format": "synthetic", "count": 600,
                                   "distribution": {"mean": [0.0, 0.0], "variance": [4.0, 4.0]}}},
            "arch": {"kind": "mlp", "hidden": [8]},
            "train": {"epochs": 3, "batch_size": 64},
            "eval": {"ood_sets": [{"name": "far", "source": {"format": "synthetic", "count": 200,
                     "distribution": {"mean": [-2.0, -2.0], "variance": [1.0, 1.0]}}}]},
            "output_dir": "out",
        }),
    )
}

#[test]
fn build_base_manifest_counts_and_is_reproducible() {
    let t = TempDir::new().unwrap();
    let cfg = local_config(t.path(), 1000);
    let stdout = ok(&run_in(t.path(), &["--config", cfg.to_str().unwrap(), "--output-dir", "a", "build-base"]));
    let m: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(m["in_count"], 1000);
    assert_eq!(m["base_count"], 2000);
    assert_eq!(m["added_count"], 1000);
    assert_eq!(m["mode"], "local");
    assert!(m["rng"].as_str().unwrap().starts_with("xoshiro256"));
    let on_disk: Value = serde_json::from_slice(&read(t.path().join("a/manifest.json"))).unwrap();
    assert_eq!(on_disk, m);

    ok(&run_in(t.path(), &["--config", cfg.to_str().unwrap(), "--output-dir", "b", "build-base"]));
    assert_eq!(read(t.path().join("a/base.rdrt")), read(t.path().join("b/base.rdrt")));
    ok(&run_in(t.path(), &["--config", cfg.to_str().unwrap(), "--output-dir", "c", "--seed", "2", "build-base"]));
    assert_ne!(read(t.path().join("a/base.rdrt")), read(t.path().join("c/base.rdrt")));
}

#[test]
fn universal_mode_without_source_is_config_error() {
    let t = TempDir::new().unwrap();
    let imgs = write_images(t.path(), "imgs.idx", 10);
    let cfg = write_json(
        t.path(),
        "u.json",
        &json!({"in_dataset": {"format": "idx", "path": imgs}, "base": {"mode": "universal"}}),
    );
    let out = run_in(t.path(), &["--config", cfg.to_str().unwrap(), "build-base"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("universal"));
}

#[test]
fn unknown_config_field_is_config_error() {
    let t = TempDir::new().unwrap();
    let cfg = write_json(t.path(), "bad.json", &json!({"sigmaa": 0.1}));
    assert_eq!(run_in(t.path(), &["--config", cfg.to_str().unwrap(), "build-base"]).status.code(), Some(2));
    let out = run_in(t.path(), &["--config", "nope.json", "build-base"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_dataset_fails_before_training() {
    let t = TempDir::new().unwrap();
    let cfg = write_json(
        t.path(),
        "m.json",
        &json!({
            "in_dataset": {"format": "synthetic", "count": 50,
                           "distribution": {"mean": [0.0], "variance": [1.0]}},
            "base": {"mode": "universal", "universal": {"format": "idx", "path": "missing.idx"}},
            "output_dir": "out",
        }),
    );
    let out = run_in(t.path(), &["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.idx"));
    assert!(!t.path().join("out").exists());
}

#[test]
fn train_writes_outputs_and_seed_changes_checkpoint() {
    let t = TempDir::new().unwrap();
    let cfg = vector_config(t.path());
    let c = cfg.to_str().unwrap();
    ok(&run_in(t.path(), &["--config", c, "--output-dir", "s0", "train"]));
    ok(&run_in(t.path(), &["--config", c, "--output-dir", "s0b", "train"]));
    ok(&run_in(t.path(), &["--config", c, "--output-dir", "s1", "--seed", "1", "train"]));
    for f in ["model.rdrm", "auroc.csv", "loss.csv"] {
        assert_eq!(read(t.path().join("s0").join(f)), read(t.path().join("s0b").join(f)), "{f}");
    }
    assert_ne!(read(t.path().join("s0/model.rdrm")), read(t.path().join("s1/model.rdrm")));
    let auroc_csv = String::from_utf8(read(t.path().join("s0/auroc.csv"))).unwrap();
    assert_eq!(auroc_csv.lines().count(), 1 + 3);
    assert!(auroc_csv.starts_with("epoch,ood_name,auroc\n1,far,"), "{auroc_csv}");

    // The seed-1 checkpoint is a valid model: it scores the evaluation sets.
    ok(&run_in(t.path(), &["--config", c, "--output-dir", "s1", "--seed", "1", "score"]));
    assert_eq!(scores(t.path().join("s1/scores_far.csv")).len(), 200);
}

#[test]
fn echoed_config_reproduces_outputs() {
    let t = TempDir::new().unwrap();
    let cfg = vector_config(t.path());
    ok(&run_in(t.path(), &["--config", cfg.to_str().unwrap(), "--output-dir", "first", "--seed", "5", "train"]));
    let echoed = t.path().join("first/config.json");
    let v: Value = serde_json::from_slice(&read(&echoed)).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["train"]["seed"], 5);
    ok(&run_in(t.path(), &["--config", echoed.to_str().unwrap(), "--output-dir", "second", "train"]));
    for f in ["model.rdrm", "auroc.csv", "loss.csv"] {
        assert_eq!(read(t.path().join("first").join(f)), read(t.path().join("second").join(f)), "{f}");
    }
}

#[test]
fn score_is_deterministic_and_noise_is_seeded() {
    let t = TempDir::new().unwrap();
    let cfg = local_config(t.path(), 60);
    let c = cfg.to_str().unwrap();
    ok(&run_in(t.path(), &["--config", c, "--output-dir", "m", "train", "--epochs", "2"]));
    let score = |out: &str, seed: &str, noise: bool| {
        let mut args = vec!["--config", c, "--output-dir", "m", "--seed", seed, "score", "--input", "imgs.idx", "--out", out];
        if noise {
            args.push("--noise-at-test");
        }
        ok(&run_in(t.path(), &args));
        read(t.path().join(out))
    };
    assert_eq!(score("a.csv", "1", false), score("b.csv", "1", false));
    assert_eq!(score("a.csv", "9", false), score("b.csv", "1", false));
    let n1 = score("n1.csv", "1", true);
    assert_eq!(n1, score("n1b.csv", "1", true));
    assert_ne!(n1, score("a.csv", "1", false));
    let n2 = score("n2.csv", "2", true);
    let (s1, s2) = (scores(t.path().join("n1.csv")), scores(t.path().join("n2.csv")));
    assert_eq!(s1.len(), 60);
    assert!(s1.iter().zip(&s2).all(|(a, b)| a != b), "every noisy score should move");
    assert_ne!(n1, n2);
}

#[test]
fn score_rejects_empty_and_mismatched_inputs() {
    let t = TempDir::new().unwrap();
    let cfg = local_config(t.path(), 40);
    let c = cfg.to_str().unwrap();
    ok(&run_in(t.path(), &["--config", c, "--output-dir", "m", "train", "--epochs", "1"]));

    std::fs::write(t.path().join("empty.idx"), encode_idx_images(8, 8, &[])).unwrap();
    let out = run_in(t.path(), &["--config", c, "--output-dir", "m", "score", "--input", "empty.idx"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let wide: Vec<Vec<u8>> = vec![vec![0u8; 100]; 3];
    std::fs::write(t.path().join("wide.idx"), encode_idx_images(10, 10, &wide)).unwrap();
    let out = run_in(t.path(), &["--config", c, "--output-dir", "m", "score", "--input", "wide.idx"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("8x8"), "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_scores(dir: &Path, name: &str, split: &str, vals: &[f64]) -> PathBuf {
    let mut s = String::from("sample_id,split,log_ratio\n");
    for (i, v) in vals.iter().enumerate() {
        s.push_str(&format!("{i},{split},{v}\n"));
    }
    let p = dir.join(name);
    std::fs::write(&p, s).unwrap();
    p
}

fn eval_table(stdout: &str) -> Vec<(String, f64)> {
    stdout
        .lines()
        .skip(1)
        .map(|l| {
            let (n, a) = l.split_once('\t').unwrap();
            (n.to_string(), a.parse().unwrap())
        })
        .collect()
}

#[test]
fn eval_auroc_table_and_histograms() {
    let t = TempDir::new().unwrap();
    let id: Vec<f64> = (0..50).map(|i| 10.0 + f64::from(i) * 0.1).collect();
    let low: Vec<f64> = (0..30).map(|i| -f64::from(i)).collect();
    let mixed: Vec<f64> = (0..40).map(|i| 8.0 + f64::from(i % 13) * 0.3).collect();
    write_scores(t.path(), "id.csv", "id", &id);
    write_scores(t.path(), "low.csv", "low", &low);
    write_scores(t.path(), "mixed.csv", "mixed", &mixed);
    let stdout = ok(&run_in(
        t.path(),
        &["--output-dir", "ev", "eval", "--id", "id.csv", "--ood", "low.csv", "mixed.csv", "id.csv", "--bins", "7"],
    ));
    let rows = eval_table(&stdout);
    assert_eq!(rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), ["low", "mixed", "id"]);
    assert_eq!(rows[0].1, 1.0);
    assert_eq!(rows[2].1, 0.5);
    let direct = auroc(&id, &mixed).unwrap();
    assert!((rows[1].1 - direct).abs() < 1e-6, "{} vs {direct}", rows[1].1);
    let csv = String::from_utf8(read(t.path().join("ev/eval_auroc.csv"))).unwrap();
    assert_eq!(csv.lines().nth(2).unwrap(), format!("mixed,{direct}"));

    // Shared range: every histogram spans the global min and max.
    let edges = |name: &str| {
        let text = String::from_utf8(read(t.path().join("ev").join(name))).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 7);
        (rows[0][0], rows[6][1])
    };
    assert_eq!(edges("hist_low.csv"), (-29.0, 14.9));
    assert_eq!(edges("hist_id.csv"), edges("hist_mixed.csv"));
}

#[test]
fn eval_reports_malformed_row_line() {
    let t = TempDir::new().unwrap();
    write_scores(t.path(), "id.csv", "id", &[1.0, 2.0]);
    std::fs::write(t.path().join("bad.csv"), "sample_id,split,log_ratio\n0,x,1.5\n1,x,oops\n").unwrap();
    let out = run_in(t.path(), &["eval", "--id", "id.csv", "--ood", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_smoke_config_is_fast_and_separates() {
    let t = TempDir::new().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/oracle_2d_smoke.json");
    let start = std::time::Instant::now();
    let stdout = ok(&run_in(t.path(), &["--config", cfg.to_str().unwrap(), "--output-dir", "o", "oracle-check"]));
    assert!(start.elapsed().as_secs_f64() < 60.0);
    let s: Value = serde_json::from_str(&stdout).unwrap();
    let base = &s["sets"]["base"];
    assert!(base["final_auroc"].as_f64().unwrap() >= 0.95, "{s}");
    assert!((base["bayes_auroc"].as_f64().unwrap() - 0.998).abs() < 0.003, "{s}");
    for f in ["oracle_report.csv", "scores.csv", "auroc.csv", "loss.csv", "model.rdrm", "summary.json", "config.json"] {
        assert!(t.path().join("o").join(f).is_file(), "{f}");
    }
}

#[test]
fn degenerate_oracle_pair_is_chance_level() {
    let t = TempDir::new().unwrap();
    let cfg = write_json(
        t.path(),
        "deg.json",
        &json!({
            "p_in": {"mean": [0.5], "variance": [1.0]},
            "p_base": {"mean": [0.5], "variance": [1.0]},
            "samples_per_side": 2000,
            "train": {"epochs": 3},
        }),
    );
    let stdout = ok(&run_in(t.path(), &["--config", cfg.to_str().unwrap(), "--output-dir", "o", "oracle-check"]));
    let s: Value = serde_json::from_str(&stdout).unwrap();
    let base = &s["sets"]["base"];
    assert!((base["final_auroc"].as_f64().unwrap() - 0.5).abs() < 0.05, "{s}");
    assert!((base["bayes_auroc"].as_f64().unwrap() - 0.5).abs() < 1e-12, "{s}");

    // The analytic ratio is identically zero, so the constant-zero predictor has MAE 0.
    let report = String::from_utf8(read(t.path().join("o/oracle_report.csv"))).unwrap();
    let analytic: Vec<f64> = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(analytic.len(), 41);
    assert!(analytic.iter().all(|&a| a == 0.0));
}
