use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use waytime::hash::file_sha256;

fn waytime(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waytime")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = waytime(dir, args);
    assert!(out.status.success(), "waytime {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn gen_data(dir: &Path, out_dir: &str, seed: &str) {
    ok(
        dir,
        &["gen-data", "--synthetic", "--curves", "6", "--n-min", "3", "--n-max", "5", "--seed", seed, "--threads", "1", "--out-dir", out_dir],
    );
}

const TINY: [&str; 10] =
    ["--embed-dim", "8", "--heads", "2", "--enc-layers", "1", "--dec-layers", "1", "--ffn-dim", "12"];

fn train(dir: &Path, out_dir: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--dataset", "data/dataset.jsonl", "--include-unconverged", "--threads", "1", "--out-dir", out_dir];
    args.extend(TINY);
    args.extend(extra);
    waytime(dir, &args)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_data_is_deterministic_and_records_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path(), "a", "3");
    gen_data(dir.path(), "b", "3");
    gen_data(dir.path(), "c", "4");
    let h = |d: &str| file_sha256(&dir.path().join(d).join("dataset.jsonl")).unwrap();
    assert_eq!(h("a"), h("b"));
    assert_ne!(h("a"), h("c"));
    let m = json(&dir.path().join("a/gen-data.manifest.json"));
    assert_eq!(m["command"], "gen-data");
    let outputs = m["outputs"].as_array().unwrap();
    let ds = outputs.iter().find(|o| o["path"].as_str().unwrap().ends_with("dataset.jsonl")).unwrap();
    assert_eq!(ds["sha256"], h("a"));
}

#[test]
fn usage_and_runtime_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = waytime(dir.path(), &["train", "--dataset", "missing.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));

    let out = waytime(dir.path(), &["solve", "--waypoints", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let out = waytime(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(waytime(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path(), "data", "5");
    let full = train(dir.path(), "full", &["--epochs", "4"]);
    assert!(full.status.success(), "{}", String::from_utf8_lossy(&full.stderr));
    assert!(train(dir.path(), "part", &["--epochs", "4", "--stop-after", "2"]).status.success());
    let partial = json(&dir.path().join("part/model.json"));
    assert_eq!(partial["training"]["complete"], false);
    // Epoch 0 is the untrained model.
    assert_eq!(partial["training"]["history"].as_array().unwrap().len(), 3);
    let resumed = train(dir.path(), "part", &["--epochs", "4", "--resume"]);
    assert!(resumed.status.success(), "{}", String::from_utf8_lossy(&resumed.stderr));
    let a = fs::read(dir.path().join("full/model_loss.csv")).unwrap();
    let b = fs::read(dir.path().join("part/model_loss.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(fs::read(dir.path().join("full/model.bin")).unwrap(), fs::read(dir.path().join("part/model.bin")).unwrap());

    let changed = train(dir.path(), "part", &["--epochs", "4", "--resume", "--lr", "0.01"]);
    assert_eq!(changed.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&changed.stderr).contains("config hash"));
}

#[test]
fn solve_eval_and_plot_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_data(d, "data", "6");
    ok(
        d,
        &["gen-data", "--synthetic", "--curves", "2", "--n-min", "3", "--n-max", "3", "--seed", "7", "--threads", "1", "--out-dir", "test"],
    );
    assert!(train(d, "m", &["--epochs", "3"]).status.success());
    let mut mlp = vec!["train", "--dataset", "data/dataset.jsonl", "--include-unconverged", "--model", "mlp", "--name", "mlp"];
    mlp.extend(["--mlp-hidden", "8,8", "--epochs", "3", "--out-dir", "m"]);
    ok(d, &mlp);

    let wps = "0,0;3,1;5,4;2,6";
    let cost = |method: &str, extra: &[&str]| -> serde_json::Value {
        let mut args = vec!["solve", "--waypoints", wps, "--method", method, "--plot", "--out-dir"];
        let out_dir = format!("s_{method}");
        args.push(&out_dir);
        args.extend(extra);
        let out = ok(d, &args);
        let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(printed, json(&d.join(&out_dir).join("solve.json")));
        roxmltree::Document::parse(&fs::read_to_string(d.join(&out_dir).join("trajectory.svg")).unwrap()).unwrap();
        printed
    };
    let tvp = cost("tvp", &[]);
    let bgd = cost("bgd", &[]);
    assert!(bgd["cost"].as_f64().unwrap() <= tvp["cost"].as_f64().unwrap());
    assert!(d.join("s_bgd/bgd_log.csv").exists());
    let model = cost("model", &["--checkpoint", "m/model.json", "--attention"]);
    assert!(model["max_waypoint_error"].as_f64().unwrap() < 1e-6);
    let fractions: Vec<f64> = serde_json::from_value(model["fractions"].clone()).unwrap();
    assert_eq!(fractions.len(), 3);
    assert!((fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(d.join("s_model/attention/layer0_mean.csv").exists());

    ok(
        d,
        &["eval", "--checkpoint", "m/model.json", "--mlp", "m/mlp.json", "--test-curves", "test/curves.jsonl", "--n-min", "3", "--n-max", "5", "--ood-n", "7", "--attention", "--out-dir", "ev"],
    );
    let mut r = csv::Reader::from_path(d.join("ev/cost_report.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), waytime::formats::csvout::COST_COLUMNS);
    assert_eq!(r.records().count(), 2 * 3);
    let mut s = csv::Reader::from_path(d.join("ev/cost_summary.csv")).unwrap();
    let methods: Vec<String> = s.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert!(methods.contains(&"T".to_string()) && methods.contains(&"TVP".to_string()));
    let ood = csv::Reader::from_path(d.join("ev/ood_report.csv")).unwrap().into_records().count();
    let ood_failed = csv::Reader::from_path(d.join("ev/ood_failures.csv")).unwrap().into_records().count();
    assert_eq!(ood + ood_failed, 2);
    assert!(d.join("ev/attention/band_mass.csv").exists());

    let out = waytime(d, &["eval", "--checkpoint", "m/model.json", "--test-curves", "test/curves.jsonl", "--n-min", "3", "--n-max", "5", "--ood-n", "5"]);
    assert_eq!(out.status.code(), Some(1), "OOD size inside the trained range is a usage error");

    ok(d, &["plot", "--kind", "histogram", "--input", "ev/cost_report.csv", "--out-dir", "p"]);
    ok(d, &["plot", "--kind", "trajectory", "--input", "s_bgd/trajectory.csv", "--waypoints", wps, "--out-dir", "p"]);
    ok(d, &["plot", "--kind", "attention", "--input", "s_model/attention/layer0_mean.csv", "--out-dir", "p"]);
    for f in ["cost_report.svg", "trajectory.svg", "layer0_mean.svg"] {
        roxmltree::Document::parse(&fs::read_to_string(d.join("p").join(f)).unwrap()).unwrap();
    }
}
