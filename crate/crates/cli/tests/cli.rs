// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rydgate_core::ansatz::read_weights;
use rydgate_core::model::{AtomSystem, Blockade};
use rydgate_core::objective::Decomposer;
use rydgate_core::propagator::default_steps;
use serde_json::Value;

const TINY: &str = r#"
gate = "c1p"
[network]
arch = [3, 4, 3, 6]
n_knots = 6
[train]
batch_m = 4
max_iters = 6
n_steps = 16
intervals = 5
oracle_iters = 20
[eval]
n_steps = 16
"#;

fn rydgate(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydgate"))
        .args(args)
        .env("RYDGATE_OUT_DIR", out)
        .env("RUST_LOG", "warn")
        .env_remove("RYDGATE_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A trained tiny family in a fresh directory.
fn trained() -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, TINY).unwrap();
    let out = dir.path().join("out");
    let o = rydgate(&["train", "--config", config.to_str().unwrap()], &out);
    assert!(matches!(o.status.code(), Some(0 | 3)), "train failed: {}", stderr(&o));
    (dir, config, out)
}

fn weights(out: &Path) -> PathBuf {
    out.join("weights")
}

#[test]
fn train_writes_one_weights_file_per_interval() {
    let (_dir, config, out) = trained();
    let bins: Vec<_> =
        fs::read_dir(weights(&out)).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "bin")).collect();
    assert_eq!(bins.len(), 5);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("train_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["intervals"].as_array().unwrap().len(), 5);
    assert!(out.join("progress.jsonl").is_file());
    // Six iterations cannot converge: the run reports the iteration cap.
    let o = rydgate(&["train", "--config", config.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn rerun_resumes_to_identical_weights() {
    let (_dir, config, out) = trained();
    let before = fs::read(weights(&out).join("interval_02.bin")).unwrap();
    let o = rydgate(&["train", "--config", config.to_str().unwrap()], &out);
    assert!(o.status.code().is_some_and(|c| c == 0 || c == 3));
    assert_eq!(fs::read(weights(&out).join("interval_02.bin")).unwrap(), before);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("absent.toml");
    let o = rydgate(&["train", "--gate", "c1p", "--config", missing.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not found"));
    assert_eq!(rydgate(&["train"], &out).status.code(), Some(2));
    assert_eq!(rydgate(&["frobnicate"], &out).status.code(), Some(2));
    assert_eq!(rydgate(&["train", "--gate", "c3p"], &out).status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "gate = \"c1p\"\n[train]\nlearning_rat = 0.1\n").unwrap();
    let o = rydgate(&["train", "--config", config.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rat"), "{}", stderr(&o));
}

#[test]
fn eval_emits_requested_records_and_is_reproducible() {
    let (dir, config, out) = trained();
    let cfg = config.to_str().unwrap();
    let w = weights(&out);
    let run = |sub: &str, extra: &[&str]| {
        let eval_out = dir.path().join(sub);
        let mut args = vec!["eval", "--config", cfg, "--weights", w.to_str().unwrap(), "--seed", "11"];
        args.extend_from_slice(extra);
        let o = rydgate(&args, &eval_out);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        eval_out
    };
    let a = run("a", &["--samples", "10"]);
    let records = fs::read_to_string(a.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 10);
    assert_eq!(fs::read_to_string(a.join("plot.csv")).unwrap().lines().count(), 11);
    let summary: Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_samples"], 10);
    assert!(summary["gamma"].as_f64().unwrap() > 0.0);

    let b = run("b", &["--samples", "10"]);
    assert_eq!(fs::read_to_string(b.join("records.jsonl")).unwrap(), records);

    let c = run("c", &["--samples", "6", "--gamma", "0"]);
    for line in fs::read_to_string(c.join("records.jsonl")).unwrap().lines() {
        let r: Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["infid_decay"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn eval_lists_missing_intervals() {
    let (_dir, config, out) = trained();
    fs::remove_file(weights(&out).join("interval_01.bin")).unwrap();
    let o = rydgate(&["eval", "--config", config.to_str().unwrap(), "--weights", weights(&out).to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(0.628319, 1.256637]"), "{}", stderr(&o));
}

#[test]
fn exported_pulse_round_trips_through_the_simulator() {
    let (dir, config, out) = trained();
    let cfg = config.to_str().unwrap();
    let w = weights(&out);
    let pulse_path = dir.path().join("pulse.json");
    let o = rydgate(
        &["export-pulse", "--config", cfg, "--weights", w.to_str().unwrap(), "--phi", "2.0", "--resolution", "4000", "--output", pulse_path.to_str().unwrap()],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let again = dir.path().join("pulse2.json");
    rydgate(
        &["export-pulse", "--config", cfg, "--weights", w.to_str().unwrap(), "--phi", "2.0", "--resolution", "4000", "--output", again.to_str().unwrap()],
        &out,
    );
    assert_eq!(fs::read(&pulse_path).unwrap(), fs::read(&again).unwrap());

    let file: Value = serde_json::from_str(&fs::read_to_string(&pulse_path).unwrap()).unwrap();
    let duration = file["header"]["duration"].as_f64().unwrap();
    let us = file["header"]["duration_us"].as_f64().unwrap();
    assert!((us - duration / (2.0 * PI * 10.0)).abs() < 1e-15);
    assert!(file["detuning_mhz"].as_array().unwrap().iter().all(|d| d.as_f64().unwrap().abs() < 25.0));

    let eval_out = dir.path().join("resim");
    let o = rydgate(&["eval", "--config", cfg, "--pulse", pulse_path.to_str().unwrap()], &eval_out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let resim: Value = serde_json::from_str(&fs::read_to_string(eval_out.join("pulse_eval.json")).unwrap()).unwrap();
    let from_file = resim["report"]["infid_total"].as_f64().unwrap();

    // Net-based fidelity of the same angle, computed directly.
    let net = read_weights(&w.join("interval_03.bin")).unwrap();
    assert!(net.interval().contains(2.0));
    let pulse = net.forward(2.0).unwrap();
    let sys = AtomSystem::new(2, Blockade::Finite(21.1), 1.0 / (96.5 * 2.0 * PI * 10.0)).unwrap();
    let steps = 16;
    let direct = Decomposer::new(1, &sys).unwrap().report(&pulse, steps).unwrap().infid_total;
    assert_eq!(resim["n_steps"], steps);
    assert!((from_file - direct).abs() < 1e-6, "{from_file} vs {direct}");
    assert!(default_steps(net.config().t_bound) >= 64);
}

#[test]
fn export_rejects_bad_angles_and_keeps_endpoints() {
    let (dir, config, out) = trained();
    let cfg = config.to_str().unwrap();
    let w = weights(&out);
    let o = rydgate(&["export-pulse", "--config", cfg, "--weights", w.to_str().unwrap(), "--phi", "3.5"], &out);
    assert_eq!(o.status.code(), Some(2));
    let o = rydgate(&["export-pulse", "--config", cfg, "--weights", w.to_str().unwrap(), "--phi", "-0.5"], &out);
    assert_eq!(o.status.code(), Some(2));
    let p = dir.path().join("p.json");
    let o = rydgate(
        &["export-pulse", "--config", cfg, "--weights", w.to_str().unwrap(), "--phi", "3.14159", "--resolution", "1", "--output", p.to_str().unwrap()],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let file: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(file["time"].as_array().unwrap().len(), 2);
}

#[test]
fn fit_reads_eval_records() {
    let dir = tempfile::tempdir().unwrap();
    let records: String = (1..=12)
        .map(|i| {
            let phi = i as f64 * PI / 12.0;
            let t = (-0.70 * phi + 5.24) * phi + 7.44;
            format!(
                "{{\"phi\":{phi},\"duration\":{t},\"infid_total\":0,\"infid_decay\":0,\"infid_blockade\":0,\"infid_no_decay\":0,\"infid_haar\":0,\"theta_c\":0,\"interval\":0}}\n"
            )
        })
        .collect();
    let path = dir.path().join("records.jsonl");
    fs::write(&path, records).unwrap();
    let out = dir.path().join("out");
    let o = rydgate(&["fit", "--report", path.to_str().unwrap(), "--model", "poly2"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fit: Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let params: Vec<f64> = fit["params"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (p, t) in params.iter().zip([-0.70, 5.24, 7.44]) {
        assert!((p - t).abs() < 1e-9);
    }
    assert!((fit["domain_mean"].as_f64().unwrap() - 13.368).abs() < 1e-3);

    let o = rydgate(&["ratio", "--gate", "c2p", "--fit", out.join("fit.json").to_str().unwrap()], &out);
    let ratio: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(format!("{:.1}", ratio["ratio"].as_f64().unwrap()), "4.6");

    let missing = dir.path().join("none.jsonl");
    assert_eq!(rydgate(&["fit", "--report", missing.to_str().unwrap(), "--model", "poly2"], &out).status.code(), Some(2));
    let short = dir.path().join("short.jsonl");
    fs::write(&short, fs::read_to_string(&path).unwrap().lines().take(3).collect::<Vec<_>>().join("\n")).unwrap();
    assert_eq!(rydgate(&["fit", "--report", short.to_str().unwrap(), "--model", "arcsinh"], &out).status.code(), Some(1));
}

#[test]
fn ratio_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (gate, expect) in [("c1p", "2.2"), ("c2p", "4.6")] {
        let o = rydgate(&["ratio", "--gate", gate], &out);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(format!("{:.1}", v["ratio"].as_f64().unwrap()), expect);
    }
    let o = rydgate(&["ratio", "--gate", "c1p", "--native-time", "7.612", "--cz-time", "7.612"], &out);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ratio"].as_f64().unwrap(), 2.0);
    assert_eq!(rydgate(&["ratio", "--gate", "c1p", "--native-time", "0"], &out).status.code(), Some(1));
}

#[test]
fn thread_flag_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(rydgate(&["--threads", "1", "ratio", "--gate", "c1p"], &out).status.code(), Some(0));
    assert_eq!(rydgate(&["--threads", "0", "ratio", "--gate", "c1p"], &out).status.code(), Some(2));
}
