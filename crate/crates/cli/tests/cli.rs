//! End-to-end tests of the `spikestep` binary: artifact layout, exit codes,
//! determinism, and the effective-config round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Output;

fn spikestep(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_spikestep"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spikestep binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const BARS_CONFIG: &str = r#"
[network]
input = { channels = 2, height = 7, width = 7 }

[[network.stages]]
charge_scale = 4.0
[network.stages.connection]
kind = "conv"
maps = 4
kernel = 3
init = { kind = "uniform", lo = 0.3, hi = 0.7, seed = 7 }
[network.stages.neuron]
model = "lif"
tau_rc = 8.0
threshold = 12.0
[network.stages.learning]
rule = "stdp"
lr_plus = 0.05
lr_minus = -0.015
inhibition_radius = 2

[dataset]
kind = "synth-bars"
duration = 10
height = 7
width = 7
samples_per_class = 3
seed = 11

[run]
out_dir = "out"
schedule = [{ stage = 0, epochs = 1 }]
"#;

fn write_bars_config(dir: &Path) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, BARS_CONFIG).unwrap();
    path
}

#[test]
fn train_writes_weights_metrics_and_the_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_bars_config(dir.path());

    let output = spikestep(dir.path(), &[
        "train",
        config.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert!(output.stdout.is_empty(), "--quiet still printed");

    let out = dir.path().join("out");
    assert!(out.join("weights/stage_0.snnwgt").is_file());
    assert!(out.join("metrics/epoch_0.csv").is_file());
    let echoed = fs::read_to_string(out.join("effective-config.toml")).unwrap();
    // The defaults ledger pins resolved values the author never wrote.
    assert!(echoed.contains("reset_potential"), "{echoed}");
    let metrics = fs::read_to_string(out.join("metrics/epoch_0.csv")).unwrap();
    assert!(metrics.starts_with("sample,step,layer,spikes,winners,max_potential"));
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, BARS_CONFIG.replace("threshold = 12.0", "thresold = 12.0")).unwrap();

    let output = spikestep(dir.path(), &["train", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("thresold"), "{}", stderr_of(&output));
}

#[test]
fn identical_configs_train_byte_identical_weights() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_bars_config(dir.path());

    for out in ["a", "b"] {
        let output = spikestep(dir.path(), &[
            "train",
            config.to_str().unwrap(),
            "--quiet",
            "--out-dir",
            out,
        ]);
        assert!(output.status.success(), "{}", stderr_of(&output));
    }
    let a = fs::read(dir.path().join("a/weights/stage_0.snnwgt")).unwrap();
    let b = fs::read(dir.path().join("b/weights/stage_0.snnwgt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn the_echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_bars_config(dir.path());

    let output = spikestep(dir.path(), &["train", config.to_str().unwrap(), "--quiet"]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let echoed = dir.path().join("out/effective-config.toml");
    let output = spikestep(dir.path(), &[
        "train",
        echoed.to_str().unwrap(),
        "--quiet",
        "--out-dir",
        "rerun",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let first = fs::read(dir.path().join("out/weights/stage_0.snnwgt")).unwrap();
    let again = fs::read(dir.path().join("rerun/weights/stage_0.snnwgt")).unwrap();
    assert_eq!(first, again);
}

#[test]
fn infer_writes_one_decision_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_bars_config(dir.path());

    let output = spikestep(dir.path(), &["train", config.to_str().unwrap(), "--quiet"]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let output = spikestep(dir.path(), &[
        "infer",
        config.to_str().unwrap(),
        dir.path().join("out/weights").to_str().unwrap(),
        "--quiet",
        "--out-dir",
        "inferred",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let decisions = fs::read_to_string(dir.path().join("inferred/decisions.csv")).unwrap();
    let lines: Vec<&str> = decisions.lines().collect();
    assert_eq!(lines[0], "sample,decision,label,correct");
    assert_eq!(lines.len(), 1 + 6, "one row per sample:\n{decisions}");
    assert!(dir.path().join("inferred/metrics/infer.csv").is_file());
}

#[test]
fn mismatched_weights_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_bars_config(dir.path());
    let output = spikestep(dir.path(), &["train", config.to_str().unwrap(), "--quiet"]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    // Same experiment with a different kernel size: the saved weights no
    // longer fit the network.
    let other = dir.path().join("other.toml");
    fs::write(&other, BARS_CONFIG.replace("kernel = 3", "kernel = 5")).unwrap();
    let output = spikestep(dir.path(), &[
        "infer",
        other.to_str().unwrap(),
        dir.path().join("out/weights").to_str().unwrap(),
        "--out-dir",
        "mismatch",
    ]);
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
}

#[test]
fn empty_dataset_gives_a_header_only_decision_file() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = r#"
        [network]
        input = { channels = 1, height = 3, width = 3 }

        [[network.stages]]
        [network.stages.connection]
        kind = "conv"
        maps = 2
        kernel = 1
        init = { kind = "constant", value = 0.5 }
        [network.stages.neuron]
        model = "lif"

        [dataset]
        kind = "event-files"
        duration = 5
        paths = []
        window_us = 1000

        [run]
        out_dir = "out"
    "#;
    let path = dir.path().join("exp.toml");
    fs::write(&path, config_text).unwrap();

    // An empty schedule still materializes the initial weights.
    let output = spikestep(dir.path(), &["train", path.to_str().unwrap(), "--quiet"]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let output = spikestep(dir.path(), &[
        "infer",
        path.to_str().unwrap(),
        dir.path().join("out/weights").to_str().unwrap(),
        "--quiet",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let decisions = fs::read_to_string(dir.path().join("out/decisions.csv")).unwrap();
    assert_eq!(decisions, "sample,decision,label,correct\n");
}

#[test]
fn trace_covers_the_sample_and_shows_leak_decay() {
    let dir = tempfile::tempdir().unwrap();
    // One burst of input at t = 0, then silence: the trace should show the
    // charge arriving and leaking away without any spikes.
    fs::write(
        dir.path().join("burst.snnevt"),
        "SNNEVT1,3,3,1\n0,0,0,0\n0,1,1,0\n0,2,2,0\n",
    )
    .unwrap();
    let config_text = r#"
        [network]
        input = { channels = 1, height = 3, width = 3 }

        [[network.stages]]
        charge_scale = 5.0
        [network.stages.connection]
        kind = "conv"
        maps = 1
        kernel = 1
        init = { kind = "constant", value = 0.5 }
        [network.stages.neuron]
        model = "lif"
        tau_rc = 10.0
        threshold = 50.0

        [dataset]
        kind = "event-files"
        duration = 8
        paths = ["burst.snnevt"]
        window_us = 1000

        [run]
        out_dir = "out"
    "#;
    let path = dir.path().join("exp.toml");
    fs::write(&path, config_text).unwrap();

    let output = spikestep(dir.path(), &[
        "trace",
        path.to_str().unwrap(),
        "--neuron",
        "0,0,1,1",
        "--sample",
        "0",
        "--quiet",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "step,potential,adaptation,spike");
    assert_eq!(lines.len(), 1 + 8, "one row per time step:\n{trace}");

    let potentials: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(potentials[0] > 0.0, "charge arrives at step 0: {trace}");
    for pair in potentials.windows(2) {
        assert!(
            pair[1] < pair[0] && pair[1] > 0.0,
            "leak decays toward rest: {trace}"
        );
    }
    for line in &lines[1..] {
        assert!(line.ends_with(",0"), "no spikes expected: {trace}");
    }
}

#[test]
fn trace_rejects_out_of_range_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_bars_config(dir.path());

    let output = spikestep(dir.path(), &[
        "trace",
        config.to_str().unwrap(),
        "--neuron",
        "0,9,0,0",
    ]);
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
    assert!(stderr_of(&output).contains("outside"), "{}", stderr_of(&output));
}
