//! The three subcommands: train, infer, trace. Each parses and validates a
//! config, builds the engine objects, runs, and writes its artifacts under
//! the output directory.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use spikestep_core::{io, EpochMetrics, EpochMode, LearningRule, Network};

use crate::config::{parse_config, ExperimentConfig};
use crate::setup::{
    build_dataset, build_network, cadence_from_name, effective_config, LoadedDataset,
};
use crate::{CliError, CliResult};

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct CommonArgs {
    /// Replaces the config's output directory when set.
    pub out_dir: Option<PathBuf>,
    /// Suppresses routine progress output.
    pub quiet: bool,
}

/// Prints a progress line. When stdout is a pipe whose reader has gone away
/// (`spikestep train ... | head`), goes quiet and lets the run finish its
/// work instead of panicking: artifacts still get written.
fn emit(line: fmt::Arguments<'_>) {
    use std::sync::atomic::{AtomicBool, Ordering};
    static STDOUT_GONE: AtomicBool = AtomicBool::new(false);
    if STDOUT_GONE.load(Ordering::Relaxed) {
        return;
    }
    if writeln!(std::io::stdout(), "{line}").is_err() {
        STDOUT_GONE.store(true, Ordering::Relaxed);
    }
}

fn absolute(path: PathBuf) -> CliResult<PathBuf> {
    if path.is_absolute() {
        Ok(path)
    } else {
        std::path::absolute(&path)
            .map_err(|e| CliError::Runtime(format!("cannot resolve {}: {e}", path.display())))
    }
}

/// Parses the config, applies the out-dir override, and builds the network
/// and dataset. Warns (to stderr) about events dropped past the sample
/// duration.
fn prepare(
    config_path: &Path,
    common: &CommonArgs,
) -> CliResult<(ExperimentConfig, Network, LoadedDataset)> {
    let mut config = parse_config(config_path)?;
    if let Some(out_dir) = &common.out_dir {
        config.run.out_dir = absolute(out_dir.clone())?;
    }
    let network = build_network(&config)?;
    let dataset = build_dataset(&config)?;
    if dataset.dropped > 0 && !common.quiet {
        eprintln!(
            "warning: {} events fell past the {}-step sample duration and were dropped",
            dataset.dropped, config.dataset.duration
        );
    }
    Ok((config, network, dataset))
}

fn write_effective_config(config: &ExperimentConfig, network: &Network) -> CliResult<()> {
    let echoed = effective_config(config, network);
    let text = toml::to_string_pretty(&echoed)
        .map_err(|e| CliError::Runtime(format!("cannot serialize effective config: {e}")))?;
    fs::write(config.run.out_dir.join("effective-config.toml"), text)?;
    Ok(())
}

fn rule_name(rule: &LearningRule) -> &'static str {
    match rule {
        LearningRule::Stdp { .. } => "stdp",
        LearningRule::RStdp { .. } => "rstdp",
    }
}

fn summary_suffix(metrics: &EpochMetrics) -> String {
    match metrics.accuracy() {
        Some(a) => format!(", accuracy {:.1}%", 100.0 * a),
        None => String::new(),
    }
}

/// Loads saved weights into every connection. A directory is expected to
/// hold one `stage_<i>.snnwgt` per stage; a single file only fits a
/// single-stage network.
fn load_network_weights(network: &mut Network, path: &Path) -> CliResult<()> {
    if path.is_dir() {
        for i in 0..network.num_stages() {
            let file = path.join(format!("stage_{i}.snnwgt"));
            io::load_weights(&mut network.stage_mut(i).connection, &file)?;
        }
    } else {
        if network.num_stages() != 1 {
            return Err(CliError::Validation(format!(
                "{} is a single weights file but the network has {} stages; \
                 pass the weights directory instead",
                path.display(),
                network.num_stages()
            )));
        }
        io::load_weights(&mut network.stage_mut(0).connection, path)?;
    }
    Ok(())
}

fn save_network_weights(network: &Network, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    for i in 0..network.num_stages() {
        io::save_weights(
            &network.stage(i).connection,
            &dir.join(format!("stage_{i}.snnwgt")),
        )?;
    }
    Ok(())
}

/// Runs the training schedule: each phase trains one stage for its epoch
/// count, with per-epoch metrics CSVs and a one-line summary. Final weights
/// for every stage and the defaults-resolved config land in the output
/// directory.
pub fn cmd_train(config_path: &Path, common: &CommonArgs) -> CliResult<()> {
    let (config, mut network, dataset) = prepare(config_path, common)?;
    let out_dir = config.run.out_dir.clone();
    let metrics_dir = out_dir.join("metrics");
    fs::create_dir_all(&metrics_dir)?;
    write_effective_config(&config, &network)?;

    let mut epoch_index = 0usize;
    for phase in &config.run.schedule {
        network.set_trainable_stage(Some(phase.stage))?;
        let cadence = phase.cadence.as_deref().unwrap_or(&config.run.cadence);
        network.set_cadence(cadence_from_name(cadence));
        let learning = network
            .stage(phase.stage)
            .learning
            .as_ref()
            .expect("schedule stages carry learning sections");
        let rule = rule_name(&learning.rule);
        let mode = match learning.rule {
            LearningRule::Stdp { .. } => EpochMode::TrainStdp,
            LearningRule::RStdp { .. } => EpochMode::TrainRStdp,
        };
        for _ in 0..phase.epochs {
            let outcome = network.run_epoch(&dataset.samples, mode)?;
            io::write_metrics_csv(
                &outcome.records,
                &metrics_dir.join(format!("epoch_{epoch_index}.csv")),
            )?;
            if !common.quiet {
                let m = &outcome.metrics;
                // Decision accuracy only means something when the decision
                // layer itself is being trained.
                let accuracy = match mode {
                    EpochMode::TrainRStdp => summary_suffix(m),
                    _ => String::new(),
                };
                emit(format_args!(
                    "epoch {epoch_index} (stage {}, {rule}): {} samples, spikes {:?}, \
                     {} winner changes{accuracy}",
                    phase.stage, m.samples, m.layer_spike_totals, m.winner_changes,
                ));
            }
            epoch_index += 1;
        }
    }
    network.set_trainable_stage(None)?;

    save_network_weights(&network, &out_dir.join("weights"))?;
    if !common.quiet {
        emit(format_args!(
            "trained {} epochs; weights in {}",
            epoch_index,
            out_dir.join("weights").display()
        ));
    }
    Ok(())
}

/// Runs inference with saved weights, writing one decision row per sample
/// plus the per-step metrics.
pub fn cmd_infer(config_path: &Path, weights_path: &Path, common: &CommonArgs) -> CliResult<()> {
    let (config, mut network, dataset) = prepare(config_path, common)?;
    load_network_weights(&mut network, weights_path)?;
    let out_dir = config.run.out_dir.clone();
    fs::create_dir_all(out_dir.join("metrics"))?;

    let outcome = network.run_epoch(&dataset.samples, EpochMode::Inference)?;

    let decisions_path = out_dir.join("decisions.csv");
    let mut file = fs::File::create(&decisions_path)?;
    writeln!(file, "sample,decision,label,correct")?;
    for (i, ((_, label), record)) in dataset.samples.iter().zip(&outcome.records).enumerate() {
        match label {
            Some(label) => writeln!(
                file,
                "{i},{},{label},{}",
                record.decision,
                record.decision == *label
            )?,
            None => writeln!(file, "{i},{},,", record.decision)?,
        }
    }
    io::write_metrics_csv(&outcome.records, &out_dir.join("metrics").join("infer.csv"))?;

    if !common.quiet {
        emit(format_args!(
            "inference: {} samples{} -> {}",
            outcome.metrics.samples,
            summary_suffix(&outcome.metrics),
            decisions_path.display()
        ));
    }
    Ok(())
}

/// Records one neuron's membrane trajectory over one sample and writes it as
/// a per-step CSV.
pub fn cmd_trace(
    config_path: &Path,
    neuron: (usize, usize, usize, usize),
    sample_index: usize,
    weights_path: Option<&Path>,
    common: &CommonArgs,
) -> CliResult<()> {
    let (config, mut network, dataset) = prepare(config_path, common)?;
    if let Some(weights) = weights_path {
        load_network_weights(&mut network, weights)?;
    }
    let sample = dataset
        .samples
        .get(sample_index)
        .map(|(stream, _)| stream)
        .ok_or_else(|| {
            CliError::Validation(format!(
                "sample {sample_index} out of range ({} samples)",
                dataset.samples.len()
            ))
        })?;
    let out_dir = config.run.out_dir.clone();
    fs::create_dir_all(&out_dir)?;

    let (_record, trace) = network.run_sample_traced(sample, neuron)?;

    let trace_path = out_dir.join("trace.csv");
    let mut file = fs::File::create(&trace_path)?;
    writeln!(file, "step,potential,adaptation,spike")?;
    for point in &trace {
        writeln!(
            file,
            "{},{},{},{}",
            point.step,
            point.potential,
            point.adaptation,
            u8::from(point.fired)
        )?;
    }

    if !common.quiet {
        let (s, m, y, x) = neuron;
        emit(format_args!(
            "trace: stage {s} neuron ({m}, {y}, {x}) over sample {sample_index} -> {}",
            trace_path.display()
        ));
    }
    Ok(())
}
