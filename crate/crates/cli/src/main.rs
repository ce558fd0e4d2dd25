use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use spikestep_cli::commands::{cmd_infer, cmd_train, cmd_trace, CommonArgs};

#[derive(Parser)]
#[command(
    name = "spikestep",
    version,
    about = "Spiking neural network experiments: train, infer, and trace from one config file"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write outputs here instead of the config's out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the config's training schedule and save the learned weights.
    Train {
        /// Experiment config (TOML).
        config: PathBuf,
    },
    /// Run inference with previously saved weights.
    Infer {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Weights directory from a training run (or a single .snnwgt file
        /// for a one-stage network).
        weights: PathBuf,
    },
    /// Record one neuron's membrane trajectory over one sample.
    Trace {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Neuron to probe, as stage,map,y,x.
        #[arg(long, value_name = "S,M,Y,X")]
        neuron: NeuronRef,
        /// Index of the dataset sample to run.
        #[arg(long, default_value_t = 0)]
        sample: usize,
        /// Optional saved weights to load before tracing.
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
    },
}

/// A `stage,map,y,x` coordinate quadruple.
#[derive(Debug, Clone)]
struct NeuronRef(usize, usize, usize, usize);

impl FromStr for NeuronRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(format!("expected stage,map,y,x but got {s:?}"));
        }
        let mut coords = [0usize; 4];
        for (coord, part) in coords.iter_mut().zip(&parts) {
            *coord = part
                .trim()
                .parse()
                .map_err(|_| format!("{} is not a coordinate in {s:?}", part.trim()))?;
        }
        Ok(NeuronRef(coords[0], coords[1], coords[2], coords[3]))
    }
}

fn main() {
    let cli = Cli::parse();
    let common = CommonArgs {
        out_dir: cli.out_dir,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Train { config } => cmd_train(&config, &common),
        Command::Infer { config, weights } => cmd_infer(&config, &weights, &common),
        Command::Trace {
            config,
            neuron,
            sample,
            weights,
        } => {
            let NeuronRef(stage, map, y, x) = neuron;
            cmd_trace(&config, (stage, map, y, x), sample, weights.as_deref(), &common)
        }
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
