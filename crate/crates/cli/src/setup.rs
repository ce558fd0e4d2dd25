//! Turns a validated [`ExperimentConfig`](crate::config::ExperimentConfig)
//! into live engine objects: the network and the dataset.

use spikestep_core::{
    dog_filter, intensity_to_latency, io, Connection, DoGKernel, EngineError, EventStream,
    InhibitionConfig, LearningCadence, LearningConfig, LearningRule, Network, NeuronLayer,
    NeuronModelKind, NeuronParams, Stage, StdpConfig, WeightInit,
};

use crate::config::{
    ConnectionConfig, ExperimentConfig, InitConfig, LearningSection, NetworkConfig, NeuronConfig,
};
use crate::{CliError, CliResult};

/// A dataset ready to run, with the count of encoder-dropped events (late
/// arrivals past the configured duration) for reporting.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub samples: Vec<(EventStream, Option<usize>)>,
    pub dropped: usize,
}

pub fn input_dims(network: &NetworkConfig) -> (usize, usize, usize) {
    (
        network.input.channels,
        network.input.height,
        network.input.width,
    )
}

fn in_stage(index: usize, err: EngineError) -> CliError {
    match CliError::from(err) {
        CliError::Validation(m) => CliError::Validation(format!("network.stages[{index}]: {m}")),
        CliError::Runtime(m) => CliError::Runtime(format!("network.stages[{index}]: {m}")),
    }
}

fn model_kind(name: &str) -> NeuronModelKind {
    match name {
        "if" => NeuronModelKind::If,
        "lif" => NeuronModelKind::Lif,
        "eif" => NeuronModelKind::Eif,
        "qif" => NeuronModelKind::Qif,
        "adex" => NeuronModelKind::AdEx,
        "iz" => NeuronModelKind::Iz,
        "het-lif" => NeuronModelKind::HetLif,
        "het-eif" => NeuronModelKind::HetEif,
        "het-qif" => NeuronModelKind::HetQif,
        other => unreachable!("model {other:?} survived config validation"),
    }
}

fn weight_init(init: &InitConfig) -> WeightInit {
    match init.kind.as_str() {
        "constant" => WeightInit::Constant(init.value.expect("checked during validation")),
        "uniform" => WeightInit::Uniform {
            lo: init.lo.expect("checked during validation"),
            hi: init.hi.expect("checked during validation"),
            seed: init.seed.expect("checked during validation"),
        },
        "normal" => WeightInit::NormalClipped {
            mean: init.mean.expect("checked during validation"),
            sd: init.sd.expect("checked during validation"),
            seed: init.seed.expect("checked during validation"),
        },
        other => unreachable!("init kind {other:?} survived config validation"),
    }
}

fn neuron_params(neuron: &NeuronConfig) -> NeuronParams {
    NeuronParams {
        tau_rc: neuron.tau_rc,
        ts: neuron.ts,
        capacitance: neuron.capacitance,
        threshold: neuron.threshold,
        resting_potential: neuron.resting_potential,
        refractory_timesteps: neuron.refractory_timesteps,
        reset_potential: neuron.reset_potential,
        delta_t: neuron.delta_t,
        theta_rh: neuron.theta_rh,
        a_quad: neuron.a_quad,
        u_c: neuron.u_c,
        a_adapt: neuron.a_adapt,
        b_adapt: neuron.b_adapt,
        d_adapt: neuron.d_adapt,
        tau_w: neuron.tau_w,
        tau_range: match (neuron.tau_low, neuron.tau_high) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        },
        tau_seed: neuron.tau_seed,
    }
}

fn learning_config(learning: &LearningSection) -> LearningConfig {
    let rule = match learning.rule.as_str() {
        "stdp" => LearningRule::Stdp {
            config: StdpConfig::new(
                learning.lr_plus.expect("checked during validation"),
                learning.lr_minus.expect("checked during validation"),
                learning.stabilizer,
            ),
        },
        "rstdp" => LearningRule::RStdp {
            reward: StdpConfig::new(
                learning.reward_lr_plus.expect("checked during validation"),
                learning.reward_lr_minus.expect("checked during validation"),
                learning.stabilizer,
            ),
            punish: StdpConfig::new(
                learning.punish_lr_plus.expect("checked during validation"),
                learning.punish_lr_minus.expect("checked during validation"),
                learning.stabilizer,
            ),
        },
        other => unreachable!("rule {other:?} survived config validation"),
    };
    LearningConfig {
        rule,
        k_winners: learning.k_winners,
        inhibition_radius: learning.inhibition_radius,
    }
}

fn build_connection(
    connection: &ConnectionConfig,
    input: (usize, usize, usize),
) -> Result<Connection, EngineError> {
    let init = weight_init(&connection.init);
    match connection.kind.as_str() {
        "conv" => {
            let kernel = connection.kernel.expect("checked during validation");
            Connection::conv(
                (connection.maps, input.0, kernel, kernel),
                connection.stride,
                connection.padding,
                init,
            )
        }
        "dense" => Connection::dense(connection.maps, input.0 * input.1 * input.2, init),
        other => unreachable!("connection kind {other:?} survived config validation"),
    }
}

/// Builds the network described by a config that has already passed
/// [`validate`](crate::config::ExperimentConfig::validate). Construction
/// errors (shape chains, parameter ranges, missing model parameters) come
/// back as validation failures naming the stage.
pub fn build_network(config: &ExperimentConfig) -> CliResult<Network> {
    let input = input_dims(&config.network);
    let mut dims = input;
    let mut stages = Vec::with_capacity(config.network.stages.len());
    for (i, stage) in config.network.stages.iter().enumerate() {
        let connection = build_connection(&stage.connection, dims).map_err(|e| in_stage(i, e))?;
        let layer_dims = connection.output_dims(dims).map_err(|e| in_stage(i, e))?;
        let layer = NeuronLayer::create(
            model_kind(&stage.neuron.model),
            layer_dims,
            &neuron_params(&stage.neuron),
        )
        .map_err(|e| in_stage(i, e))?;
        stages.push(Stage {
            connection,
            layer,
            charge_scale: stage.charge_scale,
            inhibition: stage
                .inhibition_radius
                .map(|radius| InhibitionConfig { radius }),
            learning: stage.learning.as_ref().map(learning_config),
        });
        dims = layer_dims;
    }
    let mut network = Network::new(input, stages)?;
    network.set_cadence(cadence_from_name(&config.run.cadence));
    Ok(network)
}

/// Maps a validated cadence name to the engine setting.
pub fn cadence_from_name(name: &str) -> LearningCadence {
    match name {
        "per-sample" => LearningCadence::PerSample,
        _ => LearningCadence::PerTimestep,
    }
}

/// Loads or synthesizes the dataset described by the config, checking every
/// sample against the network input dims.
pub fn build_dataset(config: &ExperimentConfig) -> CliResult<LoadedDataset> {
    let dims = input_dims(&config.network);
    let dataset = &config.dataset;
    match dataset.kind.as_str() {
        "synth-bars" => {
            let height = dataset.height.expect("checked during validation");
            let width = dataset.width.expect("checked during validation");
            if dims != (2, height, width) {
                return Err(CliError::Validation(format!(
                    "dataset: synth-bars emits dims (2, {height}, {width}) but network.input \
                     is ({}, {}, {})",
                    dims.0, dims.1, dims.2
                )));
            }
            let samples = io::synth_bars_dataset(
                (height, width),
                dataset.duration,
                dataset.samples_per_class.expect("checked during validation"),
                dataset.seed.expect("checked during validation"),
            )?;
            Ok(LoadedDataset {
                samples,
                dropped: 0,
            })
        }
        "event-files" => {
            let paths = dataset.paths.as_ref().expect("checked during validation");
            let window_us = dataset.window_us.expect("checked during validation");
            let mut samples = Vec::with_capacity(paths.len());
            let mut dropped = 0;
            for (i, path) in paths.iter().enumerate() {
                let loaded = io::load_events(path, dims, window_us, dataset.duration)?;
                dropped += loaded.dropped;
                let label = dataset.labels.as_ref().map(|labels| labels[i]);
                samples.push((loaded.stream, label));
            }
            Ok(LoadedDataset { samples, dropped })
        }
        "image-csv" => {
            let paths = dataset.paths.as_ref().expect("checked during validation");
            let encoding = config.encoding.as_ref().expect("checked during validation");
            let kernels = encoding
                .sigma_pairs
                .iter()
                .map(|[s1, s2]| DoGKernel::new(encoding.kernel_size, *s1, *s2))
                .collect::<Result<Vec<_>, _>>()?;
            let mut samples = Vec::with_capacity(paths.len());
            for (i, path) in paths.iter().enumerate() {
                let image = io::load_image_csv(path)?;
                let responses = dog_filter(&image, &kernels)?;
                let stream = intensity_to_latency(&responses, dataset.duration)?;
                if stream.dims() != dims {
                    return Err(CliError::Validation(format!(
                        "dataset: {} encodes to dims ({}, {}, {}) but network.input is \
                         ({}, {}, {})",
                        path.display(),
                        stream.dims().0,
                        stream.dims().1,
                        stream.dims().2,
                        dims.0,
                        dims.1,
                        dims.2
                    )));
                }
                let label = dataset.labels.as_ref().map(|labels| labels[i]);
                samples.push((stream, label));
            }
            Ok(LoadedDataset {
                samples,
                dropped: 0,
            })
        }
        other => unreachable!("dataset kind {other:?} survived config validation"),
    }
}

/// The config with every default the engine resolved written back in, so the
/// echoed file fully determines the run. Serializing and re-running it
/// reproduces the original results.
pub fn effective_config(config: &ExperimentConfig, network: &Network) -> ExperimentConfig {
    let mut effective = config.clone();
    for (i, stage) in effective.network.stages.iter_mut().enumerate() {
        let layer = &network.stage(i).layer;
        let neuron = &mut stage.neuron;
        neuron.reset_potential.get_or_insert(layer.reset_potential());
        match neuron.model.as_str() {
            "eif" | "het-eif" => {
                neuron.theta_rh.get_or_insert(layer.theta_rh());
            }
            "qif" | "het-qif" => {
                neuron.u_c.get_or_insert(layer.u_c());
            }
            "adex" => {
                neuron.theta_rh.get_or_insert(layer.theta_rh());
                neuron.tau_w.get_or_insert(layer.tau_w());
            }
            _ => {}
        }
    }
    effective
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests::MINIMAL;

    fn minimal() -> ExperimentConfig {
        let config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        config.validate().unwrap();
        config
    }

    #[test]
    fn network_dims_chain_from_the_config() {
        let network = build_network(&minimal()).unwrap();
        assert_eq!(network.input_dims(), (2, 5, 5));
        assert_eq!(network.output_dims(), (4, 3, 3));
        assert_eq!(network.trainable_stage(), None);
    }

    #[test]
    fn synth_bars_must_match_the_network_input() {
        let mut config = minimal();
        config.network.input.channels = 3;
        let err = build_dataset(&config).unwrap_err();
        assert!(err.to_string().contains("synth-bars"), "{err}");

        let config = minimal();
        let dataset = build_dataset(&config).unwrap();
        assert_eq!(dataset.samples.len(), 8);
        assert_eq!(dataset.dropped, 0);
        assert_eq!(dataset.samples[0].1, Some(0));
        assert_eq!(dataset.samples[1].1, Some(1));
    }

    #[test]
    fn bad_stage_parameters_name_the_stage() {
        let mut config = minimal();
        config.network.stages[0].neuron.threshold = -5.0;
        let err = build_network(&config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("network.stages[0]"), "{err}");
    }

    #[test]
    fn effective_config_pins_resolved_defaults() {
        let config = minimal();
        let network = build_network(&config).unwrap();
        let effective = effective_config(&config, &network);
        assert_eq!(effective.network.stages[0].neuron.reset_potential, Some(0.0));
        // Echoed configs round-trip: building again gives the same network.
        let rebuilt = build_network(&effective).unwrap();
        assert_eq!(
            rebuilt.stage(0).connection.weights().values(),
            network.stage(0).connection.weights().values()
        );
    }
}
