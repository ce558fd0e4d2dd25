//! Per-time-step execution of multi-stage networks: propagation, lateral
//! inhibition, winner-take-all plasticity, and per-sample bookkeeping.

use crate::connectivity::Connection;
use crate::error::{EngineError, Result};
use crate::events::EventStream;
use crate::grid::{Dims3, Grid3};
use crate::neurons::NeuronLayer;
use crate::plasticity::{
    lateral_inhibition, rstdp_update, select_winners, stdp_update, StdpConfig, WinnerSet,
};

/// Cross-map competition applied to a stage's output spikes each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InhibitionConfig {
    /// Chebyshev radius of spatial suppression; 0 restricts competition to
    /// the exact location.
    pub radius: usize,
}

/// Plasticity rule attached to a stage.
#[derive(Debug, Clone, PartialEq)]
pub enum LearningRule {
    Stdp { config: StdpConfig },
    RStdp { reward: StdpConfig, punish: StdpConfig },
}

/// How a stage learns when it is the trainable stage.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub rule: LearningRule,
    /// Winners selected per learning step.
    pub k_winners: usize,
    /// Chebyshev radius excluded around each winner in other maps.
    pub inhibition_radius: usize,
}

/// One processing stage: a connection feeding a neuron layer.
#[derive(Debug, Clone)]
pub struct Stage {
    pub connection: Connection,
    pub layer: NeuronLayer,
    /// Charge injected per presynaptic spike per unit weight (pC).
    pub charge_scale: f64,
    pub inhibition: Option<InhibitionConfig>,
    pub learning: Option<LearningConfig>,
}

/// When plasticity updates are applied while training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LearningCadence {
    /// Winners are selected and updated after every time step.
    #[default]
    PerTimestep,
    /// One winner selection and update at the end of the sample.
    PerSample,
}

/// How a sample is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Inference,
    TrainStdp,
    TrainRStdp { label: usize },
}

/// Per-layer statistics for one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLayerStats {
    /// Spikes the layer propagated this step (after lateral inhibition).
    pub spikes: u32,
    /// Winners trained this step (0 outside the trainable stage).
    pub winners: u32,
    /// Highest membrane potential reached at this step's threshold test.
    pub max_potential: f64,
}

/// Winners picked at one learning step.
#[derive(Debug, Clone, PartialEq)]
pub struct WinnerEvent {
    pub step: u32,
    pub stage: usize,
    pub winners: WinnerSet,
}

/// Everything observable about one sample run. Layer state is reset before
/// this is returned, so records from consecutive samples are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub duration: u32,
    /// `steps[t][stage]` statistics.
    pub steps: Vec<Vec<StepLayerStats>>,
    pub winner_history: Vec<WinnerEvent>,
    /// First spike per output neuron that survived inhibition;
    /// `f64::INFINITY` where none did.
    pub output_first_spikes: Grid3,
    /// Per stage: the potential each neuron reached at its first delivered
    /// spike, or its last observed potential if it never fired.
    pub final_potentials: Vec<Grid3>,
    /// Output map with the earliest delivered spike (ties: higher potential,
    /// then lower map index).
    pub decision: usize,
}

/// One probe reading from a traced run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub step: u32,
    /// Membrane potential at the threshold test (before any reset).
    pub potential: f64,
    /// Adaptation variable after the step.
    pub adaptation: f64,
    pub fired: bool,
}

/// Picks the decision map from per-neuron first-spike times: earliest spike
/// wins; ties fall to the map with the higher potential, then the lower
/// map index.
pub fn decide(first_spikes: &Grid3, potentials: &Grid3) -> usize {
    let maps = first_spikes.channels();
    let mut best_map = 0;
    let mut best_t = f64::INFINITY;
    let mut best_p = f64::NEG_INFINITY;
    for m in 0..maps {
        let mut t_min = f64::INFINITY;
        let mut p_max = f64::NEG_INFINITY;
        for y in 0..first_spikes.height() {
            for x in 0..first_spikes.width() {
                t_min = t_min.min(first_spikes.get(m, y, x));
                p_max = p_max.max(potentials.get(m, y, x));
            }
        }
        if m == 0 || t_min < best_t || (t_min == best_t && p_max > best_p) {
            best_map = m;
            best_t = t_min;
            best_p = p_max;
        }
    }
    best_map
}

/// A feed-forward chain of stages driven one time step at a time.
#[derive(Debug, Clone)]
pub struct Network {
    stages: Vec<Stage>,
    input_dims: Dims3,
    cadence: LearningCadence,
    trainable_stage: Option<usize>,
}

/// Metrics aggregated over one pass through a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub samples: usize,
    /// Propagated spikes summed per stage.
    pub layer_spike_totals: Vec<u64>,
    /// Consecutive sample pairs whose winning-map sets differ.
    pub winner_changes: usize,
    pub correct: usize,
    pub labeled: usize,
}

impl EpochMetrics {
    /// Fraction of labeled samples decided correctly, if any were labeled.
    pub fn accuracy(&self) -> Option<f64> {
        if self.labeled == 0 {
            None
        } else {
            Some(self.correct as f64 / self.labeled as f64)
        }
    }
}

/// Per-sample records plus the aggregate metrics for one epoch.
#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub metrics: EpochMetrics,
    pub records: Vec<RunRecord>,
}

/// Dataset pass mode; labels ride along with the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochMode {
    Inference,
    TrainStdp,
    TrainRStdp,
}

impl Network {
    /// Builds a network, checking that stage shapes chain together and that
    /// every layer runs on the same time step.
    pub fn new(input_dims: Dims3, stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(EngineError::Config("network has no stages".into()));
        }
        let mut dims = input_dims;
        let ts = stages[0].layer.ts();
        for (i, stage) in stages.iter().enumerate() {
            let out = stage.connection.output_dims(dims).map_err(|e| {
                EngineError::Shape(format!("stage {i}: {e}"))
            })?;
            if stage.layer.dims() != out {
                return Err(EngineError::Shape(format!(
                    "stage {i}: connection produces {:?} but layer has {:?}",
                    out,
                    stage.layer.dims()
                )));
            }
            if stage.layer.ts() != ts {
                return Err(EngineError::Config(format!(
                    "stage {i} runs at ts {} while stage 0 runs at {ts}",
                    stage.layer.ts()
                )));
            }
            if !(stage.charge_scale.is_finite() && stage.charge_scale > 0.0) {
                return Err(EngineError::Config(format!(
                    "stage {i}: charge scale must be positive and finite, got {}",
                    stage.charge_scale
                )));
            }
            if let Some(cfg) = &stage.learning {
                if cfg.k_winners == 0 {
                    return Err(EngineError::Config(format!(
                        "stage {i}: k_winners must be at least 1"
                    )));
                }
            }
            dims = out;
        }
        Ok(Self {
            stages,
            input_dims,
            cadence: LearningCadence::default(),
            trainable_stage: None,
        })
    }

    pub fn input_dims(&self) -> Dims3 {
        self.input_dims
    }

    pub fn output_dims(&self) -> Dims3 {
        self.stages.last().expect("validated non-empty").layer.dims()
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, index: usize) -> &Stage {
        &self.stages[index]
    }

    pub fn stage_mut(&mut self, index: usize) -> &mut Stage {
        &mut self.stages[index]
    }

    pub fn cadence(&self) -> LearningCadence {
        self.cadence
    }

    pub fn set_cadence(&mut self, cadence: LearningCadence) {
        self.cadence = cadence;
    }

    pub fn trainable_stage(&self) -> Option<usize> {
        self.trainable_stage
    }

    /// Selects which single stage learns during training runs. The stage
    /// must carry a learning rule.
    pub fn set_trainable_stage(&mut self, stage: Option<usize>) -> Result<()> {
        if let Some(s) = stage {
            if s >= self.stages.len() {
                return Err(EngineError::Config(format!(
                    "trainable stage {s} out of range ({} stages)",
                    self.stages.len()
                )));
            }
            if self.stages[s].learning.is_none() {
                return Err(EngineError::Config(format!(
                    "stage {s} has no learning rule attached"
                )));
            }
        }
        self.trainable_stage = stage;
        Ok(())
    }

    /// Runs one sample through the network and resets all layer state
    /// afterwards, so consecutive samples never interact except through
    /// learned weights.
    pub fn run_sample(&mut self, sample: &EventStream, mode: RunMode) -> Result<RunRecord> {
        let (record, _) = self.run_sample_inner(sample, mode, None)?;
        Ok(record)
    }

    /// Inference run that additionally records one neuron's potential and
    /// adaptation trajectory. `probe` is `(stage, channel, y, x)`.
    pub fn run_sample_traced(
        &mut self,
        sample: &EventStream,
        probe: (usize, usize, usize, usize),
    ) -> Result<(RunRecord, Vec<TracePoint>)> {
        let (s, c, y, x) = probe;
        if s >= self.stages.len() {
            return Err(EngineError::Config(format!(
                "probe stage {s} out of range ({} stages)",
                self.stages.len()
            )));
        }
        let dims = self.stages[s].layer.dims();
        if c >= dims.0 || y >= dims.1 || x >= dims.2 {
            return Err(EngineError::Config(format!(
                "probe neuron ({c}, {y}, {x}) outside layer dims {dims:?}"
            )));
        }
        self.run_sample_inner(sample, RunMode::Inference, Some(probe))
    }

    fn run_sample_inner(
        &mut self,
        sample: &EventStream,
        mode: RunMode,
        probe: Option<(usize, usize, usize, usize)>,
    ) -> Result<(RunRecord, Vec<TracePoint>)> {
        if sample.dims() != self.input_dims {
            return Err(EngineError::Shape(format!(
                "sample dims {:?} vs network input dims {:?}",
                sample.dims(),
                self.input_dims
            )));
        }
        let training = !matches!(mode, RunMode::Inference);
        if training && self.trainable_stage.is_none() {
            return Err(EngineError::Config(
                "training run requested but no trainable stage is set".into(),
            ));
        }
        if let RunMode::TrainRStdp { label } = mode {
            let out_maps = self.output_dims().0;
            if label >= out_maps {
                return Err(EngineError::Config(format!(
                    "label {label} out of range for {out_maps} output maps"
                )));
            }
        }

        let frames = sample.frames();
        let duration = sample.duration();
        let num_stages = self.stages.len();

        let mut input_first = Grid3::filled(self.input_dims, f64::INFINITY);
        // Per stage: first spike that survived inhibition, the potential at
        // that moment (or the latest one before any spike), and the latch of
        // maps already trained this sample.
        let mut first_delivered: Vec<Grid3> = self
            .stages
            .iter()
            .map(|s| Grid3::filled(s.layer.dims(), f64::INFINITY))
            .collect();
        let mut tie_potentials: Vec<Grid3> = self
            .stages
            .iter()
            .map(|s| Grid3::filled(s.layer.dims(), s.layer.resting_potential()))
            .collect();
        let trained_maps = self
            .trainable_stage
            .map(|s| self.stages[s].layer.dims().0)
            .unwrap_or(0);
        let mut latched = vec![false; trained_maps];

        let mut steps = Vec::with_capacity(duration as usize);
        let mut winner_history = Vec::new();
        let mut trace = Vec::new();

        for (t, frame) in frames.iter().enumerate() {
            for idx in frame.active_indices() {
                let slot = &mut input_first.as_mut_slice()[idx];
                if slot.is_infinite() {
                    *slot = t as f64;
                }
            }

            let mut current = frame.clone();
            let mut stats_row = Vec::with_capacity(num_stages);
            for s in 0..num_stages {
                let stage = &mut self.stages[s];
                let charge = stage.connection.forward(&current, stage.charge_scale)?;
                let out = stage.layer.step(&charge)?;
                if let Some((ps, pc, py, px)) = probe {
                    if ps == s {
                        trace.push(TracePoint {
                            step: t as u32,
                            potential: out.potentials.get(pc, py, px),
                            adaptation: stage.layer.adaptation().get(pc, py, px),
                            fired: out.spikes.is_spike(pc, py, px),
                        });
                    }
                }
                let spikes = match &stage.inhibition {
                    Some(cfg) => lateral_inhibition(&out.potentials, &out.spikes, cfg.radius)?,
                    None => out.spikes,
                };
                let delivered = first_delivered[s].as_mut_slice();
                let ties = tie_potentials[s].as_mut_slice();
                let peaks = out.potentials.as_slice();
                for n in 0..delivered.len() {
                    if delivered[n].is_infinite() {
                        ties[n] = peaks[n];
                    }
                }
                for idx in spikes.active_indices() {
                    if delivered[idx].is_infinite() {
                        delivered[idx] = t as f64;
                    }
                }
                stats_row.push(StepLayerStats {
                    spikes: spikes.count() as u32,
                    winners: 0,
                    max_potential: out.potentials.max_value(),
                });
                current = spikes;
            }

            if training && self.cadence == LearningCadence::PerTimestep {
                if let Some(event) = apply_learning(
                    &mut self.stages,
                    self.trainable_stage.expect("checked above"),
                    mode,
                    t as u32,
                    &input_first,
                    &first_delivered,
                    &tie_potentials,
                    &mut latched,
                )? {
                    stats_row[event.stage].winners = event.winners.len() as u32;
                    winner_history.push(event);
                }
            }
            steps.push(stats_row);
        }

        if training && self.cadence == LearningCadence::PerSample {
            let step = duration.saturating_sub(1);
            if let Some(event) = apply_learning(
                &mut self.stages,
                self.trainable_stage.expect("checked above"),
                mode,
                step,
                &input_first,
                &first_delivered,
                &tie_potentials,
                &mut latched,
            )? {
                if let Some(row) = steps.last_mut() {
                    row[event.stage].winners = event.winners.len() as u32;
                }
                winner_history.push(event);
            }
        }

        let output_first_spikes = first_delivered.last().expect("non-empty").clone();
        let decision = decide(
            &output_first_spikes,
            tie_potentials.last().expect("non-empty"),
        );
        let record = RunRecord {
            duration,
            steps,
            winner_history,
            output_first_spikes,
            final_potentials: tie_potentials,
            decision,
        };

        for stage in &mut self.stages {
            stage.layer.reset();
        }
        Ok((record, trace))
    }

    /// Runs every sample once, in order, accumulating metrics. In
    /// reward-modulated training every sample must carry a label.
    pub fn run_epoch(
        &mut self,
        dataset: &[(EventStream, Option<usize>)],
        mode: EpochMode,
    ) -> Result<EpochOutcome> {
        let mut metrics = EpochMetrics {
            samples: dataset.len(),
            layer_spike_totals: vec![0; self.stages.len()],
            winner_changes: 0,
            correct: 0,
            labeled: 0,
        };
        let mut records = Vec::with_capacity(dataset.len());
        let mut prev_winner_maps: Option<Vec<usize>> = None;

        for (i, (sample, label)) in dataset.iter().enumerate() {
            let run_mode = match mode {
                EpochMode::Inference => RunMode::Inference,
                EpochMode::TrainStdp => RunMode::TrainStdp,
                EpochMode::TrainRStdp => {
                    let label = label.ok_or_else(|| {
                        EngineError::Config(format!(
                            "sample {i} has no label; reward-modulated training needs one"
                        ))
                    })?;
                    RunMode::TrainRStdp { label }
                }
            };
            let record = self.run_sample(sample, run_mode)?;

            for row in &record.steps {
                for (s, st) in row.iter().enumerate() {
                    metrics.layer_spike_totals[s] += st.spikes as u64;
                }
            }
            if let Some(label) = label {
                metrics.labeled += 1;
                if record.decision == *label {
                    metrics.correct += 1;
                }
            }
            let mut winner_maps: Vec<usize> = record
                .winner_history
                .iter()
                .flat_map(|e| e.winners.iter().map(|w| w.map))
                .collect();
            winner_maps.sort_unstable();
            winner_maps.dedup();
            if let Some(prev) = &prev_winner_maps {
                if *prev != winner_maps {
                    metrics.winner_changes += 1;
                }
            }
            prev_winner_maps = Some(winner_maps);
            records.push(record);
        }
        Ok(EpochOutcome { metrics, records })
    }
}

/// One winner-take-all learning pass over the trainable stage. Maps that
/// already won this sample are masked out; fresh winners update their
/// weights and join the latch.
#[allow(clippy::too_many_arguments)]
fn apply_learning(
    stages: &mut [Stage],
    trainable: usize,
    mode: RunMode,
    step: u32,
    input_first: &Grid3,
    first_delivered: &[Grid3],
    tie_potentials: &[Grid3],
    latched: &mut [bool],
) -> Result<Option<WinnerEvent>> {
    let decision_correct = match mode {
        RunMode::TrainRStdp { label } => {
            let last = first_delivered.last().expect("non-empty");
            let pots = tie_potentials.last().expect("non-empty");
            Some(decide(last, pots) == label)
        }
        _ => None,
    };

    let stage = &mut stages[trainable];
    let config = stage
        .learning
        .clone()
        .ok_or_else(|| EngineError::Config("trainable stage has no learning rule".into()))?;

    let mut post_times = first_delivered[trainable].clone();
    let (maps, h, w) = post_times.dims();
    for (map, &taken) in latched.iter().enumerate() {
        if !taken {
            continue;
        }
        for y in 0..h {
            for x in 0..w {
                post_times.set(map, y, x, f64::INFINITY);
            }
        }
    }
    debug_assert_eq!(maps, latched.len());

    let winners = select_winners(
        &post_times,
        &tie_potentials[trainable],
        config.k_winners,
        config.inhibition_radius,
    )?;
    if winners.is_empty() {
        return Ok(None);
    }

    let pre_times = if trainable == 0 {
        input_first
    } else {
        &first_delivered[trainable - 1]
    };

    match &config.rule {
        LearningRule::Stdp { config: c } => {
            stdp_update(&mut stage.connection, pre_times, &post_times, &winners, c)?;
        }
        LearningRule::RStdp { reward, punish } => {
            let correct = decision_correct.ok_or_else(|| {
                EngineError::Config(
                    "stage uses a reward-modulated rule; run it in reward-modulated \
                     training mode"
                        .into(),
                )
            })?;
            rstdp_update(
                &mut stage.connection,
                pre_times,
                &post_times,
                &winners,
                correct,
                reward,
                punish,
            )?;
        }
    }

    for winner in winners.iter() {
        latched[winner.map] = true;
    }
    Ok(Some(WinnerEvent {
        step,
        stage: trainable,
        winners,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::WeightInit;
    use crate::events::Event;
    use crate::neurons::{NeuronModelKind, NeuronParams};

    fn passthrough_stage(dims: Dims3, learning: Option<LearningConfig>) -> Stage {
        let connection = Connection::conv(
            (dims.0, dims.0, 1, 1),
            1,
            0,
            // Identity mapping channel-by-channel needs per-pair weights, so
            // use constant 1 only for single-channel tests.
            WeightInit::Constant(1.0),
        )
        .unwrap();
        let layer = NeuronLayer::create(
            NeuronModelKind::If,
            dims,
            &NeuronParams {
                threshold: 20.0,
                ..NeuronParams::default()
            },
        )
        .unwrap();
        Stage {
            connection,
            layer,
            charge_scale: 25.0,
            inhibition: None,
            learning,
        }
    }

    fn one_spike_sample(dims: Dims3, t: u32, duration: u32) -> EventStream {
        EventStream::new(
            dims,
            duration,
            vec![Event {
                t,
                channel: 0,
                y: 0,
                x: 0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn spikes_propagate_immediately_through_a_passthrough_stage() {
        let dims = (1, 2, 2);
        let mut net = Network::new(dims, vec![passthrough_stage(dims, None)]).unwrap();
        let sample = one_spike_sample(dims, 1, 4);
        let record = net.run_sample(&sample, RunMode::Inference).unwrap();
        assert_eq!(record.steps.len(), 4);
        assert_eq!(record.steps[0][0].spikes, 0);
        assert_eq!(record.steps[1][0].spikes, 1);
        assert_eq!(record.output_first_spikes.get(0, 0, 0), 1.0);
    }

    #[test]
    fn consecutive_samples_produce_identical_records() {
        let dims = (1, 3, 3);
        let mut net = Network::new(dims, vec![passthrough_stage(dims, None)]).unwrap();
        let sample = one_spike_sample(dims, 0, 5);
        let a = net.run_sample(&sample, RunMode::Inference).unwrap();
        let b = net.run_sample(&sample, RunMode::Inference).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_dims_must_match_input_dims() {
        let dims = (1, 2, 2);
        let mut net = Network::new(dims, vec![passthrough_stage(dims, None)]).unwrap();
        let sample = EventStream::empty((1, 3, 3), 4);
        assert!(matches!(
            net.run_sample(&sample, RunMode::Inference),
            Err(EngineError::Shape(_))
        ));
    }

    #[test]
    fn mismatched_timesteps_are_rejected_at_construction() {
        let dims = (1, 2, 2);
        let mut fast = passthrough_stage(dims, None);
        fast.layer = NeuronLayer::create(
            NeuronModelKind::If,
            dims,
            &NeuronParams {
                threshold: 20.0,
                ts: 0.5,
                ..NeuronParams::default()
            },
        )
        .unwrap();
        let err = Network::new(dims, vec![passthrough_stage(dims, None), fast]).unwrap_err();
        assert!(matches!(err, EngineError::Config(_)));
    }

    #[test]
    fn training_without_a_trainable_stage_is_an_error() {
        let dims = (1, 2, 2);
        let mut net = Network::new(dims, vec![passthrough_stage(dims, None)]).unwrap();
        let sample = one_spike_sample(dims, 0, 2);
        assert!(net.run_sample(&sample, RunMode::TrainStdp).is_err());
    }

    fn dense_learning_network(out_maps: usize, rule: LearningRule) -> Network {
        let input = (1, 2, 2);
        let connection = Connection::dense(
            out_maps,
            4,
            WeightInit::Uniform {
                lo: 0.3,
                hi: 0.7,
                seed: 7,
            },
        )
        .unwrap();
        let layer = NeuronLayer::create(
            NeuronModelKind::If,
            (out_maps, 1, 1),
            &NeuronParams {
                threshold: 1.0,
                ..NeuronParams::default()
            },
        )
        .unwrap();
        let stage = Stage {
            connection,
            layer,
            charge_scale: 10.0,
            inhibition: None,
            learning: Some(LearningConfig {
                rule,
                k_winners: 1,
                inhibition_radius: 0,
            }),
        };
        let mut net = Network::new(input, vec![stage]).unwrap();
        net.set_trainable_stage(Some(0)).unwrap();
        net
    }

    #[test]
    fn stdp_training_moves_weights() {
        let mut net = dense_learning_network(
            2,
            LearningRule::Stdp {
                config: StdpConfig::new(0.1, -0.1, true),
            },
        );
        let before = net.stage(0).connection.weights().values().to_vec();
        let sample = one_spike_sample((1, 2, 2), 0, 4);
        net.run_sample(&sample, RunMode::TrainStdp).unwrap();
        let after = net.stage(0).connection.weights().values();
        assert_ne!(before.as_slice(), after);
    }

    #[test]
    fn each_map_trains_at_most_once_per_sample() {
        let mut net = dense_learning_network(
            3,
            LearningRule::Stdp {
                config: StdpConfig::new(0.05, -0.05, true),
            },
        );
        // Constant drive makes every map fire every non-refractory step;
        // without the latch the same map would win every step.
        let dims = (1, 2, 2);
        let mut events = Vec::new();
        for t in 0..8 {
            events.push(Event {
                t,
                channel: 0,
                y: 0,
                x: 0,
            });
        }
        let sample = EventStream::new(dims, 8, events).unwrap();
        let record = net.run_sample(&sample, RunMode::TrainStdp).unwrap();
        let mut seen = std::collections::HashSet::new();
        for event in &record.winner_history {
            for w in event.winners.iter() {
                assert!(seen.insert(w.map), "map {} trained twice", w.map);
            }
        }
        assert!(!record.winner_history.is_empty());
    }

    #[test]
    fn per_sample_cadence_trains_once() {
        let mut net = dense_learning_network(
            3,
            LearningRule::Stdp {
                config: StdpConfig::new(0.05, -0.05, true),
            },
        );
        net.set_cadence(LearningCadence::PerSample);
        let sample = one_spike_sample((1, 2, 2), 0, 6);
        let record = net.run_sample(&sample, RunMode::TrainStdp).unwrap();
        assert_eq!(record.winner_history.len(), 1);
    }

    #[test]
    fn rstdp_requires_matching_mode_and_valid_label() {
        let rule = LearningRule::RStdp {
            reward: StdpConfig::new(0.05, -0.05, true),
            punish: StdpConfig::new(-0.05, 0.05, true),
        };
        let mut net = dense_learning_network(2, rule.clone());
        let sample = one_spike_sample((1, 2, 2), 0, 4);
        assert!(net.run_sample(&sample, RunMode::TrainStdp).is_err());

        let mut net = dense_learning_network(2, rule);
        assert!(net
            .run_sample(&sample, RunMode::TrainRStdp { label: 5 })
            .is_err());
        assert!(net
            .run_sample(&sample, RunMode::TrainRStdp { label: 0 })
            .is_ok());
    }

    #[test]
    fn decide_prefers_earlier_spike_then_potential_then_index() {
        let times = Grid3::from_vec((3, 1, 1), vec![3.0, 1.0, 1.0]).unwrap();
        let pots = Grid3::from_vec((3, 1, 1), vec![9.0, 2.0, 5.0]).unwrap();
        assert_eq!(decide(&times, &pots), 2);

        let tied = Grid3::from_vec((3, 1, 1), vec![1.0, 1.0, 1.0]).unwrap();
        let flat = Grid3::from_vec((3, 1, 1), vec![4.0, 4.0, 4.0]).unwrap();
        assert_eq!(decide(&tied, &flat), 0);
    }

    #[test]
    fn epoch_counts_labels_and_winner_churn() {
        let mut net = dense_learning_network(
            2,
            LearningRule::Stdp {
                config: StdpConfig::new(0.02, -0.02, true),
            },
        );
        let a = one_spike_sample((1, 2, 2), 0, 4);
        let b = EventStream::new(
            (1, 2, 2),
            4,
            vec![Event {
                t: 0,
                channel: 0,
                y: 1,
                x: 1,
            }],
        )
        .unwrap();
        let dataset = vec![(a, Some(0)), (b, Some(1))];
        let outcome = net.run_epoch(&dataset, EpochMode::TrainStdp).unwrap();
        assert_eq!(outcome.metrics.samples, 2);
        assert_eq!(outcome.metrics.labeled, 2);
        assert_eq!(outcome.records.len(), 2);
        assert!(outcome.metrics.layer_spike_totals[0] > 0);
    }

    #[test]
    fn rstdp_epoch_requires_labels() {
        let mut net = dense_learning_network(
            2,
            LearningRule::RStdp {
                reward: StdpConfig::new(0.05, -0.05, true),
                punish: StdpConfig::new(-0.05, 0.05, true),
            },
        );
        let dataset = vec![(one_spike_sample((1, 2, 2), 0, 4), None)];
        assert!(net.run_epoch(&dataset, EpochMode::TrainRStdp).is_err());
    }

    #[test]
    fn trace_probe_follows_one_neuron() {
        let dims = (1, 2, 2);
        let mut net = Network::new(dims, vec![passthrough_stage(dims, None)]).unwrap();
        let sample = one_spike_sample(dims, 2, 5);
        let (_, trace) = net.run_sample_traced(&sample, (0, 0, 0, 0)).unwrap();
        assert_eq!(trace.len(), 5);
        assert!(trace[2].fired);
        assert!(trace[2].potential >= 20.0);
        assert!(!trace[0].fired);
    }

    #[test]
    fn trace_probe_is_validated() {
        let dims = (1, 2, 2);
        let mut net = Network::new(dims, vec![passthrough_stage(dims, None)]).unwrap();
        let sample = one_spike_sample(dims, 0, 2);
        assert!(net.run_sample_traced(&sample, (1, 0, 0, 0)).is_err());
        assert!(net.run_sample_traced(&sample, (0, 0, 5, 0)).is_err());
    }

    #[test]
    fn empty_sample_yields_empty_record() {
        let dims = (1, 2, 2);
        let mut net = Network::new(dims, vec![passthrough_stage(dims, None)]).unwrap();
        let sample = EventStream::empty(dims, 0);
        let record = net.run_sample(&sample, RunMode::Inference).unwrap();
        assert_eq!(record.duration, 0);
        assert!(record.steps.is_empty());
        assert!(record
            .output_first_spikes
            .as_slice()
            .iter()
            .all(|t| t.is_infinite()));
    }
}
