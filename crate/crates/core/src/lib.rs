//! Event-driven spiking neural network engine.
//!
//! The crate is organized around a per-time-step execution model: binary
//! spike frames flow through convolutional or dense connections into layers
//! of integrate-and-fire-family neurons, with optional lateral inhibition
//! and winner-take-all STDP learning after each step.
//!
//! - [`grid`]: dense tensors, spike frames, and spike convolution.
//! - [`neurons`]: the neuron models and layer stepping.
//! - [`connectivity`]: weight tensors and charge propagation.
//! - [`plasticity`]: STDP, reward-modulated STDP, winner selection, and
//!   lateral inhibition.
//! - [`events`]: event-stream samples and frame decomposition.
//! - [`encoding`]: difference-of-Gaussians filtering and latency coding.
//! - [`runtime`]: multi-stage networks, sample runs, and epochs.
//! - [`io`]: event/weight/metrics file formats and the synthetic bar corpus.

// Validation guards are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which a plain `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod connectivity;
pub mod encoding;
pub mod error;
pub mod events;
pub mod grid;
pub mod io;
pub mod neurons;
pub mod plasticity;
pub mod runtime;

pub use connectivity::{Connection, WeightInit, WeightTensor};
pub use encoding::{dog_filter, intensity_to_latency, DoGKernel};
pub use error::{EngineError, Result};
pub use events::{Event, EventStream};
pub use grid::{conv2d, conv_output_extent, Dims3, Dims4, Grid3, Grid4, SpikeFrame};
pub use neurons::{
    NeuronLayer, NeuronModelKind, NeuronParams, StepOutput, EXP_ARG_CLAMP, NEVER_SPIKED,
};
pub use plasticity::{
    lateral_inhibition, rstdp_update, select_winners, stdp_update, StdpConfig, Winner, WinnerSet,
};
pub use runtime::{
    decide, EpochMetrics, EpochMode, EpochOutcome, InhibitionConfig, LearningCadence,
    LearningConfig, LearningRule, Network, RunMode, RunRecord, Stage, StepLayerStats, TracePoint,
    WinnerEvent,
};
