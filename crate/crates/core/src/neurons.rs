//! Stateful spiking neuron layers.
//!
//! A layer holds one neuron per grid cell and advances all of them by one
//! time step per [`NeuronLayer::step`] call. Models share the threshold /
//! reset / refractory mechanics and differ in their subthreshold update:
//!
//! * `IF`    — pure accumulator, no leak.
//! * `LIF`   — exact exponential decay toward rest, then charge injection.
//! * `EIF`   — explicit Euler with an exponential upswing above `theta_rh`.
//! * `QIF`   — explicit Euler with a quadratic drift crossing at `u_c`.
//! * `AdEx`  — EIF drift plus an adaptation variable with spike increments.
//! * `IZ`    — Izhikevich's two-variable model in canonical absolute-mV form.
//! * `HetLIF`/`HetEIF`/`HetQIF` — per-feature-map `tau_rc` spread over a range.
//!
//! Units are mV / ms / pF / pC throughout, so an input charge `Q` moves the
//! potential by `Q / C` millivolts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EngineError, Result};
use crate::grid::{Dims3, Grid3, SpikeFrame};

/// Clamp for the EIF/AdEx exponential argument; the spike-and-reset path
/// must win before the upswing can overflow.
pub const EXP_ARG_CLAMP: f64 = 20.0;

/// Sentinel used in [`NeuronLayer::first_spike_times`] for silent neurons.
pub const NEVER_SPIKED: f64 = f64::INFINITY;

/// The available neuron models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuronModelKind {
    If,
    Lif,
    Eif,
    Qif,
    AdEx,
    Iz,
    HetLif,
    HetEif,
    HetQif,
}

impl NeuronModelKind {
    /// True for the heterogeneous-tau variants.
    pub fn is_heterogeneous(&self) -> bool {
        matches!(self, Self::HetLif | Self::HetEif | Self::HetQif)
    }

    /// The dynamics actually integrated (het variants share their base model).
    pub fn base(&self) -> NeuronModelKind {
        match self {
            Self::HetLif => Self::Lif,
            Self::HetEif => Self::Eif,
            Self::HetQif => Self::Qif,
            other => *other,
        }
    }

    /// True for models carrying an adaptation variable.
    pub fn has_adaptation(&self) -> bool {
        matches!(self, Self::AdEx | Self::Iz)
    }
}

/// Full parameter record for any model. Optional fields are required only
/// by the models that use them; unset defaults are resolved at layer
/// creation (see [`NeuronLayer::create`]).
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronParams {
    /// Membrane time constant, ms.
    pub tau_rc: f64,
    /// Time-step size, ms.
    pub ts: f64,
    /// Membrane capacitance, pF.
    pub capacitance: f64,
    /// Firing threshold, mV.
    pub threshold: f64,
    /// Resting potential, mV.
    pub resting_potential: f64,
    /// Time steps a neuron stays silent after firing.
    pub refractory_timesteps: u32,
    /// Post-spike potential, mV. Defaults to `resting_potential`.
    pub reset_potential: Option<f64>,
    /// Sharpness of the exponential upswing, mV (EIF, AdEx).
    pub delta_t: Option<f64>,
    /// Rheobase cut-off threshold, mV (EIF, AdEx). Defaults to
    /// `u_rest + 3/4 * (threshold - u_rest)`.
    pub theta_rh: Option<f64>,
    /// Steepness of the quadratic curve, 1/mV (QIF).
    pub a_quad: Option<f64>,
    /// Negative-to-positive crossing point, mV (QIF). Defaults like `theta_rh`.
    pub u_c: Option<f64>,
    /// Adaptation-potential coupling (AdEx) / adaptation time scale (IZ).
    pub a_adapt: Option<f64>,
    /// Spike-triggered adaptation increment (AdEx) / subthreshold
    /// sensitivity (IZ).
    pub b_adapt: Option<f64>,
    /// Spike-triggered adaptation increment (IZ).
    pub d_adapt: Option<f64>,
    /// Adaptation time constant, ms (AdEx). Defaults to `tau_rc`.
    pub tau_w: Option<f64>,
    /// `(low, high)` tau_rc range in ms, heterogeneous models only.
    pub tau_range: Option<(f64, f64)>,
    /// Seed for the random heterogeneous mode; linear spacing when unset.
    pub tau_seed: Option<u64>,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            tau_rc: 10.0,
            ts: 1.0,
            capacitance: 1.0,
            threshold: 20.0,
            resting_potential: 0.0,
            refractory_timesteps: 0,
            reset_potential: None,
            delta_t: None,
            theta_rh: None,
            a_quad: None,
            u_c: None,
            a_adapt: None,
            b_adapt: None,
            d_adapt: None,
            tau_w: None,
            tau_range: None,
            tau_seed: None,
        }
    }
}

impl NeuronParams {
    fn require(&self, field: &str, value: Option<f64>) -> Result<f64> {
        value.ok_or_else(|| EngineError::Config(format!("missing required parameter `{field}`")))
    }
}

/// Defaults-resolved parameters; every field the dynamics read is concrete.
/// `tau_rc` itself lives in the layer's per-map vector.
#[derive(Debug, Clone)]
struct ResolvedParams {
    ts: f64,
    capacitance: f64,
    threshold: f64,
    resting_potential: f64,
    reset_potential: f64,
    refractory_timesteps: u32,
    delta_t: f64,
    theta_rh: f64,
    a_quad: f64,
    u_c: f64,
    a_adapt: f64,
    b_adapt: f64,
    d_adapt: f64,
    tau_w: f64,
}

/// Mutable per-sample state of a layer.
#[derive(Debug, Clone)]
struct LayerState {
    potentials: Grid3,
    adaptation: Grid3,
    refractory_remaining: Vec<u32>,
    fired_counts: Vec<u32>,
    first_spike_step: Vec<u32>,
    elapsed_timesteps: u32,
}

const NO_SPIKE: u32 = u32::MAX;

impl LayerState {
    fn fresh(dims: Dims3, resting_potential: f64) -> Self {
        let len = dims.0 * dims.1 * dims.2;
        Self {
            potentials: Grid3::filled(dims, resting_potential),
            adaptation: Grid3::zeros(dims),
            refractory_remaining: vec![0; len],
            fired_counts: vec![0; len],
            first_spike_step: vec![NO_SPIKE; len],
            elapsed_timesteps: 0,
        }
    }
}

/// Result of advancing a layer by one time step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Spikes emitted this step.
    pub spikes: SpikeFrame,
    /// Membrane potential of each neuron at this step's threshold test,
    /// before any spike reset. Competition mechanisms compare these peaks;
    /// the persistent layer state holds the post-reset values instead.
    pub potentials: Grid3,
}

/// A population grid of neurons sharing one model and parameter set.
///
/// One feature map (channel) is one population; heterogeneous variants give
/// each population its own `tau_rc`.
#[derive(Debug, Clone)]
pub struct NeuronLayer {
    kind: NeuronModelKind,
    dims: Dims3,
    params: ResolvedParams,
    /// One tau_rc per feature map (all equal for homogeneous layers).
    tau_per_map: Vec<f64>,
    /// Precomputed exp(-ts/tau) per map, used by the LIF family.
    decay_per_map: Vec<f64>,
    state: LayerState,
}

impl NeuronLayer {
    /// Creates a layer with potentials at rest, zero adaptation and no
    /// refractory carry-over. Model-specific parameters are validated here;
    /// a missing one is a configuration error naming the field.
    pub fn create(kind: NeuronModelKind, dims: Dims3, params: &NeuronParams) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(EngineError::Config(format!(
                "layer dims {dims:?} must all be positive"
            )));
        }
        if !(params.tau_rc > 0.0) {
            return Err(EngineError::Config("tau_rc must be > 0".into()));
        }
        if !(params.ts > 0.0) {
            return Err(EngineError::Config("ts must be > 0".into()));
        }
        if !(params.capacitance > 0.0) {
            return Err(EngineError::Config("capacitance must be > 0".into()));
        }
        if !(params.threshold > params.resting_potential) {
            return Err(EngineError::Config(
                "threshold must be above resting_potential".into(),
            ));
        }
        if let Some(dt) = params.delta_t {
            if !(dt > 0.0) {
                return Err(EngineError::Config("delta_t must be > 0".into()));
            }
        }
        if let Some((lo, hi)) = params.tau_range {
            if !(lo > 0.0) {
                return Err(EngineError::Config("tau_range.low must be > 0".into()));
            }
            if lo > hi {
                return Err(EngineError::Config(
                    "tau_range.low must not exceed tau_range.high".into(),
                ));
            }
        }

        // Three-quarters of the threshold-above-rest, the documented default
        // for both cut-off parameters.
        let three_quarter =
            params.resting_potential + 0.75 * (params.threshold - params.resting_potential);

        let base = kind.base();
        let delta_t = match base {
            NeuronModelKind::Eif | NeuronModelKind::AdEx => {
                params.require("delta_t", params.delta_t)?
            }
            _ => params.delta_t.unwrap_or(0.0),
        };
        let a_quad = match base {
            NeuronModelKind::Qif => params.require("a_quad", params.a_quad)?,
            _ => params.a_quad.unwrap_or(0.0),
        };
        let (a_adapt, b_adapt) = match base {
            NeuronModelKind::AdEx | NeuronModelKind::Iz => (
                params.require("a_adapt", params.a_adapt)?,
                params.require("b_adapt", params.b_adapt)?,
            ),
            _ => (
                params.a_adapt.unwrap_or(0.0),
                params.b_adapt.unwrap_or(0.0),
            ),
        };
        let d_adapt = match base {
            NeuronModelKind::Iz => params.require("d_adapt", params.d_adapt)?,
            _ => params.d_adapt.unwrap_or(0.0),
        };

        let resolved = ResolvedParams {
            ts: params.ts,
            capacitance: params.capacitance,
            threshold: params.threshold,
            resting_potential: params.resting_potential,
            reset_potential: params.reset_potential.unwrap_or(params.resting_potential),
            refractory_timesteps: params.refractory_timesteps,
            delta_t,
            theta_rh: params.theta_rh.unwrap_or(three_quarter),
            a_quad,
            u_c: params.u_c.unwrap_or(three_quarter),
            a_adapt,
            b_adapt,
            d_adapt,
            tau_w: params.tau_w.unwrap_or(params.tau_rc),
        };

        let tau_per_map = if kind.is_heterogeneous() {
            let (lo, hi) = params
                .tau_range
                .ok_or_else(|| EngineError::Config("missing required parameter `tau_range`".into()))?;
            materialize_taus(dims.0, lo, hi, params.tau_seed)
        } else {
            vec![params.tau_rc; dims.0]
        };
        let decay_per_map = tau_per_map
            .iter()
            .map(|tau| (-resolved.ts / tau).exp())
            .collect();

        let state = LayerState::fresh(dims, resolved.resting_potential);
        Ok(Self {
            kind,
            dims,
            params: resolved,
            tau_per_map,
            decay_per_map,
            state,
        })
    }

    pub fn kind(&self) -> NeuronModelKind {
        self.kind
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    /// Time-step size in ms.
    pub fn ts(&self) -> f64 {
        self.params.ts
    }

    pub fn threshold(&self) -> f64 {
        self.params.threshold
    }

    pub fn resting_potential(&self) -> f64 {
        self.params.resting_potential
    }

    pub fn reset_potential(&self) -> f64 {
        self.params.reset_potential
    }

    pub fn refractory_timesteps(&self) -> u32 {
        self.params.refractory_timesteps
    }

    /// Resolved rheobase cut-off (EIF/AdEx).
    pub fn theta_rh(&self) -> f64 {
        self.params.theta_rh
    }

    /// Resolved quadratic crossing point (QIF).
    pub fn u_c(&self) -> f64 {
        self.params.u_c
    }

    /// Resolved adaptation time constant (AdEx).
    pub fn tau_w(&self) -> f64 {
        self.params.tau_w
    }

    /// The tau_rc actually used by each feature map.
    pub fn tau_per_map(&self) -> &[f64] {
        &self.tau_per_map
    }

    /// Read-only view of the current membrane potentials.
    pub fn potentials(&self) -> &Grid3 {
        &self.state.potentials
    }

    /// Read-only view of the current adaptation values (zero for
    /// single-variable models).
    pub fn adaptation(&self) -> &Grid3 {
        &self.state.adaptation
    }

    /// Steps advanced since creation or the last reset.
    pub fn elapsed_timesteps(&self) -> u32 {
        self.state.elapsed_timesteps
    }

    pub fn refractory_remaining(&self, c: usize, y: usize, x: usize) -> u32 {
        self.state.refractory_remaining[self.state.potentials.index_of(c, y, x)]
    }

    /// Spikes emitted by one neuron this sample.
    pub fn fired_count(&self, c: usize, y: usize, x: usize) -> u32 {
        self.state.fired_counts[self.state.potentials.index_of(c, y, x)]
    }

    /// Overwrites one neuron's membrane potential (diagnostic/test hook).
    pub fn set_potential(&mut self, c: usize, y: usize, x: usize, u: f64) {
        self.state.potentials.set(c, y, x, u);
    }

    /// Overwrites one neuron's adaptation value (diagnostic/test hook).
    pub fn set_adaptation(&mut self, c: usize, y: usize, x: usize, w: f64) {
        self.state.adaptation.set(c, y, x, w);
    }

    /// Per-neuron index of the earliest spike this sample;
    /// [`NEVER_SPIKED`] for neurons that have not fired.
    pub fn first_spike_times(&self) -> Grid3 {
        let data = self
            .state
            .first_spike_step
            .iter()
            .map(|s| {
                if *s == NO_SPIKE {
                    NEVER_SPIKED
                } else {
                    *s as f64
                }
            })
            .collect();
        Grid3::from_vec(self.dims, data).expect("state grids share layer dims")
    }

    /// Advances every neuron by exactly one time step.
    ///
    /// `input_charge` is in pC, already weight-integrated by the connection.
    /// Order within the step: refractory bookkeeping, subthreshold dynamics
    /// plus charge injection, threshold test (`>=`), spike side-effects.
    pub fn step(&mut self, input_charge: &Grid3) -> Result<StepOutput> {
        if input_charge.dims() != self.dims {
            return Err(EngineError::Shape(format!(
                "input charge dims {:?} vs layer dims {:?}",
                input_charge.dims(),
                self.dims
            )));
        }
        if !input_charge.all_finite() {
            return Err(EngineError::Numeric(
                "non-finite input charge fed to layer".into(),
            ));
        }

        let step_index = self.state.elapsed_timesteps;
        let p = &self.params;
        let base = self.kind.base();
        let plane = self.dims.1 * self.dims.2;
        let mut spikes = Grid3::zeros(self.dims);
        let mut peaks = self.state.potentials.clone();

        let potentials = self.state.potentials.as_mut_slice();
        let adaptation = self.state.adaptation.as_mut_slice();
        let charge = input_charge.as_slice();
        let spike_slice = spikes.as_mut_slice();
        let peak_slice = peaks.as_mut_slice();

        for n in 0..potentials.len() {
            if self.state.refractory_remaining[n] > 0 {
                // Refractory: ignore input, hold at reset, count down.
                self.state.refractory_remaining[n] -= 1;
                continue;
            }

            let map = n / plane;
            let tau = self.tau_per_map[map];
            let u = potentials[n];
            let w = adaptation[n];
            let dq = charge[n] / p.capacitance;

            let (mut u_new, mut w_new) = match base {
                NeuronModelKind::If => (u + dq, w),
                NeuronModelKind::Lif => {
                    // Exact integral solution: decay toward rest, then inject.
                    let decayed =
                        p.resting_potential + (u - p.resting_potential) * self.decay_per_map[map];
                    (decayed + dq, w)
                }
                NeuronModelKind::Eif => {
                    let exp_arg = ((u - p.theta_rh) / p.delta_t).min(EXP_ARG_CLAMP);
                    let drift = (p.ts / tau)
                        * (-(u - p.resting_potential) + p.delta_t * exp_arg.exp());
                    (u + drift + dq, w)
                }
                NeuronModelKind::Qif => {
                    let drift =
                        (p.ts / tau) * (p.a_quad * (u - p.resting_potential) * (u - p.u_c));
                    (u + drift + dq, w)
                }
                NeuronModelKind::AdEx => {
                    let r = tau / p.capacitance;
                    let exp_arg = ((u - p.theta_rh) / p.delta_t).min(EXP_ARG_CLAMP);
                    let drift = (p.ts / tau)
                        * (-(u - p.resting_potential) + p.delta_t * exp_arg.exp() - r * w);
                    let dw = (p.ts / p.tau_w) * (p.a_adapt * (u - p.resting_potential) - w);
                    (u + drift + dq, w + dw)
                }
                NeuronModelKind::Iz => {
                    // Canonical form in absolute mV; the charge term carries
                    // its own per-step normalization.
                    let du = p.ts * (0.04 * u * u + 5.0 * u + 140.0 - w);
                    let dw = p.ts * p.a_adapt * (p.b_adapt * u - w);
                    (u + du + dq, w + dw)
                }
                NeuronModelKind::HetLif | NeuronModelKind::HetEif | NeuronModelKind::HetQif => {
                    unreachable!("base() never returns a heterogeneous kind")
                }
            };

            peak_slice[n] = u_new;
            if u_new >= p.threshold {
                spike_slice[n] = 1.0;
                u_new = p.reset_potential;
                w_new += match base {
                    NeuronModelKind::AdEx => p.b_adapt,
                    NeuronModelKind::Iz => p.d_adapt,
                    _ => 0.0,
                };
                self.state.refractory_remaining[n] = p.refractory_timesteps;
                self.state.fired_counts[n] += 1;
                if self.state.first_spike_step[n] == NO_SPIKE {
                    self.state.first_spike_step[n] = step_index;
                }
            }
            potentials[n] = u_new;
            adaptation[n] = w_new;
        }

        self.state.elapsed_timesteps = step_index + 1;
        Ok(StepOutput {
            spikes: SpikeFrame::from_binary_grid_unchecked(spikes),
            potentials: peaks,
        })
    }

    /// Restores the post-creation state. Heterogeneous tau assignments are
    /// parameters, not state, and survive the reset.
    pub fn reset(&mut self) {
        self.state = LayerState::fresh(self.dims, self.params.resting_potential);
    }
}

/// One tau per feature map: linearly spaced across the range inclusive, or
/// uniform draws when a seed is given.
fn materialize_taus(maps: usize, lo: f64, hi: f64, seed: Option<u64>) -> Vec<f64> {
    match seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..maps).map(|_| rng.gen_range(lo..=hi)).collect()
        }
        None => {
            if maps == 1 {
                return vec![lo];
            }
            let span = hi - lo;
            (0..maps)
                .map(|i| lo + span * i as f64 / (maps - 1) as f64)
                .collect()
        }
    }
}
