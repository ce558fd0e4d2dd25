//! Local learning: multiplicative STDP, reward-modulated STDP, k-winners
//! selection and lateral inhibition.
//!
//! The STDP rule is sign-by-causality and independent of the spike time
//! difference magnitude: a synapse whose presynaptic neuron fired at or
//! before the winner's first spike is potentiated by `lr_plus`, every other
//! synapse (later pre spike, or no pre spike at all) changes by `lr_minus`.
//! With the stabilizer on, updates scale by `w * (1 - w)`, which pins the
//! weights inside `[0, 1]` with fixed points at the bounds.

use crate::connectivity::{Connection, WeightTensor};
use crate::error::{EngineError, Result};
use crate::grid::{Grid3, SpikeFrame};

/// Rates and flags for one STDP update pass.
///
/// `lr_plus` applies to causal pairs, `lr_minus` to anti-causal ones; the
/// sign carries the direction, so an R-STDP punishment config typically
/// holds a negative `lr_plus` and a positive `lr_minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdpConfig {
    pub lr_plus: f64,
    pub lr_minus: f64,
    /// Multiply updates by `w * (1 - w)`.
    pub use_stabilizer: bool,
}

impl StdpConfig {
    pub fn new(lr_plus: f64, lr_minus: f64, use_stabilizer: bool) -> Self {
        Self {
            lr_plus,
            lr_minus,
            use_stabilizer,
        }
    }

    /// Config whose updates are all zero.
    pub fn frozen() -> Self {
        Self::new(0.0, 0.0, true)
    }
}

/// One winning neuron: feature map plus grid location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Winner {
    pub map: usize,
    pub y: usize,
    pub x: usize,
}

/// Winners of one selection pass; at most one per feature map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WinnerSet {
    winners: Vec<Winner>,
}

impl WinnerSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_winners(winners: Vec<Winner>) -> Self {
        Self { winners }
    }

    pub fn len(&self) -> usize {
        self.winners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.winners.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Winner> {
        self.winners.iter()
    }

    pub fn as_slice(&self) -> &[Winner] {
        &self.winners
    }
}

/// Iteratively selects up to `k` winners by earliest first-spike time, with
/// highest potential and then lowest flat index as tie-breaks.
///
/// Each pick excludes the winner's whole feature map and, in every other
/// map, all neurons within Chebyshev distance `inhibition_radius` of the
/// winner's location. Neurons that never fired are ineligible.
pub fn select_winners(
    post_first_spikes: &Grid3,
    potentials: &Grid3,
    k: usize,
    inhibition_radius: usize,
) -> Result<WinnerSet> {
    if post_first_spikes.dims() != potentials.dims() {
        return Err(EngineError::Shape(format!(
            "first-spike dims {:?} vs potential dims {:?}",
            post_first_spikes.dims(),
            potentials.dims()
        )));
    }
    let maps = post_first_spikes.channels();
    let times = post_first_spikes.as_slice();
    let pots = potentials.as_slice();

    let mut excluded_map = vec![false; maps];
    let mut zones: Vec<(usize, usize)> = Vec::new();
    let mut winners = Vec::new();

    while winners.len() < k {
        let mut best: Option<(f64, f64, usize)> = None;
        for idx in 0..times.len() {
            let t = times[idx];
            if !t.is_finite() {
                continue;
            }
            let (map, y, x) = post_first_spikes.coords_of(idx);
            if excluded_map[map] {
                continue;
            }
            if zones.iter().any(|&(zy, zx)| {
                let dy = y.abs_diff(zy);
                let dx = x.abs_diff(zx);
                dy.max(dx) <= inhibition_radius
            }) {
                continue;
            }
            let candidate = (t, pots[idx], idx);
            let wins = match best {
                None => true,
                Some((bt, bp, bi)) => {
                    (t, -pots[idx], idx) < (bt, -bp, bi)
                }
            };
            if wins {
                best = Some(candidate);
            }
        }
        match best {
            Some((_, _, idx)) => {
                let (map, y, x) = post_first_spikes.coords_of(idx);
                winners.push(Winner { map, y, x });
                excluded_map[map] = true;
                zones.push((y, x));
            }
            None => break,
        }
    }
    Ok(WinnerSet { winners })
}

fn apply_delta(weight: &mut f64, causal: bool, cfg: &StdpConfig) {
    let rate = if causal { cfg.lr_plus } else { cfg.lr_minus };
    let stabilizer = if cfg.use_stabilizer {
        *weight * (1.0 - *weight)
    } else {
        1.0
    };
    *weight = (*weight + rate * stabilizer).clamp(0.0, 1.0);
}

/// Applies the multiplicative STDP rule to every synapse feeding a winner.
///
/// Causality uses first-spike times: `pre <= post` (simultaneity included)
/// potentiates, anything else — including a pre neuron that never fired —
/// depresses. Non-winner synapses are untouched.
pub fn stdp_update(
    conn: &mut Connection,
    pre_first_spikes: &Grid3,
    post_first_spikes: &Grid3,
    winners: &WinnerSet,
    cfg: &StdpConfig,
) -> Result<()> {
    let stride = conn.stride();
    let padding = conn.padding();
    let (post_maps, post_h, post_w) = post_first_spikes.dims();
    let (pre_c, pre_h, pre_w) = pre_first_spikes.dims();

    for winner in winners.iter() {
        if winner.map >= post_maps || winner.y >= post_h || winner.x >= post_w {
            return Err(EngineError::Logic(format!(
                "winner ({}, {}, {}) outside post dims {:?}",
                winner.map,
                winner.y,
                winner.x,
                post_first_spikes.dims()
            )));
        }
        let post_t = post_first_spikes.get(winner.map, winner.y, winner.x);

        match conn.weights_mut() {
            WeightTensor::Conv(kernel) => {
                let (out_c, in_c, kh, kw) = kernel.dims();
                if winner.map >= out_c {
                    return Err(EngineError::Logic(format!(
                        "winner map {} outside kernel out channels {out_c}",
                        winner.map
                    )));
                }
                if pre_c != in_c {
                    return Err(EngineError::Shape(format!(
                        "pre grid has {pre_c} channels but kernel expects {in_c}"
                    )));
                }
                for ci in 0..in_c {
                    for ky in 0..kh {
                        let iy = (winner.y * stride + ky) as isize - padding as isize;
                        for kx in 0..kw {
                            let ix = (winner.x * stride + kx) as isize - padding as isize;
                            // Padding positions have no presynaptic neuron and
                            // count as never-fired.
                            let pre_t = if iy >= 0
                                && (iy as usize) < pre_h
                                && ix >= 0
                                && (ix as usize) < pre_w
                            {
                                pre_first_spikes.get(ci, iy as usize, ix as usize)
                            } else {
                                f64::INFINITY
                            };
                            let idx = kernel.index_of(winner.map, ci, ky, kx);
                            apply_delta(&mut kernel.as_mut_slice()[idx], pre_t <= post_t, cfg);
                        }
                    }
                }
            }
            WeightTensor::Dense {
                out_units,
                in_units,
                data,
            } => {
                if winner.map >= *out_units || winner.y != 0 || winner.x != 0 {
                    return Err(EngineError::Logic(format!(
                        "winner ({}, {}, {}) invalid for dense output of {out_units} units",
                        winner.map, winner.y, winner.x
                    )));
                }
                let flat = pre_c * pre_h * pre_w;
                if flat != *in_units {
                    return Err(EngineError::Shape(format!(
                        "pre grid has {flat} neurons but dense connection expects {in_units}"
                    )));
                }
                let pre = pre_first_spikes.as_slice();
                let row = &mut data[winner.map * *in_units..(winner.map + 1) * *in_units];
                for (i, weight) in row.iter_mut().enumerate() {
                    apply_delta(weight, pre[i] <= post_t, cfg);
                }
            }
        }
    }
    Ok(())
}

/// Reward-modulated STDP: applies the reward config on a correct decision
/// and the punishment config otherwise.
pub fn rstdp_update(
    conn: &mut Connection,
    pre_first_spikes: &Grid3,
    post_first_spikes: &Grid3,
    winners: &WinnerSet,
    decision_correct: bool,
    cfg_reward: &StdpConfig,
    cfg_punish: &StdpConfig,
) -> Result<()> {
    let cfg = if decision_correct {
        cfg_reward
    } else {
        cfg_punish
    };
    stdp_update(conn, pre_first_spikes, post_first_spikes, winners, cfg)
}

/// Cross-map competition on one spike frame: at each location only the
/// spiking map with the highest potential survives (ties: lowest map index).
/// With `radius > 0`, each surviving spike additionally suppresses other
/// maps' spikes within that Chebyshev distance, strongest potentials first.
pub fn lateral_inhibition(
    potentials: &Grid3,
    spikes: &SpikeFrame,
    radius: usize,
) -> Result<SpikeFrame> {
    if potentials.dims() != spikes.dims() {
        return Err(EngineError::Shape(format!(
            "potential dims {:?} vs spike dims {:?}",
            potentials.dims(),
            spikes.dims()
        )));
    }
    let (maps, height, width) = spikes.dims();
    let mut out = spikes.clone();

    for y in 0..height {
        for x in 0..width {
            let mut best: Option<(f64, usize)> = None;
            for m in 0..maps {
                if spikes.is_spike(m, y, x) {
                    let p = potentials.get(m, y, x);
                    let better = match best {
                        None => true,
                        Some((bp, _)) => p > bp,
                    };
                    if better {
                        best = Some((p, m));
                    }
                }
            }
            if let Some((_, keep)) = best {
                for m in 0..maps {
                    if m != keep {
                        out.clear_spike(m, y, x);
                    }
                }
            }
        }
    }

    if radius > 0 {
        // Strongest survivors suppress competing maps in their neighborhood.
        let mut survivors: Vec<(usize, usize, usize, f64)> = out
            .active()
            .into_iter()
            .map(|(m, y, x)| (m, y, x, potentials.get(m, y, x)))
            .collect();
        survivors.sort_by(|a, b| {
            b.3.partial_cmp(&a.3)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| {
                    let ia = (a.0 * height + a.1) * width + a.2;
                    let ib = (b.0 * height + b.1) * width + b.2;
                    ia.cmp(&ib)
                })
        });
        for (m, y, x, _) in survivors {
            if !out.is_spike(m, y, x) {
                continue;
            }
            for om in 0..maps {
                if om == m {
                    continue;
                }
                let y_lo = y.saturating_sub(radius);
                let y_hi = (y + radius).min(height - 1);
                let x_lo = x.saturating_sub(radius);
                let x_hi = (x + radius).min(width - 1);
                for oy in y_lo..=y_hi {
                    for ox in x_lo..=x_hi {
                        out.clear_spike(om, oy, ox);
                    }
                }
            }
        }
    }
    Ok(out)
}
