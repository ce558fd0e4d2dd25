//! Synaptic connections: convolutional and dense layers that turn a
//! presynaptic spike frame into postsynaptic input charge.
//!
//! Weights are dimensionless efficacies kept in `[0, 1]`; `charge_scale`
//! converts the weight-spike sum into injected charge (pC).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{EngineError, Result};
use crate::grid::{conv2d, conv_output_extent, Dims3, Dims4, Grid3, Grid4, SpikeFrame};

/// Weight initialization schemes. All of them are seeded or constant, so a
/// connection is fully reproducible from its configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightInit {
    Constant(f64),
    Uniform { lo: f64, hi: f64, seed: u64 },
    NormalClipped { mean: f64, sd: f64, seed: u64 },
}

impl WeightInit {
    fn validate(&self) -> Result<()> {
        match *self {
            WeightInit::Constant(c) => {
                if !(0.0..=1.0).contains(&c) {
                    return Err(EngineError::Config(format!(
                        "constant init {c} outside [0, 1]"
                    )));
                }
            }
            WeightInit::Uniform { lo, hi, .. } => {
                if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                    return Err(EngineError::Config(format!(
                        "uniform init range [{lo}, {hi}] invalid (need 0 <= lo <= hi <= 1)"
                    )));
                }
            }
            WeightInit::NormalClipped { mean, sd, .. } => {
                if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
                    return Err(EngineError::Config(format!(
                        "normal init (mean {mean}, sd {sd}) invalid"
                    )));
                }
            }
        }
        Ok(())
    }

    fn materialize(&self, len: usize) -> Vec<f64> {
        match *self {
            WeightInit::Constant(c) => vec![c; len],
            WeightInit::Uniform { lo, hi, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..len).map(|_| rng.gen_range(lo..=hi)).collect()
            }
            WeightInit::NormalClipped { mean, sd, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let dist = Normal::new(mean, sd).expect("validated parameters");
                (0..len)
                    .map(|_| dist.sample(&mut rng).clamp(0.0, 1.0))
                    .collect()
            }
        }
    }
}

/// Synaptic weights of one connection.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightTensor {
    /// Convolution kernel, dims `(out_channels, in_channels, kh, kw)`.
    Conv(Grid4),
    /// Dense matrix, row-major `(out_units, in_units)`.
    Dense {
        out_units: usize,
        in_units: usize,
        data: Vec<f64>,
    },
}

impl WeightTensor {
    pub fn values(&self) -> &[f64] {
        match self {
            WeightTensor::Conv(k) => k.as_slice(),
            WeightTensor::Dense { data, .. } => data,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            WeightTensor::Conv(k) => k.as_mut_slice(),
            WeightTensor::Dense { data, .. } => data,
        }
    }
}

/// A connection between two layers. Forward passes are read-only; weight
/// mutation (plasticity, loading) needs exclusive access.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    weights: WeightTensor,
    stride: usize,
    padding: usize,
}

impl Connection {
    /// Convolutional connection with kernel dims
    /// `(out_channels, in_channels, kh, kw)`.
    pub fn conv(dims: Dims4, stride: usize, padding: usize, init: WeightInit) -> Result<Self> {
        init.validate()?;
        if stride < 1 {
            return Err(EngineError::Config("conv stride must be >= 1".into()));
        }
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 || dims.3 == 0 {
            return Err(EngineError::Config(format!(
                "conv weight dims {dims:?} must all be positive"
            )));
        }
        let len = dims.0 * dims.1 * dims.2 * dims.3;
        let kernel = Grid4::from_vec(dims, init.materialize(len))?;
        Ok(Self {
            weights: WeightTensor::Conv(kernel),
            stride,
            padding,
        })
    }

    /// Dense (fully connected) connection; the input frame is flattened.
    pub fn dense(out_units: usize, in_units: usize, init: WeightInit) -> Result<Self> {
        init.validate()?;
        if out_units == 0 || in_units == 0 {
            return Err(EngineError::Config(
                "dense connection needs positive unit counts".into(),
            ));
        }
        Ok(Self {
            weights: WeightTensor::Dense {
                out_units,
                in_units,
                data: init.materialize(out_units * in_units),
            },
            stride: 1,
            padding: 0,
        })
    }

    pub fn weights(&self) -> &WeightTensor {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut WeightTensor {
        &mut self.weights
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.weights, WeightTensor::Dense { .. })
    }

    /// Output dims this connection produces for the given input dims.
    pub fn output_dims(&self, input: Dims3) -> Result<Dims3> {
        match &self.weights {
            WeightTensor::Conv(kernel) => {
                let (out_c, in_c, kh, kw) = kernel.dims();
                if input.0 != in_c {
                    return Err(EngineError::Shape(format!(
                        "input has {} channels but kernel expects {in_c}",
                        input.0
                    )));
                }
                if kh > input.1 + 2 * self.padding || kw > input.2 + 2 * self.padding {
                    return Err(EngineError::Shape(format!(
                        "kernel {kh}x{kw} larger than padded input {}x{}",
                        input.1 + 2 * self.padding,
                        input.2 + 2 * self.padding
                    )));
                }
                Ok((
                    out_c,
                    conv_output_extent(input.1, kh, self.stride, self.padding),
                    conv_output_extent(input.2, kw, self.stride, self.padding),
                ))
            }
            WeightTensor::Dense {
                out_units,
                in_units,
                ..
            } => {
                let flat = input.0 * input.1 * input.2;
                if flat != *in_units {
                    return Err(EngineError::Shape(format!(
                        "dense connection expects {in_units} inputs, frame has {flat}"
                    )));
                }
                // Each dense population is a single neuron.
                Ok((*out_units, 1, 1))
            }
        }
    }

    /// Transforms a presynaptic spike frame into postsynaptic charge (pC).
    pub fn forward(&self, input: &SpikeFrame, charge_scale: f64) -> Result<Grid3> {
        match &self.weights {
            WeightTensor::Conv(kernel) => {
                let charge = conv2d(input, kernel, self.stride, self.padding)?;
                Ok(charge.scale(charge_scale))
            }
            WeightTensor::Dense {
                out_units,
                in_units,
                data,
            } => {
                let spikes = input.grid().as_slice();
                if spikes.len() != *in_units {
                    return Err(EngineError::Shape(format!(
                        "dense connection expects {in_units} inputs, frame has {}",
                        spikes.len()
                    )));
                }
                let mut out = Grid3::zeros((*out_units, 1, 1));
                let out_slice = out.as_mut_slice();
                for (i, s) in spikes.iter().enumerate() {
                    if *s == 0.0 {
                        continue;
                    }
                    for (o, acc) in out_slice.iter_mut().enumerate() {
                        *acc += data[o * in_units + i];
                    }
                }
                for acc in out_slice.iter_mut() {
                    *acc *= charge_scale;
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_init_fills_weights() {
        let conn = Connection::conv((2, 1, 3, 3), 1, 0, WeightInit::Constant(0.5)).unwrap();
        assert!(conn.weights().values().iter().all(|w| *w == 0.5));
    }

    #[test]
    fn uniform_init_is_deterministic_per_seed() {
        let init = WeightInit::Uniform {
            lo: 0.2,
            hi: 0.8,
            seed: 7,
        };
        let a = Connection::dense(4, 9, init).unwrap();
        let b = Connection::dense(4, 9, init).unwrap();
        assert_eq!(a.weights().values(), b.weights().values());
        assert!(a
            .weights()
            .values()
            .iter()
            .all(|w| (0.2..=0.8).contains(w)));
    }

    #[test]
    fn normal_clipped_stays_in_unit_interval() {
        let init = WeightInit::NormalClipped {
            mean: 0.8,
            sd: 0.5,
            seed: 3,
        };
        let conn = Connection::dense(8, 32, init).unwrap();
        assert!(conn
            .weights()
            .values()
            .iter()
            .all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn out_of_range_init_is_config_error() {
        assert!(Connection::dense(1, 1, WeightInit::Constant(1.5)).is_err());
        assert!(Connection::dense(
            1,
            1,
            WeightInit::Uniform {
                lo: 0.5,
                hi: 0.2,
                seed: 0
            }
        )
        .is_err());
        assert!(Connection::dense(
            1,
            1,
            WeightInit::NormalClipped {
                mean: 0.5,
                sd: -1.0,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn forward_zero_spikes_gives_zero_charge() {
        let conn = Connection::conv((2, 1, 3, 3), 1, 0, WeightInit::Constant(0.9)).unwrap();
        let out = conn.forward(&SpikeFrame::zeros((1, 5, 5)), 1.0).unwrap();
        assert!(out.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dense_forward_sums_active_spikes() {
        let conn = Connection::dense(4, 9, WeightInit::Constant(1.0)).unwrap();
        let mut frame = SpikeFrame::zeros((1, 3, 3));
        frame.set_spike(0, 0, 0);
        frame.set_spike(0, 1, 1);
        frame.set_spike(0, 2, 2);
        let out = conn.forward(&frame, 1.0).unwrap();
        assert_eq!(out.dims(), (4, 1, 1));
        assert!(out.as_slice().iter().all(|v| *v == 3.0));
    }

    #[test]
    fn conv_forward_scales_by_charge_scale() {
        let conn = Connection::conv((1, 1, 3, 3), 1, 0, WeightInit::Constant(1.0)).unwrap();
        let frame = SpikeFrame::from_grid(Grid3::filled((1, 3, 3), 1.0)).unwrap();
        let out = conn.forward(&frame, 2.0).unwrap();
        assert_eq!(out.get(0, 0, 0), 18.0);
    }

    #[test]
    fn dense_dims_mismatch_is_shape_error() {
        let conn = Connection::dense(2, 4, WeightInit::Constant(0.5)).unwrap();
        let frame = SpikeFrame::zeros((1, 3, 3));
        assert!(matches!(
            conn.forward(&frame, 1.0),
            Err(EngineError::Shape(_))
        ));
    }
}
