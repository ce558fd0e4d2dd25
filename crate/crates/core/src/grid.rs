//! Dense rank-3 grids, rank-4 kernels and the 2-D convolution used as the
//! connection scheme between layers.
//!
//! A [`Grid3`] stores one value per neuron of a layer in row-major
//! `(channel, y, x)` order. A [`SpikeFrame`] is a `Grid3` constrained to
//! binary entries and represents the spikes of exactly one time step.

use crate::error::{EngineError, Result};

/// Dimensions of a rank-3 grid: `(channels, height, width)`.
pub type Dims3 = (usize, usize, usize);

/// Dense rank-3 array of `f64`, row-major `(channel, y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    dims: Dims3,
    data: Vec<f64>,
}

impl Grid3 {
    /// Grid filled with a constant value.
    pub fn filled(dims: Dims3, value: f64) -> Self {
        let len = dims.0 * dims.1 * dims.2;
        Self {
            dims,
            data: vec![value; len],
        }
    }

    /// All-zero grid.
    pub fn zeros(dims: Dims3) -> Self {
        Self::filled(dims, 0.0)
    }

    /// Builds a grid from raw row-major data.
    pub fn from_vec(dims: Dims3, data: Vec<f64>) -> Result<Self> {
        let expected = dims.0 * dims.1 * dims.2;
        if data.len() != expected {
            return Err(EngineError::Shape(format!(
                "data length {} does not match dims {:?} (expected {})",
                data.len(),
                dims,
                expected
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.dims.0
    }

    pub fn height(&self) -> usize {
        self.dims.1
    }

    pub fn width(&self) -> usize {
        self.dims.2
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index_of(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.dims.1 + y) * self.dims.2 + x
    }

    /// Converts a flat index back to `(channel, y, x)`.
    pub fn coords_of(&self, idx: usize) -> (usize, usize, usize) {
        let plane = self.dims.1 * self.dims.2;
        (idx / plane, (idx % plane) / self.dims.2, idx % self.dims.2)
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index_of(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        let idx = self.index_of(c, y, x);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest entry, or `f64::NEG_INFINITY` on an empty grid.
    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_same_dims(&self, other: &Grid3) -> Result<()> {
        if self.dims != other.dims {
            return Err(EngineError::Shape(format!(
                "grid dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Grid3) -> Result<Grid3> {
        self.check_same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Grid3 {
            dims: self.dims,
            data,
        })
    }

    /// Elementwise multiplication by a scalar.
    pub fn scale(&self, factor: f64) -> Grid3 {
        Grid3 {
            dims: self.dims,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    /// Elementwise `>=` against another grid; yields a {0,1} grid.
    pub fn compare_ge(&self, other: &Grid3) -> Result<Grid3> {
        self.check_same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| if a >= b { 1.0 } else { 0.0 })
            .collect();
        Ok(Grid3 {
            dims: self.dims,
            data,
        })
    }

    /// Elementwise `>=` against a scalar; yields a {0,1} grid.
    pub fn compare_ge_scalar(&self, threshold: f64) -> Grid3 {
        Grid3 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .map(|a| if *a >= threshold { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Dimensions of a rank-4 kernel: `(out_channels, in_channels, kh, kw)`.
pub type Dims4 = (usize, usize, usize, usize);

/// Dense rank-4 array used for convolution kernels, row-major
/// `(out_channel, in_channel, ky, kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid4 {
    dims: Dims4,
    data: Vec<f64>,
}

impl Grid4 {
    pub fn filled(dims: Dims4, value: f64) -> Self {
        let len = dims.0 * dims.1 * dims.2 * dims.3;
        Self {
            dims,
            data: vec![value; len],
        }
    }

    pub fn from_vec(dims: Dims4, data: Vec<f64>) -> Result<Self> {
        let expected = dims.0 * dims.1 * dims.2 * dims.3;
        if data.len() != expected {
            return Err(EngineError::Shape(format!(
                "data length {} does not match kernel dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims4 {
        self.dims
    }

    #[inline]
    pub fn index_of(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.dims.1 + i) * self.dims.2 + ky) * self.dims.3 + kx
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.data[self.index_of(o, i, ky, kx)]
    }

    #[inline]
    pub fn set(&mut self, o: usize, i: usize, ky: usize, kx: usize, value: f64) {
        let idx = self.index_of(o, i, ky, kx);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Binary spike grid for one time step of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeFrame {
    grid: Grid3,
}

impl SpikeFrame {
    /// Frame with no spikes.
    pub fn zeros(dims: Dims3) -> Self {
        Self {
            grid: Grid3::zeros(dims),
        }
    }

    /// Wraps a grid after checking every entry is exactly 0 or 1.
    pub fn from_grid(grid: Grid3) -> Result<Self> {
        if let Some(v) = grid.as_slice().iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(EngineError::Data(format!(
                "spike frame entry {v} is not 0 or 1"
            )));
        }
        Ok(Self { grid })
    }

    /// Wraps a grid that is binary by construction. Debug-checked only.
    pub(crate) fn from_binary_grid_unchecked(grid: Grid3) -> Self {
        debug_assert!(grid.as_slice().iter().all(|v| *v == 0.0 || *v == 1.0));
        Self { grid }
    }

    pub fn dims(&self) -> Dims3 {
        self.grid.dims()
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn is_spike(&self, c: usize, y: usize, x: usize) -> bool {
        self.grid.get(c, y, x) == 1.0
    }

    pub fn set_spike(&mut self, c: usize, y: usize, x: usize) {
        self.grid.set(c, y, x, 1.0);
    }

    pub fn clear_spike(&mut self, c: usize, y: usize, x: usize) {
        self.grid.set(c, y, x, 0.0);
    }

    /// Number of active spikes in the frame.
    pub fn count(&self) -> usize {
        self.grid.as_slice().iter().filter(|v| **v == 1.0).count()
    }

    /// Coordinates of all active spikes in flat order.
    pub fn active(&self) -> Vec<(usize, usize, usize)> {
        self.grid
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == 1.0)
            .map(|(i, _)| self.grid.coords_of(i))
            .collect()
    }

    /// Flat indices of all active spikes, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        self.grid
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == 1.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Output dims of a convolution: `floor((extent + 2*padding - kernel)/stride) + 1`.
pub fn conv_output_extent(extent: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (extent + 2 * padding - kernel) / stride + 1
}

/// 2-D convolution of a spike frame with a rank-4 kernel, zero padding.
///
/// Output value at `(o, oy, ox)` is the sum of `weight * spike` over the
/// kernel window, i.e. the input charge collected by that output neuron.
pub fn conv2d(
    input: &SpikeFrame,
    kernel: &Grid4,
    stride: usize,
    padding: usize,
) -> Result<Grid3> {
    let (in_c, in_h, in_w) = input.dims();
    let (out_c, k_in_c, k_h, k_w) = kernel.dims();
    if stride < 1 {
        return Err(EngineError::Config("conv stride must be >= 1".into()));
    }
    if in_c != k_in_c {
        return Err(EngineError::Shape(format!(
            "input has {in_c} channels but kernel expects {k_in_c}"
        )));
    }
    if k_h > in_h + 2 * padding || k_w > in_w + 2 * padding {
        return Err(EngineError::Shape(format!(
            "kernel {k_h}x{k_w} larger than padded input {}x{}",
            in_h + 2 * padding,
            in_w + 2 * padding
        )));
    }

    let out_h = conv_output_extent(in_h, k_h, stride, padding);
    let out_w = conv_output_extent(in_w, k_w, stride, padding);
    let mut out = Grid3::zeros((out_c, out_h, out_w));

    let spikes = input.grid();
    for o in 0..out_c {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = 0.0;
                for i in 0..in_c {
                    for ky in 0..k_h {
                        let iy = (oy * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy >= in_h as isize {
                            continue;
                        }
                        for kx in 0..k_w {
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix >= in_w as isize {
                                continue;
                            }
                            let s = spikes.get(i, iy as usize, ix as usize);
                            if s != 0.0 {
                                acc += kernel.get(o, i, ky, kx) * s;
                            }
                        }
                    }
                }
                out.set(o, oy, ox, acc);
            }
        }
    }
    Ok(out)
}
