//! Image-to-spike encoding: difference-of-Gaussians filtering followed by
//! rank-order intensity-to-latency conversion.

use crate::error::{EngineError, Result};
use crate::events::{Event, EventStream};
use crate::grid::Grid3;

/// A square difference-of-Gaussians kernel. With `sigma1 < sigma2` the
/// kernel is on-center (bright-on-dark); swapping the sigmas flips the sign
/// of every tap, giving the off-center variant.
#[derive(Debug, Clone, PartialEq)]
pub struct DoGKernel {
    size: usize,
    values: Vec<f64>,
}

impl DoGKernel {
    /// Builds a `size` x `size` kernel as the difference of two unit-sum
    /// Gaussians, then shifts it to zero mean so flat regions produce no
    /// response.
    pub fn new(size: usize, sigma1: f64, sigma2: f64) -> Result<Self> {
        if size.is_multiple_of(2) || size == 0 {
            return Err(EngineError::Config(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        if !(sigma1 > 0.0) || !(sigma2 > 0.0) {
            return Err(EngineError::Config(format!(
                "sigmas must be positive, got {sigma1} and {sigma2}"
            )));
        }
        let center = (size / 2) as isize;
        let gaussian = |sigma: f64| -> Vec<f64> {
            let mut g = Vec::with_capacity(size * size);
            for y in 0..size as isize {
                for x in 0..size as isize {
                    let dy = (y - center) as f64;
                    let dx = (x - center) as f64;
                    g.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
                }
            }
            let sum: f64 = g.iter().sum();
            for v in &mut g {
                *v /= sum;
            }
            g
        };
        let g1 = gaussian(sigma1);
        let g2 = gaussian(sigma2);
        let mut values: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        for v in &mut values {
            *v -= mean;
        }
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn at(&self, ky: usize, kx: usize) -> f64 {
        self.values[ky * self.size + kx]
    }
}

/// Correlates a single-channel image with each kernel (same padding, zeros
/// outside the border) and rectifies: negative responses clip to zero. The
/// result has one channel per kernel.
pub fn dog_filter(image: &Grid3, kernels: &[DoGKernel]) -> Result<Grid3> {
    if image.channels() != 1 {
        return Err(EngineError::Shape(format!(
            "expected single-channel image, got {} channels",
            image.channels()
        )));
    }
    if kernels.is_empty() {
        return Err(EngineError::Config("no kernels given".into()));
    }
    let (_, height, width) = image.dims();
    for k in kernels {
        if k.size() > height || k.size() > width {
            return Err(EngineError::Shape(format!(
                "kernel size {} exceeds image extent {}x{}",
                k.size(),
                height,
                width
            )));
        }
    }
    let mut out = Grid3::zeros((kernels.len(), height, width));
    for (ci, kernel) in kernels.iter().enumerate() {
        let half = (kernel.size() / 2) as isize;
        for y in 0..height {
            for x in 0..width {
                let mut acc = 0.0;
                for ky in 0..kernel.size() {
                    for kx in 0..kernel.size() {
                        let iy = y as isize + ky as isize - half;
                        let ix = x as isize + kx as isize - half;
                        if iy < 0 || ix < 0 || iy >= height as isize || ix >= width as isize {
                            continue;
                        }
                        acc += kernel.at(ky, kx) * image.get(0, iy as usize, ix as usize);
                    }
                }
                out.set(ci, y, x, acc.max(0.0));
            }
        }
    }
    Ok(out)
}

/// Converts filter responses to a spike stream by rank order: the strongest
/// response fires first. With `n` strictly-positive responses, the cell of
/// rank `r` (0-based, descending by value, ties broken by lower flat index)
/// fires once at step `r * num_timesteps / n`. Zero or negative responses
/// never fire.
pub fn intensity_to_latency(responses: &Grid3, num_timesteps: u32) -> Result<EventStream> {
    if num_timesteps == 0 {
        return Err(EngineError::Config(
            "latency encoding needs at least one time step".into(),
        ));
    }
    let mut positive: Vec<(f64, usize)> = responses
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (v, i))
        .collect();
    positive.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let n = positive.len();
    let mut events = Vec::with_capacity(n);
    for (rank, (_, idx)) in positive.into_iter().enumerate() {
        let t = (rank as u64 * num_timesteps as u64 / n as u64) as u32;
        let (channel, y, x) = responses.coords_of(idx);
        events.push(Event { t, channel, y, x });
    }
    EventStream::new(responses.dims(), num_timesteps, events)
}
