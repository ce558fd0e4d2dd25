//! Event-stream samples and their decomposition into per-step spike frames.

use crate::error::{EngineError, Result};
use crate::grid::{Dims3, Grid3, SpikeFrame};

/// One spike event: time step plus grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub t: u32,
    pub channel: usize,
    pub y: usize,
    pub x: usize,
}

/// A sample: a time-ordered list of events over a fixed duration and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    dims: Dims3,
    duration: u32,
    events: Vec<Event>,
}

impl EventStream {
    /// Builds a stream, validating coordinates and times. Events are sorted
    /// by time step (stably, preserving input order within a step).
    pub fn new(dims: Dims3, duration: u32, mut events: Vec<Event>) -> Result<Self> {
        for ev in &events {
            if ev.channel >= dims.0 || ev.y >= dims.1 || ev.x >= dims.2 {
                return Err(EngineError::Data(format!(
                    "event (t={}, c={}, y={}, x={}) outside dims {:?}",
                    ev.t, ev.channel, ev.y, ev.x, dims
                )));
            }
            if ev.t >= duration {
                return Err(EngineError::Data(format!(
                    "event (t={}, c={}, y={}, x={}) beyond duration {}",
                    ev.t, ev.channel, ev.y, ev.x, duration
                )));
            }
        }
        events.sort_by_key(|ev| ev.t);
        Ok(Self {
            dims,
            duration,
            events,
        })
    }

    /// Stream with no events.
    pub fn empty(dims: Dims3, duration: u32) -> Self {
        Self {
            dims,
            duration,
            events: Vec::new(),
        }
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn duration(&self) -> u32 {
        self.duration
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// The first `steps` time steps as a new stream.
    pub fn truncated(&self, steps: u32) -> Self {
        Self {
            dims: self.dims,
            duration: steps.min(self.duration),
            events: self
                .events
                .iter()
                .filter(|ev| ev.t < steps)
                .cloned()
                .collect(),
        }
    }

    /// One binary frame per time step; duplicate events collapse to one spike.
    pub fn frames(&self) -> Vec<SpikeFrame> {
        let mut frames = vec![SpikeFrame::zeros(self.dims); self.duration as usize];
        for ev in &self.events {
            frames[ev.t as usize].set_spike(ev.channel, ev.y, ev.x);
        }
        frames
    }

    /// First-spike time per coordinate over the whole stream, with
    /// `f64::INFINITY` for silent cells.
    pub fn first_spike_times(&self) -> Grid3 {
        let mut grid = Grid3::filled(self.dims, f64::INFINITY);
        for ev in &self.events {
            let current = grid.get(ev.channel, ev.y, ev.x);
            if (ev.t as f64) < current {
                grid.set(ev.channel, ev.y, ev.x, ev.t as f64);
            }
        }
        grid
    }
}
