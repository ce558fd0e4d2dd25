//! File formats and dataset synthesis: event files, weight snapshots,
//! metrics CSV, and the synthetic bar corpus.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connectivity::{Connection, WeightTensor};
use crate::encoding::{dog_filter, intensity_to_latency, DoGKernel};
use crate::error::{EngineError, Result};
use crate::events::{Event, EventStream};
use crate::grid::{Dims3, Grid3};
use crate::runtime::RunRecord;

/// Header magic of the text event format.
pub const EVENT_MAGIC: &str = "SNNEVT1";
/// Header magic of the binary weight format.
pub const WEIGHT_MAGIC: &str = "SNNWGT1";

/// Result of reading an event file: the stream plus how many events fell
/// beyond the configured duration and were dropped.
#[derive(Debug, Clone)]
pub struct LoadedEvents {
    pub stream: EventStream,
    pub dropped: usize,
}

/// Reads a text event file.
///
/// The format is one header line `SNNEVT1,<width>,<height>,<channels>`
/// followed by `t,x,y,c` lines with `t` in microseconds, non-decreasing.
/// Event times bin into steps by `t / window_us`; events at or beyond
/// `duration_steps` windows are dropped and counted, never an error.
pub fn load_events(
    path: &Path,
    dims: Dims3,
    window_us: u64,
    duration_steps: u32,
) -> Result<LoadedEvents> {
    if window_us == 0 {
        return Err(EngineError::Config("window_us must be at least 1".into()));
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| EngineError::Format(format!("{}: empty file, missing header", path.display())))?;
    let fields: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if fields.len() != 4 || fields[0] != EVENT_MAGIC {
        return Err(EngineError::Format(format!(
            "{}: bad header {header:?}, expected \"{EVENT_MAGIC},<width>,<height>,<channels>\"",
            path.display()
        )));
    }
    let parse_dim = |s: &str, name: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|_| {
            EngineError::Format(format!("{}: header {name} {s:?} is not a number", path.display()))
        })
    };
    let width = parse_dim(fields[1], "width")?;
    let height = parse_dim(fields[2], "height")?;
    let channels = parse_dim(fields[3], "channels")?;
    if (channels, height, width) != dims {
        return Err(EngineError::Data(format!(
            "{}: file declares dims (c={channels}, h={height}, w={width}) but (c={}, h={}, w={}) expected",
            path.display(),
            dims.0,
            dims.1,
            dims.2
        )));
    }

    let mut events = Vec::new();
    let mut dropped = 0;
    let mut last_t = 0u64;
    for (i, raw) in lines.enumerate() {
        let lineno = i + 2;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(EngineError::Data(format!(
                "{}: line {lineno}: expected 4 fields \"t,x,y,c\", got {:?}",
                path.display(),
                line
            )));
        }
        let parse = |s: &str| -> Result<u64> {
            s.trim().parse::<u64>().map_err(|_| {
                EngineError::Data(format!(
                    "{}: line {lineno}: field {s:?} is not a non-negative integer",
                    path.display()
                ))
            })
        };
        let t = parse(parts[0])?;
        let x = parse(parts[1])? as usize;
        let y = parse(parts[2])? as usize;
        let c = parse(parts[3])? as usize;
        if t < last_t {
            return Err(EngineError::Data(format!(
                "{}: line {lineno}: time {t} goes backwards (previous {last_t})",
                path.display()
            )));
        }
        last_t = t;
        if c >= dims.0 || y >= dims.1 || x >= dims.2 {
            return Err(EngineError::Data(format!(
                "{}: line {lineno}: coordinates (x={x}, y={y}, c={c}) outside dims {dims:?}",
                path.display()
            )));
        }
        let step = t / window_us;
        if step >= duration_steps as u64 {
            dropped += 1;
            continue;
        }
        events.push(Event {
            t: step as u32,
            channel: c,
            y,
            x,
        });
    }
    Ok(LoadedEvents {
        stream: EventStream::new(dims, duration_steps, events)?,
        dropped,
    })
}

/// Writes a stream in the text event format, placing each event at the
/// start of its window (`t_us = step * window_us`). Reloading with the same
/// window reproduces the stream exactly.
pub fn save_events(stream: &EventStream, path: &Path, window_us: u64) -> Result<()> {
    if window_us == 0 {
        return Err(EngineError::Config("window_us must be at least 1".into()));
    }
    let (c, h, w) = stream.dims();
    let mut out = String::new();
    out.push_str(&format!("{EVENT_MAGIC},{w},{h},{c}\n"));
    for ev in stream.events() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            ev.t as u64 * window_us,
            ev.x,
            ev.y,
            ev.channel
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Orientation of a synthetic bar sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarKind {
    Horizontal,
    Vertical,
}

/// A one-pixel-wide bar of full intensity through the image center.
pub fn synth_bar_image(kind: BarKind, height: usize, width: usize) -> Result<Grid3> {
    if height < 3 || width < 3 {
        return Err(EngineError::Config(format!(
            "bar images need at least 3x3 pixels, got {height}x{width}"
        )));
    }
    let mut image = Grid3::zeros((1, height, width));
    match kind {
        BarKind::Horizontal => {
            let row = height / 2;
            for x in 0..width {
                image.set(0, row, x, 255.0);
            }
        }
        BarKind::Vertical => {
            let col = width / 2;
            for y in 0..height {
                image.set(0, y, col, 255.0);
            }
        }
    }
    Ok(image)
}

fn bar_kernels(height: usize, width: usize) -> Result<[DoGKernel; 2]> {
    let size = if height.min(width) >= 5 { 5 } else { 3 };
    Ok([
        DoGKernel::new(size, 1.0, 2.0)?,
        DoGKernel::new(size, 2.0, 1.0)?,
    ])
}

/// The bar sample before jitter: bar image, on/off center-surround
/// filtering, then rank-order latency coding into `duration` steps. Output
/// dims are `(2, height, width)`.
pub fn synth_bars_template(
    kind: BarKind,
    dims: (usize, usize),
    duration: u32,
) -> Result<EventStream> {
    let (height, width) = dims;
    let image = synth_bar_image(kind, height, width)?;
    let kernels = bar_kernels(height, width)?;
    let responses = dog_filter(&image, &kernels)?;
    intensity_to_latency(&responses, duration)
}

/// A synthetic bar sample: the template with each spike time jittered by a
/// seeded draw from {-1, 0, +1} (clamped to the valid step range). The same
/// seed always produces the same stream.
pub fn synth_bars(
    kind: BarKind,
    dims: (usize, usize),
    duration: u32,
    jitter_seed: u64,
) -> Result<EventStream> {
    let template = synth_bars_template(kind, dims, duration)?;
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    let last = duration.saturating_sub(1) as i64;
    let events = template
        .events()
        .iter()
        .map(|ev| {
            let offset = rng.gen_range(-1i64..=1);
            Event {
                t: (ev.t as i64 + offset).clamp(0, last) as u32,
                ..*ev
            }
        })
        .collect();
    EventStream::new(template.dims(), duration, events)
}

/// A labeled two-class corpus of jittered bars, alternating horizontal
/// (label 0) and vertical (label 1). Per-sample jitter seeds derive from
/// `seed`, so the whole corpus is reproducible.
pub fn synth_bars_dataset(
    dims: (usize, usize),
    duration: u32,
    samples_per_class: usize,
    seed: u64,
) -> Result<Vec<(EventStream, Option<usize>)>> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut dataset = Vec::with_capacity(samples_per_class * 2);
    for _ in 0..samples_per_class {
        let horizontal = synth_bars(BarKind::Horizontal, dims, duration, seeder.gen())?;
        let vertical = synth_bars(BarKind::Vertical, dims, duration, seeder.gen())?;
        dataset.push((horizontal, Some(0)));
        dataset.push((vertical, Some(1)));
    }
    Ok(dataset)
}

fn weight_header(tensor: &WeightTensor) -> String {
    match tensor {
        WeightTensor::Conv(kernel) => {
            let (o, i, kh, kw) = kernel.dims();
            format!("{WEIGHT_MAGIC},conv,{o},{i},{kh},{kw}\n")
        }
        WeightTensor::Dense {
            out_units,
            in_units,
            ..
        } => format!("{WEIGHT_MAGIC},dense,{out_units},{in_units}\n"),
    }
}

/// Writes a connection's weights: an ASCII dims header line, then the values
/// as little-endian 64-bit floats in row-major order.
pub fn save_weights(conn: &Connection, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(weight_header(conn.weights()).as_bytes())?;
    let mut bytes = Vec::with_capacity(conn.weights().values().len() * 8);
    for v in conn.weights().values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes)?;
    Ok(())
}

/// Loads weights saved by [`save_weights`] into a connection of identical
/// kind and dims. The round-trip is bit-exact.
pub fn load_weights(conn: &mut Connection, path: &Path) -> Result<()> {
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| EngineError::Format(format!("{}: missing header line", path.display())))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| EngineError::Format(format!("{}: header is not UTF-8", path.display())))?;
    let expected = weight_header(conn.weights());
    if header != expected.trim_end() {
        return Err(EngineError::Format(format!(
            "{}: weight header {header:?} does not match connection ({})",
            path.display(),
            expected.trim_end()
        )));
    }
    let payload = &bytes[newline + 1..];
    let values = conn.weights_mut().values_mut();
    if payload.len() != values.len() * 8 {
        return Err(EngineError::Format(format!(
            "{}: payload holds {} bytes but {} weights ({} bytes) expected",
            path.display(),
            payload.len(),
            values.len(),
            values.len() * 8
        )));
    }
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunks_exact yields 8 bytes"));
        if !(0.0..=1.0).contains(&v) {
            return Err(EngineError::Format(format!(
                "{}: weight {i} is {v}, outside [0, 1]",
                path.display()
            )));
        }
        values[i] = v;
    }
    Ok(())
}

/// Writes per-(sample, step, layer) run statistics as CSV.
pub fn write_metrics_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut out = String::from("sample,step,layer,spikes,winners,max_potential\n");
    for (sample, record) in records.iter().enumerate() {
        for (step, row) in record.steps.iter().enumerate() {
            for (layer, stats) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{sample},{step},{layer},{},{},{}\n",
                    stats.spikes, stats.winners, stats.max_potential
                ));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a grayscale image stored as CSV rows of pixel values, yielding a
/// single-channel grid.
pub fn load_image_csv(path: &Path) -> Result<Grid3> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                EngineError::Data(format!(
                    "{}: line {}: {field:?} is not a number",
                    path.display(),
                    i + 1
                ))
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(EngineError::Data(format!(
                    "{}: line {}: pixel value {v} must be finite and non-negative",
                    path.display(),
                    i + 1
                )));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(EngineError::Data(format!(
                    "{}: line {}: {} columns, expected {}",
                    path.display(),
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(EngineError::Data(format!(
            "{}: no pixel rows",
            path.display()
        )));
    }
    let height = rows.len();
    let width = rows[0].len();
    Grid3::from_vec((1, height, width), rows.into_iter().flatten().collect())
}
