//! Event streams, their aggregation into frames, and the `SNNE` file format:
//! magic, u16 height, u16 width, u64 record count, then fixed 10-byte
//! records `(u32 t, u16 x, u16 y, u8 p, u8 pad)`, all little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bytes::Reader;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{BinaryTensor, Tensor};

const MAGIC: &[u8; 4] = b"SNNE";
const RECORD_BYTES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds.
    pub t: u32,
    pub x: u16,
    pub y: u16,
    /// 1 for an ON event, 0 for OFF.
    pub p: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    height: u16,
    width: u16,
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(height: u16, width: u16, events: Vec<Event>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if let Some(msg) = check_event(e, height, width) {
                return Err(Error::invalid(format!("event {i}: {msg}")));
            }
            if i > 0 && e.t < events[i - 1].t {
                return Err(Error::invalid(format!("event {i}: timestamp goes backwards")));
            }
        }
        Ok(Self { height, width, events })
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn width(&self) -> u16 {
        self.width
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
}

fn check_event(e: &Event, height: u16, width: u16) -> Option<String> {
    if e.p > 1 {
        Some(format!("polarity {} not in {{0, 1}}", e.p))
    } else if e.x >= width || e.y >= height {
        Some(format!("({}, {}) outside {width}x{height} sensor", e.x, e.y))
    } else {
        None
    }
}

/// How the stream's time range is cut into frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Slicing {
    /// `steps` slices of equal duration over `[t_first, t_last]`; the last
    /// slice includes `t_last`.
    #[default]
    EqualDuration,
    /// `steps` slices holding (as near as possible) equal event counts.
    EqualCount,
}

/// Counts events per `(slice, polarity, y, x)` into a `(steps, 2, H, W)`
/// tensor of integral values.
pub fn aggregate_events<S: Scalar>(ev: &EventStream, steps: usize, slicing: Slicing) -> Result<Tensor<S>> {
    if steps == 0 {
        return Err(Error::invalid("timesteps must be at least 1"));
    }
    let events = ev.events();
    let (first, last) = match (events.first(), events.last()) {
        (Some(f), Some(l)) => (f.t as u64, l.t as u64),
        _ => return Err(Error::EmptyStream),
    };
    let (h, w) = (ev.height as usize, ev.width as usize);
    let mut frames = Tensor::zeros(&[steps, 2, h, w]);
    let duration = last - first;
    let n = events.len() as u64;
    let data = frames.data_mut();
    for (i, e) in events.iter().enumerate() {
        let slice = match slicing {
            Slicing::EqualDuration if duration == 0 => steps - 1,
            Slicing::EqualDuration => (((e.t as u64 - first) * steps as u64 / duration) as usize).min(steps - 1),
            Slicing::EqualCount => (i as u64 * steps as u64 / n) as usize,
        };
        data[((slice * 2 + e.p as usize) * h + e.y as usize) * w + e.x as usize] += S::one();
    }
    Ok(frames)
}

/// Caps every count at one.
pub fn binarize_frames<S: Scalar>(frames: &Tensor<S>) -> BinaryTensor {
    let data = frames.data().iter().map(|&v| (v > S::zero()) as u8).collect();
    BinaryTensor::new(frames.shape().to_vec(), data).expect("shape preserved")
}

pub fn encode_events(ev: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + RECORD_BYTES * ev.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ev.height.to_le_bytes());
    out.extend_from_slice(&ev.width.to_le_bytes());
    out.extend_from_slice(&(ev.len() as u64).to_le_bytes());
    for e in ev.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p);
        out.push(0);
    }
    out
}

pub fn decode_events(bytes: &[u8]) -> Result<EventStream> {
    let mut r = Reader::new(bytes);
    r.expect_magic(MAGIC)?;
    let height = r.u16()?;
    let width = r.u16()?;
    let count_at = r.offset();
    let count = r.u64()?;
    let payload = count
        .checked_mul(RECORD_BYTES as u64)
        .filter(|&p| p == r.remaining() as u64)
        .ok_or_else(|| {
            Error::parse(
                count_at,
                format!(
                    "header declares {count} records but {} payload bytes follow",
                    r.remaining()
                ),
            )
        })?;
    let mut events = Vec::with_capacity((payload / RECORD_BYTES as u64) as usize);
    let mut prev_t = 0;
    for _ in 0..count {
        let at = r.offset();
        let e = Event {
            t: r.u32()?,
            x: r.u16()?,
            y: r.u16()?,
            p: r.u8()?,
        };
        r.u8()?;
        if let Some(msg) = check_event(&e, height, width) {
            return Err(Error::parse(at, msg));
        }
        if e.t < prev_t {
            return Err(Error::parse(at, "timestamp goes backwards"));
        }
        prev_t = e.t;
        events.push(e);
    }
    r.expect_end()?;
    Ok(EventStream { height, width, events })
}

pub fn write_events(ev: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_events(ev))?;
    Ok(())
}

pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream> {
    decode_events(&std::fs::read(path)?)
}
