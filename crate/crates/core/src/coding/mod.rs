//! Input pre-processing: static-image coding and event-camera frames.

mod encode;
mod events;

pub use encode::{encode_direct, encode_poisson, normalize_frames};
pub use events::{
    aggregate_events, binarize_frames, decode_events, encode_events, read_events, write_events, Event, EventStream,
    Slicing,
};
