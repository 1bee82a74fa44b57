//! Pedestrian trajectories: ingestion, resampling, cleansing and the
//! observation-action samples used to clone expert policies.

mod cache;
mod load;
mod process;
mod sample;
pub mod synth;

use std::path::PathBuf;

use thiserror::Error;

pub use cache::{read_cache, write_cache};
pub use load::{load_dataset, parse_frame_table, write_frame_table};
pub use process::{cleanse, resample_and_differentiate, CleanseConfig, ProcessedTrack, RawTrack};
pub use sample::{augment, Sample, SampleSource, TrackSet};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("dataset {0} contains no rows")]
    Empty(PathBuf),
    #[error("line {line}: duplicate row for pedestrian {ped} in frame {frame}")]
    Duplicate { line: usize, frame: u64, ped: u64 },
    #[error("pedestrian {0} not in the track set")]
    UnknownPedestrian(u64),
    #[error("t = {t} s is outside the active span [{start}, {end}] of pedestrian {ped}")]
    OutOfSpan { ped: u64, t: f64, start: f64, end: f64 },
    #[error("no active tracks to sample from")]
    NoActiveTracks,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
