//! EEG data path: EDF/EDF+ files or a synthetic multi-user generator in,
//! labeled, normalized, train/test-split windows out, plus the model of
//! uplink packet loss applied to those windows.

pub mod cache;
pub mod edf;
mod error;
pub mod physionet;
mod pipeline;
mod recording;
mod synth;

pub use edf::{parse_edf, write_edf, Annotation, EdfFile, EdfSignal};
pub use error::{EegError, Result};
pub use physionet::RunLabelTable;
pub use pipeline::{
    corrupt, renumber, segment, segment_count, split, stride_for, zscore, CorruptedSegment,
    CorruptionMode, EegSegment, ZScore,
};
pub use recording::{Event, Recording};
pub use synth::{synth_recording, SynthConfig, UserProfile};
