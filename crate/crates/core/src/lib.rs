//! Binaural coherent-to-diffuse ratio (CDR) estimation and CDR-driven two-channel
//! dereverberation with head-aware coherence models.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cdr;
pub mod cli;
pub mod coherence;
pub mod config;
pub mod dereverb;
pub mod error;
pub mod grid;
pub mod signal_io;
pub mod spatial;
pub mod stft;
pub mod synth;

pub use cdr::{CdrValue, EstimatorInputs};
pub use coherence::CoherenceTrack;
pub use config::{DiffuseModel, Estimator, FieldModel, PipelineConfig};
pub use dereverb::GainMask;
pub use error::{Error, Result};
pub use grid::TfGrid;
pub use signal_io::{StereoSignal, WavEncoding};
pub use spatial::Geometry;
pub use stft::Spectrogram;
