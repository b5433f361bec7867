//! End-cloud surveillance video transmission.
//!
//! The end node downsamples HR video 4x with a bicubic kernel, picks HR key
//! frames, drops redundant LR frames and packs everything into a checksummed
//! bundle. The cloud node unpacks the bundle, reconstructs HR frames with a
//! pluggable [`Reconstructor`], and copies reconstructed frames back into the
//! dropped positions.

pub mod bundle;
pub mod codec;
pub mod config;
pub mod endcloud;
pub mod error;
pub mod eval;
pub mod frame;
pub mod io;
pub mod keyframe;
pub mod metrics;
pub mod reconstruct;
pub mod redundancy;
pub mod report;
pub mod resample;
pub mod synth;
pub mod transport;

pub use codec::{CodecAdapter, ExternalCodec};
pub use config::ExperimentConfig;
pub use endcloud::{process_bundle, run_end_pipeline, EndConfig};
pub use error::{Error, Result, Stage};
pub use eval::{evaluate, EvalFlags, QualityReport};
pub use frame::{Frame, FrameRate, Layout, VideoSequence};
pub use keyframe::{KeyFrameIndex, SelectionConfig, SelectionMode};
pub use reconstruct::{ClassicalReconstructor, ExternalReconstructor, Reconstructor};
pub use redundancy::{RedundancyConfig, RedundancyIndex};
