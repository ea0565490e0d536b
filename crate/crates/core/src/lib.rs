//! Mechanical-threat classification for distributed fiber sensing.
//!
//! The crate covers the whole chain from raw differential-phase traces to
//! classifier reports:
//!
//! * [`synth`] generates seeded synthetic recordings (noise zones plus
//!   jackhammer / excavator events) and balanced datasets.
//! * [`sense`] detects and localizes disturbances from the per-segment
//!   rolling standard deviation.
//! * [`spectral`] computes Gabor-wavelet scalograms, Welch PSDs, energy-peak
//!   windows and square scalogram images.
//! * [`features`] turns windows and images into feature vectors through a
//!   registry of interchangeable extractors.
//! * [`learn`] holds the classifier heads (random forest, linear SVM,
//!   softmax), also selected by name from a registry.
//! * [`eval`] runs stratified cross-validation and renders the comparison
//!   tables.
//! * [`pipeline`] wires everything together from a [`config::RunConfig`].

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod label;
pub mod learn;
pub mod pipeline;
pub mod rng;
pub mod sense;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use label::EventLabel;
