//! Respiration and body-motion sensing from WiFi channel state information.
//!
//! The crate covers the whole chain: a synthetic multipath channel for
//! labelled test data, trace I/O, filtering and epoching, per-epoch PCA,
//! ellipsoid motion detection, peak-count breathing rate, outage statistics,
//! Webster sleep scoring, evaluation metrics, and a TCP ingestion service.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod breath;
pub mod config;
pub mod csi;
pub mod error;
pub mod eval;
pub mod filter;
pub mod motion;
pub mod outage;
pub mod pipeline;
pub mod preprocess;
pub mod service;
pub mod sleep;
pub mod special;
pub mod subspace;
pub mod synth;
pub mod wire;

pub use config::Config;
pub use csi::{CsiFrame, Dims, GroundTruthRecord, GtState};
pub use error::{Error, Result};
pub use pipeline::{NightProcessor, NightReport};
