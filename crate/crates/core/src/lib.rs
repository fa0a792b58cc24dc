//! Measure how closely a speech representation's geometry tracks human phone
//! discrimination.
//!
//! The pipeline runs from audio or precomputed features ([`featio`]) through
//! DTW-based ABX deltas ([`dtw`], [`abx`]) to the statistics that compare
//! model deltas with listener responses ([`stats`]).

pub mod abx;
pub mod dtw;
pub mod featio;
pub mod stats;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
