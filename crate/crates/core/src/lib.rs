//! Graph signal processing for power-grid anomaly detection.
//!
//! Grid measurements are treated as signals on the bus graph (voltage angles)
//! or the line graph (branch flows). The crate covers graph construction,
//! spectral analysis, DC power-flow telemetry, attack injection, the three
//! detectors built on those pieces, and a Monte-Carlo evaluation harness.

pub mod cases;
pub mod detect;
pub mod error;
pub mod gridsim;
pub mod gsp;
pub mod harness;
pub mod spectral;
pub mod threat;
pub mod topology;

pub use error::{Error, Result};
pub use gridsim::{LoadProfile, TimeVaryingSignal};
pub use spectral::{eigendecompose, GraphSignal, SpectralBasis};
pub use topology::{GridCase, GridGraph};
