//! Free-space optical links between a high-speed train and trackside or
//! gantry-mounted base stations, with a beam whose divergence follows the
//! train so the footprint matches the receiver aperture.
//!
//! The chain is geometry → clear-air Friis budget → fog attenuation → APD
//! noise and SNR → OOK BER, with divergence controllers on top and a
//! scenario layer for passes, sweeps and maximum-distance solving.

pub mod atmosphere;
pub mod config;
pub mod divergence_control;
pub mod error;
pub mod geometry;
pub mod optics;
pub mod receiver;
pub mod roots;
pub mod scenario;
pub mod units;

pub use divergence_control::{ControllerConfig, ControllerMode, ControllerState};
pub use error::{Error, Result};
pub use geometry::{LinkGeometry, PlacementMode, StationPlacement, TrainState};
pub use optics::{BeamSpec, OpticalParams};
pub use receiver::{NoiseBudget, ReceiverParams};
pub use scenario::{LinkEvaluation, LinkSample, MaxDistance, ScenarioConfig};
