//! Event-based normal optical flow and visual observables for
//! constant-divergence landing.
//!
//! The crate is organised bottom-up:
//!
//! * [`event`] reads and writes event streams and applies the per-pixel
//!   refractory filter.
//! * [`camera`] holds the intrinsics, the radial distortion model and the
//!   per-pixel undistortion table.
//! * [`geometry`] relates ego-motion to optical flow and produces
//!   ground-truth visual observables.
//! * [`flow`] estimates per-event normal flow by reduced local plane fitting
//!   with timestamp clustering.
//! * [`observables`] turns normal flow into scaled velocities with a
//!   confidence value.
//! * [`sim`] renders synthetic event streams and closes the landing loop.
//! * [`eval`] provides the accuracy metrics and throughput benchmarks.
//! * [`config`] merges all of the above into one key-value run configuration.

pub mod camera;
pub mod config;
pub mod error;
pub mod eval;
pub mod event;
pub mod flow;
pub mod geometry;
pub mod observables;
pub mod sim;

pub use camera::{CameraIntrinsics, UndistortTable};
pub use error::{Error, Result};
pub use event::{Event, Polarity};
pub use flow::{FlowConfig, FlowPipeline, NormalFlowVector};
pub use geometry::{CameraMount, EgoMotion, GroundPlane, VisualObservables};
pub use observables::{EstimatorConfig, ObservablesEstimator};
