//! Simulation: vertical dynamics, divergence controller, event renderer
//! and closed-loop landing runs.

pub mod closed_loop;
pub mod controller;
pub mod renderer;
pub mod scenario;
pub mod texture;
pub mod trajectory;
pub mod vehicle;

pub use closed_loop::{
    log_height_slope, run_closed_loop, LandingConfig, LandingLogRow, LandingOutcome, LandingRun, LandingSummary, VisionSetup,
    RUN_LOG_HEADER,
};
pub use controller::{delta_thrust, divergence_controller, ControllerConfig, HoverPid};
pub use renderer::{EventRenderer, RendererConfig};
pub use scenario::{render_scripted, RenderedStream};
pub use texture::{Checkerboard, Roadmap, RoadmapParams, SceneTexture};
pub use trajectory::{AttitudeWave, ScriptedTrajectory, Vertical};
pub use vehicle::{step_dynamics, DynamicsConfig, StepOutcome, VehicleState, GRAVITY};
