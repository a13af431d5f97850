//! Accuracy metrics, the divergence error model and throughput benchmarks.

pub mod bench;
pub mod metrics;
pub mod quadratic;
pub mod scenarios;

pub use bench::{bench_throughput, cap_sweep, write_sweep_csv, SweepRow, ThroughputStats};
pub use metrics::{density, pair_with_ground_truth, pee, summarize_pee, FlowSample, PeeSummary};
pub use quadratic::{fit_quadratic, PercentileBin, QuadraticErrorModel};
pub use scenarios::{
    divergence_run, divergence_sweep, evaluate_flow, rotation_bias, translation_accuracy, translation_for_image_speed, Descent,
    DivergenceSample, DivergenceSweep, FlowEvaluation, RotationBias, ScenarioSetup, DEFAULT_DESCENTS,
};
