//! `evland`: reproducible command-line runs of the flow pipeline, the
//! observables estimator, the landing simulation and the benchmarks.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evland::config::TextureKind;
use evland::FlowConfig;

#[derive(Parser, Debug)]
#[command(name = "evland", version, about = "Event-based normal flow, visual observables and landing runs")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate normal flow from an event file and write flow.csv.
    Flow(FlowArgs),
    /// Run the 100 Hz observables estimator and write observables.csv.
    Observe(ObserveArgs),
    /// Simulate a constant-divergence landing and write its run log.
    Land(LandArgs),
    /// Run an evaluation scenario on rendered streams.
    Eval(EvalArgs),
    /// Time the flow pipeline per event.
    Bench(BenchArgs),
}

/// Overrides for every flow pipeline parameter.
#[derive(Args, Debug, Default)]
pub struct FlowFlags {
    /// Spatial window width, pixels.
    #[arg(long)]
    pub win_xy: Option<u16>,
    /// Oldest neighbour age considered, us.
    #[arg(long)]
    pub dt_max_us: Option<u64>,
    /// Timestamp clustering scale factor.
    #[arg(long)]
    pub k_s: Option<f64>,
    /// Plane fit quality gate.
    #[arg(long)]
    pub nrmse_max: Option<f64>,
    /// Outliers removable per fit.
    #[arg(long)]
    pub n_r: Option<usize>,
    /// Speed gate, px/s.
    #[arg(long)]
    pub v_max: Option<f64>,
    /// Minimum supporting events per fit.
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Output rate cap in vectors/s ("inf" disables it).
    #[arg(long)]
    pub rho_f_max: Option<f64>,
    /// Per-pixel refractory period, us.
    #[arg(long)]
    pub refractory_us: Option<u64>,
}

impl FlowFlags {
    pub fn apply(&self, cfg: &mut FlowConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { cfg.$f = v; } )*};
        }
        set!(win_xy, dt_max_us, k_s, nrmse_max, n_r, v_max, n_min, rho_f_max, refractory_us);
    }
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    /// Event file (`.evb` binary, anything else CSV).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Use the homogeneous-fit baseline instead of the clustered pipeline.
    #[arg(long)]
    pub baseline: bool,
    #[command(flatten)]
    pub flow: FlowFlags,
}

#[derive(Args, Debug)]
#[group(id = "source", required = true, multiple = false, args = ["flow_in", "events"])]
pub struct ObserveArgs {
    /// Flow CSV as written by `evland flow`.
    #[arg(long = "flow")]
    pub flow_in: Option<PathBuf>,
    /// Event file; flow is estimated first.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Body rates CSV `t_us,p,q,r` in rad/s; zero rates when omitted.
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Length of the estimated interval in seconds; defaults to the input span.
    #[arg(long)]
    pub duration: Option<f64>,
    #[command(flatten)]
    pub flow: FlowFlags,
}

#[derive(Args, Debug)]
pub struct LandArgs {
    /// Divergence setpoint, 1/s.
    #[arg(long)]
    pub setpoint: Option<f64>,
    /// Ground texture: checkerboard or roadmap.
    #[arg(long)]
    pub texture: Option<TextureKind>,
    /// Feed ground-truth divergence to the controller.
    #[arg(long)]
    pub ideal: bool,
    /// Start height, m.
    #[arg(long)]
    pub z0: Option<f64>,
    /// Proportional gain of the divergence controller.
    #[arg(long)]
    pub k_p: Option<f64>,
    /// Stop below this height, m (0 disables).
    #[arg(long)]
    pub abort_height: Option<f64>,
    /// Descent time limit, s.
    #[arg(long)]
    pub timeout: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Constant-speed descents: PEE table, divergence errors and error model.
    #[value(name = "div_sweep")]
    DivSweep,
    /// Translations at 100, 300 and 500 px/s on the configured texture.
    #[value(name = "flow_accuracy")]
    FlowAccuracy,
    /// Pure rotation about each body axis, with and without derotation.
    Rotation,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Scenario to run.
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    /// Ground texture: checkerboard or roadmap.
    #[arg(long)]
    pub texture: Option<TextureKind>,
    /// Per-run rendered duration for the translation and rotation scenarios, s.
    #[arg(long)]
    pub duration: Option<f64>,
    #[command(flatten)]
    pub flow: FlowFlags,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Sweep the output rate cap over 1k, 3k, 10k, 30k and unlimited.
    #[arg(long)]
    pub sweep: bool,
    /// Event file to time; a rendered translation is used when omitted.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Rendered stream duration, s.
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    /// Rendered image speed, px/s.
    #[arg(long, default_value_t = 20.0)]
    pub speed: f64,
    /// Ground texture: checkerboard or roadmap.
    #[arg(long)]
    pub texture: Option<TextureKind>,
    /// Timed passes over the stream.
    #[arg(long, default_value_t = evland::eval::bench::DEFAULT_REPETITIONS)]
    pub repetitions: usize,
    #[command(flatten)]
    pub flow: FlowFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
