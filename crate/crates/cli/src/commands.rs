use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use evland::config::RunConfig;
use evland::eval::bench::{cap_sweep, write_sweep_csv, SweepRow, SWEEP_CAPS};
use evland::eval::metrics::pipeline_density;
use evland::eval::{
    bench_throughput, divergence_sweep, rotation_bias, translation_accuracy, translation_for_image_speed, ScenarioSetup,
    DEFAULT_DESCENTS,
};
use evland::event::read_events_file;
use evland::flow::io::{read_flow_csv, write_flow_csv};
use evland::flow::{BaselinePipeline, FlowEstimator, PipelineStats};
use evland::observables::estimate_stream;
use evland::observables::io::{write_observables_csv, RateTrack};
use evland::sim::{render_scripted, run_closed_loop, AttitudeWave, VisionSetup};
use evland::{Event, FlowPipeline, NormalFlowVector, ObservablesEstimator, UndistortTable};
use serde::Serialize;

use crate::{BenchArgs, Cli, Command, EvalArgs, FlowArgs, LandArgs, ObserveArgs, Scenario};

/// Bad invocation or unusable input; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<evland::Error>() {
            return match e {
                evland::Error::Numeric(_) | evland::Error::Domain(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(&existing(path)?).with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating output directory {}", cli.out.display()))?;
    let out = Output { dir: cli.out.clone() };
    match &cli.command {
        Command::Flow(a) => cmd_flow(cfg, a, &out),
        Command::Observe(a) => cmd_observe(cfg, a, &out),
        Command::Land(a) => cmd_land(cfg, a, &out),
        Command::Eval(a) => cmd_eval(cfg, a, &out),
        Command::Bench(a) => cmd_bench(cfg, a, &out),
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    /// Creates `name`, fills it with `fill` and flushes it.
    fn write(&self, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> evland::Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        fill(&mut w).with_context(|| format!("writing {}", self.path(name).display()))?;
        w.flush()?;
        Ok(())
    }

    fn write_config(&self, cfg: &RunConfig) -> Result<()> {
        let text = cfg.to_toml()?;
        self.write("config.toml", |w| Ok(w.write_all(text.as_bytes())?))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn existing(path: &Path) -> Result<PathBuf> {
    if !path.exists() {
        return Err(UsageError(format!("no such input: {}", path.display())).into());
    }
    Ok(path.to_path_buf())
}

fn load_events(path: &Path) -> Result<Vec<Event>> {
    read_events_file(&existing(path)?).with_context(|| format!("reading events {}", path.display()))
}

fn validated(cfg: RunConfig) -> Result<RunConfig> {
    cfg.validate()?;
    Ok(cfg)
}

/// Largest number of timestamps inside any one-second window.
fn peak_rate(times: &[u64]) -> usize {
    let mut lo = 0;
    let mut best = 0;
    for (hi, &t) in times.iter().enumerate() {
        while t - times[lo] >= 1_000_000 {
            lo += 1;
        }
        best = best.max(hi + 1 - lo);
    }
    best
}

fn print_flow_stats(events: &[Event], flow: &[NormalFlowVector], stats: &PipelineStats, post_refractory: bool) {
    let span_s = match (events.first(), events.last()) {
        (Some(a), Some(b)) if b.t > a.t => (b.t - a.t) as f64 * 1e-6,
        _ => 0.0,
    };
    let times: Vec<u64> = flow.iter().map(|f| f.t).collect();
    println!("events: {}", stats.events_in);
    println!("accepted after refractory filter: {}", stats.accepted());
    println!("flow vectors: {}", flow.len());
    match pipeline_density(stats, post_refractory) {
        Some(d) => println!("density: {d:.3} % ({} events)", if post_refractory { "accepted" } else { "all" }),
        None => println!("density: n/a"),
    }
    if span_s > 0.0 {
        println!("event rate: {:.1} events/s", events.len() as f64 / span_s);
        println!("flow rate: {:.1} vectors/s mean, {} vectors/s peak", flow.len() as f64 / span_s, peak_rate(&times));
    }
    println!(
        "dropped: out_of_bounds {} rate_capped {} cluster_failed {} too_few_samples {} fit_failed {} nrmse_rejected {} stationary {} speed_rejected {}",
        stats.out_of_bounds,
        stats.rate_capped,
        stats.cluster_failed,
        stats.too_few_samples,
        stats.fit_failed,
        stats.nrmse_rejected,
        stats.stationary,
        stats.speed_rejected
    );
}

fn estimate_flow(cfg: &RunConfig, events: &[Event], baseline: bool) -> Result<(Vec<NormalFlowVector>, PipelineStats)> {
    let table = UndistortTable::new(&cfg.camera)?;
    let mut p: Box<dyn FlowEstimator> = if baseline {
        Box::new(BaselinePipeline::new(cfg.flow, cfg.baseline, table))
    } else {
        Box::new(FlowPipeline::with_table(cfg.flow, table))
    };
    let flow = p.run(events);
    Ok((flow, *p.stats()))
}

fn cmd_flow(mut cfg: RunConfig, a: &FlowArgs, out: &Output) -> Result<()> {
    a.flow.apply(&mut cfg.flow);
    let cfg = validated(cfg)?;
    let events = load_events(&a.input)?;
    let (flow, stats) = estimate_flow(&cfg, &events, a.baseline)?;
    out.write("flow.csv", |w| write_flow_csv(w, &flow))?;
    out.write_config(&cfg)?;
    print_flow_stats(&events, &flow, &stats, cfg.density_post_refractory);
    println!("wrote {}", out.path("flow.csv").display());
    Ok(())
}

fn cmd_observe(mut cfg: RunConfig, a: &ObserveArgs, out: &Output) -> Result<()> {
    a.flow.apply(&mut cfg.flow);
    let cfg = validated(cfg)?;
    let (flow, events_end_us) = match (&a.flow_in, &a.events) {
        (Some(path), _) => {
            let f = File::open(existing(path)?)?;
            let flow = read_flow_csv(std::io::BufReader::new(f)).with_context(|| format!("reading flow {}", path.display()))?;
            (flow, None)
        }
        (None, Some(path)) => {
            let events = load_events(path)?;
            let (flow, _) = estimate_flow(&cfg, &events, false)?;
            (flow, events.last().map(|e| e.t))
        }
        (None, None) => return Err(UsageError("one of --flow or --events is required".into()).into()),
    };

    let rates = match &a.rates {
        Some(path) => {
            let f = File::open(existing(path)?)?;
            let track =
                RateTrack::read_csv(std::io::BufReader::new(f)).with_context(|| format!("reading rates {}", path.display()))?;
            if let (Some(first), Some(last)) = (flow.first(), flow.last()) {
                let covered = track.span_us().is_some_and(|(a, b)| a <= first.t && b >= last.t);
                if !covered {
                    let span = track.span_us().map_or("nothing".to_string(), |(a, b)| format!("{a}..{b} us"));
                    return Err(evland::Error::Validation(format!(
                        "rates file covers {span} but the flow spans {}..{} us",
                        first.t, last.t
                    ))
                    .into());
                }
            }
            track
        }
        None => RateTrack::default(),
    };

    let end_s = match a.duration {
        Some(d) if d >= 0.0 => d,
        Some(d) => return Err(UsageError(format!("--duration must be non-negative, got {d}")).into()),
        None => flow.last().map(|f| f.t).max(events_end_us).unwrap_or(0) as f64 * 1e-6,
    };
    let mut est = ObservablesEstimator::new(cfg.estimator, &cfg.camera)?;
    let log = estimate_stream(&mut est, &flow, |t| rates.flow_rates(t), 0.0, end_s);
    out.write("observables.csv", |w| write_observables_csv(w, &log))?;
    out.write_config(&cfg)?;
    let confident = log.iter().filter(|e| e.obs.k > 0.0).count();
    println!("flow vectors: {}", flow.len());
    println!("ticks: {} ({} with K > 0)", log.len(), confident);
    if let Some(last) = log.last() {
        println!("final: vx {:.4} vy {:.4} vz {:.4} K {:.3}", last.obs.vx, last.obs.vy, last.obs.vz, last.obs.k);
    }
    println!("wrote {}", out.path("observables.csv").display());
    Ok(())
}

fn cmd_land(mut cfg: RunConfig, a: &LandArgs, out: &Output) -> Result<()> {
    if let Some(v) = a.setpoint {
        cfg.landing.controller.setpoint = v;
    }
    if let Some(t) = a.texture {
        cfg.scene.texture = t;
    }
    if a.ideal {
        cfg.landing.ideal = true;
    }
    if let Some(v) = a.z0 {
        cfg.landing.z0 = v;
    }
    if let Some(v) = a.k_p {
        cfg.landing.controller.k_p = v;
    }
    if let Some(v) = a.abort_height {
        cfg.landing.abort_height = v;
    }
    if let Some(v) = a.timeout {
        cfg.landing.timeout_s = v;
    }
    let cfg = validated(cfg)?;
    let scene = cfg.scene.build();
    let vision = (!cfg.landing.ideal).then_some(VisionSetup {
        scene: &scene,
        intr: &cfg.camera,
        flow: cfg.flow,
        estimator: cfg.estimator,
        renderer: cfg.renderer,
    });
    let run = run_closed_loop(&cfg.landing, vision, cfg.renderer.dt_sim_s).context("landing simulation")?;
    out.write("run_log.csv", |w| run.write_log(w))?;
    let mut w = out.create("summary.json")?;
    serde_json::to_writer_pretty(&mut w, &run.summary)?;
    writeln!(w)?;
    w.flush()?;
    out.write_config(&cfg)?;
    let s = &run.summary;
    println!("outcome: {}", serde_json::to_value(s.outcome)?.as_str().unwrap_or("?"));
    println!("final height: {:.3} m after {:.2} s", s.final_height_m, s.descent_time_s);
    println!("tracking rmse: {:.4} 1/s, estimate rmse: {:.4} 1/s", s.tracking_rmse, s.estimate_rmse);
    println!("events: {}, flow vectors: {}", s.events, s.flow_vectors);
    match s.oscillation_onset_height_m {
        Some(z) => println!("oscillation onset: {z:.2} m"),
        None => println!("oscillation onset: none"),
    }
    println!("wrote {}", out.path("run_log.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct AccuracyRow {
    texture: &'static str,
    speed_pps: f64,
    events: usize,
    flow_vectors: usize,
    density_pct: f64,
    pee_mean_pps: f64,
    pee_sd_pps: f64,
    gt_mean_pps: f64,
    pee_relative: f64,
}

#[derive(Serialize)]
struct RotationRow {
    axis: &'static str,
    derotated: bool,
    mean_abs_vx: f64,
    mean_abs_vy: f64,
    mean_abs_vz: f64,
}

fn cmd_eval(mut cfg: RunConfig, a: &EvalArgs, out: &Output) -> Result<()> {
    a.flow.apply(&mut cfg.flow);
    if let Some(t) = a.texture {
        cfg.scene.texture = t;
    }
    let cfg = validated(cfg)?;
    let scene = cfg.scene.build();
    let setup = |scene| ScenarioSetup {
        intr: &cfg.camera,
        mount: cfg.landing.mount,
        renderer: cfg.renderer,
        flow: cfg.flow,
        estimator: cfg.estimator,
        scene,
    };
    match a.scenario {
        Scenario::DivSweep => {
            let sweep = divergence_sweep(&setup(&scene), &DEFAULT_DESCENTS, 0.5).context("divergence sweep")?;
            out.write("div_pee.csv", |w| sweep.write_pee_csv(w))?;
            out.write("div_model.csv", |w| sweep.write_model_csv(w))?;
            out.write("div_samples.csv", |w| sweep.write_samples_csv(w))?;
            out.write("div_percentiles.csv", |w| sweep.write_percentiles_csv(w))?;
            let m = sweep.model;
            println!("samples: {}", sweep.samples.len());
            println!("error model: p0 {:.4} p1 {:.4} p2 {:.4}", m.p0, m.p1, m.p2);
            println!("predicted error at divergence 1.0: {:.4}", m.predict(1.0));
        }
        Scenario::FlowAccuracy => {
            let duration = a.duration.unwrap_or(1.0);
            let mut w = csv::Writer::from_writer(out.create("flow_accuracy.csv")?);
            for speed in [100.0, 300.0, 500.0] {
                let e = translation_accuracy(&setup(&scene), 1.0, speed, duration)?;
                println!(
                    "{} {speed} px/s: PEE {:.2} px/s ({:.1} %), density {:.2} %",
                    scene.name(),
                    e.pee.mean,
                    100.0 * e.pee.relative(),
                    e.density_pct
                );
                w.serialize(AccuracyRow {
                    texture: scene.name(),
                    speed_pps: speed,
                    events: e.events,
                    flow_vectors: e.flow_vectors,
                    density_pct: e.density_pct,
                    pee_mean_pps: e.pee.mean,
                    pee_sd_pps: e.pee.sd,
                    gt_mean_pps: e.pee.mean_gt_speed,
                    pee_relative: e.pee.relative(),
                })?;
            }
            w.flush()?;
        }
        Scenario::Rotation => {
            let duration = a.duration.unwrap_or(5.0);
            let mut w = csv::Writer::from_writer(out.create("rotation.csv")?);
            for (axis, amp) in [("p", [1.0, 0.0, 0.0]), ("q", [0.0, 1.0, 0.0]), ("r", [0.0, 0.0, 1.0])] {
                let wave = AttitudeWave::with_rate_amplitude(amp, amp);
                for derotate in [true, false] {
                    let b = rotation_bias(&setup(&scene), 1.0, wave, duration, 0.5, derotate)?;
                    println!(
                        "{axis} derotated={derotate}: |vx| {:.4} |vy| {:.4} |vz| {:.4}",
                        b.mean_abs_vx, b.mean_abs_vy, b.mean_abs_vz
                    );
                    w.serialize(RotationRow {
                        axis,
                        derotated: derotate,
                        mean_abs_vx: b.mean_abs_vx,
                        mean_abs_vy: b.mean_abs_vy,
                        mean_abs_vz: b.mean_abs_vz,
                    })?;
                }
            }
            w.flush()?;
        }
    }
    out.write_config(&cfg)?;
    Ok(())
}

fn cmd_bench(mut cfg: RunConfig, a: &BenchArgs, out: &Output) -> Result<()> {
    a.flow.apply(&mut cfg.flow);
    if let Some(t) = a.texture {
        cfg.scene.texture = t;
    }
    let cfg = validated(cfg)?;
    let events = match &a.input {
        Some(path) => load_events(path)?,
        None => {
            if !(a.duration > 0.0 && a.speed >= 0.0) {
                return Err(UsageError("--duration must be positive and --speed non-negative".into()).into());
            }
            let traj = translation_for_image_speed(1.0, a.speed, 0.5, cfg.camera.focal_px);
            render_scripted(&traj, &cfg.scene.build(), &cfg.camera, &cfg.landing.mount, &cfg.renderer, a.duration)?.events
        }
    };
    let table = UndistortTable::new(&cfg.camera)?;
    let name = if a.sweep { "cap_sweep.csv" } else { "bench.csv" };
    let rows = if a.sweep {
        cap_sweep(&events, cfg.flow, &table, &SWEEP_CAPS, a.repetitions)
    } else {
        vec![SweepRow { rho_f_max: cfg.flow.rho_f_max, stats: bench_throughput(&events, cfg.flow, &table, a.repetitions) }]
    };
    out.write(name, |w| write_sweep_csv(w, &rows))?;
    out.write_config(&cfg)?;
    println!("events: {}", events.len());
    for r in &rows {
        println!(
            "rho_f_max {}: {:.3} +- {:.3} us/event ({:.0} events/s, {} vectors)",
            r.rho_f_max,
            r.stats.us_per_event_mean,
            r.stats.us_per_event_sd,
            r.stats.events_per_s(),
            r.stats.flow_vectors
        );
    }
    println!("wrote {}", out.path(name).display());
    Ok(())
}
