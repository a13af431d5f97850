//! Acceptance checks, one line per criterion. Exits non-zero when any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evland::camera::UndistortTable;
use evland::config::{SceneConfig, TextureKind};
use evland::eval::bench::{is_non_increasing_with_cap, SWEEP_CAPS};
use evland::eval::{
    bench_throughput, cap_sweep, divergence_sweep, evaluate_flow, rotation_bias, translation_accuracy,
    translation_for_image_speed, ScenarioSetup, DEFAULT_DESCENTS,
};
use evland::flow::{
    fit_homogeneous_baseline, fit_reduced, slopes_to_flow, BaselineConfig, BaselinePipeline, FlowConfig, FlowPipeline, Sample,
};
use evland::geometry::Rates;
use evland::observables::{decay_factor, filter_update, solve_observables, DirectionBank, FlowFieldStatistics};
use evland::sim::{
    log_height_slope, render_scripted, run_closed_loop, AttitudeWave, LandingConfig, RendererConfig, SceneTexture, VisionSetup,
};
use evland::{CameraIntrinsics, CameraMount, EstimatorConfig, NormalFlowVector, ObservablesEstimator, Polarity};

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scene(kind: TextureKind) -> SceneTexture {
    SceneConfig { texture: kind, ..Default::default() }.build()
}

fn setup<'a>(intr: &'a CameraIntrinsics, scene: &'a SceneTexture) -> ScenarioSetup<'a> {
    ScenarioSetup {
        intr,
        mount: CameraMount::default(),
        renderer: RendererConfig::default(),
        flow: FlowConfig::default(),
        estimator: EstimatorConfig::default(),
        scene,
    }
}

/// Random subset of a 5x5 neighbourhood on the exact plane
/// `dt = -(px dx + py dy)`; the two axis neighbours are always present.
fn random_cluster(rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let (px, py) = loop {
        let s = (rng.random_range(-20_000i64..=20_000), rng.random_range(-20_000i64..=20_000));
        if s.0.abs() + s.1.abs() >= 50 {
            break s;
        }
    };
    let mut out = Vec::new();
    for dy in -2..=2i32 {
        for dx in -2..=2i32 {
            let axis = (dx, dy) == (1, 0) || (dx, dy) == (0, 1);
            if (dx, dy) != (0, 0) && (axis || rng.random_bool(0.7)) {
                out.push(Sample::raw(dx, dy, -(px * dx as i64 + py * dy as i64)));
            }
        }
    }
    out
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_mag, mut worst_ang, mut failures) = (0.0f64, 0.0f64, 0usize);
    let n = 2000;
    for _ in 0..n {
        let samples = random_cluster(&mut rng);
        let reduced = fit_reduced(&samples).ok().and_then(|f| slopes_to_flow(&f));
        let mut pts = vec![(0.0, 0.0, 0.0)];
        pts.extend(samples.iter().map(|s| (s.ox, s.oy, s.dt as f64 * 1e-6)));
        let base = fit_homogeneous_baseline(&pts, &BaselineConfig::default()).ok().and_then(|(p, _)| p.flow());
        let (Some((u, v)), Some((ub, vb))) = (reduced, base) else {
            failures += 1;
            continue;
        };
        let mb = ub.hypot(vb);
        worst_mag = worst_mag.max((u.hypot(v) - mb).abs() / mb);
        worst_ang = worst_ang.max((u * vb - v * ub).atan2(u * ub + v * vb).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && worst_mag <= 1e-6 && worst_ang <= 1e-8 && secs < 10.0,
        format!(
            "{n} clusters, max rel magnitude {worst_mag:.2e}, max angle {worst_ang:.2e} rad, {failures} failed fits, {secs:.2} s"
        ),
    )
}

fn c2_flow_accuracy(intr: &CameraIntrinsics) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, limit) in [(TextureKind::Checkerboard, 0.10), (TextureKind::Roadmap, 0.15)] {
        let sc = scene(kind);
        for speed in [100.0, 300.0, 500.0] {
            match translation_accuracy(&setup(intr, &sc), 1.0, speed, 1.0) {
                Ok(e) => {
                    let rel = e.pee.relative();
                    pass &= e.pee.n > 0 && rel <= limit;
                    parts.push(format!("{} {speed:.0} px/s {:.1} %", sc.name(), 100.0 * rel));
                }
                Err(err) => {
                    pass = false;
                    parts.push(format!("{} {speed:.0} px/s error: {err}", sc.name()));
                }
            }
        }
    }
    outcome(pass, parts.join(", "))
}

fn c3_clustering_density(intr: &CameraIntrinsics) -> evland::Result<Outcome> {
    let sc = scene(TextureKind::Checkerboard);
    let traj = translation_for_image_speed(1.0, 10.0, 0.5, intr.focal_px);
    let stream = render_scripted(&traj, &sc, intr, &CameraMount::default(), &RendererConfig::default(), 2.0)?;
    let table = UndistortTable::new(intr)?;
    let mount = CameraMount::default();
    let mut improved = FlowPipeline::with_table(FlowConfig::default(), table.clone());
    let (a, _) = evaluate_flow(&stream, &mut improved, intr, &mount, true)?;
    let base_cfg = BaselineConfig { window_us: 100_000, ..Default::default() };
    let mut baseline = BaselinePipeline::new(FlowConfig::default(), base_cfg, table);
    let (b, _) = evaluate_flow(&stream, &mut baseline, intr, &mount, true)?;
    Ok(outcome(
        a.density_pct > b.density_pct,
        format!("density improved {:.2} % vs baseline {:.2} % ({} events)", a.density_pct, b.density_pct, a.events),
    ))
}

fn c4_cap_sweep(intr: &CameraIntrinsics) -> evland::Result<Outcome> {
    let sc = scene(TextureKind::Checkerboard);
    let traj = translation_for_image_speed(1.0, 20.0, 0.5, intr.focal_px);
    let stream = render_scripted(&traj, &sc, intr, &CameraMount::default(), &RendererConfig::default(), 2.0)?;
    let table = UndistortTable::new(intr)?;
    let rows = cap_sweep(&stream.events, FlowConfig::default(), &table, &SWEEP_CAPS, 10);
    let times: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.stats.us_per_event_mean)).collect();
    Ok(outcome(
        is_non_increasing_with_cap(&rows, 0.10),
        format!("us/event over caps 1k..inf: [{}] on {} events", times.join(", "), stream.events.len()),
    ))
}

fn c5_throughput(intr: &CameraIntrinsics) -> evland::Result<Outcome> {
    let sc = scene(TextureKind::Checkerboard);
    // about 8k events/s per px/s of image speed on this texture at 1 m
    let traj = translation_for_image_speed(1.0, 5.0, 0.5, intr.focal_px);
    let stream = render_scripted(&traj, &sc, intr, &CameraMount::default(), &RendererConfig::default(), 12.0)?;
    let table = UndistortTable::new(intr)?;
    let start = Instant::now();
    let stats = bench_throughput(&stream.events, FlowConfig::default(), &table, 1);
    let secs = start.elapsed().as_secs_f64();
    let rate = stream.rate_hz();
    Ok(outcome(
        stats.events_per_s() >= 1e5 && secs < 30.0 && (30e3..=50e3).contains(&rate),
        format!("{:.0} events/s processed on a {rate:.0} events/s stream, check took {secs:.2} s", stats.events_per_s()),
    ))
}

/// Normal flow of the flat-ground field of `theta` observed along every
/// bank direction on a grid over the image.
fn directional_field(bank: &DirectionBank, intr: &CameraIntrinsics, theta: [f64; 3]) -> FlowFieldStatistics {
    let mut st = FlowFieldStatistics::new(bank.len());
    for py in (0..128).step_by(8) {
        for px in (0..128).step_by(8) {
            let (x, y) = ((px as f64 - intr.xp) / intr.focal_px, (py as f64 - intr.yp) / intr.focal_px);
            let (u, v) = (-theta[0] + x * theta[2], -theta[1] + y * theta[2]);
            for i in 0..bank.len() {
                let along = u * bank.cos(i) + v * bank.sin(i);
                let (s, vn) = bank.project(i, x, y, along * bank.cos(i), along * bank.sin(i));
                st.accumulate(i, s, vn);
            }
        }
    }
    st
}

fn c6_estimator_exactness(intr: &CameraIntrinsics) -> Outcome {
    let cfg = EstimatorConfig::default();
    let bank = DirectionBank::new(cfg.m);
    let cases = [[0.0, 0.0, 0.2], [0.0, 0.0, 0.5], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
    let (mut worst, mut worst_r2, mut pass) = (0.0f64, 0.0f64, true);
    for theta in cases {
        match solve_observables(&directional_field(&bank, intr, theta), &bank, intr.focal_px, cfg.var_s_min) {
            Some(sol) => {
                let err = (0..3).map(|k| (sol.theta[k] - theta[k]).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
                worst_r2 = worst_r2.max((sol.r2 - 1.0).abs());
            }
            None => pass = false,
        }
    }
    outcome(
        pass && worst <= 1e-6 && worst_r2 <= 1e-6,
        format!("max |theta error| {worst:.2e}, max |R2 - 1| {worst_r2:.2e} over 4 fields"),
    )
}

fn c7_divergence_model(intr: &CameraIntrinsics) -> evland::Result<Outcome> {
    let start = Instant::now();
    let sc = scene(TextureKind::Roadmap);
    let sweep = divergence_sweep(&setup(intr, &sc), &DEFAULT_DESCENTS, 0.5)?;
    let secs = start.elapsed().as_secs_f64();
    let (lo, hi) = sweep.samples.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.vz_true), hi.max(s.vz_true)));
    let m = sweep.model;
    let eps = m.predict(1.0);
    // the warmup trims the ends of the nominal 0.1..1.5 range
    let covered = lo <= 0.15 && hi >= 1.4;
    Ok(outcome(
        eps <= 0.15 && secs < 300.0 && covered,
        format!(
            "eps(1.0) = {eps:.4} (p0 {:.4}, p1 {:.4}, p2 {:.4}), divergence {lo:.2}..{hi:.2}, {} samples, {secs:.1} s",
            m.p0,
            m.p1,
            m.p2,
            sweep.samples.len()
        ),
    ))
}

fn c8_derotation(intr: &CameraIntrinsics) -> evland::Result<Outcome> {
    let sc = scene(TextureKind::Checkerboard);
    let s = setup(intr, &sc);
    let mut pass = true;
    let mut parts = Vec::new();
    for (axis, amp) in [("p", [1.0, 0.0, 0.0]), ("q", [0.0, 1.0, 0.0]), ("r", [0.0, 0.0, 1.0])] {
        let wave = AttitudeWave::with_rate_amplitude(amp, amp);
        let on = rotation_bias(&s, 1.0, wave, 5.0, 0.5, true)?;
        let off = rotation_bias(&s, 1.0, wave, 5.0, 0.5, false)?;
        let (b_on, b_off) = (on.mean_abs_vx + on.mean_abs_vy, off.mean_abs_vx + off.mean_abs_vy);
        pass &= on.mean_abs_vx.max(on.mean_abs_vy) <= 0.05 && b_off >= 3.0 * b_on;
        parts.push(format!(
            "{axis}: derotated {:.3}/{:.3}, raw {:.3}/{:.3}",
            on.mean_abs_vx, on.mean_abs_vy, off.mean_abs_vx, off.mean_abs_vy
        ));
    }
    // all three axes at once over the roadmap, reported only
    let road = scene(TextureKind::Roadmap);
    let all = AttitudeWave::with_rate_amplitude([1.0; 3], [1.0; 3]);
    let on = rotation_bias(&setup(intr, &road), 1.0, all, 5.0, 0.5, true)?;
    parts.push(format!("(roadmap pqr derotated {:.3}/{:.3})", on.mean_abs_vx, on.mean_abs_vy));
    Ok(outcome(pass, parts.join(", ")))
}

fn c9_closed_loop(intr: &CameraIntrinsics) -> evland::Result<Outcome> {
    let mut ideal = LandingConfig { z0: 3.5, ideal: true, ..Default::default() };
    ideal.controller.setpoint = 1.0;
    ideal.controller.k_p = 0.2;
    let run = run_closed_loop(&ideal, None, 0.001)?;
    let slope = log_height_slope(&run.log, 0.5, 1.0).unwrap_or(f64::NAN);
    let mut pass = (slope + 1.0).abs() <= 0.05;
    let mut parts = vec![format!("ideal slope {slope:.4}")];

    let sc = scene(TextureKind::Roadmap);
    for setpoint in [0.5, 0.7, 1.0] {
        let mut cfg = LandingConfig { z0: 3.5, abort_height: 0.3, ..Default::default() };
        cfg.controller.setpoint = setpoint;
        let vision = VisionSetup {
            scene: &sc,
            intr,
            flow: FlowConfig::default(),
            estimator: EstimatorConfig::default(),
            renderer: RendererConfig::default(),
        };
        let run = run_closed_loop(&cfg, Some(vision), 0.001)?;
        let flips = run.log.iter().filter(|r| r.t_s > 0.3 && r.z_m > 1.0 && r.vz_hat <= 0.0).count();
        let below = run.log.iter().any(|r| r.z_m < 1.0);
        pass &= below && flips == 0;
        let onset = run.summary.oscillation_onset_height_m.map_or("none".to_string(), |z| format!("{z:.2} m"));
        parts.push(format!(
            "setpoint {setpoint}: final {:.2} m, {flips} sign flips above 1 m, onset {onset}",
            run.summary.final_height_m
        ));
    }
    Ok(outcome(pass, parts.join(", ")))
}

fn c10_confidence_filter(intr: &CameraIntrinsics) -> Outcome {
    let cfg = EstimatorConfig::default();
    let prev = Vector3::new(0.3, -0.2, 0.9);
    let zero_k = filter_update(&prev, &Vector3::new(5.0, -5.0, 0.0), 0.0, cfg.period_s(), cfg.k_t, cfg.dtheta_max) == prev;
    let stepped = filter_update(&prev, &Vector3::new(50.0, -50.0, 20.0), 1.0, cfg.period_s(), cfg.k_t, cfg.dtheta_max);
    let max_step = (stepped - prev).abs().max();
    let saturates = max_step <= cfg.dtheta_max + 1e-12;

    // estimator statistics against an explicit re-weighting of every sample
    let bank = DirectionBank::new(cfg.m);
    let mut est = ObservablesEstimator::new(cfg, intr).expect("estimator");
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut raw: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut factors = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..300 {
        let t = (k + 1) as f64 * cfg.period_s();
        for _ in 0..rng.random_range(0..40) {
            let (x, y) = (rng.random_range(0.0..128.0), rng.random_range(0.0..128.0));
            let (u, v) = (rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0));
            let f = NormalFlowVector { t: (t * 1e6) as u64, x_u: x, y_u: y, u, v, p: Polarity::Pos, lag_us: 0.0 };
            if est.add_flow(&f, Rates::ZERO) {
                let i = bank.assign(u, v).expect("nonzero flow");
                let (xm, ym) = ((x - intr.xp) / intr.focal_px, (y - intr.yp) / intr.focal_px);
                let (s, vn) = bank.project(i, xm, ym, u / intr.focal_px, v / intr.focal_px);
                raw.push((k, i, s, vn));
            }
        }
        est.tick(t);
        factors.push(decay_factor(cfg.period_s(), cfg.k_f));
        let mut brute = FlowFieldStatistics::new(cfg.m);
        for &(kk, i, s, vn) in &raw {
            let w: f64 = factors[kk + 1..].iter().product();
            let d = &mut brute.dirs[i];
            d.n += w;
            d.s += w * s;
            d.s2 += w * s * s;
            d.v += w * vn;
            d.sv += w * s * vn;
            d.v2 += w * vn * vn;
        }
        for (a, b) in est.statistics().dirs.iter().zip(&brute.dirs) {
            for (x, y) in [(a.n, b.n), (a.s, b.s), (a.s2, b.s2), (a.v, b.v), (a.sv, b.sv), (a.v2, b.v2)] {
                worst = worst.max((x - y).abs() / y.abs().max(1e-9));
            }
        }
    }
    outcome(
        zero_k && saturates && worst <= 1e-6,
        format!(
            "K = 0 update is zero: {zero_k}, largest step {max_step:.3}, max relative statistics error {worst:.2e} over 300 ticks"
        ),
    )
}

fn main() -> ExitCode {
    let intr = CameraIntrinsics::default();
    let lift = |r: evland::Result<Outcome>| r.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    let checks: Vec<(&str, Check<'_>)> = vec![
        ("C1 oracle equivalence", Box::new(c1_oracle_equivalence)),
        ("C2 flow accuracy", Box::new(|| c2_flow_accuracy(&intr))),
        ("C3 timestamp clustering density", Box::new(|| lift(c3_clustering_density(&intr)))),
        ("C4 rate-cap sweep", Box::new(|| lift(c4_cap_sweep(&intr)))),
        ("C5 throughput", Box::new(|| lift(c5_throughput(&intr)))),
        ("C6 estimator exactness", Box::new(|| c6_estimator_exactness(&intr))),
        ("C7 divergence error model", Box::new(|| lift(c7_divergence_model(&intr)))),
        ("C8 derotation", Box::new(|| lift(c8_derotation(&intr)))),
        ("C9 closed-loop landing", Box::new(|| lift(c9_closed_loop(&intr)))),
        ("C10 confidence filter", Box::new(|| c10_confidence_filter(&intr))),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name}: {} [{:.1} s]", o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
