//! Direction assignment, the weighted solve and the confidence filter of
//! the observables estimator.

use evland::camera::CameraIntrinsics;
use evland::geometry::Rates;
use evland::observables::{decay_factor, solve_observables, DirectionBank, FlowFieldStatistics};
use evland::{EstimatorConfig, NormalFlowVector, ObservablesEstimator, Polarity};
use proptest::prelude::*;

fn flow(t: u64, x_u: f64, y_u: f64, u: f64, v: f64) -> NormalFlowVector {
    NormalFlowVector { t, x_u, y_u, u, v, p: Polarity::Pos, lag_us: 0.0 }
}

/// One tick: its period and the flow vectors `(x, y, u, v)` added before it.
type Tick = (f64, Vec<(f64, f64, f64, f64)>);

/// Random flow vectors with tick times; each tick carries a jittered period.
fn session() -> impl Strategy<Value = Vec<Tick>> {
    let vec = (0.0f64..128.0, 0.0f64..128.0, -300.0f64..300.0, -300.0f64..300.0);
    prop::collection::vec((0.006f64..0.014, prop::collection::vec(vec, 0..25)), 1..60)
}

proptest! {
    #[test]
    fn assignment_ignores_flow_sign(m in 2usize..12, u in -100.0f64..100.0, v in -100.0f64..100.0) {
        let bank = DirectionBank::new(m);
        prop_assume!(u != 0.0 || v != 0.0);
        prop_assert_eq!(bank.assign(u, v), bank.assign(-u, -v));
    }

    #[test]
    fn solve_is_invariant_to_uniform_statistic_scale(
        theta in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
        noise in prop::collection::vec(-0.05f64..0.05, 6 * 15),
        scale in 0.01f64..100.0,
    ) {
        let bank = DirectionBank::new(6);
        let mut st = FlowFieldStatistics::new(6);
        for i in 0..6 {
            for j in 0..15 {
                let s = 0.4 * (j as f64 - 7.0) / 7.0;
                let v = -theta.0 * bank.cos(i) - theta.1 * bank.sin(i) + theta.2 * s + noise[i * 15 + j];
                st.accumulate(i, s, v);
            }
        }
        let a = solve_observables(&st, &bank, 115.0, 600.0).unwrap();
        let mut scaled = st.clone();
        scaled.dirs.iter_mut().for_each(|d| d.scale(scale));
        let b = solve_observables(&scaled, &bank, 115.0, 600.0).unwrap();
        for k in 0..3 {
            prop_assert!((a.theta[k] - b.theta[k]).abs() <= 1e-9 * a.theta[k].abs().max(1.0));
        }
        prop_assert!((a.r2 - b.r2).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimator_statistics_match_brute_force_reweighting(ticks in session()) {
        let intr = CameraIntrinsics::default();
        let cfg = EstimatorConfig::default();
        let mut est = ObservablesEstimator::new(cfg, &intr).unwrap();
        let bank = DirectionBank::new(cfg.m);
        // raw samples with the tick index they were folded in at
        let mut raw: Vec<(usize, usize, f64, f64)> = Vec::new();
        let mut factors: Vec<f64> = Vec::new();
        let mut t = 0.0;
        for (k, (period, vecs)) in ticks.iter().enumerate() {
            t += period;
            for &(x, y, u, v) in vecs {
                let f = flow((t * 1e6) as u64, x, y, u, v);
                if est.add_flow(&f, Rates::ZERO) {
                    let i = bank.assign(u, v).unwrap();
                    let (xm, ym) = ((x - intr.xp) / intr.focal_px, (y - intr.yp) / intr.focal_px);
                    let (s, vn) = bank.project(i, xm, ym, u / intr.focal_px, v / intr.focal_px);
                    raw.push((k, i, s, vn));
                }
            }
            let e = est.tick(t);
            // the first tick decays by a nominal period
            factors.push(if k == 0 { decay_factor(cfg.period_s(), cfg.k_f) } else { decay_factor(*period, cfg.k_f) });
            prop_assert!((0.0..=1.0).contains(&e.obs.k));

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
                    prop_assert!((x - y).abs() <= 1e-6 * y.abs().max(1e-9), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn confidence_is_bounded_and_steps_saturate(ticks in session()) {
        let intr = CameraIntrinsics::default();
        let cfg = EstimatorConfig { k_t: 0.001, ..Default::default() };
        let mut est = ObservablesEstimator::new(cfg, &intr).unwrap();
        let mut t = 0.0;
        let mut prev = est.estimate();
        for (period, vecs) in &ticks {
            t += period;
            for &(x, y, u, v) in vecs {
                est.add_flow(&flow((t * 1e6) as u64, x, y, u, v), Rates::ZERO);
            }
            let e = est.tick(t);
            prop_assert!((0.0..=1.0).contains(&e.obs.k));
            let now = est.estimate();
            for k in 0..3 {
                prop_assert!((now[k] - prev[k]).abs() <= cfg.dtheta_max + 1e-12);
            }
            if e.obs.k == 0.0 {
                prop_assert_eq!(now, prev);
            }
            prev = now;
        }
    }
}
