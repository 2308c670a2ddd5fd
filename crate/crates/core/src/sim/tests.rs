use proptest::prelude::*;

use super::*;
use crate::parser::parse_model;
use crate::tdsha::{from_model, Tdsha};

const BUFFER: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/buffer.shype"));
const ZENO: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/zeno.shype"));
const CYCLE: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/cycle.shype"));

fn tdsha(src: &str) -> Tdsha {
    from_model(&parse_model(src).unwrap()).unwrap()
}

/// One mode, flow `dX/dt = slope`, one stochastic self-loop at `rate`.
fn single(rate: &str, slope: &str) -> String {
    format!(
        "variables X; events stoch go;
         subcomponent S =def init:(s, {slope}, const).S + go:(s, {slope}, const).S;
         controller C =def go.C;
         system P =def S <*> init.C;
         iv s = X; ec init = (true, X' = 0); go = ({rate}, true); types const = 1;"
    )
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn cfg(t_end: f64) -> SimulationConfig {
    SimulationConfig {
        t_end,
        ..SimulationConfig::default()
    }
}

#[test]
fn constant_trace_without_dynamics() {
    let src = "variables X, Y; events a;
        subcomponent S =def init:(s, 0, const).S + a:(s, 0, const).S;
        controller C =def a.C;
        system P =def S <*> init.C;
        iv s = X; ec init = (true, X' = 3 and Y' = -1); a = (X >= 10, true); types const = 1;";
    let t = tdsha(src);
    let tr = simulate_trajectory(&t, &cfg(5.0), &mut RngStream::new(1, 0)).unwrap();
    assert!(tr.jumps.is_empty());
    assert!(tr.samples.iter().all(|s| s.values == [3.0, -1.0]));
    assert_eq!(tr.terminal.t, 5.0);
}

#[test]
fn config_is_validated() {
    let t = tdsha(&single("1", "0"));
    for bad in [
        SimulationConfig { dt: 0.0, ..cfg(1.0) },
        SimulationConfig { root_tol: 1.0, ..cfg(1.0) },
        SimulationConfig { chain_cap: 0, ..cfg(1.0) },
        SimulationConfig { t_end: f64::NAN, ..cfg(1.0) },
    ] {
        assert!(matches!(Simulator::new(&t, &bad), Err(SimError::BadConfig(_))));
    }
}

#[test]
fn first_jump_time_is_exponential() {
    let t = tdsha(&single("0.4", "0"));
    let c = SimulationConfig {
        replications: 10_000,
        master_seed: 42,
        recording: Recording::Terminal,
        stop_event: Some("go".into()),
        t_end: 1e6,
        ..SimulationConfig::default()
    };
    let reps = run_replications(&t, &c).unwrap();
    assert!(reps.failures.is_empty());
    let times: Vec<f64> = reps.traces.iter().map(|(_, tr)| tr.terminal.t).collect();
    let (m, se) = mean_se(&times);
    assert!((m - 2.5).abs() < 3.0 * se, "{m} ± {se}");
}

/// Kolmogorov-Smirnov statistic of `xs` against Exponential(rate).
fn ks_exponential(xs: &mut [f64], rate: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = 1.0 - (-rate * x).exp();
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

#[test]
fn inter_jump_times_pass_ks() {
    let t = tdsha(&single("1.5", "1"));
    let c = SimulationConfig {
        t_end: 7000.0,
        master_seed: 3,
        recording: Recording::JumpsOnly,
        ..SimulationConfig::default()
    };
    let tr = simulate_trajectory(&t, &c, &mut RngStream::new(3, 0)).unwrap();
    let mut gaps: Vec<f64> = tr.jumps.windows(2).map(|w| w[1].t - w[0].t).take(10_000).collect();
    assert_eq!(gaps.len(), 10_000);
    let d = ks_exponential(&mut gaps, 1.5);
    // asymptotic critical value at alpha = 0.01
    assert!(d < 1.628 / (gaps.len() as f64).sqrt(), "D = {d}");
}

#[test]
fn ks_detects_wrong_rate() {
    let mut rng = RngStream::new(5, 0);
    let mut xs: Vec<f64> = (0..10_000).map(|_| rng.exp1() / 1.2).collect();
    assert!(ks_exponential(&mut xs, 1.5) > 1.628 / 100.0);
}

#[test]
fn linear_flow_is_exact() {
    let t = tdsha(&single("0", "2.5"));
    let tr = simulate_trajectory(&t, &cfg(10.0), &mut RngStream::new(1, 0)).unwrap();
    for s in &tr.samples {
        assert!((s.values[0] - 2.5 * s.t).abs() <= 2.5 * 1e-6 * s.t.max(1.0), "{s:?}");
    }
    assert!((tr.terminal.values[0] - 25.0).abs() < 1e-9);
}

#[test]
fn rk4_tracks_exponential_growth() {
    let src = "variables X; events a;
        subcomponent S =def init:(s, 1, lin(X)).S + a:(s, 1, lin(X)).S;
        controller C =def a.C;
        system P =def S <*> init.C;
        iv s = X; ec init = (true, X' = 1); a = (X >= 1e9, true); types lin(V) = V;";
    let t = tdsha(src);
    let c = SimulationConfig { dt: 0.01, ..cfg(3.0) };
    let tr = simulate_trajectory(&t, &c, &mut RngStream::new(1, 0)).unwrap();
    for s in &tr.samples {
        let exact = s.t.exp();
        assert!((s.values[0] - exact).abs() < 1e-8 * exact, "{} vs {exact}", s.values[0]);
    }
}

#[test]
fn equality_guard_fires_on_first_touch() {
    let src = "variables X; events hit;
        subcomponent S =def init:(s, 3, const).S + hit:(s, -1, const).S;
        controller C =def hit.0;
        system P =def S <*> init.C;
        iv s = X; ec init = (true, X' = 0); hit = (X = 7, true); types const = 1;";
    let t = tdsha(src);
    let tr = simulate_trajectory(&t, &cfg(5.0), &mut RngStream::new(1, 0)).unwrap();
    assert_eq!(tr.jumps.len(), 1);
    let j = &tr.jumps[0];
    assert!((j.t - 7.0 / 3.0).abs() < 1e-7, "{}", j.t);
    assert!(j.pre[0] <= 7.0 && j.pre[0] > 7.0 - 1e-6);
    assert!((tr.terminal.values[0] - (j.pre[0] - (5.0 - j.t))).abs() < 1e-9);
}

#[test]
fn guard_true_at_entry_fires_immediately() {
    let src = "variables X; events a;
        subcomponent S =def init:(s, 0, const).S + a:(s, 0, const).S;
        controller C =def a.0;
        system P =def S <*> init.C;
        iv s = X; ec init = (true, X' = 5); a = (X >= 1, X' = 0); types const = 1;";
    let tr = simulate_trajectory(&tdsha(src), &cfg(1.0), &mut RngStream::new(1, 0)).unwrap();
    assert_eq!(tr.jumps.len(), 1);
    assert_eq!(tr.jumps[0].t, 0.0);
    assert_eq!(tr.jumps[0].post, [0.0]);
}

#[test]
fn instantaneous_zeno_hits_chain_cap() {
    let t = tdsha(ZENO);
    let c = SimulationConfig { chain_cap: 50, ..cfg(1.0) };
    match simulate_trajectory(&t, &c, &mut RngStream::new(1, 0)) {
        Err(SimError::ChainCapExceeded { time, cap, events }) => {
            assert_eq!((time, cap), (0.0, 50));
            assert!(events.contains('a') && events.contains('b'));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn negative_rate_is_an_error() {
    let t = tdsha(&single("1 - X", "1"));
    let err = simulate_trajectory(&t, &cfg(10.0), &mut RngStream::new(2, 0));
    // the jump may come before X exceeds 1; retry streams until the rate turns negative
    let mut saw = matches!(err, Err(SimError::Eval { source: EvalError::NegativeRate { .. }, .. }));
    for i in 0..20 {
        if saw {
            break;
        }
        saw = matches!(
            simulate_trajectory(&t, &cfg(10.0), &mut RngStream::new(2, i)),
            Err(SimError::Eval { source: EvalError::NegativeRate { .. }, .. })
        );
    }
    assert!(saw);
}

#[test]
fn weights_split_simultaneous_choices() {
    // two instantaneous transitions enabled together from the initial mode
    let src = "variables X; events a, b;
        subcomponent S =def init:(s, 0, const).S + a:(s, 0, const).S + b:(s, 0, const).S;
        controller C =def a.0 + b.0;
        system P =def S <*> init.C;
        iv s = X; ec init = (true, X' = 0); a = (true, X' = 1); b = (true, X' = 2); types const = 1;";
    let t = tdsha(src);
    let c = SimulationConfig {
        replications: 4000,
        recording: Recording::JumpsOnly,
        ..cfg(0.1)
    };
    let reps = run_replications(&t, &c).unwrap();
    let a = reps.traces.iter().filter(|(_, tr)| tr.jumps[0].event == "a").count() as f64;
    // binomial(4000, 1/2): sd = sqrt(1000) ≈ 31.6
    assert!((a - 2000.0).abs() < 3.0 * 31.7, "{a}");
}

fn buffer_runs(reps: usize, seed: u64) -> (Tdsha, Replications) {
    let t = tdsha(BUFFER);
    let c = SimulationConfig {
        replications: reps,
        master_seed: seed,
        dt: 1e-2,
        t_end: 50.0,
        record_stride: 10,
        grid_step: Some(1.0),
        ..SimulationConfig::default()
    };
    let r = run_replications(&t, &c).unwrap();
    (t, r)
}

#[test]
fn buffer_respects_bounds_and_urgency() {
    let (t, reps) = buffer_runs(40, 11);
    assert!(reps.failures.is_empty());
    let b = t.variable_index("B").unwrap();
    let index: HashMap<String, usize> = t.variables.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let guards: Vec<(usize, GuardProgram)> = t
        .instantaneous
        .iter()
        .map(|d| (d.src, GuardProgram::compile(&d.guard, &index, 1e-8).unwrap()))
        .collect();
    let mut stack = Vec::new();
    let mut fulls = 0;
    for (_, tr) in &reps.traces {
        for s in &tr.samples {
            assert!((0.0..=200.0).contains(&s.values[b]), "B = {}", s.values[b]);
            if tr.jumps.iter().any(|j| j.t == s.t) {
                continue;
            }
            for (src, g) in &guards {
                if *src == s.mode {
                    assert!(!g.holds(&s.values, None, &mut stack).unwrap(), "urgent guard at {}", s.t);
                }
            }
        }
        for j in &tr.jumps {
            assert!((0.0..=200.0).contains(&j.post[b]));
            if j.event == "full" {
                fulls += 1;
                assert!((j.pre[b] - 200.0).abs() < 1e-5, "{}", j.pre[b]);
                let lts_mode = &t.modes[j.from].label;
                assert!(lts_mode.contains("in -> (20, const)"), "{lts_mode}");
            }
        }
    }
    assert!(fulls > 0);
}

#[test]
fn resets_touch_only_assigned_variables() {
    let (t, reps) = buffer_runs(10, 5);
    for (_, tr) in &reps.traces {
        for j in &tr.jumps {
            let reset = if j.kind == JumpKind::Instantaneous {
                t.instantaneous
                    .iter()
                    .find(|d| d.src == j.from && d.tgt == j.to && d.event == j.event)
                    .map(|d| d.reset.clone())
            } else {
                t.stochastic
                    .iter()
                    .find(|d| d.src == j.from && d.tgt == j.to && d.event == j.event)
                    .map(|d| d.reset.clone())
            }
            .unwrap();
            let assigned = reset.assigned();
            for (i, v) in t.variables.iter().enumerate() {
                if !assigned.contains(v) {
                    assert_eq!(j.pre[i], j.post[i], "{} changed {v}", j.event);
                }
            }
        }
    }
}

#[test]
fn replications_are_reproducible() {
    let (_, a) = buffer_runs(8, 99);
    let (_, b) = buffer_runs(8, 99);
    assert_eq!(a.summary, b.summary);
    let mut x = Vec::new();
    let mut y = Vec::new();
    write_summary_csv(a.summary.as_ref().unwrap(), &mut x).unwrap();
    write_summary_csv(b.summary.as_ref().unwrap(), &mut y).unwrap();
    assert_eq!(x, y);
    let (_, c) = buffer_runs(8, 100);
    assert_ne!(a.summary, c.summary);
}

#[test]
fn single_replication_matches_stream_zero() {
    let t = tdsha(BUFFER);
    let c = SimulationConfig {
        dt: 1e-2,
        t_end: 20.0,
        master_seed: 17,
        ..SimulationConfig::default()
    };
    let reps = run_replications(&t, &c).unwrap();
    let direct = simulate_trajectory(&t, &c, &mut RngStream::new(17, 0)).unwrap();
    assert_eq!(reps.traces.len(), 1);
    assert_eq!(reps.traces[0].1, direct);
}

#[test]
fn buffer_mean_starts_at_b0() {
    let (t, reps) = buffer_runs(1000, 1);
    let s = reps.summary.unwrap();
    let b = s.variable("B").unwrap();
    assert_eq!(s.count, 1000);
    assert_eq!(s.mean[0][b], 100.0);
    assert_eq!(s.sd[0][b], 0.0);
    assert_eq!(s.times.len(), 51);
    assert_eq!(t.variables, s.variables);
}

#[test]
fn cyclic_controller_alternates() {
    let t = tdsha(CYCLE);
    let tr = simulate_trajectory(&t, &cfg(30.0), &mut RngStream::new(4, 0)).unwrap();
    assert!(tr.jumps.len() > 4);
    for w in tr.jumps.windows(2) {
        assert_ne!(w[0].event, w[1].event);
    }
    for j in tr.jumps.iter().filter(|j| j.event == "a1") {
        assert!((j.pre[0] - 1.0).abs() < 1e-6);
        assert_eq!(j.post[0], 0.0);
    }
}

#[test]
fn trace_csv_layout() {
    let t = tdsha(CYCLE);
    let tr = simulate_trajectory(&t, &cfg(5.0), &mut RngStream::new(4, 0)).unwrap();
    let mut out = Vec::new();
    write_trace_csv(&tr, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,mode,X,event"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), tr.samples.len() + tr.jumps.len());
    let mut last = 0.0;
    for r in &rows {
        assert_eq!(r.len(), 4);
        let t: f64 = r[0].parse().unwrap();
        assert!(t >= last);
        last = t;
        let _: f64 = r[2].parse().unwrap();
    }
    assert_eq!(rows.iter().filter(|r| !r[3].is_empty()).count(), tr.jumps.len());
    assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
    assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
}

#[test]
fn sweep_with_constant_cost_is_flat() {
    let m = parse_model(BUFFER).unwrap();
    let c = SimulationConfig {
        replications: 5,
        dt: 1e-2,
        t_end: 5.0,
        ..SimulationConfig::default()
    };
    let rows = sweep_parameter(&m, "r_in", &[10.0, 20.0], &Expr::num(3.0), &c).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.mean == 3.0 && r.se == 0.0 && r.n == 5));
    let err = sweep_parameter(&m, "nope", &[1.0], &Expr::num(0.0), &c).unwrap_err();
    assert_eq!(err, SimError::Model(ModelError::UnknownParameter("nope".into())));
}

#[test]
fn sweep_of_one_value_matches_replications() {
    let m = parse_model(BUFFER).unwrap();
    let c = SimulationConfig {
        replications: 6,
        dt: 1e-2,
        t_end: 5.0,
        master_seed: 8,
        ..SimulationConfig::default()
    };
    let rows = sweep_parameter(&m, "r_in", &[20.0], &Expr::var("B"), &c).unwrap();
    let terminal = SimulationConfig { recording: Recording::Terminal, ..c };
    let reps = run_replications(&from_model(&m).unwrap(), &terminal).unwrap();
    let b = 0;
    let finals: Vec<f64> = reps.traces.iter().map(|(_, t)| t.terminal.values[b]).collect();
    let mean = finals.iter().sum::<f64>() / 6.0;
    assert!((rows[0].mean - mean).abs() < 1e-12, "{} vs {mean} {finals:?}", rows[0].mean);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traces_are_ordered_and_bounded(seed in any::<u64>(), slope in -5.0..5.0f64, rate in 0.1..5.0f64) {
        let t = tdsha(&single(&rate.to_string(), &slope.to_string()));
        let tr = simulate_trajectory(&t, &cfg(10.0), &mut RngStream::new(seed, 0)).unwrap();
        for w in tr.samples.windows(2) {
            prop_assert!(w[0].t <= w[1].t);
        }
        for w in tr.jumps.windows(2) {
            prop_assert!(w[0].t <= w[1].t);
        }
        prop_assert_eq!(tr.terminal.t, 10.0);
        // flow is linear and jumps do not reset
        prop_assert!((tr.terminal.values[0] - 10.0 * slope).abs() < 1e-8);
    }
}
