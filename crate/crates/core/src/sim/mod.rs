//! Piecewise-deterministic simulation of a TDSHA.

mod compile;
mod csv;

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compile::{GuardProgram, Program};
pub use csv::{fmt_float, write_summary_csv, write_sweep_csv, write_trace_csv};

pub use crate::ast::sample::RngStream;
use crate::ast::sample::sample_expr;
use crate::ast::{EvalError, Expr, Model, ModelError, Reset};
use crate::tdsha::{from_model, Tdsha, TdshaError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("more than {cap} instantaneous jumps at t = {time} (last events: {events})")]
    ChainCapExceeded { time: f64, cap: usize, events: String },
    #[error("evaluation failed at t = {time}: {source}")]
    Eval { time: f64, source: EvalError },
    #[error("invalid simulation settings: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Tdsha(#[from] TdshaError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What a trajectory keeps besides its terminal state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recording {
    /// Samples every `record_stride` steps plus all jumps.
    Full,
    JumpsOnly,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub t_end: f64,
    /// Base integration step.
    pub dt: f64,
    /// Time tolerance of event localization.
    pub root_tol: f64,
    /// Relative tolerance of guard comparisons.
    pub guard_tol: f64,
    pub master_seed: u64,
    pub replications: usize,
    /// Maximal number of instantaneous jumps at one time instant.
    pub chain_cap: usize,
    pub record_stride: usize,
    pub recording: Recording,
    /// Spacing of the summary grid; `None` disables it.
    pub grid_step: Option<f64>,
    /// Ends a trajectory right after this event fires.
    pub stop_event: Option<String>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            t_end: 100.0,
            dt: 1e-3,
            root_tol: 1e-9,
            guard_tol: 1e-8,
            master_seed: 0,
            replications: 1,
            chain_cap: 1000,
            record_stride: 10,
            recording: Recording::Full,
            grid_step: None,
            stop_event: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.root_tol > 0.0 && self.root_tol < self.dt) {
            return bad("root_tol must lie in (0, dt)");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and non-negative");
        }
        if self.guard_tol < 0.0 {
            return bad("guard_tol must be non-negative");
        }
        if self.chain_cap < 1 {
            return bad("chain_cap must be at least 1");
        }
        if self.record_stride < 1 {
            return bad("record_stride must be at least 1");
        }
        if self.replications < 1 {
            return bad("replications must be at least 1");
        }
        if let Some(g) = self.grid_step {
            if !(g > 0.0 && g.is_finite()) {
                return bad("grid step must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub mode: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpKind {
    Instantaneous,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub t: f64,
    pub event: String,
    pub kind: JumpKind,
    pub from: usize,
    pub to: usize,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub variables: Vec<String>,
    pub samples: Vec<Sample>,
    pub jumps: Vec<Jump>,
    /// State on the summary grid, one row per grid time.
    pub grid: Vec<Vec<f64>>,
    pub terminal: Sample,
}

struct FlowTerm {
    var: usize,
    coef: f64,
    rate: Program,
}

struct ModeData {
    flow: Vec<FlowTerm>,
    velocity: Option<Vec<f64>>,
    td: Vec<usize>,
    ts: Vec<usize>,
    /// Constant flow, constant stochastic rates and affine guards: the
    /// state moves on a line and events can be located over long steps.
    exact: bool,
}

struct Td {
    tgt: usize,
    event: String,
    guard: GuardProgram,
    reset: Arc<Reset>,
    weight: f64,
}

struct Ts {
    tgt: usize,
    event: String,
    guard: GuardProgram,
    rate: Program,
    reset: Arc<Reset>,
}

/// A TDSHA compiled for repeated simulation.
pub struct Simulator {
    cfg: SimulationConfig,
    variables: Vec<String>,
    index: HashMap<String, usize>,
    modes: Vec<ModeData>,
    td: Vec<Td>,
    ts: Vec<Ts>,
    init_mode: usize,
    init_reset: Arc<Reset>,
}

#[derive(Default)]
struct Work {
    stack: Vec<f64>,
    vals: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    refs: Vec<Vec<f64>>,
    enabled: Vec<usize>,
    weights: Vec<f64>,
}

fn eval_err(time: f64) -> impl Fn(EvalError) -> SimError {
    move |source| SimError::Eval { time, source }
}

impl Simulator {
    pub fn new(t: &Tdsha, cfg: &SimulationConfig) -> Result<Simulator, SimError> {
        cfg.validate()?;
        let index: HashMap<String, usize> = t
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let err = eval_err(0.0);
        let n = t.variables.len();
        let mut modes: Vec<ModeData> = (0..t.modes.len())
            .map(|_| ModeData {
                flow: Vec::new(),
                velocity: None,
                td: Vec::new(),
                ts: Vec::new(),
                exact: false,
            })
            .collect();
        for c in &t.continuous {
            let rate = Program::compile(&c.rate, &index).map_err(&err)?;
            if rate.constant() == Some(0.0) {
                continue;
            }
            for (v, k) in &c.stoich {
                let var = *index.get(v).ok_or_else(|| err(EvalError::UnboundVariable(v.clone())))?;
                modes[c.mode].flow.push(FlowTerm {
                    var,
                    coef: *k,
                    rate: rate.clone(),
                });
            }
        }
        let mut td = Vec::with_capacity(t.instantaneous.len());
        for d in &t.instantaneous {
            modes[d.src].td.push(td.len());
            td.push(Td {
                tgt: d.tgt,
                event: d.event.clone(),
                guard: GuardProgram::compile(&d.guard, &index, cfg.guard_tol).map_err(&err)?,
                reset: d.reset.clone(),
                weight: d.weight,
            });
        }
        let mut ts = Vec::with_capacity(t.stochastic.len());
        for s in &t.stochastic {
            modes[s.src].ts.push(ts.len());
            ts.push(Ts {
                tgt: s.tgt,
                event: s.event.clone(),
                guard: GuardProgram::compile(&s.guard, &index, cfg.guard_tol).map_err(&err)?,
                rate: Program::compile(&s.rate, &index).map_err(&err)?,
                reset: s.reset.clone(),
            });
        }
        for m in &mut modes {
            if m.flow.iter().all(|f| f.rate.constant().is_some()) {
                let mut v = vec![0.0; n];
                for f in &m.flow {
                    v[f.var] += f.coef * f.rate.constant().unwrap_or(0.0);
                }
                m.velocity = Some(v);
            }
            m.exact = m.velocity.is_some()
                && m.ts.iter().all(|&i| ts[i].guard.is_true() && ts[i].rate.constant().is_some())
                && m.td.iter().all(|&i| td[i].guard.is_affine());
        }
        Ok(Simulator {
            cfg: cfg.clone(),
            variables: t.variables.clone(),
            index,
            modes,
            td,
            ts,
            init_mode: t.init_mode,
            init_reset: t.init_reset.clone(),
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.cfg
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    fn derivative(&self, mode: usize, x: &[f64], out: &mut Vec<f64>, stack: &mut Vec<f64>) -> Result<(), EvalError> {
        out.clear();
        out.resize(x.len(), 0.0);
        for f in &self.modes[mode].flow {
            out[f.var] += f.coef * f.rate.eval(x, stack)?;
        }
        Ok(())
    }

    /// Flow of `mode` from `x` over `h`, written to `out`.
    fn advance(&self, mode: usize, x: &[f64], h: f64, out: &mut Vec<f64>, w: &mut Work) -> Result<(), EvalError> {
        let m = &self.modes[mode];
        out.clear();
        if let Some(v) = &m.velocity {
            out.extend(x.iter().zip(v).map(|(a, b)| a + h * b));
            return Ok(());
        }
        let [k1, k2, k3, k4] = &mut w.k;
        self.derivative(mode, x, k1, &mut w.stack)?;
        w.tmp.clear();
        w.tmp.extend(x.iter().zip(k1.iter()).map(|(a, k)| a + 0.5 * h * k));
        self.derivative(mode, &w.tmp, k2, &mut w.stack)?;
        w.tmp.clear();
        w.tmp.extend(x.iter().zip(k2.iter()).map(|(a, k)| a + 0.5 * h * k));
        self.derivative(mode, &w.tmp, k3, &mut w.stack)?;
        w.tmp.clear();
        w.tmp.extend(x.iter().zip(k3.iter()).map(|(a, k)| a + h * k));
        self.derivative(mode, &w.tmp, k4, &mut w.stack)?;
        out.extend(
            (0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])),
        );
        Ok(())
    }

    /// Total stochastic rate of `mode` at `x`.
    fn hazard(&self, mode: usize, x: &[f64], w: &mut Work) -> Result<f64, EvalError> {
        let mut total = 0.0;
        for &i in &self.modes[mode].ts {
            let s = &self.ts[i];
            if !s.guard.holds_with(x, None, &mut w.stack, &mut w.vals)? {
                continue;
            }
            let r = s.rate.eval(x, &mut w.stack)?;
            if r < 0.0 || r.is_nan() {
                return Err(EvalError::NegativeRate {
                    event: s.event.clone(),
                    value: r,
                });
            }
            total += r;
        }
        Ok(total)
    }

    /// Fills `w.enabled` with the instantaneous transitions of `mode` enabled
    /// at `x`, optionally counting sign changes against `w.refs`.
    fn enabled_td(&self, mode: usize, x: &[f64], crossing: bool, w: &mut Work) -> Result<(), EvalError> {
        w.enabled.clear();
        for (k, &i) in self.modes[mode].td.iter().enumerate() {
            let reference = if crossing { Some(w.refs[k].as_slice()) } else { None };
            if self.td[i].guard.holds_with(x, reference, &mut w.stack, &mut w.vals)? {
                w.enabled.push(i);
            }
        }
        Ok(())
    }

    fn any_td(&self, mode: usize, x: &[f64], w: &mut Work) -> Result<bool, EvalError> {
        for (k, &i) in self.modes[mode].td.iter().enumerate() {
            let reference = Some(w.refs[k].as_slice());
            if self.td[i].guard.holds_with(x, reference, &mut w.stack, &mut w.vals)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn apply_reset(&self, reset: &Reset, x: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, EvalError> {
        let env = |n: &str| self.index.get(n).map(|&i| x[i]);
        let mut out = x.to_vec();
        for a in &reset.atoms {
            let i = *self
                .index
                .get(&a.var)
                .ok_or_else(|| EvalError::UnboundVariable(a.var.clone()))?;
            out[i] = sample_expr(&a.value, &env, rng)?;
        }
        Ok(out)
    }

    fn choose(weights: &[f64], rng: &mut RngStream) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = rng.uniform01() * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
    }

    /// Runs one trajectory drawing from `rng`.
    pub fn run(&self, rng: &mut RngStream) -> Result<Trace, SimError> {
        let cfg = &self.cfg;
        let n = self.variables.len();
        let mut w = Work::default();
        let zeros = vec![0.0; n];
        let mut x = self.apply_reset(&self.init_reset, &zeros, rng).map_err(eval_err(0.0))?;
        let mut mode = self.init_mode;
        let mut t = 0.0;
        let mut trace = Trace {
            variables: self.variables.clone(),
            samples: Vec::new(),
            jumps: Vec::new(),
            grid: Vec::new(),
            terminal: Sample {
                t: 0.0,
                mode,
                values: Vec::new(),
            },
        };
        let full = cfg.recording == Recording::Full;
        let keep_jumps = cfg.recording != Recording::Terminal;
        if full {
            trace.samples.push(Sample {
                t,
                mode,
                values: x.clone(),
            });
        }
        let grid_len = cfg.grid_step.map_or(0, |g| (cfg.t_end / g * (1.0 + 1e-12)).floor() as usize + 1);
        let grid_time = |k: usize| cfg.grid_step.unwrap_or(0.0) * k as f64;
        let mut u = rng.exp1();
        let mut acc = 0.0;
        let mut chain = 0usize;
        let mut recent: Vec<String> = Vec::new();
        let mut steps = 0usize;
        let mut x1 = Vec::with_capacity(n);
        let mut xm = Vec::with_capacity(n);
        let mut stopped = false;

        'outer: loop {
            // urgent transitions at the current instant
            self.enabled_td(mode, &x, false, &mut w).map_err(eval_err(t))?;
            if !w.enabled.is_empty() {
                let i = if w.enabled.len() == 1 {
                    w.enabled[0]
                } else {
                    w.weights.clear();
                    w.weights.extend(w.enabled.iter().map(|&i| self.td[i].weight));
                    w.enabled[Self::choose(&w.weights, rng)]
                };
                chain += 1;
                let d = &self.td[i];
                recent.push(d.event.clone());
                if recent.len() > 8 {
                    recent.remove(0);
                }
                if chain > cfg.chain_cap {
                    return Err(SimError::ChainCapExceeded {
                        time: t,
                        cap: cfg.chain_cap,
                        events: recent.join(", "),
                    });
                }
                let post = self.apply_reset(&d.reset, &x, rng).map_err(eval_err(t))?;
                if keep_jumps {
                    trace.jumps.push(Jump {
                        t,
                        event: d.event.clone(),
                        kind: JumpKind::Instantaneous,
                        from: mode,
                        to: d.tgt,
                        pre: x.clone(),
                        post: post.clone(),
                    });
                }
                x = post;
                mode = d.tgt;
                u = rng.exp1();
                acc = 0.0;
                if cfg.stop_event.as_deref() == Some(d.event.as_str()) {
                    stopped = true;
                    break 'outer;
                }
                continue;
            }
            if t >= cfg.t_end {
                break;
            }
            let remaining = cfg.t_end - t;
            let exact = self.modes[mode].exact;
            let h = if exact {
                if full {
                    (cfg.dt * cfg.record_stride as f64).min(remaining)
                } else {
                    remaining
                }
            } else {
                cfg.dt.min(remaining)
            };
            // atom values at the start of the step
            let ntd = self.modes[mode].td.len();
            w.refs.resize_with(ntd.max(w.refs.len()), Vec::new);
            for k in 0..ntd {
                let i = self.modes[mode].td[k];
                let mut r = std::mem::take(&mut w.refs[k]);
                self.td[i].guard.atom_values(&x, &mut w.stack, &mut r).map_err(eval_err(t))?;
                w.refs[k] = r;
            }
            let lam0 = self.hazard(mode, &x, &mut w).map_err(eval_err(t))?;
            self.advance(mode, &x, h, &mut x1, &mut w).map_err(eval_err(t))?;
            let lam1 = self.hazard(mode, &x1, &mut w).map_err(eval_err(t + h))?;
            let acc1 = acc + 0.5 * h * (lam0 + lam1);
            let td_hit = self.any_td(mode, &x1, &mut w).map_err(eval_err(t + h))?;
            if !td_hit && acc1 < u {
                self.fill_grid(&mut trace.grid, grid_len, &grid_time, mode, &x, t, t + h, &mut w)?;
                t = if h == remaining { cfg.t_end } else { t + h };
                std::mem::swap(&mut x, &mut x1);
                acc = acc1;
                chain = 0;
                steps += 1;
                if full && (exact || steps % cfg.record_stride == 0) {
                    trace.samples.push(Sample {
                        t,
                        mode,
                        values: x.clone(),
                    });
                }
                continue;
            }
            // localize the first event in (0, h]
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > cfg.root_tol {
                let mid = 0.5 * (lo + hi);
                self.advance(mode, &x, mid, &mut xm, &mut w).map_err(eval_err(t + mid))?;
                let lm = self.hazard(mode, &xm, &mut w).map_err(eval_err(t + mid))?;
                let hit = acc + 0.5 * mid * (lam0 + lm) >= u || self.any_td(mode, &xm, &mut w).map_err(eval_err(t + mid))?;
                if hit {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            self.advance(mode, &x, hi, &mut x1, &mut w).map_err(eval_err(t + hi))?;
            let lam_hi = self.hazard(mode, &x1, &mut w).map_err(eval_err(t + hi))?;
            self.fill_grid(&mut trace.grid, grid_len, &grid_time, mode, &x, t, t + hi, &mut w)?;
            t += hi;
            std::mem::swap(&mut x, &mut x1);
            acc += 0.5 * hi * (lam0 + lam_hi);
            chain = 0;
            recent.clear();
            self.enabled_td(mode, &x, true, &mut w).map_err(eval_err(t))?;
            let (event, tgt, reset, kind) = if !w.enabled.is_empty() {
                chain = 1;
                w.weights.clear();
                w.weights.extend(w.enabled.iter().map(|&i| self.td[i].weight));
                let d = &self.td[w.enabled[Self::choose(&w.weights, rng)]];
                (&d.event, d.tgt, &d.reset, JumpKind::Instantaneous)
            } else {
                w.enabled.clear();
                w.weights.clear();
                for &i in &self.modes[mode].ts {
                    let s = &self.ts[i];
                    if s.guard.holds_with(&x, None, &mut w.stack, &mut w.vals).map_err(eval_err(t))? {
                        let r = s.rate.eval(&x, &mut w.stack).map_err(eval_err(t))?;
                        if r > 0.0 {
                            w.enabled.push(i);
                            w.weights.push(r);
                        }
                    }
                }
                if w.enabled.is_empty() {
                    // hazard vanished at the localized point; keep integrating
                    continue;
                }
                let s = &self.ts[w.enabled[Self::choose(&w.weights, rng)]];
                (&s.event, s.tgt, &s.reset, JumpKind::Stochastic)
            };
            recent.push(event.clone());
            let post = self.apply_reset(reset, &x, rng).map_err(eval_err(t))?;
            if keep_jumps {
                trace.jumps.push(Jump {
                    t,
                    event: event.clone(),
                    kind,
                    from: mode,
                    to: tgt,
                    pre: x.clone(),
                    post: post.clone(),
                });
            }
            x = post;
            mode = tgt;
            u = rng.exp1();
            acc = 0.0;
            if cfg.stop_event.as_deref() == Some(event.as_str()) {
                stopped = true;
                break;
            }
        }
        let _ = stopped;
        while trace.grid.len() < grid_len {
            trace.grid.push(x.clone());
        }
        if full && trace.samples.last().map_or(true, |s| s.t < t) {
            trace.samples.push(Sample {
                t,
                mode,
                values: x.clone(),
            });
        }
        trace.terminal = Sample { t, mode, values: x };
        Ok(trace)
    }

    /// Pushes the flow state at every grid time in `[t0, t1)`.
    #[allow(clippy::too_many_arguments)]
    fn fill_grid(
        &self,
        grid: &mut Vec<Vec<f64>>,
        grid_len: usize,
        grid_time: &dyn Fn(usize) -> f64,
        mode: usize,
        x: &[f64],
        t0: f64,
        t1: f64,
        w: &mut Work,
    ) -> Result<(), SimError> {
        while grid.len() < grid_len {
            let g = grid_time(grid.len());
            if g >= t1 {
                break;
            }
            let mut out = Vec::with_capacity(x.len());
            self.advance(mode, x, (g - t0).max(0.0), &mut out, w).map_err(eval_err(g))?;
            grid.push(out);
        }
        Ok(())
    }
}

/// Simulates one trajectory of `t`.
pub fn simulate_trajectory(t: &Tdsha, cfg: &SimulationConfig, rng: &mut RngStream) -> Result<Trace, SimError> {
    Simulator::new(t, cfg)?.run(rng)
}

/// Per-grid-time mean and standard deviation of every variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variables: Vec<String>,
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub sd: Vec<Vec<f64>>,
    pub count: usize,
}

impl Summary {
    pub fn from_traces<'a>(variables: &[String], grid_step: f64, traces: impl IntoIterator<Item = &'a Trace>) -> Summary {
        let mut count = 0usize;
        let mut mean: Vec<Vec<f64>> = Vec::new();
        let mut m2: Vec<Vec<f64>> = Vec::new();
        for tr in traces {
            if mean.is_empty() {
                mean = vec![vec![0.0; variables.len()]; tr.grid.len()];
                m2 = mean.clone();
            }
            count += 1;
            let c = count as f64;
            for (k, row) in tr.grid.iter().enumerate().take(mean.len()) {
                for (j, v) in row.iter().enumerate() {
                    let d = v - mean[k][j];
                    mean[k][j] += d / c;
                    m2[k][j] += d * (v - mean[k][j]);
                }
            }
        }
        let sd = m2
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| if count > 1 { (s / (count as f64 - 1.0)).sqrt() } else { 0.0 })
                    .collect()
            })
            .collect();
        Summary {
            variables: variables.to_vec(),
            times: (0..mean.len()).map(|k| grid_step * k as f64).collect(),
            mean,
            sd,
            count,
        }
    }

    pub fn variable(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }
}

#[derive(Debug, Clone)]
pub struct Replications {
    /// Successful trajectories in replication order.
    pub traces: Vec<(usize, Trace)>,
    pub failures: Vec<(usize, SimError)>,
    pub summary: Option<Summary>,
}

/// Runs `cfg.replications` trajectories; replication `i` draws from
/// stream `(master_seed, i)`, so results do not depend on scheduling.
pub fn run_replications(t: &Tdsha, cfg: &SimulationConfig) -> Result<Replications, SimError> {
    let sim = Simulator::new(t, cfg)?;
    Ok(sim.replicate())
}

impl Simulator {
    pub fn replicate(&self) -> Replications {
        let cfg = &self.cfg;
        let results: Vec<Result<Trace, SimError>> = (0..cfg.replications)
            .into_par_iter()
            .map(|i| self.run(&mut RngStream::new(cfg.master_seed, i as u64)))
            .collect();
        let mut traces = Vec::new();
        let mut failures = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(tr) => traces.push((i, tr)),
                Err(e) => failures.push((i, e)),
            }
        }
        let summary = cfg
            .grid_step
            .map(|g| Summary::from_traces(&self.variables, g, traces.iter().map(|(_, t)| t)));
        Replications {
            traces,
            failures,
            summary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub failures: usize,
}

/// Mean terminal `cost` for each value of `param`.
pub fn sweep_parameter(
    model: &Model,
    param: &str,
    values: &[f64],
    cost: &Expr,
    cfg: &SimulationConfig,
) -> Result<Vec<SweepRow>, SimError> {
    let mut rows = Vec::with_capacity(values.len());
    let mut run_cfg = cfg.clone();
    run_cfg.recording = Recording::Terminal;
    run_cfg.grid_step = None;
    for &v in values {
        let m = model.with_param(param, v)?;
        let t = from_model(&m)?;
        let index: HashMap<String, usize> = t
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let c = Program::compile(&m.resolve(cost)?, &index).map_err(eval_err(0.0))?;
        let reps = Simulator::new(&t, &run_cfg)?.replicate();
        let mut stack = Vec::new();
        let mut costs = Vec::with_capacity(reps.traces.len());
        for (_, tr) in &reps.traces {
            costs.push(c.eval(&tr.terminal.values, &mut stack).map_err(eval_err(tr.terminal.t))?);
        }
        let n = costs.len();
        let mean = costs.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
        } else {
            0.0
        };
        rows.push(SweepRow {
            value: v,
            mean,
            se: (var / n.max(1) as f64).sqrt(),
            n,
            failures: reps.failures.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests;
