//! Seeded Monte Carlo simulation of the chain with competing exponential
//! clocks.
//!
//! A run starts in `O`, discards a warmup period, then accumulates renewal
//! statistics for one viewer until a cycle count or a time horizon is
//! reached. Each replication draws from its own ChaCha8 stream of the same
//! seed, so replications can run in any order or in parallel and still
//! produce identical numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctmc::{self, transitions, CtmcError};
use crate::params::{ParamError, RateParams};
use crate::state::{
    first_error_states, is_reset_state, EntityId, Event, InfoState, STATE_COUNT,
};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;
/// Default warmup, in expected cycles.
pub const WARMUP_CYCLES: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("a cycle-count stop needs d > 0 and p > 0, otherwise cycles never complete; use a horizon")]
    CyclesNeverComplete,
    #[error("invalid stop rule: {0}")]
    Stop(String),
    #[error("warmup must be finite and >= 0, got {0}")]
    Warmup(f64),
    #[error("default warmup: {0}")]
    Ctmc(#[from] CtmcError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop after this many error periods have completed.
    Cycles(u64),
    /// Stop this many seconds after the warmup ends.
    Horizon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: RateParams,
    pub seed: u64,
    pub stop: StopRule,
    /// `None` picks [`WARMUP_CYCLES`] expected cycles.
    pub warmup: Option<f64>,
    pub viewer: EntityId,
    pub record_events: bool,
}

impl SimConfig {
    pub fn new(params: RateParams, seed: u64, stop: StopRule) -> Self {
        SimConfig {
            params,
            seed,
            stop,
            warmup: None,
            viewer: EntityId::One,
            record_events: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        match self.stop {
            StopRule::Cycles(0) => return Err(SimError::Stop("cycle count must be >= 1".into())),
            StopRule::Cycles(_) if self.params.d <= 0.0 || self.params.p <= 0.0 => {
                return Err(SimError::CyclesNeverComplete)
            }
            StopRule::Horizon(h) if !(h.is_finite() && h > 0.0) => {
                return Err(SimError::Stop(format!("horizon must be finite and > 0, got {h}")))
            }
            _ => {}
        }
        if let Some(w) = self.warmup {
            if !(w.is_finite() && w >= 0.0) {
                return Err(SimError::Warmup(w));
            }
        }
        Ok(())
    }

    /// Explicit warmup, or 100 expected cycles when errors occur and get
    /// resolved, otherwise zero.
    pub fn effective_warmup(&self) -> Result<f64, SimError> {
        if let Some(w) = self.warmup {
            return Ok(w);
        }
        if self.params.d > 0.0 && self.params.p > 0.0 {
            let ep = ctmc::expected_error_period(&self.params, self.viewer)?;
            Ok(WARMUP_CYCLES * ep.mean_cycle)
        } else {
            Ok(0.0)
        }
    }
}

/// Running mean and variance (Welford), mergeable across replications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn summary(&self) -> Summary {
        let se = self.std_err();
        let mean = self.mean();
        Summary {
            n: self.n,
            mean,
            std_err: se,
            ci_low: mean - Z95 * se,
            ci_high: mean + Z95 * se,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: u64,
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    pub fn half_width(&self) -> f64 {
        Z95 * self.std_err
    }

    /// `|mean - target| <= k * std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateValue {
    pub state: InfoState,
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMoments {
    pub state: InfoState,
    pub moments: Moments,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub time: f64,
    pub event: Event,
    pub state: InfoState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub stream: u64,
    pub viewer: EntityId,
    pub params: RateParams,
    pub stop: StopRule,
    pub warmup: f64,
    /// Seconds of simulated time that statistics cover.
    pub elapsed: f64,
    pub cycles_completed: u64,
    pub error_period: Summary,
    /// Raw moments behind `error_period`, for merging replications.
    pub error_moments: Moments,
    pub mean_error_sq: f64,
    pub mean_cycle: f64,
    /// Gaps between successive error-period starts.
    pub cycle_moments: Moments,
    /// `E[T_err] / 2`.
    pub baoii_per_cycle: Summary,
    /// `integral of the penalty / elapsed`.
    pub baoii_time_average: f64,
    /// `E[T_err^2] / (2 E[T_cycle])`.
    pub baoii_renewal_reward: f64,
    /// `baoii_time_average / baoii_per_cycle.mean`.
    pub baoii_ratio: f64,
    pub occupancy: Vec<StateValue>,
    pub holding: Vec<StateMoments>,
    /// Jump counts, row = from, column = to, canonical order.
    pub jump_counts: Vec<Vec<u64>>,
    /// Error periods grouped by the first error state entered.
    pub by_entry: Vec<StateMoments>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub events: Vec<LoggedEvent>,
}

impl SimReport {
    pub fn occupancy_of(&self, s: InfoState) -> StateValue {
        self.occupancy[s.index()]
    }

    pub fn holding_of(&self, s: InfoState) -> Moments {
        self.holding[s.index()].moments
    }

    pub fn jumps(&self, from: InfoState, to: InfoState) -> u64 {
        self.jump_counts[from.index()][to.index()]
    }

    pub fn entry(&self, s: InfoState) -> Option<Moments> {
        self.by_entry.iter().find(|e| e.state == s).map(|e| e.moments)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Scalar summary as a header row and one data row.
    pub fn to_csv(&self) -> String {
        let mut cols: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("stream".into(), self.stream.to_string()),
            ("viewer".into(), self.viewer.number().to_string()),
            ("d".into(), self.params.d.to_string()),
            ("m1".into(), self.params.m1.to_string()),
            ("m2".into(), self.params.m2.to_string()),
            ("p".into(), self.params.p.to_string()),
            ("warmup".into(), self.warmup.to_string()),
            ("elapsed".into(), self.elapsed.to_string()),
            ("cycles_completed".into(), self.cycles_completed.to_string()),
            ("error_period_mean".into(), self.error_period.mean.to_string()),
            ("error_period_se".into(), self.error_period.std_err.to_string()),
            ("error_period_ci_low".into(), self.error_period.ci_low.to_string()),
            ("error_period_ci_high".into(), self.error_period.ci_high.to_string()),
            ("mean_cycle".into(), self.mean_cycle.to_string()),
            ("baoii_per_cycle".into(), self.baoii_per_cycle.mean.to_string()),
            ("baoii_time_average".into(), self.baoii_time_average.to_string()),
            ("baoii_renewal_reward".into(), self.baoii_renewal_reward.to_string()),
            ("baoii_ratio".into(), self.baoii_ratio.to_string()),
        ];
        for o in &self.occupancy {
            cols.push((format!("occupancy_{}", o.state.name()), o.value.to_string()));
        }
        cols.push(("warnings".into(), self.warnings.join("; ")));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(cols.iter().map(|(k, _)| k)).expect("in-memory write");
        w.write_record(cols.iter().map(|(_, v)| v)).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// `time,event,actor,state`, one row per logged jump.
    pub fn events_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["time", "event", "actor", "state"]).expect("in-memory write");
        for e in &self.events {
            w.write_record([
                e.time.to_string(),
                e.event.kind.name().to_string(),
                e.event.actor.number().to_string(),
                e.state.name().to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Outgoing moves of one state, with a cumulative rate table for selection.
struct Moves {
    exit: f64,
    to: Vec<(InfoState, Event, f64)>,
}

fn build_moves(params: &RateParams) -> Vec<Moves> {
    let mut moves: Vec<Moves> = (0..STATE_COUNT)
        .map(|_| Moves {
            exit: 0.0,
            to: Vec::new(),
        })
        .collect();
    for t in transitions(params) {
        let m = &mut moves[t.from.index()];
        m.exit += t.rate;
        m.to.push((t.to, t.event, m.exit));
    }
    moves
}

/// `-ln(1 - u) / rate` with `u` in `[0, 1)`, so the logarithm never sees 0.
fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Regenerative estimator of time fractions over cycles delimited by
/// entries into `O`.
struct Occupancy {
    time: [f64; STATE_COUNT],
    cycle: [f64; STATE_COUNT],
    in_cycle: bool,
    // per state: n, sum y, sum l, sum y^2, sum y l, sum l^2
    n: u64,
    sy: [f64; STATE_COUNT],
    sl: f64,
    syy: [f64; STATE_COUNT],
    syl: [f64; STATE_COUNT],
    sll: f64,
}

impl Occupancy {
    fn new() -> Self {
        Occupancy {
            time: [0.0; STATE_COUNT],
            cycle: [0.0; STATE_COUNT],
            in_cycle: false,
            n: 0,
            sy: [0.0; STATE_COUNT],
            sl: 0.0,
            syy: [0.0; STATE_COUNT],
            syl: [0.0; STATE_COUNT],
            sll: 0.0,
        }
    }

    fn dwell(&mut self, s: InfoState, dt: f64) {
        self.time[s.index()] += dt;
        if self.in_cycle {
            self.cycle[s.index()] += dt;
        }
    }

    fn enter_o(&mut self) {
        if self.in_cycle {
            let l: f64 = self.cycle.iter().sum();
            self.n += 1;
            self.sl += l;
            self.sll += l * l;
            for i in 0..STATE_COUNT {
                let y = self.cycle[i];
                self.sy[i] += y;
                self.syy[i] += y * y;
                self.syl[i] += y * l;
            }
        }
        self.cycle = [0.0; STATE_COUNT];
        self.in_cycle = true;
    }

    fn finish(&self, elapsed: f64) -> Vec<StateValue> {
        InfoState::ALL
            .into_iter()
            .map(|s| {
                let i = s.index();
                let value = if elapsed > 0.0 {
                    self.time[i] / elapsed
                } else {
                    f64::NAN
                };
                let std_err = if self.n >= 2 {
                    let n = self.n as f64;
                    let r = self.sy[i] / self.sl;
                    // sample variance of y - r l
                    let ss = self.syy[i] - 2.0 * r * self.syl[i] + r * r * self.sll;
                    let var = (ss / (n - 1.0)).max(0.0);
                    let mean_l = self.sl / n;
                    var.sqrt() / (mean_l * n.sqrt())
                } else {
                    f64::NAN
                };
                StateValue {
                    state: s,
                    value,
                    std_err,
                }
            })
            .collect()
    }
}

/// Simulate one replication on stream 0.
pub fn run(config: &SimConfig) -> Result<SimReport, SimError> {
    run_stream(config, 0)
}

/// Simulate one replication on the given stream of `config.seed`.
pub fn run_stream(config: &SimConfig, stream: u64) -> Result<SimReport, SimError> {
    config.validate()?;
    let warmup = config.effective_warmup()?;
    let params = &config.params;
    let viewer = config.viewer;
    let moves = build_moves(params);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);

    let window_end = match config.stop {
        StopRule::Horizon(h) => warmup + h,
        StopRule::Cycles(_) => f64::INFINITY,
    };
    let target_cycles = match config.stop {
        StopRule::Cycles(n) => n,
        StopRule::Horizon(_) => u64::MAX,
    };

    let mut state = InfoState::O;
    let mut t = 0.0_f64;
    // start of the error period in progress and whether it began after warmup
    let mut err_start: Option<(f64, bool, InfoState)> = None;
    let mut last_start: Option<f64> = None;

    let mut errors = Moments::default();
    let mut err_sq = 0.0;
    let mut cycles = Moments::default();
    let mut by_entry: Vec<StateMoments> = first_error_states(viewer)
        .into_iter()
        .map(|s| StateMoments {
            state: s,
            moments: Moments::default(),
        })
        .collect();
    let mut holding = [Moments::default(); STATE_COUNT];
    let mut jumps = vec![vec![0u64; STATE_COUNT]; STATE_COUNT];
    let mut occupancy = Occupancy::new();
    let mut area = 0.0;
    let mut events = Vec::new();
    let end = loop {
        let m = &moves[state.index()];
        let hold = if m.exit > 0.0 {
            exponential(&mut rng, m.exit)
        } else {
            f64::INFINITY
        };
        let t_next = t + hold;

        // time spent in `state` inside the window [warmup, window_end]
        let a = t.max(warmup);
        let b = t_next.min(window_end);
        if b > a {
            occupancy.dwell(state, b - a);
            if let Some((s0, _, _)) = err_start {
                area += ((b - s0).powi(2) - (a - s0).powi(2)) / 2.0;
            }
        }
        if t >= warmup && t_next <= window_end {
            holding[state.index()].push(hold);
        }
        if t_next > window_end {
            break window_end;
        }

        let u: f64 = rng.random::<f64>() * m.exit;
        let &(next, event, _) = m
            .to
            .iter()
            .find(|(_, _, cum)| u < *cum)
            .unwrap_or_else(|| m.to.last().expect("positive exit rate has moves"));
        t = t_next;
        let counted = t >= warmup;
        if counted {
            jumps[state.index()][next.index()] += 1;
            if next == InfoState::O {
                occupancy.enter_o();
            }
        }
        if config.record_events {
            events.push(LoggedEvent {
                time: t,
                event,
                state: next,
            });
        }

        let was_reset = is_reset_state(state, viewer);
        let now_reset = is_reset_state(next, viewer);
        if was_reset && !now_reset {
            err_start = Some((t, counted, next));
            if counted {
                if let Some(prev) = last_start {
                    cycles.push(t - prev);
                }
                last_start = Some(t);
            }
        } else if !was_reset && now_reset {
            if let Some((s0, after_warmup, entry)) = err_start.take() {
                if after_warmup {
                    let len = t - s0;
                    errors.push(len);
                    err_sq += len * len;
                    if let Some(e) = by_entry.iter_mut().find(|e| e.state == entry) {
                        e.moments.push(len);
                    }
                    if errors.n >= target_cycles {
                        break t;
                    }
                }
            }
        }
        state = next;
    };

    let elapsed = (end - warmup).max(0.0);
    let mut warnings = Vec::new();
    if errors.n == 0 {
        warnings.push("no error period completed inside the statistics window".to_string());
    }
    if warmup == 0.0 && config.warmup.is_none() {
        warnings.push("no warmup: the default needs d > 0 and p > 0, statistics start at t = 0".to_string());
    }

    let error_period = errors.summary();
    let mean_error_sq = if errors.n > 0 {
        err_sq / errors.n as f64
    } else {
        f64::NAN
    };
    let mean_cycle = cycles.mean();
    let baoii_per_cycle = Summary {
        n: error_period.n,
        mean: error_period.mean / 2.0,
        std_err: error_period.std_err / 2.0,
        ci_low: error_period.ci_low / 2.0,
        ci_high: error_period.ci_high / 2.0,
    };
    let baoii_time_average = if elapsed > 0.0 { area / elapsed } else { f64::NAN };

    Ok(SimReport {
        seed: config.seed,
        stream,
        viewer,
        params: *params,
        stop: config.stop,
        warmup,
        elapsed,
        cycles_completed: errors.n,
        error_period,
        error_moments: errors,
        mean_error_sq,
        mean_cycle,
        cycle_moments: cycles,
        baoii_per_cycle,
        baoii_time_average,
        baoii_renewal_reward: mean_error_sq / (2.0 * mean_cycle),
        baoii_ratio: baoii_time_average / baoii_per_cycle.mean,
        occupancy: occupancy.finish(elapsed),
        holding: InfoState::ALL
            .into_iter()
            .map(|s| StateMoments {
                state: s,
                moments: holding[s.index()],
            })
            .collect(),
        jump_counts: jumps,
        by_entry,
        warnings,
        events,
    })
}

/// `n` independent replications on streams `0..n`, computed in parallel and
/// returned in stream order.
pub fn run_replications(config: &SimConfig, n: u64) -> Result<Vec<SimReport>, SimError> {
    (0..n)
        .into_par_iter()
        .map(|stream| run_stream(config, stream))
        .collect()
}

/// Error-period moments pooled over replications.
pub fn pooled_error_period(reports: &[SimReport]) -> Summary {
    let mut m = Moments::default();
    for r in reports {
        m.merge(&r.error_moments);
    }
    m.summary()
}

/// Error-period statistics conditioned on the first error state entered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryEstimate {
    pub per_state: Vec<(InfoState, Summary)>,
    /// All error periods whose entry state is in the filter.
    pub mixture: Summary,
}

pub fn estimate_error_period(
    config: &SimConfig,
    entry_filter: &[InfoState],
) -> Result<EntryEstimate, SimError> {
    let report = run(config)?;
    Ok(entry_estimate(&report, entry_filter))
}

pub fn entry_estimate(report: &SimReport, entry_filter: &[InfoState]) -> EntryEstimate {
    let mut mixture = Moments::default();
    let mut per_state = Vec::new();
    for e in &report.by_entry {
        if entry_filter.contains(&e.state) {
            mixture.merge(&e.moments);
            per_state.push((e.state, e.moments.summary()));
        }
    }
    EntryEstimate {
        per_state,
        mixture: mixture.summary(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaoiiEstimate {
    pub per_cycle: Summary,
    pub time_average: f64,
    pub renewal_reward: f64,
    pub ratio: f64,
}

pub fn estimate_baoii(config: &SimConfig) -> Result<BaoiiEstimate, SimError> {
    let r = run(config)?;
    Ok(BaoiiEstimate {
        per_cycle: r.baoii_per_cycle,
        time_average: r.baoii_time_average,
        renewal_reward: r.baoii_renewal_reward,
        ratio: r.baoii_ratio,
    })
}
