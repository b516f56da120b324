//! Deterministic penalty curves for a given event timeline.
//!
//! A [`Timeline`] is replayed through [`apply_event`] and turned into a state
//! sequence plus piecewise-linear penalty curves: the BAoII of one viewer and
//! an AoII variant chosen by a [`PenaltyRule`].

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{apply_event, is_reset_state, EntityId, Event, EventKind, InfoState};

/// The timeline drawn in the paper's comparison of BAoII and AoII.
pub const FIG3_TIMELINE_CSV: &str = include_str!("../data/fig3.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("event {index} at t={time}: times must be finite and >= the start time {start}")]
    BadTime { index: usize, time: f64, start: f64 },
    #[error("events {index} and {next} share or reverse timestamps ({time} then {next_time})")]
    NotIncreasing {
        index: usize,
        next: usize,
        time: f64,
        next_time: f64,
    },
    #[error("end time {end} precedes the last event at {last}")]
    BadEnd { end: f64, last: f64 },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("range [{from}, {to}] outside curve domain [{start}, {end}]")]
    OutOfDomain {
        from: f64,
        to: f64,
        start: f64,
        end: f64,
    },
    #[error("unknown penalty rule {0:?}")]
    UnknownRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub time: f64,
    pub event: Event,
}

/// Events in strictly increasing time order, starting from `start_state` at
/// `start_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub start_state: InfoState,
    pub start_time: f64,
    pub events: Vec<TimedEvent>,
    /// Curves stop here; defaults to the last event time.
    pub end: Option<f64>,
}

impl Timeline {
    pub fn new(start_state: InfoState, events: Vec<TimedEvent>) -> Result<Self, TraceError> {
        let tl = Timeline {
            start_state,
            start_time: 0.0,
            events,
            end: None,
        };
        tl.validate()?;
        Ok(tl)
    }

    pub fn with_end(mut self, end: f64) -> Result<Self, TraceError> {
        self.end = Some(end);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        for (index, e) in self.events.iter().enumerate() {
            if !(e.time.is_finite() && e.time >= self.start_time && e.time >= 0.0) {
                return Err(TraceError::BadTime {
                    index,
                    time: e.time,
                    start: self.start_time,
                });
            }
        }
        for (index, w) in self.events.windows(2).enumerate() {
            if w[1].time <= w[0].time {
                return Err(TraceError::NotIncreasing {
                    index,
                    next: index + 1,
                    time: w[0].time,
                    next_time: w[1].time,
                });
            }
        }
        if let Some(end) = self.end {
            let last = self.last_time();
            if !(end.is_finite() && end >= last) {
                return Err(TraceError::BadEnd { end, last });
            }
        }
        Ok(())
    }

    fn last_time(&self) -> f64 {
        self.events.last().map_or(self.start_time, |e| e.time)
    }

    pub fn end_time(&self) -> f64 {
        self.end.unwrap_or_else(|| self.last_time())
    }

    /// Reads `time,event,actor` rows. A header row, blank lines and lines
    /// starting with `#` are skipped. Errors carry the 1-based line number.
    pub fn from_csv<R: Read>(reader: R, start_state: InfoState) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut events = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| TraceError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let parse_err = |message: String| TraceError::Parse { line, message };
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("time")) {
                continue;
            }
            if record.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 fields (time,event,actor), found {}",
                    record.len()
                )));
            }
            let time: f64 = record[0]
                .parse()
                .map_err(|_| parse_err(format!("bad time {:?}", &record[0])))?;
            let kind = EventKind::from_str(&record[1]).map_err(|e| parse_err(e.to_string()))?;
            let actor = EntityId::from_str(&record[2]).map_err(|e| parse_err(e.to_string()))?;
            events.push(TimedEvent {
                time,
                event: Event::new(kind, actor),
            });
        }
        Timeline::new(start_state, events)
    }

    pub fn fig3() -> Self {
        Timeline::from_csv(FIG3_TIMELINE_CSV.as_bytes(), InfoState::O).expect("bundled timeline parses")
    }
}

/// Decides when a penalty is accruing. A curve grows with slope 1 while
/// active and drops to 0 when it becomes inactive.
pub trait PenaltyRule {
    fn name(&self) -> &'static str;
    fn active_at_start(&self, state: InfoState, viewer: EntityId) -> bool;
    /// Activity just after `event` moved the chain from `from` to `to`.
    fn after(&self, active: bool, from: InfoState, event: Event, to: InfoState, viewer: EntityId) -> bool;
}

/// Accrues outside the viewer's reset set.
#[derive(Debug, Clone, Copy, Default)]
pub struct Baoii;

impl PenaltyRule for Baoii {
    fn name(&self) -> &'static str {
        "baoii"
    }

    fn active_at_start(&self, state: InfoState, viewer: EntityId) -> bool {
        !is_reset_state(state, viewer)
    }

    fn after(&self, _: bool, _: InfoState, _: Event, to: InfoState, viewer: EntityId) -> bool {
        !is_reset_state(to, viewer)
    }
}

/// Built-in AoII readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AoiiRule {
    /// Any drift starts the penalty; any measurement by the viewer resets it.
    OwnMeasurementResets,
    /// Accrues exactly while the viewer's self-estimate is wrong.
    SelfKnowledgeCorrect,
}

impl AoiiRule {
    pub const ALL: [AoiiRule; 2] = [AoiiRule::OwnMeasurementResets, AoiiRule::SelfKnowledgeCorrect];
}

impl fmt::Display for AoiiRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AoiiRule {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "own-measurement" | "own-measurement-resets" => Ok(AoiiRule::OwnMeasurementResets),
            "self-knowledge" | "self-knowledge-correct" => Ok(AoiiRule::SelfKnowledgeCorrect),
            other => Err(TraceError::UnknownRule(other.to_string())),
        }
    }
}

fn self_wrong(state: InfoState, viewer: EntityId) -> bool {
    state.bits().0[viewer.self_bit()]
}

impl PenaltyRule for AoiiRule {
    fn name(&self) -> &'static str {
        match self {
            AoiiRule::OwnMeasurementResets => "own-measurement-resets",
            AoiiRule::SelfKnowledgeCorrect => "self-knowledge-correct",
        }
    }

    fn active_at_start(&self, state: InfoState, viewer: EntityId) -> bool {
        match self {
            AoiiRule::OwnMeasurementResets => state != InfoState::O,
            AoiiRule::SelfKnowledgeCorrect => self_wrong(state, viewer),
        }
    }

    fn after(&self, active: bool, _: InfoState, event: Event, to: InfoState, viewer: EntityId) -> bool {
        match self {
            AoiiRule::OwnMeasurementResets => match event.kind {
                EventKind::Drift => true,
                _ if event.actor == viewer => false,
                _ => active,
            },
            AoiiRule::SelfKnowledgeCorrect => self_wrong(to, viewer),
        }
    }
}

/// A curve point; `state` holds on the segment that starts here. A reset
/// shows up as two points with the same time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub time: f64,
    pub value: f64,
    pub state: InfoState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyCurve {
    pub rule: String,
    pub points: Vec<Breakpoint>,
}

impl PenaltyCurve {
    pub fn start(&self) -> f64 {
        self.points[0].time
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1].time
    }

    /// Right-continuous value, i.e. after any reset at `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t < self.start() || t > self.end() {
            return None;
        }
        let i = self.points.iter().rposition(|p| p.time <= t)?;
        let p = self.points[i];
        match self.points.get(i + 1) {
            Some(q) if q.time > p.time => {
                Some(p.value + (q.value - p.value) * (t - p.time) / (q.time - p.time))
            }
            _ => Some(p.value),
        }
    }

    /// Left limit at `t`, i.e. the value just before any reset at `t`.
    pub fn value_before(&self, t: f64) -> Option<f64> {
        if t <= self.start() || t > self.end() {
            return self.value_at(t);
        }
        let i = self.points.iter().position(|p| p.time >= t)?;
        let (p, q) = (self.points[i - 1], self.points[i]);
        if q.time == t {
            return Some(q.value);
        }
        Some(p.value + (q.value - p.value) * (t - p.time) / (q.time - p.time))
    }

    /// Times at which the curve drops, with the value just before the drop.
    pub fn resets(&self) -> Vec<(f64, f64)> {
        self.points
            .windows(2)
            .filter(|w| w[0].time == w[1].time && w[1].value < w[0].value)
            .map(|w| (w[0].time, w[0].value))
            .collect()
    }

    /// Exact integral over `[from, to]`.
    pub fn area(&self, from: f64, to: f64) -> Result<f64, TraceError> {
        let (start, end) = (self.start(), self.end());
        if !(from <= to && from >= start && to <= end) {
            return Err(TraceError::OutOfDomain { from, to, start, end });
        }
        let mut total = 0.0;
        for w in self.points.windows(2) {
            let (p, q) = (w[0], w[1]);
            let a = p.time.max(from);
            let b = q.time.min(to);
            if b <= a {
                continue;
            }
            let slope = (q.value - p.value) / (q.time - p.time);
            let va = p.value + slope * (a - p.time);
            let vb = p.value + slope * (b - p.time);
            total += (va + vb) / 2.0 * (b - a);
        }
        Ok(total)
    }

    /// `time,value,state` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["time", "value", "state"]).expect("in-memory write");
        for p in &self.points {
            w.write_record([p.time.to_string(), p.value.to_string(), p.state.name().to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSegment {
    pub start: f64,
    pub end: f64,
    pub state: InfoState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub viewer: EntityId,
    pub segments: Vec<StateSegment>,
    pub baoii: PenaltyCurve,
    pub aoii: PenaltyCurve,
}

impl TraceResult {
    /// Visited states, one entry per segment.
    pub fn state_sequence(&self) -> Vec<InfoState> {
        self.segments.iter().map(|s| s.state).collect()
    }

    /// `start,end,state` rows.
    pub fn states_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["start", "end", "state"]).expect("in-memory write");
        for s in &self.segments {
            w.write_record([s.start.to_string(), s.end.to_string(), s.state.name().to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// One penalty curve for `viewer` under `rule`.
pub fn penalty_curve(tl: &Timeline, viewer: EntityId, rule: &dyn PenaltyRule) -> PenaltyCurve {
    let mut state = tl.start_state;
    let mut since = rule
        .active_at_start(state, viewer)
        .then_some(tl.start_time);
    let mut points = vec![Breakpoint {
        time: tl.start_time,
        value: 0.0,
        state,
    }];
    let value = |since: Option<f64>, t: f64| since.map_or(0.0, |s| t - s);

    for e in &tl.events {
        let next = apply_event(state, e.event);
        let before = value(since, e.time);
        let active = rule.after(since.is_some(), state, e.event, next, viewer);
        since = match (since, active) {
            (Some(s), true) => Some(s),
            (None, true) => Some(e.time),
            (_, false) => None,
        };
        let after = value(since, e.time);
        let last = points[points.len() - 1];
        if before != after {
            if last.time < e.time {
                points.push(Breakpoint {
                    time: e.time,
                    value: before,
                    state,
                });
            }
            points.push(Breakpoint {
                time: e.time,
                value: after,
                state: next,
            });
        } else if last.time < e.time {
            points.push(Breakpoint {
                time: e.time,
                value: after,
                state: next,
            });
        } else {
            points.last_mut().expect("non-empty").state = next;
        }
        state = next;
    }
    let end = tl.end_time();
    if end > points[points.len() - 1].time {
        points.push(Breakpoint {
            time: end,
            value: value(since, end),
            state,
        });
    }
    PenaltyCurve {
        rule: rule.name().to_string(),
        points,
    }
}

/// State sequence, BAoII and AoII of `viewer` along `tl`.
pub fn evaluate(tl: &Timeline, viewer: EntityId, aoii_rule: &dyn PenaltyRule) -> TraceResult {
    let mut segments = Vec::new();
    let mut state = tl.start_state;
    let mut t0 = tl.start_time;
    for e in &tl.events {
        let next = apply_event(state, e.event);
        if next != state {
            if e.time > t0 {
                segments.push(StateSegment {
                    start: t0,
                    end: e.time,
                    state,
                });
            }
            state = next;
            t0 = e.time;
        }
    }
    segments.push(StateSegment {
        start: t0,
        end: tl.end_time().max(t0),
        state,
    });
    TraceResult {
        viewer,
        segments,
        baoii: penalty_curve(tl, viewer, &Baoii),
        aoii: penalty_curve(tl, viewer, aoii_rule),
    }
}
