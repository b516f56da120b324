//! Simulation and trace commands.

use std::fs::File;
use std::path::{Path, PathBuf};

use super::{fmt_f64, input, numeric, write_atomic, ExperimentError, Scenario};
use crate::ctmc;
use crate::simulator::{self, SimError, SimReport};
use crate::state::{EntityId, InfoState};
use crate::trace::{self, AoiiRule, Timeline, TraceResult};

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub report: SimReport,
    pub paths: Vec<PathBuf>,
    pub summary: String,
}

fn sim_error(e: SimError) -> ExperimentError {
    match e {
        SimError::Ctmc(_) => numeric(e),
        _ => input(e),
    }
}

/// Run the scenario's simulation and write `sim_report.json`,
/// `sim_report.csv` and, when `events = true`, `sim_events.csv`.
pub fn cmd_simulate(scenario: &Scenario, out_dir: &Path) -> Result<SimulateOutput, ExperimentError> {
    let config = scenario.sim_config()?;
    let report = simulator::run(&config).map_err(sim_error)?;

    let mut paths = vec![
        write_atomic(out_dir, "sim_report.json", &report.to_json())?,
        write_atomic(out_dir, "sim_report.csv", &report.to_csv())?,
    ];
    if config.record_events {
        paths.push(write_atomic(out_dir, "sim_events.csv", &report.events_csv())?);
    }

    let p = &config.params;
    let mut summary = format!(
        "simulated d={} m1={} m2={} p={} viewer={} seed={}\n",
        p.d,
        p.m1,
        p.m2,
        p.p,
        config.viewer.number(),
        config.seed
    );
    let e = &report.error_period;
    summary.push_str(&format!(
        "error periods: {}  mean {} +/- {} (95% CI [{}, {}])\n",
        report.cycles_completed,
        fmt_f64(e.mean),
        fmt_f64(e.std_err),
        fmt_f64(e.ci_low),
        fmt_f64(e.ci_high)
    ));
    if p.d > 0.0 && p.p > 0.0 {
        if let Ok(ep) = ctmc::expected_error_period(p, config.viewer) {
            summary.push_str(&format!("numeric mean error period: {}\n", fmt_f64(ep.mean)));
        }
    }
    summary.push_str(&format!(
        "BAoII: E[T]/2 = {}, time average = {}, ratio = {}\n",
        fmt_f64(report.baoii_per_cycle.mean),
        fmt_f64(report.baoii_time_average),
        fmt_f64(report.baoii_ratio)
    ));
    for w in &report.warnings {
        summary.push_str(&format!("warning: {w}\n"));
    }
    Ok(SimulateOutput {
        report,
        paths,
        summary,
    })
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// `None` replays the bundled Fig. 3 timeline.
    pub timeline: Option<PathBuf>,
    pub viewer: EntityId,
    pub rule: AoiiRule,
    pub start: InfoState,
    pub end: Option<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            timeline: None,
            viewer: EntityId::One,
            rule: AoiiRule::OwnMeasurementResets,
            start: InfoState::O,
            end: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceOutput {
    pub result: TraceResult,
    pub paths: Vec<PathBuf>,
    pub summary: String,
}

/// Evaluate a timeline and write `trace_states.csv`, `trace_baoii.csv` and
/// `trace_aoii.csv`.
pub fn cmd_trace(opts: &TraceOptions, out_dir: &Path) -> Result<TraceOutput, ExperimentError> {
    let mut tl = match &opts.timeline {
        Some(path) => {
            let f = File::open(path)
                .map_err(|e| input(format!("cannot read timeline {}: {e}", path.display())))?;
            Timeline::from_csv(f, opts.start)
                .map_err(|e| input(format!("{}: {e}", path.display())))?
        }
        None => Timeline::from_csv(trace::FIG3_TIMELINE_CSV.as_bytes(), opts.start).map_err(input)?,
    };
    if let Some(end) = opts.end {
        tl = tl.with_end(end).map_err(input)?;
    }
    let result = trace::evaluate(&tl, opts.viewer, &opts.rule);
    let paths = vec![
        write_atomic(out_dir, "trace_states.csv", &result.states_csv())?,
        write_atomic(out_dir, "trace_baoii.csv", &result.baoii.to_csv())?,
        write_atomic(out_dir, "trace_aoii.csv", &result.aoii.to_csv())?,
    ];
    let states: Vec<&str> = result.segments.iter().map(|s| s.state.name()).collect();
    let resets: Vec<String> = result
        .baoii
        .resets()
        .iter()
        .map(|(t, v)| format!("({t}, {v})"))
        .collect();
    let summary = format!(
        "states: {}\nBAoII resets (time, value before): {}\nAoII rule: {}\n",
        states.join(","),
        if resets.is_empty() {
            "none".to_string()
        } else {
            resets.join(" ")
        },
        opts.rule
    );
    Ok(TraceOutput {
        result,
        paths,
        summary,
    })
}
