use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use baoii::experiments::{
    cmd_simulate, cmd_sweep, cmd_trace, cmd_validate, resolve_out_dir, ExperimentError, Figure,
    Scenario, TraceOptions,
};
use baoii::trace::AoiiRule;
use baoii::{EntityId, InfoState};

#[derive(Parser)]
#[command(name = "baoii", version, about = "Bidirectional age of incorrect information: validation, sweeps, simulation and traces")]
struct Cli {
    /// Output directory (default: scenario `output`, then $BAOII_OUT_DIR, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one scenario key, e.g. `--set d=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-check closed forms, numeric engine and simulation.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cycles: Option<u64>,
    },
    /// Regenerate the data behind a figure (fig4..fig8) or a custom sweep.
    Sweep {
        #[arg(long)]
        figure: Figure,
        /// Override the number of grid points on the main axis.
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run the Monte-Carlo simulator.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, conflicts_with = "horizon")]
        cycles: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Also write the full event log.
        #[arg(long)]
        events: bool,
    },
    /// Evaluate BAoII and AoII along a deterministic event timeline.
    Trace {
        /// CSV with `time,event,actor` rows; defaults to the bundled Fig. 3 timeline.
        #[arg(long)]
        timeline: Option<PathBuf>,
        #[arg(long, default_value = "1")]
        viewer: EntityId,
        /// AoII reset rule: `own-measurement` or `self-knowledge`.
        #[arg(long, default_value = "own-measurement")]
        aoii: AoiiRule,
        #[arg(long, default_value = "O")]
        start: InfoState,
        #[arg(long)]
        end: Option<f64>,
    },
}

fn load(args: &ScenarioArgs) -> Result<Scenario, ExperimentError> {
    Scenario::load_unchecked(args.config.as_deref(), &args.set)
}

fn out_dir(cli: &Option<PathBuf>, scenario: Option<&Scenario>) -> PathBuf {
    match (cli, scenario.and_then(|s| s.output.as_deref())) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => dir.to_path_buf(),
        (None, None) => resolve_out_dir(None),
    }
}

fn report_paths(paths: &[&Path]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<i32, ExperimentError> {
    match cli.command {
        Command::Validate {
            scenario,
            seed,
            cycles,
        } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(n) = cycles {
                s.cycles = Some(n);
                s.horizon = None;
            }
            s.validate()?;
            let out = cmd_validate(&s, &out_dir(&cli.out, Some(&s)))?;
            print!("{}", out.summary);
            report_paths(&[&out.report_path, &out.discrepancy_path, &out.summary_path]);
            Ok(out.exit_code())
        }
        Command::Sweep {
            figure,
            points,
            scenario,
        } => {
            let s = load(&scenario)?;
            s.validate()?;
            let out = cmd_sweep(&s, figure, points, &out_dir(&cli.out, Some(&s)))?;
            println!(
                "{}: {} rows x {} columns ({})",
                figure,
                out.table.rows.len(),
                out.table.header.len(),
                out.table.header.join(",")
            );
            report_paths(&[&out.path]);
            Ok(0)
        }
        Command::Simulate {
            scenario,
            seed,
            cycles,
            horizon,
            events,
        } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(n) = cycles {
                s.cycles = Some(n);
                s.horizon = None;
            }
            if let Some(h) = horizon {
                s.horizon = Some(h);
                s.cycles = None;
            }
            s.events |= events;
            s.validate()?;
            let out = cmd_simulate(&s, &out_dir(&cli.out, Some(&s)))?;
            print!("{}", out.summary);
            let paths: Vec<&Path> = out.paths.iter().map(PathBuf::as_path).collect();
            report_paths(&paths);
            Ok(0)
        }
        Command::Trace {
            timeline,
            viewer,
            aoii,
            start,
            end,
        } => {
            let opts = TraceOptions {
                timeline,
                viewer,
                rule: aoii,
                start,
                end,
            };
            let out = cmd_trace(&opts, &out_dir(&cli.out, None))?;
            print!("{}", out.summary);
            let paths: Vec<&Path> = out.paths.iter().map(PathBuf::as_path).collect();
            report_paths(&paths);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
