//! Validation reports, figure sweeps, simulation runs and trace evaluation
//! behind the `baoii` command line.
//!
//! Every command writes its files atomically into an output directory and
//! returns a short human-readable summary. Identical inputs give
//! byte-identical files.

mod commands;
mod scenario;
mod sweep;
mod validate;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::{cmd_simulate, cmd_trace, SimulateOutput, TraceOptions, TraceOutput};
pub use scenario::{Preset, Scenario, Spacing, SweepAxis, DEFAULT_CYCLES};
pub use sweep::{cmd_sweep, quantity_names, sweep_rows, Figure, SweepOutput, SweepTable};
pub use validate::{
    cmd_validate, tau_discrepancies, CheckRow, DiscrepancyRow, Status, ValidationOutput,
    ValidationReport, TAU_GRID_D, TAU_GRID_M, TAU_GRID_P, TAU_TOL,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BAOII_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// 2 for bad input, 3 for numeric or output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Input(_) => 2,
            ExperimentError::Numeric(_) | ExperimentError::Io { .. } => 3,
        }
    }
}

pub fn input<E: std::fmt::Display>(e: E) -> ExperimentError {
    ExperimentError::Input(e.to_string())
}

pub fn numeric<E: std::fmt::Display>(e: E) -> ExperimentError {
    ExperimentError::Numeric(e.to_string())
}

/// Explicit directory, else `$BAOII_OUT_DIR`, else `./out`.
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(dir))?;
    tmp.write_all(contents.as_bytes()).map_err(io(&target))?;
    tmp.as_file().sync_all().map_err(io(&target))?;
    tmp.persist(&target).map_err(|e| ExperimentError::Io {
        path: target.clone(),
        source: e.error,
    })?;
    Ok(target)
}

/// `inf`, `-inf` and `nan` spelled the same way everywhere.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        v.to_string()
    }
}

pub(crate) fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
