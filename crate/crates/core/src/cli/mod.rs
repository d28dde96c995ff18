//! Experiment runner and data selection behind the `fdrstab` binary.
//!
//! [`cmd_simulate`] and [`cmd_stability`] run configured simulation studies and
//! write CSV tables; [`cmd_select`] applies one method to a design read from CSV.

mod config;
mod method;
mod output;
mod plot;
mod select;
mod simulate;

use std::path::PathBuf;

pub use config::{parse_config, ExperimentRequest, Threads, DEFAULT_M, DEFAULT_Q, DEFAULT_REPS};
pub use method::{Aggregator, BaseKind, MethodSelection, MethodSpec};
pub use output::{
    write_results, write_stability, write_summary, write_timings, RESULTS_HEADER, STABILITY_HEADER, SUMMARY_HEADER,
    TIMINGS_HEADER,
};
pub use plot::{line_chart, Series};
pub use select::{
    cmd_select, read_design_csv, read_response_csv, write_design_csv, write_response_csv, SelectRequest,
    SelectionReport, SynthSpec,
};
pub use simulate::{
    cmd_simulate, cmd_stability, run_simulation, run_stability, ResultRow, SimulationOutput, StabilityRow, SummaryRow,
    TimingRow,
};

use crate::exec::{with_threads, Execution};

/// Failures of the command layer, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config line {line}, field '{field}': {message}")]
    Config { line: usize, field: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{file}: row {row}, column {column}: {message}")]
    MalformedCsv { file: PathBuf, row: usize, column: usize, message: String },

    #[error("numerical failure in scenario '{scenario}', rep {rep}, method {method}: {source}")]
    Numerical {
        scenario: String,
        rep: usize,
        method: String,
        #[source]
        source: crate::Error,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } | CliError::Usage(_) | CliError::MalformedCsv { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Dimension(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.into(), message: err.to_string() }
    }
}

/// Thread count from, in order of precedence, a command-line flag, the
/// `FDRSTAB_THREADS` environment value and the configuration.
pub fn resolve_threads(flag: Option<&str>, env: Option<&str>, config: Threads) -> Result<Threads, CliError> {
    match flag.or(env) {
        Some(t) => Threads::parse(t).map_err(CliError::Usage),
        None => Ok(config),
    }
}

/// Runs `f` on a pool of the requested size.
pub fn with_pool<R: Send>(threads: Threads, f: impl FnOnce(Execution) -> R + Send) -> R {
    match threads {
        Threads::Count(1) => f(Execution::Sequential),
        t => with_threads(t.pool_size(), || f(Execution::Parallel)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_precedence() {
        let cfg = Threads::Count(3);
        assert_eq!(resolve_threads(Some("2"), Some("5"), cfg).unwrap(), Threads::Count(2));
        assert_eq!(resolve_threads(None, Some("auto"), cfg).unwrap(), Threads::Auto);
        assert_eq!(resolve_threads(None, None, cfg).unwrap(), cfg);
        assert_eq!(resolve_threads(Some("0"), None, cfg).unwrap_err().exit_code(), 2);
    }
}
