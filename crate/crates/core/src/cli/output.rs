//! CSV tables. Column names and order are fixed; floats use the shortest
//! representation that round-trips.

use std::path::Path;

use super::simulate::{ResultRow, StabilityRow, SummaryRow, TimingRow};
use super::CliError;
use crate::metrics::StabilitySummary;

pub const RESULTS_HEADER: [&str; 8] = ["scenario", "method", "rep", "fdp", "power", "n_selected", "data_seed", "run_seed"];

const STATS_HEADER: [&str; 7] = [
    "mean_fdp",
    "var_fdp",
    "mean_power",
    "var_power",
    "mean_n_selected",
    "var_n_selected",
    "mean_pairwise_jaccard",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "scenario",
    "method",
    "reps",
    STATS_HEADER[0],
    STATS_HEADER[1],
    STATS_HEADER[2],
    STATS_HEADER[3],
    STATS_HEADER[4],
    STATS_HEADER[5],
    STATS_HEADER[6],
];

pub const STABILITY_HEADER: [&str; 11] = [
    "scenario",
    "method",
    "m",
    "ensembles",
    STATS_HEADER[0],
    STATS_HEADER[1],
    STATS_HEADER[2],
    STATS_HEADER[3],
    STATS_HEADER[4],
    STATS_HEADER[5],
    STATS_HEADER[6],
];

pub const TIMINGS_HEADER: [&str; 4] = ["scenario", "method", "rep", "wall_ms"];

fn stats(s: &StabilitySummary) -> [String; 7] {
    [
        s.mean_fdp,
        s.var_fdp,
        s.mean_power,
        s.var_power,
        s.mean_n_selected,
        s.var_n_selected,
        s.mean_pairwise_jaccard,
    ]
    .map(|v| v.to_string())
}

fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let io = |e: csv::Error| CliError::io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    write_table(
        path,
        &RESULTS_HEADER,
        rows.iter().map(|r| {
            [
                r.scenario.clone(),
                r.method.clone(),
                r.rep.to_string(),
                r.fdp.to_string(),
                r.power.to_string(),
                r.n_selected.to_string(),
                r.data_seed.to_string(),
                r.run_seed.to_string(),
            ]
        }),
    )
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    write_table(
        path,
        &SUMMARY_HEADER,
        rows.iter().map(|r| {
            let mut v = vec![r.scenario.clone(), r.method.clone(), r.reps.to_string()];
            v.extend(stats(&r.summary));
            v
        }),
    )
}

pub fn write_stability(path: &Path, rows: &[StabilityRow]) -> Result<(), CliError> {
    write_table(
        path,
        &STABILITY_HEADER,
        rows.iter().map(|r| {
            let mut v = vec![r.scenario.clone(), r.method.clone(), r.m.to_string(), r.ensembles.to_string()];
            v.extend(stats(&r.summary));
            v
        }),
    )
}

pub fn write_timings(path: &Path, rows: &[TimingRow]) -> Result<(), CliError> {
    write_table(
        path,
        &TIMINGS_HEADER,
        rows.iter().map(|r| [r.scenario.clone(), r.method.clone(), r.rep.to_string(), format!("{:.3}", r.wall_ms)]),
    )
}
