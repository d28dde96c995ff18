//! Replicated simulation studies and the fixed-dataset stability study.

use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use super::config::ExperimentRequest;
use super::method::{BaseKind, MethodSpec};
use super::{output, plot, CliError};
use crate::exec::Execution;
use crate::metrics::{selection_metrics, summarize, SelectionMetrics, StabilitySummary};
use crate::numerics::mix_seed;
use crate::procedures::{BaseProcedure, SelectionSet};
use crate::simulation::Simulator;
use crate::stabilizer::{run_ensemble, Ensemble};

/// Label of the per-replication ensemble seeds.
const RUN_TAG: u64 = 0x7275_6e73;
/// Label of the stability-study ensemble seeds.
const STAB_TAG: u64 = 0x7374_6162;

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub rep: usize,
    pub fdp: f64,
    pub power: f64,
    pub n_selected: usize,
    pub data_seed: u64,
    /// Ensemble seed; run `m` drew from `RngStream::new(run_seed, m)`.
    pub run_seed: u64,
}

/// Wall-clock time of one `(scenario, method, rep)`: the shared ensemble plus the method's own aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub scenario: String,
    pub method: String,
    pub rep: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: String,
    pub reps: usize,
    pub summary: StabilitySummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub results: Vec<ResultRow>,
    pub summaries: Vec<SummaryRow>,
    pub timings: Vec<TimingRow>,
    /// Selections in the same order as `results`.
    pub selections: Vec<SelectionSet>,
}

/// One row of `stability.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub scenario: String,
    pub method: String,
    pub m: usize,
    pub ensembles: usize,
    pub summary: StabilitySummary,
}

/// Distinct bases in first-appearance order with the number of runs each needs.
fn bases_needed(methods: &[MethodSpec], m: usize) -> Vec<(BaseKind, usize)> {
    let mut out: Vec<(BaseKind, usize)> = Vec::new();
    for spec in methods {
        let need = spec.runs_needed(m);
        match out.iter_mut().find(|(b, _)| *b == spec.base) {
            Some(entry) => entry.1 = entry.1.max(need),
            None => out.push((spec.base, need)),
        }
    }
    out
}

fn procedures(sim: &Simulator, methods: &[MethodSpec]) -> Result<BTreeMap<BaseKind, BaseProcedure>, CliError> {
    let mut out = BTreeMap::new();
    for spec in methods {
        if let std::collections::btree_map::Entry::Vacant(slot) = out.entry(spec.base) {
            slot.insert(spec.base.procedure(sim.sigma()).map_err(|source| CliError::Numerical {
                scenario: sim.config().name.clone(),
                rep: 0,
                method: spec.to_string(),
                source,
            })?);
        }
    }
    Ok(out)
}

fn first_method(methods: &[MethodSpec], base: BaseKind) -> String {
    methods.iter().find(|m| m.base == base).map(ToString::to_string).unwrap_or_default()
}

struct RepOutput {
    rows: Vec<ResultRow>,
    timings: Vec<TimingRow>,
    selections: Vec<SelectionSet>,
}

fn simulate_rep(
    sim: &Simulator,
    procs: &BTreeMap<BaseKind, BaseProcedure>,
    methods: &[MethodSpec],
    rep: usize,
    exec: Execution,
) -> Result<RepOutput, CliError> {
    let c = sim.config();
    let data = sim.dataset(rep);
    let mut ensembles: BTreeMap<BaseKind, (Ensemble, u64, f64)> = BTreeMap::new();
    for (base, runs) in bases_needed(methods, c.m) {
        let seed = mix_seed(c.master_seed, &[RUN_TAG, rep as u64, base.index()]);
        let start = Instant::now();
        let ens = run_ensemble(&procs[&base], &data.x, &data.y, c.q, runs, seed, exec).map_err(|source| {
            CliError::Numerical { scenario: c.name.clone(), rep, method: first_method(methods, base), source }
        })?;
        ensembles.insert(base, (ens, seed, start.elapsed().as_secs_f64() * 1e3));
    }
    let mut out = RepOutput { rows: Vec::new(), timings: Vec::new(), selections: Vec::new() };
    for spec in methods {
        let (ens, seed, ens_ms) = &ensembles[&spec.base];
        let start = Instant::now();
        let sel = spec.apply(ens).map_err(|source| CliError::Numerical {
            scenario: c.name.clone(),
            rep,
            method: spec.to_string(),
            source,
        })?;
        let wall_ms = ens_ms + start.elapsed().as_secs_f64() * 1e3;
        let m = selection_metrics(&sel.selected, &data.true_support);
        out.rows.push(ResultRow {
            scenario: c.name.clone(),
            method: spec.to_string(),
            rep,
            fdp: m.fdp,
            power: m.power,
            n_selected: m.n_selected,
            data_seed: data.seed,
            run_seed: *seed,
        });
        out.timings.push(TimingRow { scenario: c.name.clone(), method: spec.to_string(), rep, wall_ms });
        out.selections.push(sel.selected);
    }
    Ok(out)
}

fn summarize_rows(
    scenario: &str,
    methods: &[MethodSpec],
    rows: &[ResultRow],
    sets: &[SelectionSet],
) -> Result<Vec<SummaryRow>, CliError> {
    let mut out = Vec::with_capacity(methods.len());
    for spec in methods {
        let name = spec.to_string();
        let (records, chosen): (Vec<SelectionMetrics>, Vec<SelectionSet>) = rows
            .iter()
            .zip(sets)
            .filter(|(r, _)| r.scenario == scenario && r.method == name)
            .map(|(r, s)| (SelectionMetrics { fdp: r.fdp, power: r.power, n_selected: r.n_selected }, s.clone()))
            .unzip();
        let summary = summarize(&records, &chosen).map_err(|source| CliError::Numerical {
            scenario: scenario.into(),
            rep: 0,
            method: name.clone(),
            source,
        })?;
        out.push(SummaryRow { scenario: scenario.into(), method: name, reps: records.len(), summary });
    }
    Ok(out)
}

/// Runs every configured scenario and method; rows come out ordered by scenario, rep, method.
pub fn run_simulation(req: &ExperimentRequest, exec: Execution) -> Result<SimulationOutput, CliError> {
    let mut all = SimulationOutput { results: Vec::new(), summaries: Vec::new(), timings: Vec::new(), selections: Vec::new() };
    for c in &req.scenarios {
        let sim = Simulator::new(c)
            .map_err(|source| CliError::Numerical { scenario: c.name.clone(), rep: 0, method: String::new(), source })?;
        let procs = procedures(&sim, &req.methods)?;
        let reps = exec.try_map(c.reps, |rep| simulate_rep(&sim, &procs, &req.methods, rep, exec))?;
        let start = all.results.len();
        for r in reps {
            all.results.extend(r.rows);
            all.timings.extend(r.timings);
            all.selections.extend(r.selections);
        }
        all.summaries.extend(summarize_rows(&c.name, &req.methods, &all.results[start..], &all.selections[start..])?);
    }
    Ok(all)
}

/// Runs the simulation and writes `results.csv`, `summary.csv` and `timings.csv`
/// (plus `fdr.svg` and `power.svg` when `plot` is set) into the output directory.
pub fn cmd_simulate(req: &ExperimentRequest, plot: bool, exec: Execution) -> Result<SimulationOutput, CliError> {
    let out = run_simulation(req, exec)?;
    let dir = &req.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    output::write_results(&dir.join("results.csv"), &out.results)?;
    output::write_summary(&dir.join("summary.csv"), &out.summaries)?;
    output::write_timings(&dir.join("timings.csv"), &out.timings)?;
    if plot {
        let rho: BTreeMap<&str, f64> = req.scenarios.iter().map(|c| (c.name.as_str(), c.covariance.rho())).collect();
        let points = |f: fn(&StabilitySummary) -> (f64, f64)| -> Vec<plot::Series> {
            req.methods
                .iter()
                .map(|spec| {
                    let name = spec.to_string();
                    let mut pts: Vec<(f64, f64, f64)> = out
                        .summaries
                        .iter()
                        .filter(|s| s.method == name)
                        .map(|s| {
                            let (mean, var) = f(&s.summary);
                            (rho[s.scenario.as_str()], mean, var.sqrt())
                        })
                        .collect();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    plot::Series { name, points: pts }
                })
                .collect()
        };
        let fdr = plot::line_chart("Empirical FDR", "rho", "FDP", &points(|s| (s.mean_fdp, s.var_fdp)));
        let power = plot::line_chart("Power", "rho", "power", &points(|s| (s.mean_power, s.var_power)));
        for (file, body) in [("fdr.svg", fdr), ("power.svg", power)] {
            fs::write(dir.join(file), body).map_err(|e| CliError::io(dir.join(file), e))?;
        }
    }
    Ok(out)
}

/// For every scenario, draws replication 0 once and, for each `M` in the sweep,
/// applies each method to `ensembles_per_m` independent ensembles on that dataset.
///
/// Ensemble `e` of a base is one run sequence; the size-`M` ensemble is its first
/// `M` runs, so ensembles are independent within each `M` and nested across `M`.
pub fn run_stability(req: &ExperimentRequest, exec: Execution) -> Result<Vec<StabilityRow>, CliError> {
    if req.m_sweep.is_empty() {
        return Err(CliError::Config { line: 0, field: "m_sweep".into(), message: "empty M sweep".into() });
    }
    let max_m = *req.m_sweep.iter().max().expect("non-empty sweep");
    let mut rows = Vec::new();
    for c in &req.scenarios {
        let sim = Simulator::new(c)
            .map_err(|source| CliError::Numerical { scenario: c.name.clone(), rep: 0, method: String::new(), source })?;
        let procs = procedures(&sim, &req.methods)?;
        let data = sim.dataset(0);
        let mut ensembles: BTreeMap<BaseKind, Vec<Ensemble>> = BTreeMap::new();
        for (base, runs) in bases_needed(&req.methods, max_m) {
            let list = exec.try_map(req.ensembles_per_m, |e| {
                let seed = mix_seed(c.master_seed, &[STAB_TAG, e as u64, base.index()]);
                run_ensemble(&procs[&base], &data.x, &data.y, c.q, runs, seed, exec).map_err(|source| {
                    CliError::Numerical { scenario: c.name.clone(), rep: e, method: first_method(&req.methods, base), source }
                })
            })?;
            ensembles.insert(base, list);
        }
        for spec in &req.methods {
            for &m in &req.m_sweep {
                let mut records = Vec::with_capacity(req.ensembles_per_m);
                let mut sets = Vec::with_capacity(req.ensembles_per_m);
                for (e, full) in ensembles[&spec.base].iter().enumerate() {
                    let numerical = |source| CliError::Numerical {
                        scenario: c.name.clone(),
                        rep: e,
                        method: spec.to_string(),
                        source,
                    };
                    let ens = full.prefix(spec.runs_needed(m)).map_err(numerical)?;
                    let sel = spec.apply(&ens).map_err(numerical)?;
                    records.push(selection_metrics(&sel.selected, &data.true_support));
                    sets.push(sel.selected);
                }
                let summary = summarize(&records, &sets).map_err(|source| CliError::Numerical {
                    scenario: c.name.clone(),
                    rep: 0,
                    method: spec.to_string(),
                    source,
                })?;
                rows.push(StabilityRow {
                    scenario: c.name.clone(),
                    method: spec.to_string(),
                    m,
                    ensembles: req.ensembles_per_m,
                    summary,
                });
            }
        }
    }
    Ok(rows)
}

/// Runs the stability study and writes `stability.csv` (plus SVG charts when `plot` is set).
pub fn cmd_stability(req: &ExperimentRequest, plot: bool, exec: Execution) -> Result<Vec<StabilityRow>, CliError> {
    let rows = run_stability(req, exec)?;
    let dir = &req.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    output::write_stability(&dir.join("stability.csv"), &rows)?;
    if plot {
        let series = |f: fn(&StabilitySummary) -> (f64, f64)| -> Vec<plot::Series> {
            let mut keys: Vec<(String, String)> = Vec::new();
            for r in &rows {
                let k = (r.scenario.clone(), r.method.clone());
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            keys.into_iter()
                .map(|(scenario, method)| {
                    let points = rows
                        .iter()
                        .filter(|r| r.scenario == scenario && r.method == method)
                        .map(|r| {
                            let (mean, sd) = f(&r.summary);
                            (r.m as f64, mean, sd)
                        })
                        .collect();
                    plot::Series { name: format!("{scenario} {method}"), points }
                })
                .collect()
        };
        let jac = plot::line_chart("Pairwise Jaccard", "M", "Jaccard", &series(|s| (s.mean_pairwise_jaccard, 0.0)));
        let size = plot::line_chart(
            "Selection size",
            "M",
            "selected",
            &series(|s| (s.mean_n_selected, s.var_n_selected.sqrt())),
        );
        for (file, body) in [("stability_jaccard.svg", jac), ("stability_size.svg", size)] {
            fs::write(dir.join(file), body).map_err(|e| CliError::io(dir.join(file), e))?;
        }
    }
    Ok(rows)
}

