//! Selection on a user-supplied design read from CSV.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::method::{Aggregator, BaseKind, MethodSpec};
use super::CliError;
use crate::error::Error;
use crate::exec::Execution;
use crate::metrics::{selection_metrics, SelectionMetrics};
use crate::numerics::{mix_seed, DenseMatrix, RngStream};
use crate::procedures::{BaseProcedure, SelectionSet};
use crate::stabilizer::run_ensemble;

/// Label of the synthetic-response stream.
const SYNTH_TAG: u64 = 0x7379_6e74;
/// Weight of the identity in the shrunken correlation handed to the knockoff sampler.
const KNOCKOFF_SHRINK: f64 = 0.1;

/// Synthetic response `y = Xβ + ε`: `s` random nonzero coefficients drawn from
/// `N(0, (sd_num/√n)²)` and standard normal noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub s: usize,
    pub sd_num: f64,
}

impl FromStr for SynthSpec {
    type Err = String;

    /// Accepts `s=60 sd-num=50` (whitespace or comma separated, either order).
    fn from_str(text: &str) -> Result<Self, String> {
        let (mut s, mut sd) = (None, None);
        for tok in text.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected key=value, got '{tok}'"))?;
            match k {
                "s" => s = Some(v.parse::<usize>().map_err(|e| format!("s: {e}"))?),
                "sd-num" | "sd_num" => sd = Some(v.parse::<f64>().map_err(|e| format!("sd-num: {e}"))?),
                _ => return Err(format!("unknown synthetic-response key '{k}'")),
            }
        }
        let spec = SynthSpec { s: s.ok_or("missing s=")?, sd_num: sd.ok_or("missing sd-num=")? };
        if !(spec.sd_num > 0.0 && spec.sd_num.is_finite()) {
            return Err(format!("sd-num must be positive, got {}", spec.sd_num));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectRequest {
    pub x: PathBuf,
    /// Response file; mutually exclusive with `synthesize`.
    pub y: Option<PathBuf>,
    pub method: MethodSpec,
    pub q: f64,
    pub m: usize,
    pub seed: u64,
    pub synthesize: Option<SynthSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub method: MethodSpec,
    pub q: f64,
    pub m: usize,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    /// `s̄` (stabilizer) or `ŝ` (single run).
    pub size: Option<usize>,
    pub selection: SelectionSet,
    /// Selected feature names with their scores, in column order.
    pub features: Vec<(String, Option<f64>)>,
    /// Metrics against the synthetic truth, when the response was synthesized.
    pub truth: Option<(SelectionSet, SelectionMetrics)>,
}

impl SelectionReport {
    fn score_name(&self) -> &'static str {
        match self.method.agg {
            Aggregator::None => "statistic",
            Aggregator::Stab(_) => "stabilized_evalue",
            Aggregator::Derand => "mean_knockoff_evalue",
            Aggregator::Mds => "inclusion_rate",
            Aggregator::Mbh => "none",
        }
    }
}

impl fmt::Display for SelectionReport {
    /// A `key: value` header block, a blank line, then one selected feature per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method: {}", self.method)?;
        writeln!(f, "q: {}", self.q)?;
        writeln!(f, "M: {}", self.m)?;
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "n: {}", self.n)?;
        writeln!(f, "p: {}", self.p)?;
        match (self.method.agg, self.size) {
            (Aggregator::None, Some(s)) => writeln!(f, "s_hat: {s}")?,
            (_, Some(s)) => writeln!(f, "s_bar: {s}")?,
            _ => {}
        }
        writeln!(f, "n_selected: {}", self.selection.len())?;
        writeln!(f, "score: {}", self.score_name())?;
        if let Some((truth, m)) = &self.truth {
            writeln!(f, "true_support_size: {}", truth.len())?;
            writeln!(f, "fdp: {}", m.fdp)?;
            writeln!(f, "power: {}", m.power)?;
        }
        writeln!(f)?;
        for (name, score) in &self.features {
            match score {
                Some(v) => writeln!(f, "{name}\t{v}")?,
                None => writeln!(f, "{name}")?,
            }
        }
        Ok(())
    }
}

fn malformed(path: &Path, row: usize, column: usize, message: impl Into<String>) -> CliError {
    CliError::MalformedCsv { file: path.to_path_buf(), row, column, message: message.into() }
}

fn parse_cell(path: &Path, row: usize, column: usize, cell: &str) -> Result<f64, CliError> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(malformed(path, row, column, format!("non-finite value {v}"))),
        Err(_) => Err(malformed(path, row, column, format!("not a number: '{cell}'"))),
    }
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

/// Reads a numeric design with a header row of feature names. Rows and columns
/// in diagnostics are 1-based and count the header as row 1.
pub fn read_design_csv(path: &Path) -> Result<(Vec<String>, DenseMatrix), CliError> {
    let mut rdr = reader(path, true)?;
    let names: Vec<String> = rdr.headers().map_err(|e| malformed(path, 1, 1, e.to_string()))?.iter().map(String::from).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(malformed(path, 1, 1, "missing header row"));
    }
    let p = names.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| malformed(path, row, 1, e.to_string()))?;
        if rec.len() != p {
            return Err(malformed(path, row, rec.len().min(p) + 1, format!("expected {p} fields, found {}", rec.len())));
        }
        for (j, cell) in rec.iter().enumerate() {
            values.push(parse_cell(path, row, j + 1, cell)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(malformed(path, 2, 1, "no data rows"));
    }
    let x = DenseMatrix::from_vec(n, p, values).map_err(|e| malformed(path, 2, 1, e.to_string()))?;
    Ok((names, x))
}

/// Reads a single numeric column; a non-numeric first row is taken as a header.
pub fn read_response_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut rdr = reader(path, false)?;
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| malformed(path, row, 1, e.to_string()))?;
        if rec.len() != 1 {
            return Err(malformed(path, row, 2, format!("expected a single column, found {}", rec.len())));
        }
        let cell = &rec[0];
        if i == 0 && cell.parse::<f64>().is_err() {
            continue;
        }
        y.push(parse_cell(path, row, 1, cell)?);
    }
    if y.is_empty() {
        return Err(malformed(path, 1, 1, "no values"));
    }
    Ok(y)
}

pub fn write_design_csv(path: &Path, names: &[String], x: &DenseMatrix) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(names).map_err(io)?;
    for i in 0..x.rows() {
        w.write_record(x.row(i).iter().map(f64::to_string)).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_response_csv(path: &Path, y: &[f64]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["y"]).map_err(io)?;
    for v in y {
        w.write_record([v.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn synthesize(x: &DenseMatrix, spec: SynthSpec, seed: u64) -> Result<(Vec<f64>, SelectionSet), CliError> {
    let (n, p) = (x.rows(), x.cols());
    if spec.s > p {
        return Err(CliError::Usage(format!("synthetic support size {} exceeds p = {p}", spec.s)));
    }
    let mut rng = RngStream::new(mix_seed(seed, &[SYNTH_TAG]), 0);
    let support = rng.sample_indices(p, spec.s);
    let sd = spec.sd_num / (n as f64).sqrt();
    let mut beta = vec![0.0; p];
    for &j in &support {
        beta[j] = sd * rng.normal();
    }
    let mut y = x.matvec(&beta);
    for v in &mut y {
        *v += rng.normal();
    }
    Ok((y, SelectionSet::new(support, p)))
}

/// Centers and scales columns to unit variance and returns the shrunken
/// sample correlation used as the knockoff covariance.
fn knockoff_inputs(x: &DenseMatrix) -> crate::Result<(DenseMatrix, DenseMatrix)> {
    let (n, p) = (x.rows(), x.cols());
    let mut z = x.clone();
    for j in 0..p {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if !(var > 0.0) {
            return Err(Error::DegenerateInput(format!("column {j} has zero variance")));
        }
        let sd = var.sqrt();
        for i in 0..n {
            z.row_mut(i)[j] = (x[(i, j)] - mean) / sd;
        }
    }
    let mut sigma = z.gram();
    for i in 0..p {
        for j in 0..p {
            let r = sigma[(i, j)] / n as f64;
            sigma.row_mut(i)[j] = (1.0 - KNOCKOFF_SHRINK) * r + if i == j { KNOCKOFF_SHRINK } else { 0.0 };
        }
    }
    Ok((z, sigma))
}

/// Applies one method to `(X, y)`. Run `m` of the ensemble draws from
/// `RngStream::new(seed, m)`, exactly as [`run_ensemble`] does in process.
/// Knockoff runs use the standardized design and a shrunken sample correlation.
pub fn cmd_select(req: &SelectRequest, exec: Execution) -> Result<SelectionReport, CliError> {
    if !(req.q > 0.0 && req.q < 1.0) {
        return Err(CliError::Usage(format!("q must lie in (0, 1), got {}", req.q)));
    }
    if req.m == 0 {
        return Err(CliError::Usage("M must be at least 1".into()));
    }
    let (names, x) = read_design_csv(&req.x)?;
    let (y, truth) = match (&req.y, req.synthesize) {
        (Some(path), None) => (read_response_csv(path)?, None),
        (None, Some(spec)) => {
            let (y, t) = synthesize(&x, spec, req.seed)?;
            (y, Some(t))
        }
        (Some(_), Some(_)) => return Err(CliError::Usage("give either a response file or a synthetic response".into())),
        (None, None) => return Err(CliError::Usage("a response file or a synthetic response is required".into())),
    };
    if y.len() != x.rows() {
        return Err(CliError::Dimension(format!("{} responses for {} design rows", y.len(), x.rows())));
    }
    let numerical = |source| CliError::Numerical { scenario: "select".into(), rep: 0, method: req.method.to_string(), source };
    let (design, procedure) = match req.method.base {
        BaseKind::Knockoff => {
            let (z, sigma) = knockoff_inputs(&x).map_err(numerical)?;
            let proc = BaseProcedure::knockoff(&sigma).map_err(numerical)?;
            (z, proc)
        }
        BaseKind::SplitBh => (x, BaseProcedure::split_bh()),
        BaseKind::Ds => (x, BaseProcedure::data_splitting()),
    };
    let ens = run_ensemble(&procedure, &design, &y, req.q, req.method.runs_needed(req.m), req.seed, exec)
        .map_err(numerical)?;
    let sel = req.method.apply(&ens).map_err(numerical)?;
    let features = sel
        .selected
        .indices()
        .iter()
        .map(|&i| (names[i].clone(), sel.scores.as_ref().map(|s| s[i])))
        .collect();
    let truth = truth.map(|t| {
        let m = selection_metrics(&sel.selected, &t);
        (t, m)
    });
    Ok(SelectionReport {
        method: req.method,
        q: req.q,
        m: req.m,
        seed: req.seed,
        n: design.rows(),
        p: design.cols(),
        size: sel.size,
        selection: sel.selected,
        features,
        truth,
    })
}
