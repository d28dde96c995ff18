//! Ensembles of base runs, aggregation, stabilized e-values and competitor aggregators.
//!
//! The stabilizer runs a base procedure `M` times, aggregates the per-run
//! evidence into one score per feature, gives the top `s̄` features the
//! e-value `p/(q·s̄)` and finishes with e-BH. That final e-BH step always
//! returns exactly the top `s̄` aggregated features; [`stabilize`] verifies this.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::dist::quantile_sorted;
use crate::numerics::{mix_seed, DenseMatrix, RngStream};
use crate::procedures::multiple::ebh_threshold;
use crate::procedures::{bh_select, ebh_select, ranks_with_keys, BaseProcedure, BaseRunResult, SelectionSet};

/// Label mixed into the ensemble seed to derive the aggregation tie stream.
const AGG_TIE_TAG: u64 = 0x6167_6774;

/// `M` runs of one base procedure on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub runs: Vec<BaseRunResult>,
    pub p: usize,
    pub q: f64,
    /// `⌈mean ŝ_m⌉`.
    pub s_bar: usize,
    /// Seed of the ensemble; run `m` used `RngStream::new(seed, m)`.
    pub seed: u64,
}

impl Ensemble {
    pub fn from_runs(runs: Vec<BaseRunResult>, q: f64, seed: u64) -> Result<Self> {
        let first = runs.first().ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
        let p = first.p();
        if let Some(bad) = runs.iter().find(|r| r.p() != p) {
            return Err(Error::DimensionMismatch(format!("runs with p = {p} and p = {}", bad.p())));
        }
        let m = runs.len();
        let total: usize = runs.iter().map(|r| r.s_hat).sum();
        let s_bar = total.div_ceil(m);
        Ok(Ensemble { runs, p, q, s_bar, seed })
    }

    pub fn m(&self) -> usize {
        self.runs.len()
    }

    /// The ensemble of the first `m` runs.
    pub fn prefix(&self, m: usize) -> Result<Ensemble> {
        Ensemble::from_runs(self.runs[..m.min(self.runs.len())].to_vec(), self.q, self.seed)
    }
}

/// Runs `base` `m` times on `(x, y)`; run `i` draws from `RngStream::new(seed, i)`.
pub fn run_ensemble(
    base: &BaseProcedure,
    x: &DenseMatrix,
    y: &[f64],
    q: f64,
    m: usize,
    seed: u64,
    exec: Execution,
) -> Result<Ensemble> {
    if m == 0 {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1), got {q}")));
    }
    let runs = exec.try_map(m, |i| base.run(x, y, q, &mut RngStream::new(seed, i as u64)))?;
    Ensemble::from_runs(runs, q, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregationKind {
    /// Mean of `T_i^(m)`.
    Mean,
    /// Median of `T_i^(m)`.
    Median,
    /// Mean rank `π_m(i)`; smaller is better.
    RankMean,
    /// Fraction of runs selecting `i`.
    SelProb,
    /// Mean of the per-run relaxed e-values.
    EAvg,
}

impl AggregationKind {
    pub const ALL: [AggregationKind; 5] = [
        AggregationKind::Mean,
        AggregationKind::Median,
        AggregationKind::RankMean,
        AggregationKind::SelProb,
        AggregationKind::EAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregationKind::Mean => "mean",
            AggregationKind::Median => "median",
            AggregationKind::RankMean => "rank_mean",
            AggregationKind::SelProb => "sel_prob",
            AggregationKind::EAvg => "e_avg",
        }
    }

    fn index(self) -> u64 {
        AggregationKind::ALL.iter().position(|&k| k == self).unwrap() as u64
    }
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AggregationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown aggregation '{s}'")))
    }
}

/// Aggregated statistic `g_i` and its ranks `π̃` (1 = strongest evidence).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedScores {
    pub kind: AggregationKind,
    pub values: Vec<f64>,
    pub ranks: Vec<usize>,
    pub tie_seed: u64,
}

impl AggregatedScores {
    /// Features with `π̃(i) ≤ k`.
    pub fn top(&self, k: usize) -> SelectionSet {
        let p = self.values.len();
        SelectionSet::from_sorted((0..p).filter(|&i| self.ranks[i] <= k).collect(), p)
    }
}

/// Default tie seed of an ensemble's aggregation of a given kind.
pub fn aggregation_tie_seed(ensemble: &Ensemble, kind: AggregationKind) -> u64 {
    mix_seed(ensemble.seed, &[AGG_TIE_TAG, kind.index()])
}

pub fn aggregate(ensemble: &Ensemble, kind: AggregationKind) -> AggregatedScores {
    aggregate_with_seed(ensemble, kind, aggregation_tie_seed(ensemble, kind))
}

/// Aggregates with ties between equal `g_i` broken by keys from `RngStream::new(tie_seed, 0)`.
pub fn aggregate_with_seed(ensemble: &Ensemble, kind: AggregationKind, tie_seed: u64) -> AggregatedScores {
    let p = ensemble.p;
    let m = ensemble.m() as f64;
    let mean_of = |f: &dyn Fn(&BaseRunResult, usize) -> f64| -> Vec<f64> {
        let mut acc = vec![0.0; p];
        for run in &ensemble.runs {
            for (i, a) in acc.iter_mut().enumerate() {
                *a += f(run, i);
            }
        }
        acc.into_iter().map(|a| a / m).collect()
    };
    let values = match kind {
        AggregationKind::Mean => mean_of(&|r, i| r.stats[i]),
        AggregationKind::Median => {
            let mut col = vec![0.0; ensemble.m()];
            (0..p)
                .map(|i| {
                    for (c, r) in col.iter_mut().zip(&ensemble.runs) {
                        *c = r.stats[i];
                    }
                    col.sort_by(f64::total_cmp);
                    quantile_sorted(&col, 0.5)
                })
                .collect()
        }
        AggregationKind::RankMean => mean_of(&|r, i| r.ranks[i] as f64),
        AggregationKind::SelProb => mean_of(&|r, i| if r.ranks[i] <= r.s_hat { 1.0 } else { 0.0 }),
        AggregationKind::EAvg => mean_of(&|r, i| r.run_evalues[i]),
    };
    let mut tie_rng = RngStream::new(tie_seed, 0);
    let keys: Vec<u64> = (0..p).map(|_| rand::RngCore::next_u64(&mut tie_rng)).collect();
    let ranks = if kind == AggregationKind::RankMean {
        let flipped: Vec<f64> = values.iter().map(|v| -v).collect();
        ranks_with_keys(&flipped, &keys)
    } else {
        ranks_with_keys(&values, &keys)
    };
    AggregatedScores { kind, values, ranks, tie_seed }
}

/// `e_i = p / (q·(s̄ ∨ 1))` when `π̃(i) ≤ s̄`, else 0.
pub fn stab_evalues(scores: &AggregatedScores, s_bar: usize, q: f64) -> Vec<f64> {
    let p = scores.values.len();
    let value = ebh_threshold(p, q, s_bar.max(1));
    scores.ranks.iter().map(|&r| if r <= s_bar { value } else { 0.0 }).collect()
}

/// Everything produced by one stabilized selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Stabilized {
    pub scores: AggregatedScores,
    pub evalues: Vec<f64>,
    pub s_bar: usize,
    pub selected: SelectionSet,
}

/// Aggregates, builds stabilized e-values, applies e-BH and checks that the
/// result is the top-`s̄` set.
pub fn stabilize(ensemble: &Ensemble, kind: AggregationKind) -> Result<Stabilized> {
    let scores = aggregate(ensemble, kind);
    stabilize_scores(scores, ensemble.s_bar, ensemble.q)
}

pub fn stabilize_scores(scores: AggregatedScores, s_bar: usize, q: f64) -> Result<Stabilized> {
    let evalues = stab_evalues(&scores, s_bar, q);
    let selected = ebh_select(&evalues, q);
    let top = scores.top(s_bar);
    if selected != top {
        return Err(Error::LemmaViolation { s_bar, ebh: selected.len(), top: top.len() });
    }
    Ok(Stabilized { scores, evalues, s_bar, selected })
}

pub fn stabilizer_select(ensemble: &Ensemble, kind: AggregationKind) -> Result<SelectionSet> {
    Ok(stabilize(ensemble, kind)?.selected)
}

fn check_lengths(rows: &[Vec<f64>]) -> Result<usize> {
    let p = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch(format!("vectors of length {p} and {}", r.len())));
    }
    Ok(p)
}

/// e-BH on the run-averaged knockoff e-values.
pub fn derand_select(rb: &[Vec<f64>], q: f64) -> Result<SelectionSet> {
    let p = check_lengths(rb)?;
    if rb.is_empty() {
        return Err(Error::InvalidArgument("no e-value vectors".into()));
    }
    let m = rb.len() as f64;
    let mut avg = vec![0.0; p];
    for e in rb {
        for (a, v) in avg.iter_mut().zip(e) {
            *a += v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= m);
    Ok(ebh_select(&avg, q))
}

/// [`derand_select`] over the knockoff e-values carried by an ensemble.
pub fn derand_ensemble(ensemble: &Ensemble) -> Result<SelectionSet> {
    let rb: Vec<Vec<f64>> = ensemble
        .runs
        .iter()
        .map(|r| r.rb_evalues.clone().ok_or_else(|| Error::InvalidArgument("derand needs knockoff runs".into())))
        .collect::<Result<_>>()?;
    derand_select(&rb, ensemble.q)
}

/// `Î_i = mean over runs of 1(i ∈ Ŝ_m) / (ŝ_m ∨ 1)`.
pub fn inclusion_rates(ensemble: &Ensemble) -> Vec<f64> {
    let m = ensemble.m() as f64;
    let mut rates = vec![0.0; ensemble.p];
    for run in &ensemble.runs {
        let w = 1.0 / run.s_hat.max(1) as f64;
        for &i in run.selected.indices() {
            rates[i] += w;
        }
    }
    rates.iter_mut().for_each(|r| *r /= m);
    rates
}

/// Sorts `Î` ascending, removes the longest prefix with sum ≤ `q`, selects the rest.
pub fn mds_from_rates(rates: &[f64], q: f64) -> SelectionSet {
    let p = rates.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]).then(a.cmp(&b)));
    let mut sum = 0.0;
    let mut cut = 0;
    for &i in &order {
        sum += rates[i];
        if sum > q {
            break;
        }
        cut += 1;
    }
    SelectionSet::new(order[cut..].to_vec(), p)
}

/// Multiple data splitting selection at the ensemble's level.
pub fn mds_select(ensemble: &Ensemble) -> SelectionSet {
    mds_from_rates(&inclusion_rates(ensemble), ensemble.q)
}

pub const DEFAULT_MBH_GAMMA: f64 = 0.5;

/// BH on `Q_i = min(1, quantile_γ(P_i^(m) / γ))` from `M × p` split p-values.
pub fn mbh_select(pvalues: &[Vec<f64>], q: f64, gamma: f64) -> Result<SelectionSet> {
    let p = check_lengths(pvalues)?;
    if pvalues.is_empty() {
        return Err(Error::InvalidArgument("no p-value vectors".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let mut col = vec![0.0; pvalues.len()];
    let adjusted: Vec<f64> = (0..p)
        .map(|i| {
            for (c, row) in col.iter_mut().zip(pvalues) {
                *c = row[i] / gamma;
            }
            col.sort_by(f64::total_cmp);
            quantile_sorted(&col, gamma).min(1.0)
        })
        .collect();
    Ok(bh_select(&adjusted, q))
}

/// [`mbh_select`] over the split p-values carried by an ensemble.
pub fn mbh_ensemble(ensemble: &Ensemble, gamma: f64) -> Result<SelectionSet> {
    let rows: Vec<Vec<f64>> = ensemble
        .runs
        .iter()
        .map(|r| r.pvalues.clone().ok_or_else(|| Error::InvalidArgument("mbh needs split-BH runs".into())))
        .collect::<Result<_>>()?;
    mbh_select(&rows, ensemble.q, gamma)
}
