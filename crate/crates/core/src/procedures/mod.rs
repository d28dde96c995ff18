//! Base FDR-controlling selection procedures.
//!
//! Each randomized run yields importance statistics `T` (larger = more
//! evidence), the number of selections `ŝ`, and the general relaxed e-values
//! `e_i = p·1(π(i) ≤ ŝ) / (q·(ŝ ∨ 1))` built from the rank `π` of `T`.

pub mod knockoff;
pub mod multiple;
pub mod splitting;

use std::sync::Arc;

use crate::error::Result;
use crate::numerics::{CvOptions, DenseMatrix, RngStream};

pub use knockoff::{
    gaussian_knockoffs, knockoff_run, knockoff_stats, knockoff_threshold, rb_evalues, KnockoffSampler,
    ThresholdOffset,
};
pub use multiple::{bh_select, by_select, ebh_select};
pub use splitting::{ds_run, splitbh_run};

/// Substream tag for rank tie-breaking inside a run.
pub(crate) const TIE_TAG: u64 = 0x7469_6573;

/// Sorted set of selected feature indices (0-based) out of `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SelectionSet {
    indices: Vec<usize>,
    p: usize,
}

impl SelectionSet {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        assert!(indices.last().is_none_or(|&i| i < p), "selection index out of range");
        SelectionSet { indices, p }
    }

    pub(crate) fn from_sorted(indices: Vec<usize>, p: usize) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SelectionSet { indices, p }
    }

    pub fn empty(p: usize) -> Self {
        SelectionSet { indices: Vec::new(), p }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn intersection_len(&self, other: &SelectionSet) -> usize {
        let (mut a, mut b, mut count) = (0, 0, 0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        count
    }

    /// Membership mask of length `p`.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.p];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }
}

/// 1-based ranks of `values` in descending order; ties are broken by random
/// keys drawn from `tie_rng`, so equal values get distinct ranks.
pub fn rank_descending(values: &[f64], tie_rng: &mut RngStream) -> Vec<usize> {
    let keys: Vec<u64> = (0..values.len()).map(|_| rand::RngCore::next_u64(tie_rng)).collect();
    ranks_with_keys(values, &keys)
}

pub(crate) fn ranks_with_keys(values: &[f64], keys: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(keys[a].cmp(&keys[b])).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// `p·1(rank ≤ s) / (q·(s ∨ 1))` for every feature.
pub fn relaxed_evalues(ranks: &[usize], s: usize, q: f64) -> Vec<f64> {
    let p = ranks.len();
    let value = p as f64 / (q * s.max(1) as f64);
    ranks.iter().map(|&r| if r <= s { value } else { 0.0 }).collect()
}

/// Output of one randomized run of a base procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseRunResult {
    /// Importance statistics `T`.
    pub stats: Vec<f64>,
    pub s_hat: usize,
    pub selected: SelectionSet,
    /// `π(i)`: 1-based rank of `T_i` after tie-breaking.
    pub ranks: Vec<usize>,
    /// General relaxed e-values of this run.
    pub run_evalues: Vec<f64>,
    /// Knockoff e-values `p·1{W ≥ τ}/(1 + #{W ≤ -τ})` (knockoff runs only).
    pub rb_evalues: Option<Vec<f64>>,
    /// Per-feature p-values (split-BH runs only).
    pub pvalues: Option<Vec<f64>>,
}

impl BaseRunResult {
    /// Builds a run whose selection is the top `s_hat` features by `stats`.
    pub fn from_stats(stats: Vec<f64>, s_hat: usize, q: f64, tie_rng: &mut RngStream) -> Self {
        let p = stats.len();
        assert!(s_hat <= p, "s_hat exceeds p");
        let ranks = rank_descending(&stats, tie_rng);
        let selected = SelectionSet::from_sorted((0..p).filter(|&i| ranks[i] <= s_hat).collect(), p);
        let run_evalues = relaxed_evalues(&ranks, s_hat, q);
        BaseRunResult { stats, s_hat, selected, ranks, run_evalues, rb_evalues: None, pvalues: None }
    }

    /// Builds a run from a procedure's own selection; the selection must be
    /// exactly the features whose statistics rank in the top `|selected|`.
    pub(crate) fn from_selection(stats: Vec<f64>, selected: SelectionSet, q: f64, tie_rng: &mut RngStream) -> Self {
        let run = Self::from_stats(stats, selected.len(), q, tie_rng);
        debug_assert_eq!(run.selected, selected, "selection is not the top-ŝ set of its statistics");
        run
    }

    pub fn p(&self) -> usize {
        self.stats.len()
    }
}

/// Base procedure descriptor used to drive repeated runs.
#[derive(Debug, Clone)]
pub enum BaseProcedure {
    /// Single-split BH: lasso screening on one half, OLS p-values on the other.
    SplitBh { cv: CvOptions },
    /// Model-X Gaussian knockoffs with the knockoff+ threshold.
    Knockoff {
        sampler: Arc<KnockoffSampler>,
        /// Level for the attached knockoff e-values; `None` means `q/2`.
        q_kn: Option<f64>,
        cv: CvOptions,
    },
    /// Data splitting with mirror statistics `β̂¹·β̂²`.
    DataSplitting { offset: ThresholdOffset, cv: CvOptions },
}

impl BaseProcedure {
    pub fn split_bh() -> Self {
        BaseProcedure::SplitBh { cv: CvOptions::default() }
    }

    pub fn knockoff(sigma: &DenseMatrix) -> Result<Self> {
        Ok(BaseProcedure::Knockoff {
            sampler: Arc::new(KnockoffSampler::new(sigma)?),
            q_kn: None,
            cv: CvOptions::default(),
        })
    }

    pub fn data_splitting() -> Self {
        BaseProcedure::DataSplitting { offset: ThresholdOffset::Zero, cv: CvOptions::default() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseProcedure::SplitBh { .. } => "splitbh",
            BaseProcedure::Knockoff { .. } => "knockoff",
            BaseProcedure::DataSplitting { .. } => "ds",
        }
    }

    /// One randomized run at level `q`.
    pub fn run(&self, x: &DenseMatrix, y: &[f64], q: f64, rng: &mut RngStream) -> Result<BaseRunResult> {
        match self {
            BaseProcedure::SplitBh { cv } => splitting::splitbh_run_with(x, y, q, cv, rng),
            BaseProcedure::Knockoff { sampler, q_kn, cv } => {
                knockoff::knockoff_run_with(x, y, sampler, q, q_kn.unwrap_or(q / 2.0), cv, rng)
            }
            BaseProcedure::DataSplitting { offset, cv } => splitting::ds_run_with(x, y, q, *offset, cv, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_break_ties_randomly_but_validly() {
        let v = [1.0, 3.0, 3.0, 0.0, 3.0];
        let mut seen = std::collections::HashSet::new();
        for s in 0..40 {
            let r = rank_descending(&v, &mut RngStream::new(s, 0));
            let mut sorted = r.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![1, 2, 3, 4, 5]);
            assert_eq!(r[0], 4);
            assert_eq!(r[3], 5);
            seen.insert((r[1], r[2], r[4]));
        }
        assert!(seen.len() > 1, "ties never reordered");
    }

    #[test]
    fn run_evalues_structure() {
        let stats = vec![0.3, -1.0, 2.0, 0.0, 5.0];
        let run = BaseRunResult::from_stats(stats, 2, 0.1, &mut RngStream::new(0, 0));
        assert_eq!(run.selected.indices(), &[2, 4]);
        assert_eq!(run.run_evalues, vec![0.0, 0.0, 25.0, 0.0, 25.0]);
        let empty = BaseRunResult::from_stats(vec![1.0, 2.0], 0, 0.1, &mut RngStream::new(0, 0));
        assert!(empty.run_evalues.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn selection_set_ops() {
        let a = SelectionSet::new(vec![3, 1, 1, 2], 5);
        assert_eq!(a.indices(), &[1, 2, 3]);
        let b = SelectionSet::new(vec![2, 4], 5);
        assert_eq!(a.intersection_len(&b), 1);
        assert!(a.contains(3) && !a.contains(4));
        assert_eq!(b.mask(), vec![false, false, true, false, true]);
    }
}
