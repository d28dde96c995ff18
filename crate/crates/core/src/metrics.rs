//! False discovery proportion, power, Jaccard stability and replication summaries.

use crate::error::{Error, Result};
use crate::procedures::SelectionSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    pub fdp: f64,
    pub power: f64,
    pub n_selected: usize,
}

pub fn selection_metrics(selected: &SelectionSet, truth: &SelectionSet) -> SelectionMetrics {
    let hits = selected.intersection_len(truth);
    let r = selected.len();
    SelectionMetrics {
        fdp: (r - hits) as f64 / r.max(1) as f64,
        power: hits as f64 / truth.len().max(1) as f64,
        n_selected: r,
    }
}

/// `|a ∩ b| / |a ∪ b|` with `J(∅, ∅) = 1`.
pub fn jaccard(a: &SelectionSet, b: &SelectionSet) -> f64 {
    let inter = a.intersection_len(b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Mean Jaccard index over all unordered pairs.
pub fn pairwise_jaccard(sets: &[SelectionSet]) -> Result<f64> {
    if sets.len() < 2 {
        return Err(Error::TooFewSets(sets.len()));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            total += jaccard(&sets[i], &sets[j]);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySummary {
    pub mean_fdp: f64,
    pub var_fdp: f64,
    pub mean_power: f64,
    pub var_power: f64,
    pub mean_n_selected: f64,
    pub var_n_selected: f64,
    /// 1 when fewer than two sets are given.
    pub mean_pairwise_jaccard: f64,
}

/// Sample mean and unbiased variance (0 for a single value).
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || values.iter().all(|&v| v == values[0]) {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

pub fn summarize(records: &[SelectionMetrics], sets: &[SelectionSet]) -> Result<StabilitySummary> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to summarize".into()));
    }
    let col = |f: fn(&SelectionMetrics) -> f64| -> Vec<f64> {
        // Sorting first makes the floating-point sums independent of record order.
        let mut v: Vec<f64> = records.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (mean_fdp, var_fdp) = mean_var(&col(|r| r.fdp));
    let (mean_power, var_power) = mean_var(&col(|r| r.power));
    let (mean_n_selected, var_n_selected) = mean_var(&col(|r| r.n_selected as f64));
    let mean_pairwise_jaccard = if sets.len() < 2 { 1.0 } else { pairwise_jaccard(sets)? };
    Ok(StabilitySummary {
        mean_fdp,
        var_fdp,
        mean_power,
        var_power,
        mean_n_selected,
        var_n_selected,
        mean_pairwise_jaccard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(v: &[usize]) -> SelectionSet {
        SelectionSet::new(v.to_vec(), 10)
    }

    #[test]
    fn metric_examples() {
        let m = selection_metrics(&set(&[0, 1, 2]), &set(&[0, 1]));
        assert_eq!(m, SelectionMetrics { fdp: 1.0 / 3.0, power: 1.0, n_selected: 3 });
        let e = selection_metrics(&set(&[]), &set(&[0, 1]));
        assert_eq!((e.fdp, e.power), (0.0, 0.0));
        let f = selection_metrics(&set(&[0]), &set(&[]));
        assert_eq!((f.fdp, f.power), (1.0, 0.0));
    }

    #[test]
    fn jaccard_examples() {
        assert!((jaccard(&set(&[0, 1]), &set(&[1, 2])) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 1.0);
        assert_eq!(jaccard(&set(&[4, 5]), &set(&[4, 5])), 1.0);
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_jaccard(&[set(&[0]), set(&[0]), set(&[0])]).unwrap(), 1.0);
        assert_eq!(pairwise_jaccard(&[set(&[0]), set(&[1])]).unwrap(), 0.0);
        let v = pairwise_jaccard(&[set(&[0, 1]), set(&[1, 2]), set(&[0, 1])]).unwrap();
        assert!((v - 5.0 / 9.0).abs() < 1e-15);
        assert_eq!(pairwise_jaccard(&[set(&[0])]), Err(Error::TooFewSets(1)));
    }

    #[test]
    fn summary_examples() {
        let r = |fdp: f64| SelectionMetrics { fdp, power: 0.5, n_selected: 4 };
        let one = summarize(&[r(0.2)], &[set(&[1])]).unwrap();
        assert_eq!((one.var_fdp, one.var_power, one.var_n_selected), (0.0, 0.0, 0.0));
        let constant = summarize(&[r(0.2), r(0.2), r(0.2)], &[]).unwrap();
        assert_eq!(constant.var_fdp, 0.0);
        let two = summarize(&[r(0.0), r(1.0)], &[]).unwrap();
        assert_eq!((two.mean_fdp, two.var_fdp), (0.5, 0.5));
    }

    fn arb_set() -> impl Strategy<Value = SelectionSet> {
        prop::collection::vec(0usize..12, 0..12).prop_map(|v| SelectionSet::new(v, 12))
    }

    proptest! {
        #[test]
        fn fdp_plus_precision_is_one(a in arb_set(), t in arb_set()) {
            let m = selection_metrics(&a, &t);
            let precision = a.intersection_len(&t) as f64 / a.len().max(1) as f64;
            if !a.is_empty() {
                prop_assert!((m.fdp + precision - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn jaccard_properties(a in arb_set(), b in arb_set()) {
            let j = jaccard(&a, &b);
            prop_assert_eq!(j, jaccard(&b, &a));
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert_eq!(j == 1.0, a == b);
        }

        #[test]
        fn summary_order_invariant(v in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0usize..50), 1..20), seed: u64) {
            let recs: Vec<SelectionMetrics> = v.iter().map(|&(fdp, power, n_selected)| SelectionMetrics { fdp, power, n_selected }).collect();
            let perm = crate::numerics::RngStream::new(seed, 0).permutation(recs.len());
            let shuffled: Vec<SelectionMetrics> = perm.iter().map(|&i| recs[i]).collect();
            prop_assert_eq!(summarize(&recs, &[]).unwrap(), summarize(&shuffled, &[]).unwrap());
        }
    }
}
