//! Step-up rules on p-values (BH, BY) and e-values (e-BH).

use super::SelectionSet;

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

#[inline]
fn bh_threshold(q: f64, k: usize, p: usize) -> f64 {
    q * k as f64 / p as f64
}

/// Rejection threshold of e-BH at rank `k`: `p / (q·k)`.
#[inline]
pub(crate) fn ebh_threshold(p: usize, q: f64, k: usize) -> f64 {
    p as f64 / (q * k as f64)
}

/// Benjamini–Hochberg at level `q`.
pub fn bh_select(pvals: &[f64], q: f64) -> SelectionSet {
    let p = pvals.len();
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let k_hat = (1..=p).rev().find(|&k| pvals[idx[k - 1]] <= bh_threshold(q, k, p)).unwrap_or(0);
    if k_hat == 0 {
        return SelectionSet::empty(p);
    }
    let cutoff = bh_threshold(q, k_hat, p);
    SelectionSet::from_sorted((0..p).filter(|&i| pvals[i] <= cutoff).collect(), p)
}

/// `1 + 1/2 + … + 1/p`.
pub fn harmonic(p: usize) -> f64 {
    (1..=p).map(|k| 1.0 / k as f64).sum()
}

/// Benjamini–Yekutieli: BH at level `q / H_p`.
pub fn by_select(pvals: &[f64], q: f64) -> SelectionSet {
    bh_select(pvals, q / harmonic(pvals.len().max(1)))
}

/// e-BH: rejects the `k̂` largest e-values, `k̂ = max{k : e_(k) ≥ p/(q·k)}`.
pub fn ebh_select(evals: &[f64], q: f64) -> SelectionSet {
    let p = evals.len();
    let order = descending_order(evals);
    let k_hat = (1..=p).rev().find(|&k| evals[order[k - 1]] >= ebh_threshold(p, q, k)).unwrap_or(0);
    if k_hat == 0 {
        return SelectionSet::empty(p);
    }
    let cutoff = ebh_threshold(p, q, k_hat);
    SelectionSet::from_sorted((0..p).filter(|&i| evals[i] >= cutoff).collect(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idx(s: &SelectionSet) -> Vec<usize> {
        s.indices().to_vec()
    }

    #[test]
    fn bh_example() {
        assert_eq!(idx(&bh_select(&[0.01, 0.02, 0.5, 0.9], 0.1)), vec![0, 1]);
        assert!(bh_select(&[1.0; 5], 0.1).is_empty());
        assert_eq!(bh_select(&[0.0; 5], 0.1).len(), 5);
    }

    #[test]
    fn bh_step_up_beyond_first_failure() {
        // p_(1) fails its own threshold but p_(2) passes 2q/p.
        assert_eq!(idx(&bh_select(&[0.04, 0.045, 0.9], 0.1)), vec![0, 1]);
    }

    #[test]
    fn by_examples() {
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
        assert_eq!(idx(&by_select(&[0.01, 0.02, 0.5, 0.9], 0.25)), vec![0, 1]);
        assert!(by_select(&[1.0; 4], 0.25).is_empty());
        assert_eq!(idx(&by_select(&[0.05], 0.05)), vec![0]);
    }

    #[test]
    fn ebh_examples() {
        assert_eq!(idx(&ebh_select(&[10.0, 8.0, 1.0, 0.5], 0.5)), vec![0, 1]);
        assert!(ebh_select(&[0.0; 6], 0.1).is_empty());
        assert_eq!(idx(&ebh_select(&[10.0], 0.1)), vec![0]);
    }

    /// Direct evaluation of the e-BH definition: try every k.
    fn ebh_brute(e: &[f64], q: f64) -> Vec<usize> {
        let p = e.len();
        let mut k_hat = 0;
        for k in 1..=p {
            let thr = p as f64 / (q * k as f64);
            if e.iter().filter(|&&v| v >= thr).count() >= k {
                k_hat = k;
            }
        }
        if k_hat == 0 {
            return vec![];
        }
        let thr = p as f64 / (q * k_hat as f64);
        (0..p).filter(|&i| e[i] >= thr).collect()
    }

    proptest! {
        #[test]
        fn ebh_matches_definition(e in prop::collection::vec(0.0f64..40.0, 1..9), q in 0.05f64..0.5) {
            prop_assert_eq!(idx(&ebh_select(&e, q)), ebh_brute(&e, q));
        }

        #[test]
        fn ebh_scaling_never_shrinks(e in prop::collection::vec(0.0f64..30.0, 1..30), c in 1.0f64..5.0) {
            let q = 0.2;
            let base = ebh_select(&e, q);
            let scaled: Vec<f64> = e.iter().map(|v| v * c).collect();
            let bigger = ebh_select(&scaled, q);
            prop_assert!(base.indices().iter().all(|i| bigger.contains(*i)));
            let p = e.len() as f64;
            for &i in base.indices() {
                prop_assert!(e[i] >= p / (q * base.len() as f64));
            }
        }

        #[test]
        fn bh_monotone_in_each_pvalue(
            pv in prop::collection::vec(0.0f64..1.0, 1..40),
            which in any::<prop::sample::Index>(),
            frac in 0.0f64..1.0,
        ) {
            let base = bh_select(&pv, 0.1);
            let mut lowered = pv.clone();
            let j = which.index(pv.len());
            lowered[j] *= frac;
            let after = bh_select(&lowered, 0.1);
            prop_assert!(base.indices().iter().all(|i| after.contains(*i)));
        }
    }
}
