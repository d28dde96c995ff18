//! Method descriptors of the form `base+aggregator`.

use std::fmt;
use std::str::FromStr;

use crate::error::Result;
use crate::numerics::DenseMatrix;
use crate::procedures::{BaseProcedure, SelectionSet};
use crate::stabilizer::{
    derand_ensemble, inclusion_rates, mbh_ensemble, mds_from_rates, stabilize, AggregationKind, Ensemble,
    DEFAULT_MBH_GAMMA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseKind {
    SplitBh,
    Knockoff,
    Ds,
}

impl BaseKind {
    pub const ALL: [BaseKind; 3] = [BaseKind::SplitBh, BaseKind::Knockoff, BaseKind::Ds];

    pub fn name(self) -> &'static str {
        match self {
            BaseKind::SplitBh => "splitbh",
            BaseKind::Knockoff => "knockoff",
            BaseKind::Ds => "ds",
        }
    }

    pub(crate) fn index(self) -> u64 {
        self as u64
    }

    /// `sigma` is only used by the knockoff sampler.
    pub fn procedure(self, sigma: &DenseMatrix) -> Result<BaseProcedure> {
        match self {
            BaseKind::SplitBh => Ok(BaseProcedure::split_bh()),
            BaseKind::Knockoff => BaseProcedure::knockoff(sigma),
            BaseKind::Ds => Ok(BaseProcedure::data_splitting()),
        }
    }
}

impl FromStr for BaseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        BaseKind::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown base procedure '{s}' (expected splitbh, knockoff or ds)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregator {
    /// The first run alone.
    None,
    Stab(AggregationKind),
    Derand,
    Mds,
    Mbh,
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregator::None => f.write_str("none"),
            Aggregator::Stab(kind) => write!(f, "stab:{kind}"),
            Aggregator::Derand => f.write_str("derand"),
            Aggregator::Mds => f.write_str("mds"),
            Aggregator::Mbh => f.write_str("mbh"),
        }
    }
}

impl FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Aggregator::None),
            "derand" => Ok(Aggregator::Derand),
            "mds" => Ok(Aggregator::Mds),
            "mbh" => Ok(Aggregator::Mbh),
            _ => match s.strip_prefix("stab:") {
                Some(kind) => kind.parse().map(Aggregator::Stab).map_err(|e: crate::Error| e.to_string()),
                None => Err(format!("unknown aggregator '{s}'")),
            },
        }
    }
}

/// A base procedure plus the way its runs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MethodSpec {
    pub base: BaseKind,
    pub agg: Aggregator,
}

/// Outcome of applying a method to an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSelection {
    pub selected: SelectionSet,
    /// Per-feature score behind the selection, when the method has one.
    pub scores: Option<Vec<f64>>,
    /// `s̄` for the stabilizer, `ŝ` for a single run.
    pub size: Option<usize>,
}

impl MethodSpec {
    pub fn new(base: BaseKind, agg: Aggregator) -> std::result::Result<Self, String> {
        let needed = match agg {
            Aggregator::Derand => Some(BaseKind::Knockoff),
            Aggregator::Mds => Some(BaseKind::Ds),
            Aggregator::Mbh => Some(BaseKind::SplitBh),
            _ => None,
        };
        match needed {
            Some(b) if b != base => Err(format!("{agg} requires the {} base, got {}", b.name(), base.name())),
            _ => Ok(MethodSpec { base, agg }),
        }
    }

    /// Runs needed from the ensemble (a single run for `none`).
    pub fn runs_needed(&self, m: usize) -> usize {
        if self.agg == Aggregator::None {
            1
        } else {
            m
        }
    }

    pub fn apply(&self, ensemble: &Ensemble) -> Result<MethodSelection> {
        Ok(match self.agg {
            Aggregator::None => {
                let run = &ensemble.runs[0];
                MethodSelection { selected: run.selected.clone(), scores: Some(run.stats.clone()), size: Some(run.s_hat) }
            }
            Aggregator::Stab(kind) => {
                let st = stabilize(ensemble, kind)?;
                MethodSelection { selected: st.selected, scores: Some(st.evalues), size: Some(st.s_bar) }
            }
            Aggregator::Derand => {
                let selected = derand_ensemble(ensemble)?;
                let m = ensemble.m() as f64;
                let mut avg = vec![0.0; ensemble.p];
                for run in &ensemble.runs {
                    for (a, e) in avg.iter_mut().zip(run.rb_evalues.as_deref().unwrap_or_default()) {
                        *a += e / m;
                    }
                }
                MethodSelection { selected, scores: Some(avg), size: None }
            }
            Aggregator::Mds => {
                let rates = inclusion_rates(ensemble);
                MethodSelection { selected: mds_from_rates(&rates, ensemble.q), scores: Some(rates), size: None }
            }
            Aggregator::Mbh => {
                MethodSelection { selected: mbh_ensemble(ensemble, DEFAULT_MBH_GAMMA)?, scores: None, size: None }
            }
        })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.base.name(), self.agg)
    }
}

impl FromStr for MethodSpec {
    type Err = String;

    /// `base` alone means `base+none`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (base, agg) = match s.trim().split_once('+') {
            Some((b, a)) => (b.trim().parse()?, a.trim().parse()?),
            None => (s.trim().parse()?, Aggregator::None),
        };
        MethodSpec::new(base, agg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["knockoff+stab:e_avg", "knockoff+derand", "ds+mds", "splitbh+mbh", "ds+none", "splitbh+stab:rank_mean"] {
            assert_eq!(s.parse::<MethodSpec>().unwrap().to_string(), s);
        }
        assert_eq!("ds".parse::<MethodSpec>().unwrap().agg, Aggregator::None);
    }

    #[test]
    fn incompatible_or_unknown_methods_are_rejected() {
        for s in ["ds+derand", "knockoff+mds", "ds+mbh", "lasso+none", "ds+stab:mode", "ds+vote"] {
            assert!(s.parse::<MethodSpec>().is_err(), "{s} accepted");
        }
    }
}
