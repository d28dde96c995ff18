//! Flat `key = value` experiment configuration.
//!
//! One pair per line, `#` starts a comment, lists are comma separated.
//! `scenario` names a preset (`toy`, `stability`, a grid entry) or `custom`;
//! the other scenario keys override the preset.

use std::collections::HashMap;
use std::path::PathBuf;

use super::method::MethodSpec;
use super::CliError;
use crate::numerics::CovarianceSpec;
use crate::simulation::{named_scenario, ScenarioConfig, SignalLaw};

pub const DEFAULT_REPS: usize = 200;
pub const DEFAULT_M: usize = 50;
pub const DEFAULT_Q: f64 = 0.1;

const KEYS: &[&str] = &[
    "scenario",
    "name",
    "n",
    "p",
    "s",
    "signal",
    "delta",
    "signal_lo",
    "signal_hi",
    "signal_sd",
    "covariance",
    "rho",
    "block_size",
    "q",
    "m",
    "reps",
    "seed",
    "methods",
    "output_dir",
    "threads",
    "m_sweep",
    "ensembles_per_m",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl Threads {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "auto" => Ok(Threads::Auto),
            t => match t.parse::<usize>() {
                Ok(0) | Err(_) => Err(format!("expected 'auto' or a positive thread count, got '{t}'")),
                Ok(n) => Ok(Threads::Count(n)),
            },
        }
    }

    /// Pool size, 0 meaning all logical cores.
    pub fn pool_size(self) -> usize {
        match self {
            Threads::Auto => 0,
            Threads::Count(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRequest {
    pub scenarios: Vec<ScenarioConfig>,
    pub methods: Vec<MethodSpec>,
    pub output_dir: PathBuf,
    pub threads: Threads,
    /// Ensemble sizes for the stability study.
    pub m_sweep: Vec<usize>,
    pub ensembles_per_m: usize,
}

struct Entry {
    line: usize,
    value: String,
}

struct Fields {
    map: HashMap<String, Entry>,
}

impl Fields {
    fn err(&self, key: &str, message: impl Into<String>) -> CliError {
        CliError::Config { line: self.map.get(key).map_or(0, |e| e.line), field: key.into(), message: message.into() }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|e| e.value.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| self.err(key, format!("cannot parse '{v}': {e}"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| self.err(key, format!("cannot parse '{s}': {e}"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }
}

fn tokenize(text: &str) -> Result<Fields, CliError> {
    let mut map: HashMap<String, Entry> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::Config { line, field: content.into(), message: "expected 'key = value'".into() });
        };
        let key = key.trim().to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config { line, field: key, message: "unknown key".into() });
        }
        if let Some(prev) = map.get(&key) {
            let message = format!("duplicate key (first set on line {})", prev.line);
            return Err(CliError::Config { line, field: key, message });
        }
        map.insert(key, Entry { line, value: value.trim().to_string() });
    }
    Ok(Fields { map })
}

fn signal_override(f: &Fields, current: Option<SignalLaw>) -> Result<Option<SignalLaw>, CliError> {
    let kind = match f.raw("signal") {
        Some(k) => k.to_string(),
        None => match current {
            Some(SignalLaw::GaussianScaled { .. }) => "gaussian_scaled".into(),
            Some(SignalLaw::UniformTwoSided { .. }) => "uniform".into(),
            Some(SignalLaw::Gaussian { .. }) => "gaussian".into(),
            None => "gaussian_scaled".into(),
        },
    };
    let law = match kind.as_str() {
        "gaussian_scaled" => {
            let old = match current {
                Some(SignalLaw::GaussianScaled { delta }) => delta,
                _ => 5.0,
            };
            SignalLaw::GaussianScaled { delta: f.parsed("delta")?.unwrap_or(old) }
        }
        "uniform" => {
            let (lo, hi) = match current {
                Some(SignalLaw::UniformTwoSided { lo, hi }) => (lo, hi),
                _ => (0.1, 1.5),
            };
            SignalLaw::UniformTwoSided {
                lo: f.parsed("signal_lo")?.unwrap_or(lo),
                hi: f.parsed("signal_hi")?.unwrap_or(hi),
            }
        }
        "gaussian" => {
            let old = match current {
                Some(SignalLaw::Gaussian { sd }) => sd,
                _ => 1.0,
            };
            SignalLaw::Gaussian { sd: f.parsed("signal_sd")?.unwrap_or(old) }
        }
        other => {
            return Err(f.err("signal", format!("unknown signal law '{other}' (gaussian_scaled, uniform, gaussian)")))
        }
    };
    law.validate().map_err(|e| f.err("signal", e.to_string()))?;
    Ok(Some(law))
}

fn covariance_override(f: &Fields, current: CovarianceSpec) -> Result<CovarianceSpec, CliError> {
    let kind = match f.raw("covariance") {
        Some(k) => k,
        None => match current {
            CovarianceSpec::Identity => "identity",
            CovarianceSpec::CompoundSymmetry { .. } => "cs",
            CovarianceSpec::BlockToeplitz { .. } => "toeplitz",
        },
    };
    let rho = f.parsed("rho")?.unwrap_or(current.rho());
    let spec = match kind {
        "identity" => CovarianceSpec::Identity,
        "cs" => CovarianceSpec::CompoundSymmetry { rho },
        "toeplitz" => {
            let default = match current {
                CovarianceSpec::BlockToeplitz { block_size, .. } => block_size,
                _ => crate::numerics::matrix::DEFAULT_TOEPLITZ_BLOCK,
            };
            CovarianceSpec::BlockToeplitz { rho, block_size: f.parsed("block_size")?.unwrap_or(default) }
        }
        other => return Err(f.err("covariance", format!("unknown covariance '{other}' (identity, cs, toeplitz)"))),
    };
    spec.validate().map_err(|e| f.err("covariance", e.to_string()))?;
    Ok(spec)
}

fn apply_overrides(f: &Fields, mut c: ScenarioConfig) -> Result<ScenarioConfig, CliError> {
    if let Some(name) = f.raw("name") {
        c.name = name.to_string();
    }
    c.n = f.parsed("n")?.unwrap_or(c.n);
    c.p = f.parsed("p")?.unwrap_or(c.p);
    c.s = f.parsed("s")?.unwrap_or(c.s);
    c.q = f.parsed("q")?.unwrap_or(c.q);
    c.m = f.parsed("m")?.unwrap_or(c.m);
    c.reps = f.parsed("reps")?.unwrap_or(c.reps);
    c.master_seed = f.parsed("seed")?.unwrap_or(c.master_seed);
    let touches_signal = ["signal", "delta", "signal_lo", "signal_hi", "signal_sd"].iter().any(|k| f.raw(k).is_some());
    if touches_signal {
        c.signal = signal_override(f, Some(c.signal))?.expect("signal law");
    }
    c.covariance = covariance_override(f, c.covariance)?;
    c.validate().map_err(|e| f.err("scenario", format!("{}: {e}", c.name)))?;
    Ok(c)
}

fn custom_scenario(f: &Fields) -> Result<ScenarioConfig, CliError> {
    let need = |k: &str| -> Result<usize, CliError> {
        f.parsed(k)?.ok_or_else(|| f.err(k, "required for a custom scenario"))
    };
    Ok(ScenarioConfig {
        name: f.raw("name").unwrap_or("custom").to_string(),
        n: need("n")?,
        p: need("p")?,
        s: need("s")?,
        signal: signal_override(f, None)?.expect("signal law"),
        covariance: CovarianceSpec::Identity,
        q: DEFAULT_Q,
        m: DEFAULT_M,
        reps: DEFAULT_REPS,
        master_seed: 0,
    })
}

/// Parses a configuration file body.
pub fn parse_config(text: &str) -> Result<ExperimentRequest, CliError> {
    let f = tokenize(text)?;
    let names: Vec<String> = f.list("scenario")?.unwrap_or_else(|| vec!["custom".to_string()]);
    if names.is_empty() {
        return Err(f.err("scenario", "empty scenario list"));
    }
    let seed = f.parsed("seed")?.unwrap_or(0);
    let reps = f.parsed("reps")?.unwrap_or(DEFAULT_REPS);
    let mut scenarios = Vec::with_capacity(names.len());
    for name in &names {
        let base = if name == "custom" {
            custom_scenario(&f)?
        } else {
            named_scenario(name, reps, seed).ok_or_else(|| f.err("scenario", format!("unknown scenario '{name}'")))?
        };
        scenarios.push(apply_overrides(&f, base)?);
    }

    let methods: Vec<MethodSpec> = f.list("methods")?.ok_or_else(|| f.err("methods", "at least one method is required"))?;
    if methods.is_empty() {
        return Err(f.err("methods", "at least one method is required"));
    }
    let threads = match f.raw("threads") {
        Some(t) => Threads::parse(t).map_err(|e| f.err("threads", e))?,
        None => Threads::Auto,
    };
    let m_sweep: Vec<usize> = f.list("m_sweep")?.unwrap_or_default();
    if m_sweep.contains(&0) {
        return Err(f.err("m_sweep", "ensemble sizes must be positive"));
    }
    let ensembles_per_m = f.parsed("ensembles_per_m")?.unwrap_or(50);
    if ensembles_per_m == 0 {
        return Err(f.err("ensembles_per_m", "must be positive"));
    }
    Ok(ExperimentRequest {
        scenarios,
        methods,
        output_dir: PathBuf::from(f.raw("output_dir").unwrap_or("out")),
        threads,
        m_sweep,
        ensembles_per_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(err: CliError) -> (usize, String) {
        match err {
            CliError::Config { line, field, .. } => (line, field),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn preset_with_overrides() {
        let req = parse_config(
            "# toy at small scale\nscenario = toy\nreps = 3  # few\nseed = 9\nm = 4\n\nmethods = knockoff+stab:e_avg, knockoff+none\noutput_dir = /tmp/x\nthreads = 2\n",
        )
        .unwrap();
        let c = &req.scenarios[0];
        assert_eq!((c.name.as_str(), c.n, c.p, c.s, c.reps, c.m, c.master_seed), ("toy", 500, 200, 30, 3, 4, 9));
        assert_eq!(c.signal, SignalLaw::UniformTwoSided { lo: 0.1, hi: 1.5 });
        assert_eq!(req.methods.len(), 2);
        assert_eq!(req.threads, Threads::Count(2));
        assert_eq!(req.output_dir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn custom_scenario_keys() {
        let req = parse_config(
            "n = 60\np = 10\ns = 3\nsignal = gaussian\nsignal_sd = 2\ncovariance = toeplitz\nrho = 0.4\nblock_size = 5\nmethods = ds+mds\nm_sweep = 5, 10\n",
        )
        .unwrap();
        let c = &req.scenarios[0];
        assert_eq!(c.signal, SignalLaw::Gaussian { sd: 2.0 });
        assert_eq!(c.covariance, CovarianceSpec::BlockToeplitz { rho: 0.4, block_size: 5 });
        assert_eq!((c.reps, c.m, c.q), (DEFAULT_REPS, DEFAULT_M, DEFAULT_Q));
        assert_eq!(req.m_sweep, vec![5, 10]);
    }

    #[test]
    fn diagnostics_point_at_the_line() {
        assert_eq!(line_of(parse_config("n = 5\nbogus = 1\n").unwrap_err()), (2, "bogus".into()));
        assert_eq!(line_of(parse_config("scenario = toy\n\nmethods = ds+derand\n").unwrap_err()), (3, "methods".into()));
        assert_eq!(line_of(parse_config("scenario = toy\nq = lots\nmethods = ds\n").unwrap_err()), (2, "q".into()));
        assert_eq!(line_of(parse_config("scenario = toy\n").unwrap_err()).1, "methods");
        assert_eq!(line_of(parse_config("scenario = toy\nmethods = ds\nmethods = ds\n").unwrap_err()).0, 3);
        assert_eq!(line_of(parse_config("scenario = nope\nmethods = ds\n").unwrap_err()), (1, "scenario".into()));
        assert_eq!(line_of(parse_config("just words\n").unwrap_err()).0, 1);
        assert_eq!(line_of(parse_config("scenario = toy\nq = 1.5\nmethods = ds\n").unwrap_err()).1, "scenario");
    }
}
