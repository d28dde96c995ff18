//! Sparse Gaussian linear models for simulation experiments.

use crate::error::{Error, Result};
use crate::numerics::{cholesky, materialize_covariance, mix_seed, sample_mvn, CovarianceSpec, DenseMatrix, RngStream};
use crate::procedures::SelectionSet;

/// Label of the per-replication data streams.
const DATA_TAG: u64 = 0x6461_7461;

/// Distribution of the nonzero regression coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalLaw {
    /// `N(0, sd²)` with `sd = δ·√(ln p / n)`.
    GaussianScaled { delta: f64 },
    /// Magnitude `U(lo, hi)` with a random sign.
    UniformTwoSided { lo: f64, hi: f64 },
    /// `N(0, sd²)` with a fixed `sd`.
    Gaussian { sd: f64 },
}

impl SignalLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SignalLaw::GaussianScaled { delta } if !(delta > 0.0) => {
                Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")))
            }
            SignalLaw::UniformTwoSided { lo, hi } if !(lo > 0.0 && lo < hi) => {
                Err(Error::InvalidArgument(format!("need 0 < lo < hi, got ({lo}, {hi})")))
            }
            SignalLaw::Gaussian { sd } if !(sd > 0.0) => {
                Err(Error::InvalidArgument(format!("sd must be positive, got {sd}")))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, n: usize, p: usize, rng: &mut RngStream) -> f64 {
        match *self {
            SignalLaw::GaussianScaled { delta } => delta * ((p as f64).ln() / n as f64).sqrt() * rng.normal(),
            SignalLaw::UniformTwoSided { lo, hi } => {
                let mag = rng.uniform_range(lo, hi);
                if rng.coin() {
                    mag
                } else {
                    -mag
                }
            }
            SignalLaw::Gaussian { sd } => sd * rng.normal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub signal: SignalLaw,
    pub covariance: CovarianceSpec,
    pub q: f64,
    /// Ensemble size.
    pub m: usize,
    pub reps: usize,
    pub master_seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s > self.p {
            return Err(Error::InvalidArgument(format!("s = {} exceeds p = {}", self.s, self.p)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidArgument(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if self.reps == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("reps and M must be at least 1".into()));
        }
        if self.n < 4 {
            return Err(Error::InvalidArgument(format!("n must be at least 4, got {}", self.n)));
        }
        self.signal.validate()?;
        self.covariance.validate()
    }

    pub fn sigma(&self) -> DenseMatrix {
        materialize_covariance(&self.covariance, self.p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub beta: Vec<f64>,
    pub true_support: SelectionSet,
    /// Stream that produced this dataset.
    pub seed: u64,
}

/// Draws replications of one scenario, reusing the covariance factor.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ScenarioConfig,
    sigma: DenseMatrix,
    chol: DenseMatrix,
}

impl Simulator {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let sigma = config.sigma();
        let chol = cholesky(&sigma)?;
        Ok(Simulator { config: config.clone(), sigma, chol })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn sigma(&self) -> &DenseMatrix {
        &self.sigma
    }

    /// Dataset seed of replication `rep`.
    pub fn data_seed(&self, rep: usize) -> u64 {
        mix_seed(self.config.master_seed, &[DATA_TAG, rep as u64])
    }

    /// Support, then coefficients, then `X`, then noise, all from the replication's stream.
    pub fn dataset(&self, rep: usize) -> GeneratedDataset {
        let c = &self.config;
        let seed = self.data_seed(rep);
        let mut rng = RngStream::new(seed, 0);
        let support = rng.sample_indices(c.p, c.s);
        let mut beta = vec![0.0; c.p];
        for &j in &support {
            let mut b = 0.0;
            // A Gaussian draw of exactly 0 would silently shrink the support.
            while b == 0.0 {
                b = c.signal.draw(c.n, c.p, &mut rng);
            }
            beta[j] = b;
        }
        let x = sample_mvn(&vec![0.0; c.p], &self.chol, c.n, &mut rng);
        let mut y = x.matvec(&beta);
        for v in &mut y {
            *v += rng.normal();
        }
        GeneratedDataset { x, y, beta, true_support: SelectionSet::new(support, c.p), seed }
    }
}

pub fn gen_dataset(config: &ScenarioConfig, rep: usize) -> Result<GeneratedDataset> {
    Ok(Simulator::new(config)?.dataset(rep))
}

pub fn toy_scenario(reps: usize, master_seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: "toy".into(),
        n: 500,
        p: 200,
        s: 30,
        signal: SignalLaw::UniformTwoSided { lo: 0.1, hi: 1.5 },
        covariance: CovarianceSpec::CompoundSymmetry { rho: 0.5 },
        q: 0.1,
        m: 50,
        reps,
        master_seed,
    }
}

/// Settings with one fixed dataset used to study selection stability as `M` grows.
pub fn stability_scenario(master_seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: "stability".into(),
        n: 500,
        p: 500,
        s: 50,
        signal: SignalLaw::GaussianScaled { delta: 7.0 },
        covariance: CovarianceSpec::CompoundSymmetry { rho: 0.4 },
        q: 0.1,
        m: 50,
        reps: 1,
        master_seed,
    }
}

pub const GRID_SIZES: [(usize, usize); 5] = [(500, 500), (800, 1000), (800, 2000), (2000, 800), (3000, 500)];
pub const GRID_DELTAS: [f64; 3] = [2.0, 5.0, 8.0];
pub const GRID_RHOS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Full cross-product of sizes, signal strengths, covariance families and correlations.
pub fn paper_grid(reps: usize, master_seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for &(n, p) in &GRID_SIZES {
        for &delta in &GRID_DELTAS {
            for family in ["toeplitz", "cs"] {
                for &rho in &GRID_RHOS {
                    let covariance = match family {
                        "toeplitz" => CovarianceSpec::block_toeplitz(rho),
                        _ => CovarianceSpec::CompoundSymmetry { rho },
                    };
                    out.push(ScenarioConfig {
                        name: format!("n{n}_p{p}_d{delta}_{family}_r{rho}"),
                        n,
                        p,
                        s: 50,
                        signal: SignalLaw::GaussianScaled { delta },
                        covariance,
                        q: 0.1,
                        m: 50,
                        reps,
                        master_seed,
                    });
                }
            }
        }
    }
    out
}

/// Looks up a named preset: `toy`, `stability` or a grid entry name.
pub fn named_scenario(name: &str, reps: usize, master_seed: u64) -> Option<ScenarioConfig> {
    match name {
        "toy" => Some(toy_scenario(reps, master_seed)),
        "stability" => {
            let mut c = stability_scenario(master_seed);
            c.reps = reps;
            Some(c)
        }
        _ => paper_grid(reps, master_seed).into_iter().find(|c| c.name == name),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(s: usize, signal: SignalLaw) -> ScenarioConfig {
        ScenarioConfig {
            name: "t".into(),
            n: 50,
            p: 20,
            s,
            signal,
            covariance: CovarianceSpec::CompoundSymmetry { rho: 0.3 },
            q: 0.1,
            m: 5,
            reps: 3,
            master_seed: 42,
        }
    }

    #[test]
    fn no_signal_gives_pure_noise() {
        let d = gen_dataset(&small(0, SignalLaw::GaussianScaled { delta: 3.0 }), 0).unwrap();
        assert!(d.true_support.is_empty());
        assert!(d.beta.iter().all(|&b| b == 0.0));
        assert_eq!(d.y.len(), 50);
    }

    #[test]
    fn support_matches_beta() {
        let d = gen_dataset(&small(7, SignalLaw::UniformTwoSided { lo: 0.1, hi: 1.5 }), 2).unwrap();
        assert_eq!(d.true_support.len(), 7);
        for j in 0..20 {
            assert_eq!(d.beta[j] != 0.0, d.true_support.contains(j));
            if d.beta[j] != 0.0 {
                assert!((0.1..=1.5).contains(&d.beta[j].abs()));
            }
        }
    }

    #[test]
    fn fixed_seed_is_reproducible_and_reps_differ() {
        let c = small(5, SignalLaw::GaussianScaled { delta: 5.0 });
        assert_eq!(gen_dataset(&c, 1).unwrap(), gen_dataset(&c, 1).unwrap());
        assert_ne!(gen_dataset(&c, 1).unwrap().y, gen_dataset(&c, 2).unwrap().y);
        let sim = Simulator::new(&c).unwrap();
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| sim.data_seed(r)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn gaussian_scaled_variance() {
        // 10,000 coefficients: s = 100 per draw over 100 replications.
        let mut c = small(100, SignalLaw::GaussianScaled { delta: 4.0 });
        c.n = 400;
        c.p = 100;
        c.covariance = CovarianceSpec::Identity;
        let sim = Simulator::new(&c).unwrap();
        let mut vals = Vec::new();
        for r in 0..100 {
            vals.extend(sim.dataset(r).beta);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        let target = 16.0 * (100f64).ln() / 400.0;
        assert!((var / target - 1.0).abs() < 0.05, "var {var} vs {target}");
    }

    #[test]
    fn design_covariance_converges() {
        let mut c = small(0, SignalLaw::GaussianScaled { delta: 1.0 });
        c.n = 5000;
        c.p = 10;
        c.covariance = CovarianceSpec::block_toeplitz(0.6);
        let sim = Simulator::new(&c).unwrap();
        let d = sim.dataset(0);
        let g = d.x.gram();
        let mut err = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                err += (g[(i, j)] / 5000.0 - sim.sigma()[(i, j)]).abs();
            }
        }
        assert!(err / 100.0 <= 10.0 / (5000f64).sqrt());
    }

    #[test]
    fn presets() {
        let t = toy_scenario(10, 1);
        assert_eq!((t.n, t.p, t.s, t.q, t.m), (500, 200, 30, 0.1, 50));
        assert_eq!(t.covariance, CovarianceSpec::CompoundSymmetry { rho: 0.5 });
        assert_eq!(t.signal, SignalLaw::UniformTwoSided { lo: 0.1, hi: 1.5 });

        let grid = paper_grid(1, 0);
        assert!(grid.iter().all(|c| c.s == 50));
        for rho in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8] {
            assert!(grid.iter().any(|c| (c.n, c.p) == (800, 2000)
                && c.signal == SignalLaw::GaussianScaled { delta: 2.0 }
                && c.covariance == CovarianceSpec::block_toeplitz(rho)));
        }
        for rho in GRID_RHOS {
            assert!(grid.iter().any(|c| (c.n, c.p) == (500, 500)
                && c.signal == SignalLaw::GaussianScaled { delta: 5.0 }
                && c.covariance.rho() == rho));
        }
        let names: std::collections::HashSet<&str> = grid.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names.len(), grid.len());
        assert_eq!(named_scenario(&grid[7].name, 1, 0).unwrap(), grid[7]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = small(30, SignalLaw::GaussianScaled { delta: 1.0 });
        assert!(c.validate().is_err());
        c.s = 3;
        c.signal = SignalLaw::UniformTwoSided { lo: 2.0, hi: 1.0 };
        assert!(c.validate().is_err());
    }
}
