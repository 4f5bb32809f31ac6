//! Randomized equivalence batteries: belief engines against the brute-force
//! objective minimizer, and the coverage sandwich of the square-root schedule.
//!
//! Instance `i` draws from its own ChaCha stream, so results do not depend on
//! the worker count.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::belief::{discount_lambda, DiscountedBelief, ExactBelief, Grid, Schedule};
use crate::error::{Error, Result};
use crate::oracle::{
    minimize_objective, scan_spacing, DiscountedObjective, FtrlObjective, DEFAULT_RESOLUTION,
};
use crate::types::Prior;

/// Verification battery; [`Suite::as_str`] gives the command-line name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    /// Exact belief vs the regularized-leader objective.
    #[serde(rename = "theorem1")]
    Ftrl,
    /// Discounted belief vs the discounted objective.
    #[serde(rename = "theorem6")]
    Discounted,
    #[serde(rename = "sandwich")]
    Sandwich,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Ftrl, Suite::Discounted, Suite::Sandwich];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Ftrl => "theorem1",
            Suite::Discounted => "theorem6",
            Suite::Sandwich => "sandwich",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite '{s}'")))
    }

    /// Instance count used when none is given.
    pub fn default_instances(self) -> usize {
        match self {
            Suite::Ftrl | Suite::Discounted => 200,
            Suite::Sandwich => 50,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub instances: usize,
    pub seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
    /// Oracle scan points over `[0, R]`.
    pub resolution: usize,
}

impl VerifyOptions {
    pub fn new(instances: usize, seed: u64) -> Self {
        Self {
            instances,
            seed,
            workers: 0,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

/// Worst case over one battery.
///
/// `worst` is in units of `R`: the largest `|belief - argmin| / R` for the
/// equivalence suites, and the largest signed excursion outside the band for
/// the sandwich (negative when every check is strictly inside).
#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub suite: Suite,
    pub instances: usize,
    pub checks: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub failures: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl std::fmt::Display for BatteryReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<9} {} instances={} checks={} worst={:.3e} tol={:.3e} failures={} ({:.2?})",
            self.suite.as_str(),
            if self.passed() { "PASS" } else { "FAIL" },
            self.instances,
            self.checks,
            self.worst,
            self.tolerance,
            self.failures,
            self.elapsed
        )
    }
}

/// Per-instance outcome: checks made, worst value, failures.
type Outcome = (usize, f64, usize);

fn instance_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Uniform or a random two-piece prior on `[0, upper]`.
fn random_prior(rng: &mut impl Rng, upper: f64) -> Prior {
    if rng.random_bool(0.5) {
        return Prior::uniform(upper).expect("positive upper");
    }
    let c = upper * rng.random_range(0.1..0.9);
    let p = rng.random_range(0.1..0.9);
    Prior::from_knots(vec![(0.0, 0.0), (c, p), (upper, 1.0)]).expect("valid knots")
}

/// `n` distinct uniform draws on `[0, upper]`.
fn tie_free(rng: &mut impl Rng, n: usize, upper: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    while out.len() < n {
        let x = upper * rng.random::<f64>();
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn ftrl_instance(rng: &mut ChaCha8Rng, resolution: usize) -> (f64, f64) {
    let upper = if rng.random_bool(0.5) {
        1.0
    } else {
        rng.random_range(0.5..4.0)
    };
    let prior = random_prior(rng, upper);
    let t = rng.random_range(1..=30usize);
    let alpha = rng.random_range(0.01..0.99);
    let scores = tie_free(rng, t - 1, upper);
    let lambda = Schedule::Sqrt.step_size(t as u64);

    let mut belief = ExactBelief::new(prior.clone());
    for &s in &scores {
        belief.observe(s).expect("in domain");
    }
    let q = belief.quantile(lambda, alpha);
    let argmin = minimize_objective(
        &FtrlObjective::new(prior, alpha, lambda, scores),
        resolution,
    );
    ((q - argmin).abs(), upper)
}

fn discounted_instance(rng: &mut ChaCha8Rng, resolution: usize) -> (f64, f64) {
    let upper = if rng.random_bool(0.5) {
        1.0
    } else {
        rng.random_range(0.5..4.0)
    };
    let prior = random_prior(rng, upper);
    let beta = rng.random_range(0.05..0.95);
    let m = rng.random_range(5..=60usize);
    let t = rng.random_range(1..=30usize);
    let alpha = rng.random_range(0.01..0.99);
    let scores = tie_free(rng, t - 1, upper);
    let lambda = discount_lambda(beta);

    let mut belief = DiscountedBelief::new(prior.clone(), m, beta).expect("valid beta");
    for &s in &scores {
        belief.observe(s).expect("in domain");
    }
    let grid = Grid::new(m, upper).expect("valid grid");
    let rounded: Vec<f64> = scores.iter().map(|&s| grid.round(s)).collect();
    let q = belief.quantile(lambda, alpha);
    let obj = DiscountedObjective::new(prior, alpha, beta, lambda, &rounded);
    let argmin = minimize_objective(&obj, resolution);
    ((q - argmin).abs(), upper)
}

/// Levels `0.05, 0.10, ..., 0.95`.
pub fn sandwich_levels() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// Pre-coverage band `[alpha - 1/(sqrt t - 1), alpha + 1/(sqrt t - 1) + 1/(t - 1)]`, `t >= 2`.
pub fn sandwich_band(alpha: f64, t: u64) -> (f64, f64) {
    let slack = 1.0 / ((t as f64).sqrt() - 1.0);
    (alpha - slack, alpha + slack + 1.0 / (t - 1) as f64)
}

const SANDWICH_HORIZON: usize = 500;

fn sandwich_instance(rng: &mut ChaCha8Rng) -> Outcome {
    let scores = tie_free(rng, SANDWICH_HORIZON, 1.0);
    let levels = sandwich_levels();
    let mut belief = ExactBelief::new(Prior::uniform(1.0).expect("unit domain"));
    let (mut checks, mut worst, mut failures) = (0, f64::NEG_INFINITY, 0);
    belief.observe(scores[0]).expect("in domain");
    for t in 2..=SANDWICH_HORIZON as u64 {
        let lambda = Schedule::Sqrt.step_size(t);
        for &alpha in &levels {
            let r = belief.quantile(lambda, alpha);
            let cov = belief.stream().rank_le(r) as f64 / (t - 1) as f64;
            let (lo, hi) = sandwich_band(alpha, t);
            let excess = (lo - cov).max(cov - hi);
            checks += 1;
            worst = f64::max(worst, excess);
            if cov < lo || cov > hi {
                failures += 1;
            }
        }
        belief.observe(scores[t as usize - 1]).expect("in domain");
    }
    (checks, worst, failures)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<BatteryReport> {
    if opts.instances == 0 {
        return Err(Error::InvalidConfig("instances must be at least 1".into()));
    }
    if opts.resolution < 2 {
        return Err(Error::InvalidConfig("resolution must be at least 2".into()));
    }
    let start = Instant::now();
    // Tolerance is two scan spacings, expressed relative to R.
    let rel_tol = 2.0 * scan_spacing(1.0, opts.resolution);
    let res = opts.resolution;
    let seed = opts.seed;
    let outcomes: Vec<Outcome> = pool(opts.workers)?.install(|| {
        (0..opts.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = instance_rng(seed, i);
                match suite {
                    Suite::Ftrl | Suite::Discounted => {
                        let (dev, upper) = if suite == Suite::Ftrl {
                            ftrl_instance(&mut rng, res)
                        } else {
                            discounted_instance(&mut rng, res)
                        };
                        let rel = dev / upper;
                        (1, rel, (rel > rel_tol) as usize)
                    }
                    Suite::Sandwich => sandwich_instance(&mut rng),
                }
            })
            .collect()
    });
    let (checks, worst, failures) = outcomes
        .iter()
        .fold((0, f64::NEG_INFINITY, 0), |(c, w, f), &(c1, w1, f1)| {
            (c + c1, w.max(w1), f + f1)
        });
    Ok(BatteryReport {
        suite,
        instances: opts.instances,
        checks,
        worst,
        tolerance: if suite == Suite::Sandwich {
            0.0
        } else {
            rel_tol
        },
        failures,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(instances: usize) -> VerifyOptions {
        VerifyOptions {
            resolution: 20_001,
            ..VerifyOptions::new(instances, 11)
        }
    }

    #[test]
    fn small_batteries_pass() {
        for suite in [Suite::Ftrl, Suite::Discounted] {
            let r = run_suite(suite, &quick(40)).unwrap();
            assert!(r.passed(), "{r}");
            assert_eq!(r.checks, 40);
        }
        let r = run_suite(Suite::Sandwich, &quick(3)).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.checks, 3 * 499 * 19);
        assert!(r.worst < 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut a = quick(16);
        a.workers = 1;
        let mut b = quick(16);
        b.workers = 4;
        let ra = run_suite(Suite::Discounted, &a).unwrap();
        let rb = run_suite(Suite::Discounted, &b).unwrap();
        assert_eq!(ra.worst.to_bits(), rb.worst.to_bits());
    }

    #[test]
    fn rejects_zero_instances() {
        assert!(run_suite(Suite::Sandwich, &quick(0)).is_err());
    }

    #[test]
    fn suite_names() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.as_str()).unwrap(), s);
        }
        assert!(Suite::parse("theorem2").is_err());
    }

    #[test]
    fn sandwich_band_at_t4() {
        // sqrt(4) - 1 = 1
        assert_eq!(sandwich_band(0.5, 4), (-0.5, 0.5 + 1.0 + 1.0 / 3.0));
    }
}
