//! Brute-force reference for the belief engines.
//!
//! A quantile of the prior/empirical mixture coincides with the minimizer of
//! a regularized cumulative quantile loss (non-linearized FTRL) whose
//! regularizer is `psi(r) = E_{r* ~ P_0}[l_alpha(r, r*)]`. This module
//! evaluates those objectives directly and minimizes them by dense scan, so
//! the engines can be checked against an independent route. Nothing in the
//! predictors calls into it.
//!
//! The scan domain is `[0, R]`: the right-derivative of either objective is
//! negative below 0 (it equals `-alpha * total weight`) and non-negative at
//! `R`, so the minimizer over the real line already lies in `[0, R]`.

use crate::error::{Error, Result};
use crate::predictor::PredictorRecord;
use crate::types::{empirical_quantile, quantile_loss, Prior};

/// Default number of scan points over `[0, R]`.
pub const DEFAULT_RESOLUTION: usize = 100_000;

/// `psi(r) = E_{r* ~ P_0}[l_alpha(r, r*)]`, integrated exactly piece by piece.
#[derive(Debug, Clone)]
pub struct RegularizerPsi {
    prior: Prior,
    alpha: f64,
    mean: f64,
}

impl RegularizerPsi {
    pub fn new(prior: Prior, alpha: f64) -> Self {
        let mean = prior
            .pieces()
            .map(|(a, b, d)| d * (b * b - a * a) / 2.0)
            .sum();
        Self { prior, alpha, mean }
    }

    pub fn upper(&self) -> f64 {
        self.prior.upper()
    }

    /// `int_0^{min(r,R)} (r - s) p_0(s) ds + alpha (E[s] - r)`; valid on all of R.
    pub fn value(&self, r: f64) -> f64 {
        let below: f64 = self
            .prior
            .pieces()
            .filter(|&(a, _, _)| r > a)
            .map(|(a, b, d)| {
                let c = b.min(r);
                d * (c - a) * (r - (a + c) / 2.0)
            })
            .sum();
        below + self.alpha * (self.mean - r)
    }

    /// `psi'(r) = int_0^r p_0 - alpha`.
    pub fn derivative(&self, r: f64) -> f64 {
        let mass: f64 = self
            .prior
            .pieces()
            .filter(|&(a, _, _)| r > a)
            .map(|(a, b, d)| d * (b.min(r) - a))
            .sum();
        mass - self.alpha
    }

    /// `psi''(r) = p_0(r)`.
    pub fn second_derivative(&self, r: f64) -> f64 {
        self.prior.density(r)
    }
}

/// Regularizer weight `lambda_t (t - 1) / (1 - lambda_t)` for round `t >= 2`.
pub fn regularizer_weight(lambda: f64, t: u64) -> f64 {
    lambda * (t - 1) as f64 / (1.0 - lambda)
}

/// Anything that can be scanned for its minimizer over `[0, R]`.
pub trait Objective {
    fn value(&self, r: f64) -> f64;
    fn upper(&self) -> f64;
}

/// `h_t psi(r) + sum_{i<t} l_alpha(r, r*_i)`; plain `psi` when no scores are given.
#[derive(Debug, Clone)]
pub struct FtrlObjective {
    psi: RegularizerPsi,
    weight: f64,
    scores: Vec<f64>,
}

impl FtrlObjective {
    pub fn new(prior: Prior, alpha: f64, lambda: f64, scores: Vec<f64>) -> Self {
        let weight = if scores.is_empty() {
            1.0
        } else {
            regularizer_weight(lambda, scores.len() as u64 + 1)
        };
        Self {
            psi: RegularizerPsi::new(prior, alpha),
            weight,
            scores,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl Objective for FtrlObjective {
    fn value(&self, r: f64) -> f64 {
        let alpha = self.psi.alpha;
        self.weight * self.psi.value(r)
            + self
                .scores
                .iter()
                .map(|&s| quantile_loss(alpha, r, s))
                .sum::<f64>()
    }

    fn upper(&self) -> f64 {
        self.psi.upper()
    }
}

/// `(1-beta)^{-1} (lambda/(1-lambda) + beta^{t-1}) psi(r) + sum_i beta^{t-1-i} l_alpha(r, r*_i)`.
#[derive(Debug, Clone)]
pub struct DiscountedObjective {
    psi: RegularizerPsi,
    weight: f64,
    // (score, beta^{t-1-i}), most recent last
    terms: Vec<(f64, f64)>,
}

impl DiscountedObjective {
    pub fn new(prior: Prior, alpha: f64, beta: f64, lambda: f64, scores: &[f64]) -> Self {
        let n = scores.len();
        let weight = (lambda / (1.0 - lambda) + beta.powi(n as i32)) / (1.0 - beta);
        let terms = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, beta.powi((n - 1 - i) as i32)))
            .collect();
        Self {
            psi: RegularizerPsi::new(prior, alpha),
            weight,
            terms,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl Objective for DiscountedObjective {
    fn value(&self, r: f64) -> f64 {
        let alpha = self.psi.alpha;
        self.weight * self.psi.value(r)
            + self
                .terms
                .iter()
                .map(|&(s, w)| w * quantile_loss(alpha, r, s))
                .sum::<f64>()
    }

    fn upper(&self) -> f64 {
        self.psi.upper()
    }
}

/// Grid spacing of a scan with `resolution` points over `[0, upper]`.
pub fn scan_spacing(upper: f64, resolution: usize) -> f64 {
    upper / (resolution - 1) as f64
}

/// Dense-scan minimizer over `resolution` evenly spaced points of `[0, R]`;
/// ties go to the smallest point.
pub fn minimize_objective(obj: &impl Objective, resolution: usize) -> f64 {
    assert!(resolution >= 2, "scan needs at least two points");
    let upper = obj.upper();
    let last = resolution - 1;
    let mut best = (0.0, obj.value(0.0));
    for k in 1..resolution {
        let r = if k == last {
            upper
        } else {
            upper * k as f64 / last as f64
        };
        let v = obj.value(r);
        if v < best.1 {
            best = (r, v);
        }
    }
    best.0
}

fn records_at(records: &[PredictorRecord], alpha: f64) -> impl Iterator<Item = &PredictorRecord> {
    records.iter().filter(move |r| r.alpha == alpha)
}

/// `sum_t l(r_t, r*_t) - sum_t l(q_alpha(r*_{1:T}), r*_t)` over the records at level `alpha`.
pub fn regret(records: &[PredictorRecord], alpha: f64) -> f64 {
    let recs: Vec<&PredictorRecord> = records_at(records, alpha).collect();
    if recs.is_empty() {
        return 0.0;
    }
    let scores: Vec<f64> = recs.iter().map(|r| r.r_star).collect();
    let q = empirical_quantile(alpha, &scores).expect("nonempty");
    recs.iter()
        .map(|r| quantile_loss(alpha, r.threshold, r.r_star) - quantile_loss(alpha, q, r.r_star))
        .sum()
}

/// Minimum of `sum_t w_t l_alpha(r, s_t)` over `r` in the scan grid of `[0, R]`
/// together with the data points themselves.
fn min_weighted_loss(alpha: f64, upper: f64, resolution: usize, terms: &[(f64, f64)]) -> f64 {
    let mut sorted: Vec<(f64, f64)> = terms.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cands: Vec<f64> = (0..resolution)
        .map(|k| upper * k as f64 / (resolution - 1) as f64)
        .chain(sorted.iter().map(|t| t.0))
        .collect();
    cands.sort_by(f64::total_cmp);
    let total_w: f64 = sorted.iter().map(|t| t.1).sum();
    let total_ws: f64 = sorted.iter().map(|t| t.0 * t.1).sum();
    let (mut i, mut w_le, mut ws_le) = (0, 0.0, 0.0);
    let mut best = f64::INFINITY;
    for r in cands {
        while i < sorted.len() && sorted[i].0 <= r {
            w_le += sorted[i].1;
            ws_le += sorted[i].0 * sorted[i].1;
            i += 1;
        }
        let v = (1.0 - alpha) * (r * w_le - ws_le)
            + alpha * ((total_ws - ws_le) - r * (total_w - w_le));
        best = best.min(v);
    }
    best
}

/// `sum_t beta^{T-t} l(r_t, r*_t) - min_{r in [0,R]} sum_t beta^{T-t} l(r, r*_t)`.
pub fn discounted_regret(records: &[PredictorRecord], alpha: f64, beta: f64, upper: f64) -> f64 {
    let recs: Vec<&PredictorRecord> = records_at(records, alpha).collect();
    let big_t = recs.len();
    if big_t == 0 {
        return 0.0;
    }
    let weights: Vec<f64> = (0..big_t)
        .map(|t| beta.powi((big_t - 1 - t) as i32))
        .collect();
    let incurred: f64 = recs
        .iter()
        .zip(&weights)
        .map(|(r, w)| w * quantile_loss(alpha, r.threshold, r.r_star))
        .sum();
    let terms: Vec<(f64, f64)> = recs
        .iter()
        .zip(&weights)
        .map(|(r, &w)| (r.r_star, w))
        .collect();
    incurred - min_weighted_loss(alpha, upper, DEFAULT_RESOLUTION, &terms)
}

/// `|alpha - (1/T) sum_t 1[r*_t <= r_t]|` over the records at level `alpha`.
pub fn coverage_error(records: &[PredictorRecord], alpha: f64) -> Result<f64> {
    let (mut n, mut covered) = (0usize, 0usize);
    for r in records_at(records, alpha) {
        n += 1;
        covered += r.covered as usize;
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok((alpha - covered as f64 / n as f64).abs())
}
