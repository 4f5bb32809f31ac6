use serde::{Deserialize, Serialize};

use super::grid::{Fenwick, Grid};
use super::invert_segment;
use crate::error::{Error, Result};
use crate::types::Prior;

/// Stored weights are rescaled once the running scale drops below this.
const RENORMALIZE_BELOW: f64 = 1e-150;

/// Prior mixed with a geometrically discounted empirical distribution:
/// `Pbar_t = beta * Pbar_{t-1} + (1 - beta) * delta(r*_t)`, `Pbar_0 = P_0`.
///
/// Scores are grid-rounded. Cell weights are held as `scaled[j] * scale`, so
/// decaying every cell costs one multiplication of `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscountedRepr", into = "DiscountedRepr")]
pub struct DiscountedBelief {
    prior: Prior,
    grid: Grid,
    beta: f64,
    scaled: Vec<f64>,
    index: Fenwick<f64>,
    scale: f64,
    prior_weight: f64,
    observed: u64,
}

#[derive(Serialize, Deserialize)]
struct DiscountedRepr {
    prior: Prior,
    grid: Grid,
    beta: f64,
    scaled: Vec<f64>,
    index: Fenwick<f64>,
    scale: f64,
    prior_weight: f64,
    observed: u64,
}

impl DiscountedBelief {
    pub fn new(prior: Prior, grid_size: usize, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "discount factor {beta} outside (0, 1)"
            )));
        }
        let grid = Grid::new(grid_size, prior.upper())?;
        Ok(Self {
            prior,
            grid,
            beta,
            scaled: vec![0.0; grid_size],
            index: Fenwick::new(grid_size),
            scale: 1.0,
            prior_weight: 1.0,
            observed: 0,
        })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn observed(&self) -> u64 {
        self.observed
    }

    /// Weight left on the prior inside the discounted distribution, `beta^t`.
    pub fn prior_weight(&self) -> f64 {
        self.prior_weight
    }

    /// Current cell weights `w_j`.
    pub fn weights(&self) -> Vec<f64> {
        self.scaled.iter().map(|u| u * self.scale).collect()
    }

    pub fn observe(&mut self, r_star: f64) -> Result<()> {
        let r = self.prior.domain().check(r_star)?;
        let j = self.grid.nearest(r);
        self.scale *= self.beta;
        self.prior_weight *= self.beta;
        if self.scale < RENORMALIZE_BELOW {
            for u in &mut self.scaled {
                *u *= self.scale;
            }
            self.scale = 1.0;
            self.index = Fenwick::from_values(&self.scaled);
        }
        let add = (1.0 - self.beta) / self.scale;
        self.scaled[j] += add;
        self.index.add(j, add);
        self.observed += 1;
        Ok(())
    }

    pub fn cdf(&self, lambda: f64, r: f64) -> f64 {
        let f0 = self.prior.cdf_clamped(r);
        let cells = (0..self.grid.size())
            .take_while(|&j| self.grid.point(j) <= r)
            .count();
        let mass = self.index.prefix(cells) * self.scale;
        lambda * f0 + (1.0 - lambda) * (self.prior_weight * f0 + mass)
    }

    /// Minimal `r` with
    /// `lambda F0(r) + (1 - lambda)(beta^t F0(r) + sum_{cells <= r} w_j) >= alpha`.
    pub fn quantile(&self, lambda: f64, alpha: f64) -> f64 {
        if self.observed == 0 {
            return self.prior.inverse_cdf(alpha);
        }
        let prior_coef = lambda + (1.0 - lambda) * self.prior_weight;
        if alpha <= 0.0 {
            return 0.0;
        }
        if alpha >= 1.0 && prior_coef > 0.0 {
            return self.prior.upper();
        }
        let jump_coef = (1.0 - lambda) * self.scale;
        let (prior, grid) = (&self.prior, &self.grid);
        let (j, below) = self.index.first_satisfying(|j, cum| {
            prior_coef * prior.cdf_clamped(grid.point(j)) + jump_coef * cum >= alpha
        });
        let lower = if j > 0 { grid.point(j - 1) } else { 0.0 };
        let jump_at = (j < grid.size()).then(|| grid.point(j));
        invert_segment(prior, prior_coef, jump_coef * below, alpha, lower, jump_at)
    }
}

impl TryFrom<DiscountedRepr> for DiscountedBelief {
    type Error = Error;

    fn try_from(r: DiscountedRepr) -> Result<Self> {
        let ok = r.scaled.len() == r.grid.size()
            && r.index.raw_len() == r.grid.size() + 1
            && r.grid.upper() == r.prior.upper()
            && r.beta > 0.0
            && r.beta < 1.0;
        if !ok {
            return Err(Error::Snapshot("inconsistent discounted state".into()));
        }
        Ok(Self {
            prior: r.prior,
            grid: r.grid,
            beta: r.beta,
            scaled: r.scaled,
            index: r.index,
            scale: r.scale,
            prior_weight: r.prior_weight,
            observed: r.observed,
        })
    }
}

impl From<DiscountedBelief> for DiscountedRepr {
    fn from(d: DiscountedBelief) -> Self {
        Self {
            prior: d.prior,
            grid: d.grid,
            beta: d.beta,
            scaled: d.scaled,
            index: d.index,
            scale: d.scale,
            prior_weight: d.prior_weight,
            observed: d.observed,
        }
    }
}
