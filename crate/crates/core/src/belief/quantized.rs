use serde::{Deserialize, Serialize};

use super::grid::{Fenwick, Grid};
use super::{invert_segment, mixed_cdf};
use crate::error::{Error, Result};
use crate::types::Prior;

/// Prior mixed with the empirical distribution of grid-rounded scores.
///
/// State is `m` cell counts regardless of how many scores were observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizedRepr", into = "QuantizedRepr")]
pub struct QuantizedBelief {
    prior: Prior,
    grid: Grid,
    counts: Vec<u64>,
    index: Fenwick<u64>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct QuantizedRepr {
    prior: Prior,
    grid: Grid,
    counts: Vec<u64>,
}

impl QuantizedBelief {
    pub fn new(prior: Prior, grid_size: usize) -> Result<Self> {
        let grid = Grid::new(grid_size, prior.upper())?;
        Ok(Self {
            prior,
            grid,
            counts: vec![0; grid_size],
            index: Fenwick::new(grid_size),
            total: 0,
        })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cell_counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn observed(&self) -> u64 {
        self.total
    }

    pub fn observe(&mut self, r_star: f64) -> Result<()> {
        let r = self.prior.domain().check(r_star)?;
        let j = self.grid.nearest(r);
        self.counts[j] += 1;
        self.index.add(j, 1);
        self.total += 1;
        Ok(())
    }

    pub fn cdf(&self, lambda: f64, r: f64) -> f64 {
        let f0 = self.prior.cdf_clamped(r);
        if self.total == 0 {
            return f0;
        }
        let cells = (0..self.grid.size())
            .take_while(|&j| self.grid.point(j) <= r)
            .count();
        mixed_cdf(lambda, f0, self.index.prefix(cells), self.total)
    }

    pub fn quantile(&self, lambda: f64, alpha: f64) -> f64 {
        let n = self.total;
        if n == 0 {
            if lambda < 1.0 {
                log::warn!("step size {lambda} < 1 with no observations; using the prior");
            }
            return self.prior.inverse_cdf(alpha);
        }
        if alpha <= 0.0 {
            return 0.0;
        }
        if alpha >= 1.0 && lambda > 0.0 {
            return self.prior.upper();
        }
        let (prior, grid) = (&self.prior, &self.grid);
        let (_, below) = self.index.first_satisfying(|j, cum| {
            mixed_cdf(lambda, prior.cdf_clamped(grid.point(j)), cum, n) >= alpha
        });
        // nearest occupied cells on either side of the crossing
        let lower = if below > 0 {
            grid.point(self.index.lower_bound(below))
        } else {
            0.0
        };
        let jump_at = (below < n).then(|| grid.point(self.index.lower_bound(below + 1)));
        let base = (1.0 - lambda) * (below as f64) / (n as f64);
        invert_segment(prior, lambda, base, alpha, lower, jump_at)
    }
}

impl TryFrom<QuantizedRepr> for QuantizedBelief {
    type Error = Error;

    fn try_from(r: QuantizedRepr) -> Result<Self> {
        if r.counts.len() != r.grid.size() || r.grid.upper() != r.prior.upper() {
            return Err(Error::Snapshot(
                "grid does not match cell counts or prior".into(),
            ));
        }
        Ok(Self {
            index: Fenwick::from_values(&r.counts),
            total: r.counts.iter().sum(),
            prior: r.prior,
            grid: r.grid,
            counts: r.counts,
        })
    }
}

impl From<QuantizedBelief> for QuantizedRepr {
    fn from(q: QuantizedBelief) -> Self {
        Self {
            prior: q.prior,
            grid: q.grid,
            counts: q.counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::ExactBelief;

    fn uniform() -> Prior {
        Prior::uniform(1.0).unwrap()
    }

    #[test]
    fn observe_rounds_to_nearest_cell() {
        let mut q = QuantizedBelief::new(uniform(), 3).unwrap();
        q.observe(0.6).unwrap();
        assert_eq!(q.cell_counts(), &[0, 1, 0]);
        assert!(q.observe(1.01).is_err());
        assert_eq!(q.observed(), 1);
    }

    #[test]
    fn all_mass_at_top() {
        let mut q = QuantizedBelief::new(uniform(), 2).unwrap();
        for x in [0.9, 0.8, 1.0] {
            q.observe(x).unwrap();
        }
        assert_eq!(q.quantile(0.0, 0.5), 1.0);
        assert_eq!(q.quantile(1e-9, 0.5), 1.0);
    }

    #[test]
    fn fresh_state_is_prior() {
        let q = QuantizedBelief::new(Prior::uniform(2.0).unwrap(), 10).unwrap();
        assert_eq!(q.quantile(1.0, 0.9), 1.8);
    }

    #[test]
    fn matches_exact_engine_on_rounded_scores() {
        let mut q = QuantizedBelief::new(uniform(), 101).unwrap();
        let mut e = ExactBelief::new(uniform());
        for x in [0.204, 0.206] {
            q.observe(x).unwrap();
            e.observe(q.grid().round(x)).unwrap();
        }
        assert_eq!(e.stream().to_sorted_vec(), vec![0.2, 0.21]);
        for k in 0..=100 {
            let a = k as f64 / 100.0;
            assert_eq!(
                q.quantile(0.1, a).to_bits(),
                e.quantile(0.1, a).to_bits(),
                "alpha {a}"
            );
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let mut q = QuantizedBelief::new(uniform(), 7).unwrap();
        for x in [0.1, 0.5, 0.5, 0.93] {
            q.observe(x).unwrap();
        }
        let s = serde_json::to_string(&q).unwrap();
        let back: QuantizedBelief = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        let bad = s.replace("\"size\":7", "\"size\":8");
        assert!(serde_json::from_str::<QuantizedBelief>(&bad).is_err());
    }
}
