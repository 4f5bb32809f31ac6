use serde::{Deserialize, Serialize};

use super::{invert_segment, mixed_cdf};
use crate::error::Result;
use crate::stream::ScoreStream;
use crate::types::Prior;

/// Prior mixed with the exact empirical distribution of all past scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactBelief {
    prior: Prior,
    stream: ScoreStream,
}

impl ExactBelief {
    pub fn new(prior: Prior) -> Self {
        Self {
            prior,
            stream: ScoreStream::new(),
        }
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn stream(&self) -> &ScoreStream {
        &self.stream
    }

    /// Number of scores observed so far (`t - 1` during round `t`).
    pub fn observed(&self) -> u64 {
        self.stream.len()
    }

    pub fn observe(&mut self, r_star: f64) -> Result<()> {
        let r = self.prior.domain().check(r_star)?;
        self.stream.insert(r);
        Ok(())
    }

    /// Mixture CDF `lambda * F0(r) + (1 - lambda) * rank(r) / n`.
    pub fn cdf(&self, lambda: f64, r: f64) -> f64 {
        let n = self.stream.len();
        let f0 = self.prior.cdf_clamped(r);
        if n == 0 {
            return f0;
        }
        mixed_cdf(lambda, f0, self.stream.rank_le(r), n)
    }

    /// `q_alpha(lambda * P_0 + (1 - lambda) * empirical)`.
    pub fn quantile(&self, lambda: f64, alpha: f64) -> f64 {
        let n = self.stream.len();
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
        let prior = &self.prior;
        let b = self
            .stream
            .first_satisfying(|v, le| mixed_cdf(lambda, prior.cdf_clamped(v), le, n) >= alpha);
        let base = (1.0 - lambda) * (b.below as f64) / (n as f64);
        invert_segment(prior, lambda, base, alpha, b.prev.unwrap_or(0.0), b.first)
    }
}
