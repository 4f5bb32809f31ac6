//! Algorithmic beliefs `P_t = lambda_t * P_0 + (1 - lambda_t) * empirical part`
//! and their quantiles.
//!
//! Three engines share the same query contract: [`ExactBelief`] keeps every
//! observed score, [`QuantizedBelief`] rounds scores onto an `m`-point grid,
//! and [`DiscountedBelief`] keeps geometrically decayed grid weights.
//!
//! Every quantile is `min{r : CDF(r) >= alpha}` computed exactly. Between two
//! consecutive atoms the mixture CDF is the prior CDF scaled and shifted by a
//! constant, so the crossing point is found by inverting one prior piece.

mod discounted;
mod exact;
mod grid;
mod quantized;

pub use discounted::DiscountedBelief;
pub use exact::ExactBelief;
pub use grid::{Fenwick, Grid};
pub use quantized::QuantizedBelief;

use serde::{Deserialize, Serialize};

use crate::types::Prior;

/// Mixing-weight schedule `lambda_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `lambda_t = 1 / sqrt(t)`.
    Sqrt,
    /// A fixed `lambda` in `[0, 1]`.
    Constant(f64),
}

impl Schedule {
    /// Constant schedule matched to a discount factor:
    /// `lambda = sqrt(1 - beta) / (beta + sqrt(1 - beta))`.
    pub fn for_discount(beta: f64) -> Self {
        Schedule::Constant(discount_lambda(beta))
    }

    /// `lambda_t` for round `t >= 1`.
    pub fn step_size(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match *self {
            Schedule::Sqrt => 1.0 / (t.max(1) as f64).sqrt(),
            Schedule::Constant(l) => l,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        match *self {
            Schedule::Sqrt => Ok(()),
            Schedule::Constant(l) if (0.0..=1.0).contains(&l) => Ok(()),
            Schedule::Constant(l) => Err(crate::Error::InvalidConfig(format!(
                "constant step size {l} outside [0, 1]"
            ))),
        }
    }
}

pub fn discount_lambda(beta: f64) -> f64 {
    let s = (1.0 - beta).sqrt();
    s / (beta + s)
}

/// Mixture CDF value just after an atom: `lambda * F0(v) + (1 - lambda) * rank / n`.
#[inline]
pub(crate) fn mixed_cdf(lambda: f64, prior_cdf: f64, rank: u64, n: u64) -> f64 {
    lambda * prior_cdf + (1.0 - lambda) * (rank as f64) / (n as f64)
}

/// Solves for the quantile inside a segment `[lower, jump_at)` on which the
/// mixture CDF equals `prior_coef * F0(r) + base_mass`.
///
/// `jump_at` is the first atom whose inclusion reaches `alpha`; `None` means
/// the crossing happens in the continuous part before `R`.
pub(crate) fn invert_segment(
    prior: &Prior,
    prior_coef: f64,
    base_mass: f64,
    alpha: f64,
    lower: f64,
    jump_at: Option<f64>,
) -> f64 {
    let upper = jump_at.unwrap_or(prior.upper());
    if prior_coef <= 0.0 {
        return upper;
    }
    let p = (alpha - base_mass) / prior_coef;
    prior.inverse_cdf(p).max(lower).min(upper)
}
