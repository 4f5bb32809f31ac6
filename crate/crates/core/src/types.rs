//! Scalar domain types, the quantile loss, empirical quantiles and priors.
//!
//! Scores live in a bounded domain `[0, R]`. A [`Prior`] is a distribution on
//! that domain with a piecewise-linear CDF, so both its CDF and its inverse
//! are exact closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Score range `[0, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ScoreDomain {
    upper: f64,
}

impl ScoreDomain {
    pub fn new(upper: f64) -> Result<Self> {
        if upper.is_finite() && upper > 0.0 {
            Ok(Self { upper })
        } else {
            Err(Error::InvalidDomain(upper))
        }
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, score: f64) -> bool {
        (0.0..=self.upper).contains(&score)
    }

    /// Validates a score, mapping `-0.0` to `0.0`.
    pub fn check(&self, score: f64) -> Result<f64> {
        if self.contains(score) {
            Ok(score + 0.0)
        } else {
            Err(Error::OutOfDomain {
                score,
                upper: self.upper,
            })
        }
    }
}

impl TryFrom<f64> for ScoreDomain {
    type Error = Error;

    fn try_from(upper: f64) -> Result<Self> {
        Self::new(upper)
    }
}

impl From<ScoreDomain> for f64 {
    fn from(d: ScoreDomain) -> f64 {
        d.upper
    }
}

/// A confidence level `alpha` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ConfidenceLevel(f64);

impl ConfidenceLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidLevel(alpha))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ConfidenceLevel {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<ConfidenceLevel> for f64 {
    fn from(c: ConfidenceLevel) -> f64 {
        c.0
    }
}

/// Quantile (pinball) loss `(1[r >= r*] - alpha) * (r - r*)`.
///
/// `r` may lie outside the score domain; OGD iterates are improper.
#[inline]
pub fn quantile_loss(alpha: f64, r: f64, r_star: f64) -> f64 {
    let indicator = if r >= r_star { 1.0 } else { 0.0 };
    (indicator - alpha) * (r - r_star)
}

/// Smallest `k` in `1..=n` with `k / n >= alpha`, evaluated in floating point
/// the same way a linear scan of the empirical CDF would.
pub(crate) fn order_index(alpha: f64, n: usize) -> usize {
    debug_assert!(n > 0);
    let nf = n as f64;
    let mut k = ((alpha * nf).ceil() as usize).clamp(1, n);
    while k > 1 && ((k - 1) as f64) / nf >= alpha {
        k -= 1;
    }
    while k < n && (k as f64) / nf < alpha {
        k += 1;
    }
    k
}

/// `min{x : P(X <= x) >= alpha}` under the empirical distribution of `scores`.
///
/// For `alpha = 0` the definition is vacuous; the smallest sample is returned.
pub fn empirical_quantile(alpha: f64, scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = order_index(alpha, scores.len());
    let mut buf = scores.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Prior distribution on `[0, R]` with a piecewise-linear CDF.
///
/// Knots `(r_i, F_i)` are strictly increasing in both coordinates, start at
/// `(0, 0)` and end at `(R, 1)`. The density is piecewise constant and
/// bounded below by a positive floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Prior {
    knots: Vec<(f64, f64)>,
}

impl Prior {
    /// Uniform prior on `[0, R]`.
    pub fn uniform(upper: f64) -> Result<Self> {
        ScoreDomain::new(upper)?;
        Ok(Self {
            knots: vec![(0.0, 0.0), (upper, 1.0)],
        })
    }

    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidPrior("need at least two knots".into()));
        }
        if knots.iter().any(|(r, f)| !r.is_finite() || !f.is_finite()) {
            return Err(Error::InvalidPrior("knots must be finite".into()));
        }
        if knots[0] != (0.0, 0.0) {
            return Err(Error::InvalidPrior("first knot must be (0, 0)".into()));
        }
        let (upper, last_f) = knots[knots.len() - 1];
        ScoreDomain::new(upper).map_err(|e| Error::InvalidPrior(e.to_string()))?;
        if last_f != 1.0 {
            return Err(Error::InvalidPrior("last knot must have CDF 1".into()));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidPrior(format!(
                    "knot positions must be strictly increasing at r = {}",
                    w[1].0
                )));
            }
            if w[1].1 <= w[0].1 {
                return Err(Error::InvalidPrior(format!(
                    "zero density on [{}, {}]",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Upper end `R` of the support.
    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn domain(&self) -> ScoreDomain {
        ScoreDomain {
            upper: self.upper(),
        }
    }

    /// Constant-density pieces as `(start, end, density)`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.knots
            .windows(2)
            .map(|w| (w[0].0, w[1].0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
    }

    pub fn density_floor(&self) -> f64 {
        self.pieces().map(|p| p.2).fold(f64::INFINITY, f64::min)
    }

    /// Density at `r`; zero outside `[0, R]`. At a knot the right piece wins.
    pub fn density(&self, r: f64) -> f64 {
        if !(0.0..=self.upper()).contains(&r) {
            return 0.0;
        }
        let i = self.piece_index(r);
        let (r0, f0) = self.knots[i - 1];
        let (r1, f1) = self.knots[i];
        (f1 - f0) / (r1 - r0)
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        if !(0.0..=self.upper()).contains(&r) {
            return Err(Error::OutOfDomain {
                score: r,
                upper: self.upper(),
            });
        }
        Ok(self.cdf_clamped(r))
    }

    /// CDF extended by 0 below the domain and 1 above it.
    pub fn cdf_clamped(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.upper() {
            return 1.0;
        }
        let i = self.piece_index(r);
        let (r0, f0) = self.knots[i - 1];
        let (r1, f1) = self.knots[i];
        f0 + (f1 - f0) * ((r - r0) / (r1 - r0))
    }

    /// `min{r : F(r) >= p}`, clamped to `[0, R]`.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return self.upper();
        }
        let i = self
            .knots
            .partition_point(|k| k.1 < p)
            .clamp(1, self.knots.len() - 1);
        let (r0, f0) = self.knots[i - 1];
        let (r1, f1) = self.knots[i];
        (r0 + (p - f0) / (f1 - f0) * (r1 - r0)).clamp(r0, r1)
    }

    fn piece_index(&self, r: f64) -> usize {
        self.knots
            .partition_point(|k| k.0 <= r)
            .clamp(1, self.knots.len() - 1)
    }
}

impl TryFrom<Vec<[f64; 2]>> for Prior {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Self::from_knots(v.into_iter().map(|[r, f]| (r, f)).collect())
    }
}

impl From<Prior> for Vec<[f64; 2]> {
    fn from(p: Prior) -> Self {
        p.knots.into_iter().map(|(r, f)| [r, f]).collect()
    }
}
