//! Weighted step distribution functions.

use crate::error::{Error, Result};

/// A right-continuous step CDF over distinct sorted support points.
///
/// Ties are merged on construction. The last cumulative value is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    values: Vec<f64>,
    cdf: Vec<f64>,
}

impl Ecdf {
    /// Builds the CDF of `(value, weight)` pairs. Weights must be positive.
    pub fn weighted(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        if let Some(&(_, w)) = pairs.iter().find(|(v, w)| !(*w > 0.0) || !w.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-positive or non-finite weight {w}")));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values = Vec::with_capacity(pairs.len());
        let mut cum = Vec::with_capacity(pairs.len());
        let mut running = 0.0;
        for (v, w) in pairs {
            running += w;
            if values.last() == Some(&v) {
                *cum.last_mut().unwrap() = running;
            } else {
                values.push(v);
                cum.push(running);
            }
        }
        let total = running;
        let mut cdf: Vec<f64> = cum.into_iter().map(|c| c / total).collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { values, cdf })
    }

    /// Unweighted empirical CDF.
    pub fn unweighted(values: &[f64]) -> Result<Self> {
        Self::weighted(values.iter().map(|&v| (v, 1.0)))
    }

    /// F(t) = total weight at or below `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= t);
        if k == 0 {
            0.0
        } else {
            self.cdf[k - 1]
        }
    }

    /// inf{t : F(t) ≥ p}. Returns an error for `p` outside (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        Ok(self.quantile_unchecked(p))
    }

    /// Quantile for any `p` in [0, 1]; `p ≤ 0` maps to the minimum.
    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < p);
        self.values[k.min(self.values.len() - 1)]
    }

    /// Distinct support points, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cumulative probabilities at each support point.
    pub fn cumulative(&self) -> &[f64] {
        &self.cdf
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }
}
