//! Design-weighted CDF, the sample/ratio/difference/regression quantile
//! estimators and the GREG mean.

use serde::{Deserialize, Serialize};

use crate::design::Sample;
use crate::ecdf::Ecdf;
use crate::error::{Error, Result};
use crate::functionals::QuantileFunction;
use crate::population::{Population, Variable};

/// Which quantile estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Sample,
    Ratio,
    Difference,
    Regression,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] =
        [EstimatorKind::Sample, EstimatorKind::Ratio, EstimatorKind::Difference, EstimatorKind::Regression];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Sample => "sample",
            EstimatorKind::Ratio => "ratio",
            EstimatorKind::Difference => "difference",
            EstimatorKind::Regression => "regression",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown estimator `{s}`")))
    }
}

/// A point estimate of Q_y(p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    pub p: f64,
    pub value: f64,
    pub estimator: EstimatorKind,
}

/// Weighted CDFs and weighted sums of a drawn sample.
#[derive(Debug, Clone)]
pub struct SampleView<'a> {
    sample: &'a Sample,
    y: Ecdf,
    x: Ecdf,
    sum_d: f64,
    sum_dy: f64,
    sum_dx: f64,
    sum_dxy: f64,
    sum_dx2: f64,
}

impl<'a> SampleView<'a> {
    pub fn new(sample: &'a Sample) -> Result<Self> {
        if sample.units.is_empty() {
            return Err(Error::InvalidDesign("empty sample".into()));
        }
        let y = Ecdf::weighted(sample.units.iter().map(|u| (u.y, u.d)))?;
        let x = Ecdf::weighted(sample.units.iter().map(|u| (u.x, u.d)))?;
        Ok(Self {
            sample,
            y,
            x,
            sum_d: sample.weighted_sum(|_, _| 1.0),
            sum_dy: sample.weighted_sum(|y, _| y),
            sum_dx: sample.weighted_sum(|_, x| x),
            sum_dxy: sample.weighted_sum(|y, x| x * y),
            sum_dx2: sample.weighted_sum(|_, x| x * x),
        })
    }

    pub fn sample(&self) -> &Sample {
        self.sample
    }

    /// F̂ of the chosen variable.
    pub fn ecdf(&self, var: Variable) -> &Ecdf {
        match var {
            Variable::Y => &self.y,
            Variable::X => &self.x,
        }
    }

    /// Σ d.
    pub fn sum_d(&self) -> f64 {
        self.sum_d
    }

    /// Plug-in for E(Y)/E(X): Σ d Y / Σ d X.
    pub fn difference_slope(&self) -> f64 {
        self.sum_dy / self.sum_dx
    }

    /// Plug-in for E(XY)/E(X²): Σ d XY / Σ d X².
    pub fn regression_slope(&self) -> f64 {
        self.sum_dxy / self.sum_dx2
    }

    /// Weighted mean estimates Σ d g / Σ d of y and x.
    pub fn weighted_means(&self) -> (f64, f64) {
        (self.sum_dy / self.sum_d, self.sum_dx / self.sum_d)
    }

    /// Slope multiplying the auxiliary correction at probability `p`.
    pub fn slope(&self, kind: EstimatorKind, p: f64) -> f64 {
        match kind {
            EstimatorKind::Sample => 0.0,
            EstimatorKind::Ratio => self.y.quantile_unchecked(p) / self.x.quantile_unchecked(p),
            EstimatorKind::Difference => self.difference_slope(),
            EstimatorKind::Regression => self.regression_slope(),
        }
    }

    /// Estimate of Q_y(p) by `kind`; `pop` supplies the known Q_{x,N}(p).
    pub fn quantile(&self, kind: EstimatorKind, pop: &Population, p: f64) -> Result<f64> {
        let qy = self.y.quantile(p)?;
        if kind == EstimatorKind::Sample {
            return Ok(qy);
        }
        let qx = self.x.quantile_unchecked(p);
        let qxn = pop.ecdf(Variable::X).quantile_unchecked(p);
        Ok(self.correct(kind, qy, qx, qxn))
    }

    fn correct(&self, kind: EstimatorKind, qy: f64, qx: f64, qxn: f64) -> f64 {
        match kind {
            EstimatorKind::Sample => qy,
            EstimatorKind::Ratio => qy / qx * qxn,
            EstimatorKind::Difference => qy + self.difference_slope() * (qxn - qx),
            EstimatorKind::Regression => qy + self.regression_slope() * (qxn - qx),
        }
    }

    /// The estimated quantile function p ↦ Q̂(p) for `kind`.
    pub fn quantile_function<'b>(&'b self, kind: EstimatorKind, pop: &'b Population) -> EstimatedQuantile<'b> {
        EstimatedQuantile { view: self, pop, kind }
    }
}

/// Step quantile function of an estimator, with exact breakpoints.
#[derive(Debug, Clone, Copy)]
pub struct EstimatedQuantile<'a> {
    view: &'a SampleView<'a>,
    pop: &'a Population,
    kind: EstimatorKind,
}

impl QuantileFunction for EstimatedQuantile<'_> {
    fn value(&self, p: f64) -> f64 {
        let qy = self.view.y.quantile_unchecked(p);
        if self.kind == EstimatorKind::Sample {
            return qy;
        }
        let qx = self.view.x.quantile_unchecked(p);
        let qxn = self.pop.ecdf(Variable::X).quantile_unchecked(p);
        self.view.correct(self.kind, qy, qx, qxn)
    }

    fn breakpoints(&self) -> Option<Vec<f64>> {
        let mut b = self.view.y.cumulative().to_vec();
        if self.kind != EstimatorKind::Sample {
            b.extend_from_slice(self.view.x.cumulative());
            b.extend_from_slice(self.pop.ecdf(Variable::X).cumulative());
        }
        Some(b)
    }
}

/// Hájek-type weighted CDF F̂_y(t) = Σ d 1[Y ≤ t] / Σ d.
pub fn weighted_cdf(sample: &Sample, t: f64) -> Result<f64> {
    Ok(SampleView::new(sample)?.ecdf(Variable::Y).cdf(t))
}

fn estimate(sample: &Sample, pop: &Population, kind: EstimatorKind, p: f64) -> Result<QuantileEstimate> {
    let value = SampleView::new(sample)?.quantile(kind, pop, p)?;
    Ok(QuantileEstimate { p, value, estimator: kind })
}

/// Q̂_y(p) = inf{t : F̂_y(t) ≥ p}.
pub fn sample_quantile(sample: &Sample, p: f64) -> Result<QuantileEstimate> {
    let view = SampleView::new(sample)?;
    Ok(QuantileEstimate { p, value: view.ecdf(Variable::Y).quantile(p)?, estimator: EstimatorKind::Sample })
}

/// Q̂_{y,RA}(p) = Q̂_y(p)/Q̂_x(p) · Q_{x,N}(p).
pub fn ratio_quantile(sample: &Sample, pop: &Population, p: f64) -> Result<QuantileEstimate> {
    estimate(sample, pop, EstimatorKind::Ratio, p)
}

/// Q̂_{y,DI}(p) = Q̂_y(p) + (Σ dY/Σ dX)(Q_{x,N}(p) − Q̂_x(p)).
pub fn difference_quantile(sample: &Sample, pop: &Population, p: f64) -> Result<QuantileEstimate> {
    estimate(sample, pop, EstimatorKind::Difference, p)
}

/// Q̂_{y,REG}(p) = Q̂_y(p) + (Σ dXY/Σ dX²)(Q_{x,N}(p) − Q̂_x(p)).
pub fn regression_quantile(sample: &Sample, pop: &Population, p: f64) -> Result<QuantileEstimate> {
    estimate(sample, pop, EstimatorKind::Regression, p)
}

/// Survey-regression (GREG) estimator of the population mean of y.
pub fn greg_mean(sample: &Sample, pop_mean_x: f64) -> Result<f64> {
    let view = SampleView::new(sample)?;
    let (ybar, xbar) = view.weighted_means();
    let sxx = sample.weighted_sum(|_, x| (x - xbar) * (x - xbar));
    let sxy = sample.weighted_sum(|y, x| (x - xbar) * (y - ybar));
    if !(sxx > 0.0) {
        return Err(Error::ZeroVariance("x"));
    }
    Ok(ybar + sxy / sxx * (pop_mean_x - xbar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignSpec, SampleUnit};

    pub(crate) fn manual(pop: &Population, idx: &[usize], d: &[f64]) -> Sample {
        let units = idx
            .iter()
            .zip(d)
            .map(|(&i, &d)| SampleUnit {
                index: i,
                y: pop.y(i),
                x: pop.x(i),
                pi: 1.0 / (pop.len() as f64 * d),
                d,
                a_total: None,
                cluster: None,
            })
            .collect();
        Sample { units, design: DesignSpec::Srswor { n: idx.len() }, pop_size: pop.len(), x_total: pop.x_total() }
    }

    #[test]
    fn equal_weights_median() {
        let pop = Population::from_xy(&[1.0, 2.0, 3.0, 4.0, 9.0], &[1.0; 5]).unwrap();
        let s = manual(&pop, &[0, 1, 2, 3], &[0.25; 4]);
        assert_eq!(sample_quantile(&s, 0.5).unwrap().value, 2.0);
        assert!(sample_quantile(&s, 1.0).is_err());
    }

    #[test]
    fn y_equals_x_collapses() {
        let v = [1.0, 2.5, 3.0, 7.0, 8.0, 11.0];
        let pop = Population::from_xy(&v, &v).unwrap();
        let s = manual(&pop, &[0, 2, 5], &[0.2, 0.5, 0.3]);
        for p in [0.1, 0.3, 0.5, 0.77, 0.95] {
            let qxn = pop.quantile(Variable::X, p).unwrap();
            assert_eq!(ratio_quantile(&s, &pop, p).unwrap().value, qxn);
            assert_eq!(difference_quantile(&s, &pop, p).unwrap().value, qxn);
            assert_eq!(regression_quantile(&s, &pop, p).unwrap().value, qxn);
        }
        assert!((greg_mean(&s, 5.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_y_regression() {
        let pop = Population::from_xy(&[0.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = manual(&pop, &[0, 3], &[0.5, 0.5]);
        assert_eq!(regression_quantile(&s, &pop, 0.5).unwrap().value, 0.0);
    }
}
