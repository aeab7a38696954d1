//! Smooth L-functionals and functions of quantiles.
//!
//! A smooth L-functional is `∫_[α,β] Q(p) J(p) dp`. When the quantile function
//! is a step function with known breakpoints the integral is computed exactly:
//! breakpoints of Q and the grid of a tabulated J are merged, and on each piece
//! Q is constant and J linear, so the midpoint value is exact.

use std::fmt;
use std::sync::Arc;

use crate::ecdf::Ecdf;
use crate::error::{Error, Result};

/// Midpoints used when a quantile function exposes no breakpoints.
pub const FALLBACK_INTERVALS: usize = 10_000;

/// A quantile function p ↦ Q(p) on (0, 1).
pub trait QuantileFunction {
    fn value(&self, p: f64) -> f64;

    /// Probabilities where a step quantile function may jump; `None` for
    /// functions without a finite set of breakpoints.
    fn breakpoints(&self) -> Option<Vec<f64>> {
        None
    }
}

impl QuantileFunction for Ecdf {
    fn value(&self, p: f64) -> f64 {
        self.quantile_unchecked(p)
    }

    fn breakpoints(&self) -> Option<Vec<f64>> {
        Some(self.cumulative().to_vec())
    }
}

/// Wraps a closure as a quantile function without breakpoints.
pub struct FnQuantile<F>(pub F);

impl<F: Fn(f64) -> f64> QuantileFunction for FnQuantile<F> {
    fn value(&self, p: f64) -> f64 {
        (self.0)(p)
    }
}

/// Weight function J on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFunction {
    Constant(f64),
    /// Linear interpolation through `(grid[k], values[k])`, constant beyond the ends.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl WeightFunction {
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidParameter("tabulated J needs ≥ 2 grid points and matching values".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("tabulated J grid must be strictly increasing".into()));
        }
        Ok(WeightFunction::Tabulated { grid, values })
    }

    pub fn eval(&self, p: f64) -> f64 {
        match self {
            WeightFunction::Constant(c) => *c,
            WeightFunction::Tabulated { grid, values } => {
                let k = grid.partition_point(|&g| g <= p);
                if k == 0 {
                    values[0]
                } else if k == grid.len() {
                    values[k - 1]
                } else {
                    let t = (p - grid[k - 1]) / (grid[k] - grid[k - 1]);
                    values[k - 1] + t * (values[k] - values[k - 1])
                }
            }
        }
    }

    fn knots(&self) -> &[f64] {
        match self {
            WeightFunction::Constant(_) => &[],
            WeightFunction::Tabulated { grid, .. } => grid,
        }
    }

    fn scaled(&self, c: f64) -> Self {
        match self {
            WeightFunction::Constant(v) => WeightFunction::Constant(v * c),
            WeightFunction::Tabulated { grid, values } => {
                WeightFunction::Tabulated { grid: grid.clone(), values: values.iter().map(|v| v * c).collect() }
            }
        }
    }
}

/// `∫_[α,β] Q(p) J(p) dp`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothL {
    pub weight: WeightFunction,
    pub alpha: f64,
    pub beta: f64,
}

impl SmoothL {
    pub fn new(weight: WeightFunction, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < beta && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("need 0 < alpha < beta < 1, got [{alpha}, {beta}]")));
        }
        Ok(Self { weight, alpha, beta })
    }

    /// The α-trimmed mean: J ≡ 1/(1 − 2α) on [α, 1 − α].
    pub fn trimmed_mean(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidParameter(format!("trimming proportion {alpha} outside (0, 0.5)")));
        }
        Self::new(WeightFunction::Constant(1.0 / (1.0 - 2.0 * alpha)), alpha, 1.0 - alpha)
    }

    /// Same functional with J multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { weight: self.weight.scaled(c), ..self.clone() }
    }
}

/// Evaluates the smooth L-functional of `q`.
pub fn smooth_l(q: &impl QuantileFunction, spec: &SmoothL) -> f64 {
    let (a, b) = (spec.alpha, spec.beta);
    let mut cuts: Vec<f64> = match q.breakpoints() {
        Some(bp) => bp,
        None => (1..FALLBACK_INTERVALS).map(|k| a + (b - a) * k as f64 / FALLBACK_INTERVALS as f64).collect(),
    };
    cuts.extend_from_slice(spec.weight.knots());
    cuts.retain(|&c| c > a && c < b);
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0]) * q.value(mid) * spec.weight.eval(mid)
        })
        .sum()
}

/// User-supplied function of k quantiles.
#[derive(Clone)]
pub struct CustomShape {
    pub name: String,
    pub probabilities: Vec<f64>,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub gradient: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for CustomShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomShape").field("name", &self.name).field("probabilities", &self.probabilities).finish()
    }
}

/// Function f(Q(p₁), …, Q(p_k)) of finitely many quantiles.
#[derive(Debug, Clone)]
pub enum QuantileShape {
    Median,
    Iqr,
    Bowley,
    Custom(CustomShape),
}

impl QuantileShape {
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantileShape::Median => vec![0.5],
            QuantileShape::Iqr => vec![0.25, 0.75],
            QuantileShape::Bowley => vec![0.25, 0.5, 0.75],
            QuantileShape::Custom(c) => c.probabilities.clone(),
        }
    }

    fn check(&self, t: &[f64]) -> Result<()> {
        let k = self.probabilities().len();
        if t.len() != k {
            return Err(Error::InvalidParameter(format!("expected {k} quantiles, got {}", t.len())));
        }
        if matches!(self, QuantileShape::Bowley) && t[2] == t[0] {
            return Err(Error::DegenerateSpread);
        }
        Ok(())
    }

    /// f(t₁, …, t_k).
    pub fn value(&self, t: &[f64]) -> Result<f64> {
        self.check(t)?;
        Ok(match self {
            QuantileShape::Median => t[0],
            QuantileShape::Iqr => t[1] - t[0],
            QuantileShape::Bowley => (t[0] + t[2] - 2.0 * t[1]) / (t[2] - t[0]),
            QuantileShape::Custom(c) => (c.f)(t),
        })
    }

    /// ∇f(t₁, …, t_k).
    pub fn gradient(&self, t: &[f64]) -> Result<Vec<f64>> {
        self.check(t)?;
        Ok(match self {
            QuantileShape::Median => vec![1.0],
            QuantileShape::Iqr => vec![-1.0, 1.0],
            QuantileShape::Bowley => {
                let d2 = (t[2] - t[0]) * (t[2] - t[0]);
                vec![2.0 * (t[2] - t[1]) / d2, 2.0 * (t[0] - t[2]) / d2, 2.0 * (t[1] - t[0]) / d2]
            }
            QuantileShape::Custom(c) => (c.gradient)(t),
        })
    }
}

/// Target parameter.
#[derive(Debug, Clone)]
pub enum ParameterSpec {
    SmoothL(SmoothL),
    QuantileFn(QuantileShape),
}

impl ParameterSpec {
    pub fn median() -> Self {
        ParameterSpec::QuantileFn(QuantileShape::Median)
    }

    pub fn iqr() -> Self {
        ParameterSpec::QuantileFn(QuantileShape::Iqr)
    }

    pub fn bowley() -> Self {
        ParameterSpec::QuantileFn(QuantileShape::Bowley)
    }

    pub fn trimmed_mean(alpha: f64) -> Result<Self> {
        Ok(ParameterSpec::SmoothL(SmoothL::trimmed_mean(alpha)?))
    }

    /// Short label such as `median` or `trimmed_mean(0.1)`.
    pub fn label(&self) -> String {
        match self {
            ParameterSpec::QuantileFn(QuantileShape::Median) => "median".into(),
            ParameterSpec::QuantileFn(QuantileShape::Iqr) => "iqr".into(),
            ParameterSpec::QuantileFn(QuantileShape::Bowley) => "bowley".into(),
            ParameterSpec::QuantileFn(QuantileShape::Custom(c)) => c.name.clone(),
            ParameterSpec::SmoothL(s) => match s.weight {
                WeightFunction::Constant(j)
                    if (s.alpha + s.beta - 1.0).abs() < 1e-15 && (j * (1.0 - 2.0 * s.alpha) - 1.0).abs() < 1e-12 =>
                {
                    format!("trimmed_mean({})", s.alpha)
                }
                _ => format!("smooth_l[{},{}]", s.alpha, s.beta),
            },
        }
    }

    /// θ = functional of the quantile function `q`.
    pub fn evaluate(&self, q: &impl QuantileFunction) -> Result<f64> {
        match self {
            ParameterSpec::SmoothL(s) => Ok(smooth_l(q, s)),
            ParameterSpec::QuantileFn(shape) => {
                let t: Vec<f64> = shape.probabilities().into_iter().map(|p| q.value(p)).collect();
                shape.value(&t)
            }
        }
    }
}

/// Parses the labels produced by [`ParameterSpec::label`] for the built-in
/// parameters: `median`, `iqr`, `bowley` and `trimmed_mean(α)`.
impl std::str::FromStr for ParameterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "median" => Ok(Self::median()),
            "iqr" => Ok(Self::iqr()),
            "bowley" => Ok(Self::bowley()),
            other => {
                let alpha = other
                    .strip_prefix("trimmed_mean(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|a| a.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown parameter `{other}`")))?;
                Self::trimmed_mean(alpha)
            }
        }
    }
}
