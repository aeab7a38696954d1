//! Replicated sampling experiments: relative bias, true MSE, coverage with
//! Monte Carlo standard errors, interval lengths and asymptotic/true MSE ratios.
//!
//! Replicate `k` draws from its own stream `rng::stream(seed, k)`. Replicates
//! run in parallel and are aggregated in index order, so a report depends only
//! on the configuration and the population.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{asymptotic_mse, AsymptoticDesign, SuperpopProxy};
use crate::design::{draw, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, SampleView};
use crate::functionals::ParameterSpec;
use crate::population::{Population, Variable};
use crate::rng;
use crate::variance::{confidence_interval, estimate_parameter, ConfidenceInterval, DEFAULT_QUADRATURE_INTERVALS};

/// Nominal levels used when none are given.
pub const DEFAULT_LEVELS: [f64; 2] = [0.90, 0.95];

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub design: DesignSpec,
    pub estimators: Vec<EstimatorKind>,
    pub parameters: Vec<ParameterSpec>,
    pub replicates: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub quadrature_intervals: usize,
}

impl SimulationConfig {
    pub fn new(design: DesignSpec, parameters: Vec<ParameterSpec>, replicates: usize, seed: u64) -> Self {
        Self {
            design,
            estimators: EstimatorKind::ALL.to_vec(),
            parameters,
            replicates,
            seed,
            levels: DEFAULT_LEVELS.to_vec(),
            quadrature_intervals: DEFAULT_QUADRATURE_INTERVALS,
        }
    }

    pub fn validate(&self, pop: &Population) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicate count must be at least 1".into()));
        }
        if self.estimators.is_empty() || self.parameters.is_empty() {
            return Err(Error::InvalidParameter("need at least one estimator and one parameter".into()));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::InvalidParameter(format!("nominal level {l} outside (0, 1)")));
        }
        if self.quadrature_intervals == 0 {
            return Err(Error::InvalidParameter("quadrature needs at least one interval".into()));
        }
        self.design.validate(pop)
    }
}

/// Coverage summary at one nominal level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: f64,
    pub coverage: f64,
    pub mc_se: f64,
    pub avg_ci_length: f64,
}

/// Aggregates for one (parameter, estimator) pair.
///
/// Replicates whose estimate fails or whose σ̂ is zero or non-finite are
/// excluded from every aggregate and counted in `failures`; `used` is the
/// replicate count the aggregates are based on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub parameter: String,
    pub estimator: EstimatorKind,
    pub design: String,
    pub theta0: f64,
    pub mean_estimate: Option<f64>,
    /// `None` when θ₀ = 0 or no replicate succeeded.
    pub relative_bias: Option<f64>,
    pub true_mse: Option<f64>,
    pub asymptotic_mse: Option<f64>,
    pub mse_ratio: Option<f64>,
    pub levels: Vec<LevelReport>,
    pub used: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub design: String,
    pub sample_size: usize,
    pub population_size: usize,
    pub replicates: usize,
    pub seed: u64,
    pub cells: Vec<CellReport>,
}

/// One line of the flat report: a cell at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub parameter: String,
    pub estimator: String,
    pub design: String,
    pub theta0: f64,
    pub relative_bias: Option<f64>,
    pub true_mse: Option<f64>,
    pub asym_mse: Option<f64>,
    pub mse_ratio: Option<f64>,
    pub level: Option<f64>,
    pub coverage: Option<f64>,
    pub mc_se: Option<f64>,
    pub avg_ci_length: Option<f64>,
    pub failures: usize,
}

impl SimulationReport {
    /// Flat rows, one per cell and level. A cell with no usable replicate
    /// yields a single row without level columns.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        for c in &self.cells {
            let base = ReportRow {
                parameter: c.parameter.clone(),
                estimator: c.estimator.name().to_string(),
                design: c.design.clone(),
                theta0: c.theta0,
                relative_bias: c.relative_bias,
                true_mse: c.true_mse,
                asym_mse: c.asymptotic_mse,
                mse_ratio: c.mse_ratio,
                level: None,
                coverage: None,
                mc_se: None,
                avg_ci_length: None,
                failures: c.failures,
            };
            if c.levels.is_empty() {
                out.push(base);
                continue;
            }
            for l in &c.levels {
                out.push(ReportRow {
                    level: Some(l.level),
                    coverage: Some(l.coverage),
                    mc_se: Some(l.mc_se),
                    avg_ci_length: Some(l.avg_ci_length),
                    ..base.clone()
                });
            }
        }
        out
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<report>".into(), source: e })
    }

    pub fn cell(&self, parameter: &str, estimator: EstimatorKind) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.parameter == parameter && c.estimator == estimator)
    }
}

/// Reads rows written by [`SimulationReport::write_csv`].
pub fn read_report_rows(reader: impl std::io::Read) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(reader).deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Σ(θ̂_k − θ₀)/(I θ₀).
pub fn relative_bias(estimates: &[f64], theta0: f64) -> Result<f64> {
    if theta0 == 0.0 {
        return Err(Error::ZeroTrueValue);
    }
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("no estimates".into()));
    }
    Ok(estimates.iter().map(|t| t - theta0).sum::<f64>() / (estimates.len() as f64 * theta0))
}

/// Σ(θ̂_k − θ₀)²/I.
pub fn true_mse(estimates: &[f64], theta0: f64) -> f64 {
    estimates.iter().map(|t| (t - theta0) * (t - theta0)).sum::<f64>() / estimates.len() as f64
}

/// Share of intervals containing θ₀ and its Monte Carlo standard error √(c(1−c)/I).
pub fn coverage(intervals: &[ConfidenceInterval], theta0: f64) -> Result<(f64, f64)> {
    if intervals.is_empty() {
        return Err(Error::InvalidParameter("coverage needs at least one interval".into()));
    }
    let i = intervals.len() as f64;
    let c = intervals.iter().filter(|ci| ci.contains(theta0)).count() as f64 / i;
    Ok((c, (c * (1.0 - c) / i).sqrt()))
}

type Outcome = Option<(f64, f64)>;

fn replicate(pop: &Population, cfg: &SimulationConfig, k: usize, cells: usize) -> (usize, Vec<Outcome>) {
    let mut rng = rng::stream(cfg.seed, k as u64);
    let Ok(sample) = draw(&cfg.design, pop, &mut rng) else {
        return (0, vec![None; cells]);
    };
    let Ok(view) = SampleView::new(&sample) else {
        return (sample.n(), vec![None; cells]);
    };
    let mut out = Vec::with_capacity(cells);
    for param in &cfg.parameters {
        for &kind in &cfg.estimators {
            let est = estimate_parameter(&view, pop, kind, param, cfg.quadrature_intervals).ok();
            out.push(est.filter(|e| e.theta.is_finite() && e.sigma2 > 0.0 && e.sigma2.is_finite()).map(|e| (e.theta, e.sigma2)));
        }
    }
    (sample.n(), out)
}

/// Runs the experiment on `pop` and aggregates per (parameter, estimator).
pub fn run_simulation(pop: &Population, cfg: &SimulationConfig) -> Result<SimulationReport> {
    cfg.validate(pop)?;
    let cells = cfg.parameters.len() * cfg.estimators.len();
    let results: Vec<(usize, Vec<Outcome>)> =
        (0..cfg.replicates).into_par_iter().map(|k| replicate(pop, cfg, k, cells)).collect();

    let n = cfg.design.sample_size(pop)?;
    let proxy = SuperpopProxy::new(pop.clone(), n as f64 / pop.len() as f64).ok();
    let asym_design = AsymptoticDesign::of(&cfg.design);

    let mut reports = Vec::with_capacity(cells);
    let mut idx = 0;
    for param in &cfg.parameters {
        let theta0 = param.evaluate(pop.ecdf(Variable::Y))?;
        for &kind in &cfg.estimators {
            let mut thetas = Vec::new();
            let mut intervals: Vec<Vec<ConfidenceInterval>> = vec![Vec::new(); cfg.levels.len()];
            for (size, outcomes) in &results {
                if let Some((theta, sigma2)) = outcomes[idx] {
                    thetas.push(theta);
                    for (l, &level) in cfg.levels.iter().enumerate() {
                        intervals[l].push(confidence_interval(theta, sigma2.sqrt(), *size, 1.0 - level)?);
                    }
                }
            }
            idx += 1;
            let asymptotic = proxy.as_ref().and_then(|p| asymptotic_mse(p, &asym_design, kind, param, n).ok());
            let used = thetas.len();
            let (mean_estimate, relative_bias, mse) = if used == 0 {
                (None, None, None)
            } else {
                (
                    Some(thetas.iter().sum::<f64>() / used as f64),
                    relative_bias(&thetas, theta0).ok(),
                    Some(true_mse(&thetas, theta0)),
                )
            };
            let mut levels = Vec::new();
            if used > 0 {
                for (l, &level) in cfg.levels.iter().enumerate() {
                    let (cov, mc_se) = coverage(&intervals[l], theta0)?;
                    let avg = intervals[l].iter().map(|ci| ci.width()).sum::<f64>() / used as f64;
                    levels.push(LevelReport { level, coverage: cov, mc_se, avg_ci_length: avg });
                }
            }
            reports.push(CellReport {
                parameter: param.label(),
                estimator: kind,
                design: cfg.design.name().to_string(),
                theta0,
                mean_estimate,
                relative_bias,
                true_mse: mse,
                asymptotic_mse: asymptotic,
                mse_ratio: match (asymptotic, mse) {
                    (Some(a), Some(t)) if t > 0.0 => Some(a / t),
                    _ => None,
                },
                levels,
                used,
                failures: cfg.replicates - used,
            });
        }
    }
    Ok(SimulationReport {
        design: cfg.design.name().to_string(),
        sample_size: n,
        population_size: pop.len(),
        replicates: cfg.replicates,
        seed: cfg.seed,
        cells: reports,
    })
}
