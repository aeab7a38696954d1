use std::path::{Path, PathBuf};

use qproc::design::draw;
use qproc::rng::rng_from_seed;
use qproc::variance::estimate_parameter;
use qproc::SampleView;
use serde::{Deserialize, Serialize};

use crate::config::{self, one_or_many, resolve, DesignKeys};
use crate::error::{CliError, Result};
use crate::output::Sink;

/// `estimate`: draw one sample and report estimates with confidence intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub population: PathBuf,
    pub design: String,
    pub n: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub r: Option<Vec<usize>>,
    pub seed: u64,
    #[serde(default = "config::default_parameters", alias = "parameter", deserialize_with = "one_or_many")]
    pub parameters: Vec<String>,
    #[serde(default = "config::default_estimators", alias = "estimator", deserialize_with = "one_or_many")]
    pub estimators: Vec<String>,
    #[serde(default = "config::default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "config::default_intervals")]
    pub quadrature_intervals: usize,
    /// Output CSV; standard output when absent.
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl EstimateConfig {
    pub fn design_keys(&self) -> DesignKeys {
        DesignKeys { design: self.design.clone(), n: self.n, m: self.m.clone(), r: self.r.clone() }
    }
}

pub fn run(cfg: &EstimateConfig, base: &Path) -> Result<()> {
    let params = config::parameters(&cfg.parameters)?;
    let kinds = config::estimators(&cfg.estimators)?;
    let levels = config::levels(&cfg.levels)?;
    if cfg.quadrature_intervals == 0 {
        return Err(CliError::Config("`quadrature_intervals` must be at least 1".into()));
    }
    let spec = cfg.design_keys().spec()?;
    let pop = config::population(&resolve(base, &cfg.population))?;
    config::check_design(&spec, &pop)?;

    let sample = draw(&spec, &pop, &mut rng_from_seed(cfg.seed))?;
    let view = SampleView::new(&sample)?;

    let mut header = vec!["parameter", "estimator", "design", "n", "estimate", "sigma_hat"].into_iter().map(String::from).collect::<Vec<_>>();
    for l in &levels {
        header.push(format!("lower_{l}"));
        header.push(format!("upper_{l}"));
    }
    let mut w = csv::Writer::from_writer(Sink::open(cfg.output.as_ref().map(|p| resolve(base, p)))?);
    w.write_record(&header)?;
    for param in &params {
        for &kind in &kinds {
            let est = estimate_parameter(&view, &pop, kind, param, cfg.quadrature_intervals)?;
            let mut row = vec![
                param.label(),
                kind.name().to_string(),
                spec.name().to_string(),
                est.n.to_string(),
                est.theta.to_string(),
                est.sigma2.max(0.0).sqrt().to_string(),
            ];
            for &l in &levels {
                let ci = est.interval(l)?;
                row.push(ci.lower.to_string());
                row.push(ci.upper.to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))?.finish()
}
