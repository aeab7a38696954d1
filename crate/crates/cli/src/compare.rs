use std::path::{Path, PathBuf};

use qproc::asymptotics::{
    asymptotic_sigma2, block_standard_error, compare_designs, compare_estimators, compare_mean_median_greg, CaseStudy,
    ClosedFormFamily, MeanMedianSource,
};
use qproc::{AsymptoticDesign, ComparisonVerdict, EstimatorKind, ParameterSpec, SuperpopProxy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, one_or_many, resolve};
use crate::error::{CliError, Result};
use crate::output::{num, Sink};

pub const HEADER: [&str; 11] =
    ["condition", "parameter", "design", "estimator", "grid", "value", "lambda", "margin", "margin_se", "verdict", "error"];

/// `compare`: asymptotic comparison conditions over a grid of settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompareConfig {
    /// Sample-quantile estimator against ratio, difference and regression
    /// versions, for Y ~ N(μ, 1) on [ln 0.05, ln 500].
    Estimators {
        #[serde(default = "config::default_parameters", alias = "parameter", deserialize_with = "one_or_many")]
        parameters: Vec<String>,
        #[serde(default = "default_design")]
        design: String,
        #[serde(default = "default_mu")]
        mu: Vec<f64>,
        #[serde(default = "default_proxy_size")]
        proxy_size: usize,
        #[serde(default = "default_seed")]
        seed: u64,
        /// Overrides the case study's prescribed λ.
        lambda: Option<f64>,
        output: Option<PathBuf>,
        threads: Option<usize>,
    },
    /// SRSWOR against RHC and high-entropy πPS, for Y ~ N(10, σ²) on
    /// [ln 200, ln 300].
    Designs {
        #[serde(default = "config::default_parameters", alias = "parameter", deserialize_with = "one_or_many")]
        parameters: Vec<String>,
        #[serde(default = "default_kind", alias = "estimator", deserialize_with = "one_or_many")]
        estimators: Vec<String>,
        #[serde(default = "default_sigma")]
        sigma: Vec<f64>,
        #[serde(default = "default_proxy_size")]
        proxy_size: usize,
        #[serde(default = "default_seed")]
        seed: u64,
        /// Overrides the case study's prescribed λ.
        lambda: Option<f64>,
        output: Option<PathBuf>,
        threads: Option<usize>,
    },
    /// Median against the mean and the GREG estimator under SRSWOR.
    MeanMedian {
        /// `exponential_power` or `student_t`; omit when `population` is given.
        family: Option<String>,
        #[serde(default)]
        shape: Vec<f64>,
        rho2: Option<f64>,
        /// Empirical source instead of a closed-form family.
        population: Option<PathBuf>,
        #[serde(default = "default_lambda")]
        lambda: f64,
        output: Option<PathBuf>,
        threads: Option<usize>,
    },
}

/// Proxy settings shared by the two case studies.
#[derive(Debug, Clone, Copy)]
struct ProxyKeys {
    proxy_size: usize,
    seed: u64,
    lambda: Option<f64>,
}

fn default_design() -> String {
    "srswor".into()
}

fn default_kind() -> Vec<String> {
    vec!["sample".into()]
}

fn default_mu() -> Vec<f64> {
    (0..=10).map(f64::from).collect()
}

fn default_sigma() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

fn default_lambda() -> f64 {
    0.05
}

fn default_proxy_size() -> usize {
    qproc::asymptotics::DEFAULT_PROXY_SIZE
}

fn default_seed() -> u64 {
    1
}

impl CompareConfig {
    pub fn threads(&self) -> Option<usize> {
        match self {
            CompareConfig::Estimators { threads, .. }
            | CompareConfig::Designs { threads, .. }
            | CompareConfig::MeanMedian { threads, .. } => *threads,
        }
    }

    fn output(&self) -> Option<&PathBuf> {
        match self {
            CompareConfig::Estimators { output, .. }
            | CompareConfig::Designs { output, .. }
            | CompareConfig::MeanMedian { output, .. } => output.as_ref(),
        }
    }
}

/// One output line.
#[derive(Debug, Clone, Default)]
pub struct Row {
    pub condition: String,
    pub parameter: String,
    pub design: String,
    pub estimator: String,
    pub grid: String,
    pub value: Option<f64>,
    pub lambda: Option<f64>,
    pub margin: Option<f64>,
    pub margin_se: Option<f64>,
    pub verdict: Option<bool>,
    pub error: Option<String>,
}

impl Row {
    fn with(mut self, outcome: qproc::Result<ComparisonVerdict>) -> Self {
        match outcome {
            Ok(v) => {
                self.condition = v.condition.name().to_string();
                self.margin = Some(v.margin);
                self.margin_se = v.margin_se;
                self.verdict = Some(v.holds);
            }
            Err(e) => return self.fail(&e),
        }
        self
    }

    fn fail(mut self, e: &qproc::Error) -> Self {
        self.error = Some(e.to_string());
        self
    }

    fn record(&self) -> [String; 11] {
        [
            self.condition.clone(),
            self.parameter.clone(),
            self.design.clone(),
            self.estimator.clone(),
            self.grid.clone(),
            num(self.value),
            num(self.lambda),
            num(self.margin),
            num(self.margin_se),
            self.verdict.map(|v| v.to_string()).unwrap_or_default(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

fn asymptotic_design(name: &str) -> Result<AsymptoticDesign> {
    match name {
        "srswor" | "lms" => Ok(AsymptoticDesign::SrsworLms),
        "rao_sampford" | "he_pips" => Ok(AsymptoticDesign::HePiPs),
        "rhc" => Ok(AsymptoticDesign::Rhc),
        other => Err(CliError::Config(format!(
            "compare supports designs srswor, lms, rao_sampford (he_pips) and rhc, not `{other}`"
        ))),
    }
}

fn proxy_for(study: qproc::Result<CaseStudy>, keys: &ProxyKeys) -> qproc::Result<SuperpopProxy> {
    let study = study?;
    let proxy = study.proxy(keys.proxy_size, keys.seed)?;
    match keys.lambda {
        Some(l) => proxy.with_lambda(l),
        None => Ok(proxy),
    }
}

fn check_lambda(l: f64) -> Result<()> {
    if l > 0.0 && l < 1.0 { Ok(()) } else { Err(CliError::Config(format!("`lambda` = {l} outside (0, 1)"))) }
}

/// Evaluates every grid point. Rows come back in grid order.
pub fn rows(cfg: &CompareConfig, base: &Path) -> Result<Vec<Row>> {
    match cfg {
        CompareConfig::Estimators { parameters, design, mu, proxy_size, seed, lambda, .. } => {
            let proxy = &ProxyKeys { proxy_size: *proxy_size, seed: *seed, lambda: *lambda };
            let params = config::parameters(parameters)?;
            let asym = asymptotic_design(design)?;
            check_keys(proxy)?;
            let per_point: Vec<Vec<Row>> = mu
                .par_iter()
                .map(|&m| {
                    let p = proxy_for(CaseStudy::estimators(m), proxy);
                    params
                        .iter()
                        .map(|param| {
                            let row = Row {
                                condition: estimator_condition(param).into(),
                                parameter: param.label(),
                                design: design.clone(),
                                grid: "mu".into(),
                                value: Some(m),
                                lambda: p.as_ref().ok().map(|p| p.lambda()),
                                ..Row::default()
                            };
                            match &p {
                                Ok(p) => row.with(compare_estimators(p, &asym, param)),
                                Err(e) => row.fail(e),
                            }
                        })
                        .collect()
                })
                .collect();
            Ok(per_point.concat())
        }
        CompareConfig::Designs { parameters, estimators, sigma, proxy_size, seed, lambda, .. } => {
            let proxy = &ProxyKeys { proxy_size: *proxy_size, seed: *seed, lambda: *lambda };
            let params = config::parameters(parameters)?;
            let kinds = config::estimators(estimators)?;
            check_keys(proxy)?;
            let per_point: Vec<Vec<Row>> = sigma
                .par_iter()
                .map(|&s| {
                    let p = proxy_for(CaseStudy::designs(s), proxy);
                    let mut out = Vec::new();
                    for param in &params {
                        for &kind in &kinds {
                            out.extend(design_rows(p.as_ref(), param, kind, s));
                        }
                    }
                    out
                })
                .collect();
            Ok(per_point.concat())
        }
        CompareConfig::MeanMedian { family, shape, rho2, population, lambda, .. } => {
            check_lambda(*lambda)?;
            if let Some(r) = rho2.filter(|r| !(0.0..=1.0).contains(r)) {
                return Err(CliError::Config(format!("`rho2` = {r} outside [0, 1]")));
            }
            let base_row = Row { parameter: "median".into(), design: "srswor".into(), lambda: Some(*lambda), ..Row::default() };
            let expand = |row: Row, res: qproc::Result<qproc::asymptotics::MeanMedianVerdicts>| -> Vec<Row> {
                match res {
                    Ok(v) => std::iter::once(v.median_vs_mean)
                        .chain(v.median_vs_greg)
                        .map(|verdict| row.clone().with(Ok(verdict)))
                        .collect(),
                    Err(e) => vec![Row { condition: "median_vs_mean".into(), ..row }.with(Err(e))],
                }
            };
            match (family.as_deref(), population) {
                (Some(f), None) => {
                    if shape.is_empty() {
                        return Err(CliError::Config("`shape` lists no values".into()));
                    }
                    let (grid, make): (&str, fn(f64) -> ClosedFormFamily) = match f {
                        "exponential_power" => ("alpha", |a| ClosedFormFamily::ExponentialPower { alpha: a }),
                        "student_t" => ("dof", |d| ClosedFormFamily::StudentT { dof: d }),
                        other => {
                            return Err(CliError::Config(format!(
                                "unknown family `{other}`; expected exponential_power or student_t"
                            )))
                        }
                    };
                    Ok(shape
                        .iter()
                        .flat_map(|&v| {
                            let row = Row { grid: grid.into(), value: Some(v), ..base_row.clone() };
                            let src = MeanMedianSource::ClosedForm { family: make(v), rho2: *rho2 };
                            expand(row, compare_mean_median_greg(src, *lambda))
                        })
                        .collect())
                }
                (None, Some(path)) => {
                    if rho2.is_some() || !shape.is_empty() {
                        return Err(CliError::Config("`rho2` and `shape` apply to closed-form families only".into()));
                    }
                    let pop = config::population(&resolve(base, path))?;
                    let row = Row { grid: "population".into(), ..base_row };
                    Ok(expand(row, compare_mean_median_greg(MeanMedianSource::Proxy(&pop), *lambda)))
                }
                _ => Err(CliError::Config("give exactly one of `family` and `population`".into())),
            }
        }
    }
}

fn check_keys(keys: &ProxyKeys) -> Result<()> {
    if keys.proxy_size < 2 {
        return Err(CliError::Config("`proxy_size` must be at least 2".into()));
    }
    keys.lambda.map_or(Ok(()), check_lambda)
}

fn estimator_condition(param: &ParameterSpec) -> &'static str {
    match param {
        ParameterSpec::SmoothL(_) => qproc::Condition::EstimatorsSmoothL.name(),
        ParameterSpec::QuantileFn(_) => qproc::Condition::EstimatorsQuantileFn.name(),
    }
}

/// SRSWOR against each alternative design separately, then against both.
fn design_rows(proxy: std::result::Result<&SuperpopProxy, &qproc::Error>, param: &ParameterSpec, kind: EstimatorKind, sigma: f64) -> Vec<Row> {
    let condition = match param {
        ParameterSpec::SmoothL(_) => qproc::Condition::DesignsSmoothL,
        ParameterSpec::QuantileFn(_) => qproc::Condition::DesignsQuantileFn,
    };
    let base = Row {
        condition: condition.name().into(),
        parameter: param.label(),
        estimator: kind.name().into(),
        grid: "sigma".into(),
        value: Some(sigma),
        lambda: proxy.as_ref().ok().map(|p| p.lambda()),
        ..Row::default()
    };
    let p = match proxy {
        Ok(p) => p,
        Err(e) => return vec![Row { design: "rhc+he_pips".into(), ..base }.fail(e)],
    };
    let margin = |b: &SuperpopProxy, alt: &AsymptoticDesign| -> qproc::Result<f64> {
        Ok(asymptotic_sigma2(b, &AsymptoticDesign::SrsworLms, kind, param)? - asymptotic_sigma2(b, alt, kind, param)?)
    };
    let single = |name: &str, alt: AsymptoticDesign| {
        let verdict = margin(p, &alt).and_then(|m| {
            let se = block_standard_error(p, |b| margin(b, &alt))?;
            Ok(ComparisonVerdict::new(condition, m, se))
        });
        Row { design: name.into(), ..base.clone() }.with(verdict)
    };
    vec![
        single("rhc", AsymptoticDesign::Rhc),
        single("he_pips", AsymptoticDesign::HePiPs),
        Row { design: "rhc+he_pips".into(), ..base.clone() }.with(compare_designs(p, kind, param)),
    ]
}

pub fn run(cfg: &CompareConfig, base: &Path) -> Result<()> {
    let rows = rows(cfg, base)?;
    let mut w = csv::Writer::from_writer(Sink::open(cfg.output().map(|p| resolve(base, p)))?);
    w.write_record(HEADER)?;
    for row in &rows {
        w.write_record(row.record())?;
        if let Some(e) = &row.error {
            eprintln!(
                "warning: {} {} {} at {}={}: {e}",
                row.condition,
                row.parameter,
                row.design,
                row.grid,
                num(row.value)
            );
        }
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))?.finish()
}
