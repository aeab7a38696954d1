use std::path::PathBuf;

use qproc::population::{generate_truncnorm, generate_truncnorm_stratified, ClusterLayout};
use qproc::TruncNormSpec;
use serde::{Deserialize, Serialize};

use crate::config::resolve;
use crate::error::{CliError, Result};
use crate::output::Sink;

/// `generate`: a truncated-normal population with x = exp(y).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    /// Population size for a flat population; omit when `layout` is given.
    pub size: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_lower")]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
    /// Output CSV; standard output when absent.
    pub output: Option<PathBuf>,
    /// Stratified template: equal-sized clusters in every stratum.
    pub layout: Option<LayoutConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub strata: usize,
    pub clusters_per_stratum: usize,
    pub cluster_size: usize,
}

fn default_mu() -> f64 {
    3.0
}

fn default_sigma() -> f64 {
    1.0
}

fn default_lower() -> f64 {
    0.05f64.ln()
}

fn default_upper() -> f64 {
    500f64.ln()
}

pub fn run(cfg: &GenerateConfig, base: &std::path::Path) -> Result<()> {
    let spec = TruncNormSpec { mu: cfg.mu, sigma: cfg.sigma, lower: cfg.lower, upper: cfg.upper };
    let pop = match (&cfg.layout, cfg.size) {
        (None, Some(size)) => generate_truncnorm(&spec, size, cfg.seed),
        (Some(l), None) => generate_truncnorm_stratified(
            &spec,
            ClusterLayout { strata: l.strata, clusters_per_stratum: l.clusters_per_stratum, cluster_size: l.cluster_size },
            cfg.seed,
        ),
        _ => return Err(CliError::Config("give exactly one of `size` and `layout`".into())),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let mut sink = Sink::open(cfg.output.as_ref().map(|p| resolve(base, p)))?;
    pop.write_csv(&mut sink).map_err(CliError::Runtime)?;
    sink.finish()
}
