use std::io::Write;
use std::path::{Path, PathBuf};

use qproc::{run_simulation, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::config::{self, one_or_many, resolve, DesignKeys};
use crate::error::{CliError, Result};
use crate::output::create;

pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// `simulate`: a Monte Carlo campaign over repeated samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub population: PathBuf,
    pub design: String,
    pub n: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub r: Option<Vec<usize>>,
    #[serde(alias = "I")]
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "config::default_parameters", alias = "parameter", deserialize_with = "one_or_many")]
    pub parameters: Vec<String>,
    #[serde(default = "config::default_estimators", alias = "estimator", deserialize_with = "one_or_many")]
    pub estimators: Vec<String>,
    #[serde(default = "config::default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "config::default_intervals")]
    pub quadrature_intervals: usize,
    /// Directory receiving `report.csv` and `summary.json`.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

impl SimulateConfig {
    pub fn simulation(&self) -> Result<SimulationConfig> {
        let design = DesignKeys { design: self.design.clone(), n: self.n, m: self.m.clone(), r: self.r.clone() }.spec()?;
        if self.replicates == 0 {
            return Err(CliError::Config("`replicates` must be at least 1".into()));
        }
        if self.quadrature_intervals == 0 {
            return Err(CliError::Config("`quadrature_intervals` must be at least 1".into()));
        }
        Ok(SimulationConfig {
            design,
            estimators: config::estimators(&self.estimators)?,
            parameters: config::parameters(&self.parameters)?,
            replicates: self.replicates,
            seed: self.seed,
            levels: config::levels(&self.levels)?,
            quadrature_intervals: self.quadrature_intervals,
        })
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a SimulateConfig,
    report: &'a qproc::SimulationReport,
}

pub fn run(cfg: &SimulateConfig, base: &Path) -> Result<()> {
    let sim = cfg.simulation()?;
    let pop = config::population(&resolve(base, &cfg.population))?;
    config::check_design(&sim.design, &pop)?;
    let report = run_simulation(&pop, &sim)?;

    let dir = resolve(base, &cfg.output_dir);
    let report_path = dir.join(REPORT_FILE);
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_file(&report_path, &buf)?;

    let mut json = serde_json::to_vec_pretty(&Summary { config: cfg, report: &report })?;
    json.push(b'\n');
    write_file(&dir.join(SUMMARY_FILE), &json)?;

    let failures: usize = report.cells.iter().map(|c| c.failures).sum();
    if failures > 0 {
        eprintln!("warning: {failures} replicate cells failed and were excluded (see the `failures` column)");
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create(path)?.write_all(bytes).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}
