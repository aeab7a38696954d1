//! Config files are TOML with flat keys plus the occasional table. Keys may
//! also be given on the command line as `--set key=value`, where `value` is a
//! TOML literal (bare words are taken as strings) and dotted keys address
//! tables. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use qproc::{DesignSpec, EstimatorKind, ParameterSpec, Population};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, Result};

/// Reads `path` (if any), applies `--set` overrides and deserializes.
/// Relative paths inside the config are later resolved against the returned
/// base directory.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, sets: &[String]) -> Result<(T, PathBuf)> {
    let (mut table, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Read { path: p.to_path_buf(), source })?;
            let table: toml::Table =
                text.parse().map_err(|e: toml::de::Error| CliError::Config(format!("{}: {}", p.display(), e.message())))?;
            (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (toml::Table::new(), PathBuf::new()),
    };
    for set in sets {
        apply_override(&mut table, set)?;
    }
    let cfg = toml::Value::Table(table).try_into::<T>().map_err(|e| CliError::Config(e.message().to_string()))?;
    Ok((cfg, base))
}

fn apply_override(table: &mut toml::Table, set: &str) -> Result<()> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{set}` is not of the form key=value")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in `{set}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("`{part}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
}

/// Accepts either a single value or a list.
pub fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

pub fn default_parameters() -> Vec<String> {
    vec!["median".into()]
}

pub fn default_estimators() -> Vec<String> {
    EstimatorKind::ALL.iter().map(|k| k.name().to_string()).collect()
}

pub fn default_levels() -> Vec<f64> {
    qproc::montecarlo::DEFAULT_LEVELS.to_vec()
}

pub fn default_intervals() -> usize {
    qproc::variance::DEFAULT_QUADRATURE_INTERVALS
}

/// Design keys shared by `estimate` and `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignKeys {
    pub design: String,
    pub n: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub r: Option<Vec<usize>>,
}

impl DesignKeys {
    pub fn spec(&self) -> Result<DesignSpec> {
        let need_n = |n: Option<usize>| n.ok_or_else(|| CliError::Config(format!("design `{}` needs `n`", self.design)));
        let single = self.m.is_none() && self.r.is_none();
        let spec = match self.design.as_str() {
            "srswor" if single => DesignSpec::Srswor { n: need_n(self.n)? },
            "lms" if single => DesignSpec::Lms { n: need_n(self.n)? },
            "rao_sampford" if single => DesignSpec::RaoSampford { n: need_n(self.n)? },
            "rhc" if single => DesignSpec::Rhc { n: need_n(self.n)? },
            "srswor" | "lms" | "rao_sampford" | "rhc" => {
                return Err(CliError::Config(format!("design `{}` takes `n`, not `m`/`r`", self.design)))
            }
            "stratified" => match (&self.m, &self.r, self.n) {
                (Some(m), Some(r), None) => DesignSpec::Stratified { m: m.clone(), r: r.clone() },
                _ => return Err(CliError::Config("design `stratified` takes `m` and `r`, not `n`".into())),
            },
            other => {
                return Err(CliError::Config(format!(
                    "unknown design `{other}`; expected srswor, lms, rao_sampford, rhc or stratified"
                )))
            }
        };
        Ok(spec)
    }
}

pub fn parameters(labels: &[String]) -> Result<Vec<ParameterSpec>> {
    if labels.is_empty() {
        return Err(CliError::Config("`parameters` is empty".into()));
    }
    labels.iter().map(|l| l.parse().map_err(|e: qproc::Error| CliError::Config(e.to_string()))).collect()
}

pub fn estimators(names: &[String]) -> Result<Vec<EstimatorKind>> {
    if names.is_empty() {
        return Err(CliError::Config("`estimators` is empty".into()));
    }
    names.iter().map(|n| n.parse().map_err(|e: qproc::Error| CliError::Config(e.to_string()))).collect()
}

pub fn levels(levels: &[f64]) -> Result<Vec<f64>> {
    match levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        Some(l) => Err(CliError::Config(format!("level {l} outside (0, 1)"))),
        None if levels.is_empty() => Err(CliError::Config("`levels` is empty".into())),
        None => Ok(levels.to_vec()),
    }
}

/// Loads a population; malformed files are input errors.
pub fn population(path: &Path) -> Result<Population> {
    Population::load_csv(path).map_err(|e| match e {
        qproc::Error::Io { path, source } => CliError::Read { path, source },
        other => CliError::Input(other),
    })
}

/// Design invariants checked against the population are config errors.
pub fn check_design(spec: &DesignSpec, pop: &Population) -> Result<()> {
    spec.validate(pop).map_err(|e| CliError::Config(e.to_string()))
}

/// `QPROC_THREADS` wins over the config key; otherwise rayon's default.
pub fn init_threads(configured: Option<usize>) -> Result<()> {
    let threads = match std::env::var("QPROC_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| CliError::Config(format!("QPROC_THREADS=`{v}` is not a count")))?),
        Err(_) => configured,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Config("thread count must be at least 1".into()));
        }
        // A second initialisation (only possible in-process) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}
