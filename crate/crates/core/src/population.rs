//! Finite populations: ingestion, synthetic generation and exact parameters.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ecdf::Ecdf;
use crate::error::{Error, Result};
use crate::normal;
use crate::rng::rng_from_seed;

/// One population unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationUnit {
    pub y: f64,
    pub x: f64,
    pub stratum: Option<String>,
    pub cluster: Option<String>,
}

impl PopulationUnit {
    pub fn new(y: f64, x: f64) -> Self {
        Self { y, x, stratum: None, cluster: None }
    }

    pub fn clustered(y: f64, x: f64, stratum: impl Into<String>, cluster: impl Into<String>) -> Self {
        Self { y, x, stratum: Some(stratum.into()), cluster: Some(cluster.into()) }
    }
}

/// A cluster and the population indices of its units.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: String,
    pub units: Vec<usize>,
}

/// A stratum and its clusters, in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub id: String,
    pub clusters: Vec<Cluster>,
}

impl Stratum {
    /// Number of units N_h.
    pub fn size(&self) -> usize {
        self.clusters.iter().map(|c| c.units.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Flat,
    Stratified(Vec<Stratum>),
}

/// Which study variable a query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Y,
    X,
}

/// Finite-population moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_y: f64,
    pub mean_x: f64,
    /// Variance of y with divisor N − 1.
    pub s2_y: f64,
    /// Variance of x with divisor N − 1.
    pub s2_x: f64,
    pub r_xy: f64,
    pub mean_xy: f64,
    pub mean_x2: f64,
}

/// An immutable finite population of (y, x) pairs.
#[derive(Debug, Clone)]
pub struct Population {
    units: Vec<PopulationUnit>,
    structure: Structure,
    y_ecdf: Ecdf,
    x_ecdf: Ecdf,
}

impl Population {
    /// Validates the units and infers the stratum/cluster structure.
    pub fn new(units: Vec<PopulationUnit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        for (i, u) in units.iter().enumerate() {
            if !u.y.is_finite() {
                return Err(Error::BadRow { row: i + 1, message: format!("non-finite y {}", u.y) });
            }
            if !(u.x > 0.0) || !u.x.is_finite() {
                return Err(Error::BadRow { row: i + 1, message: format!("x must be positive, got {}", u.x) });
            }
        }
        let structure = infer_structure(&units)?;
        let y: Vec<f64> = units.iter().map(|u| u.y).collect();
        let x: Vec<f64> = units.iter().map(|u| u.x).collect();
        Ok(Self { y_ecdf: Ecdf::unweighted(&y)?, x_ecdf: Ecdf::unweighted(&x)?, units, structure })
    }

    /// Flat population from parallel slices.
    pub fn from_xy(y: &[f64], x: &[f64]) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::InvalidParameter("y and x lengths differ".into()));
        }
        Self::new(y.iter().zip(x).map(|(&y, &x)| PopulationUnit::new(y, x)).collect())
    }

    /// Reads a CSV with header `y,x[,stratum,cluster]`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::read_csv(file)
    }

    /// Reads CSV data from any reader.
    pub fn read_csv(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let iy = col("y").ok_or(Error::MissingColumn("y"))?;
        let ix = col("x").ok_or(Error::MissingColumn("x"))?;
        let (is, ic) = match (col("stratum"), col("cluster")) {
            (Some(s), Some(c)) => (Some(s), Some(c)),
            (None, None) => (None, None),
            _ => return Err(Error::IncompleteStructure),
        };
        let mut units = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = k + 1;
            let num = |i: usize, name: &str| -> Result<f64> {
                let s = rec.get(i).unwrap_or("");
                s.parse::<f64>().map_err(|_| Error::BadRow { row, message: format!("cannot parse {name} `{s}`") })
            };
            let text = |i: Option<usize>| i.map(|i| rec.get(i).unwrap_or("").to_string());
            units.push(PopulationUnit { y: num(iy, "y")?, x: num(ix, "x")?, stratum: text(is), cluster: text(ic) });
        }
        Self::new(units)
    }

    /// Writes the population as CSV; round-trips through [`Population::read_csv`].
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let stratified = self.is_stratified();
        if stratified {
            w.write_record(["y", "x", "stratum", "cluster"])?;
        } else {
            w.write_record(["y", "x"])?;
        }
        for u in &self.units {
            let (y, x) = (u.y.to_string(), u.x.to_string());
            if stratified {
                let s = u.stratum.as_deref().unwrap_or("");
                let c = u.cluster.as_deref().unwrap_or("");
                w.write_record([y.as_str(), x.as_str(), s, c])?;
            } else {
                w.write_record([y.as_str(), x.as_str()])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[PopulationUnit] {
        &self.units
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn is_stratified(&self) -> bool {
        matches!(self.structure, Structure::Stratified(_))
    }

    pub fn strata(&self) -> Option<&[Stratum]> {
        match &self.structure {
            Structure::Stratified(s) => Some(s),
            Structure::Flat => None,
        }
    }

    pub fn y(&self, i: usize) -> f64 {
        self.units[i].y
    }

    pub fn x(&self, i: usize) -> f64 {
        self.units[i].x
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.units.iter().map(|u| u.y)
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.units.iter().map(|u| u.x)
    }

    pub fn x_total(&self) -> f64 {
        self.xs().sum()
    }

    pub fn ecdf(&self, var: Variable) -> &Ecdf {
        match var {
            Variable::Y => &self.y_ecdf,
            Variable::X => &self.x_ecdf,
        }
    }

    /// F_N(t) = #{value ≤ t}/N.
    pub fn cdf(&self, var: Variable, t: f64) -> f64 {
        self.ecdf(var).cdf(t)
    }

    /// Q_N(p) = inf{t : F_N(t) ≥ p}.
    pub fn quantile(&self, var: Variable, p: f64) -> Result<f64> {
        self.ecdf(var).quantile(p)
    }

    /// Population α-trimmed mean τ_{α,N} by its order-statistic formula.
    pub fn trimmed_mean(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidParameter(format!("trimming proportion {alpha} outside (0, 0.5)")));
        }
        let n = self.len();
        let mut ys: Vec<f64> = self.ys().collect();
        ys.sort_by(f64::total_cmp);
        let na = n as f64 * alpha;
        let g = na.floor() as usize;
        let frac = na - g as f64;
        // The order-statistic formula needs two distinct boundary units.
        if g + 1 >= n - g {
            return Err(Error::TrimTooLarge { n, alpha });
        }
        // 1-based Y_(g+2) .. Y_(N-g-1) are 0-based g+1 .. N-g-2.
        let inner: f64 = ys[g + 1..n - g - 1].iter().sum();
        let edge = (1.0 - frac) * (ys[g] + ys[n - g - 1]);
        Ok((inner + edge) / (n as f64 * (1.0 - 2.0 * alpha)))
    }

    /// Finite-population moments. Needs N ≥ 2; r_xy needs non-constant x and y.
    pub fn moments(&self) -> Result<Moments> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidParameter("moments need at least two units".into()));
        }
        let nf = n as f64;
        let mean_y = self.ys().sum::<f64>() / nf;
        let mean_x = self.xs().sum::<f64>() / nf;
        let (mut syy, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
        for u in &self.units {
            let (dy, dx) = (u.y - mean_y, u.x - mean_x);
            syy += dy * dy;
            sxx += dx * dx;
            sxy += dx * dy;
        }
        if syy == 0.0 {
            return Err(Error::ZeroVariance("y"));
        }
        if sxx == 0.0 {
            return Err(Error::ZeroVariance("x"));
        }
        Ok(Moments {
            mean_y,
            mean_x,
            s2_y: syy / (nf - 1.0),
            s2_x: sxx / (nf - 1.0),
            r_xy: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
            mean_xy: self.units.iter().map(|u| u.x * u.y).sum::<f64>() / nf,
            mean_x2: self.xs().map(|x| x * x).sum::<f64>() / nf,
        })
    }

    /// Same units, with y replaced by `f(y)`.
    pub fn map_y(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.units.iter().map(|u| PopulationUnit { y: f(u.y), ..u.clone() }).collect())
    }
}

fn infer_structure(units: &[PopulationUnit]) -> Result<Structure> {
    let labelled = units.iter().filter(|u| u.stratum.is_some() || u.cluster.is_some()).count();
    if labelled == 0 {
        return Ok(Structure::Flat);
    }
    if labelled != units.len() || units.iter().any(|u| u.stratum.is_none() || u.cluster.is_none()) {
        return Err(Error::IncompleteStructure);
    }
    let mut strata: Vec<Stratum> = Vec::new();
    let mut stratum_index: HashMap<&str, usize> = HashMap::new();
    let mut cluster_home: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, u) in units.iter().enumerate() {
        let (s, c) = (u.stratum.as_deref().unwrap(), u.cluster.as_deref().unwrap());
        let h = *stratum_index.entry(s).or_insert_with(|| {
            strata.push(Stratum { id: s.to_string(), clusters: Vec::new() });
            strata.len() - 1
        });
        match cluster_home.get(c) {
            Some(&(h0, j)) if h0 == h => strata[h].clusters[j].units.push(i),
            Some(&(h0, _)) => {
                return Err(Error::ClusterInTwoStrata {
                    cluster: c.to_string(),
                    first: strata[h0].id.clone(),
                    second: s.to_string(),
                })
            }
            None => {
                strata[h].clusters.push(Cluster { id: c.to_string(), units: vec![i] });
                cluster_home.insert(c, (h, strata[h].clusters.len() - 1));
            }
        }
    }
    Ok(Structure::Stratified(strata))
}

/// Normal distribution for Y truncated to `[lower, upper]`, with X = exp(Y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncNormSpec {
    pub mu: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncNormSpec {
    fn validate(&self) -> Result<(f64, f64)> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.lower < self.upper) {
            return Err(Error::InvalidParameter(format!(
                "lower bound {} must be below upper bound {}",
                self.lower, self.upper
            )));
        }
        Ok(((self.lower - self.mu) / self.sigma, (self.upper - self.mu) / self.sigma))
    }

    /// Φ(b) − Φ(a) on the standardized bounds.
    pub fn mass(&self) -> Result<f64> {
        let (a, b) = self.validate()?;
        let m = if a >= 0.0 { normal::sf(a) - normal::sf(b) } else { normal::cdf(b) - normal::cdf(a) };
        if m > 0.0 && m.is_finite() {
            Ok(m)
        } else {
            Err(Error::DegenerateTruncation)
        }
    }

    /// E[Y] for the truncated normal.
    pub fn mean_y(&self) -> Result<f64> {
        let (a, b) = self.validate()?;
        Ok(self.mu + self.sigma * (normal::pdf(a) - normal::pdf(b)) / self.mass()?)
    }

    /// E[exp(Y)] for the truncated normal.
    pub fn mean_x(&self) -> Result<f64> {
        let s = self.sigma;
        let shifted = TruncNormSpec { mu: self.mu + s * s, ..*self };
        let ratio = shifted.mass()? / self.mass()?;
        Ok((self.mu + s * s / 2.0).exp() * ratio)
    }

    /// Inverse-CDF draw given a uniform `u` in (0, 1).
    pub fn inverse(&self, u: f64) -> Result<f64> {
        let (a, b) = self.validate()?;
        let mass = self.mass()?;
        let y = if a >= 0.0 {
            // Work in the upper tail through the reflected variable.
            let lo = normal::sf(b);
            self.mu - self.sigma * normal::quantile(lo + u * mass)
        } else {
            let lo = normal::cdf(a);
            self.mu + self.sigma * normal::quantile(lo + u * mass)
        };
        Ok(y.clamp(self.lower, self.upper))
    }
}

/// Optional stratum/cluster labels for generated populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLayout {
    pub strata: usize,
    pub clusters_per_stratum: usize,
    pub cluster_size: usize,
}

impl ClusterLayout {
    pub fn size(&self) -> usize {
        self.strata * self.clusters_per_stratum * self.cluster_size
    }
}

/// Draws `n` i.i.d. units with Y truncated normal and X = exp(Y).
pub fn generate_truncnorm(spec: &TruncNormSpec, n: usize, seed: u64) -> Result<Population> {
    Population::new(draw_truncnorm_units(spec, n, seed)?)
}

/// As [`generate_truncnorm`], labelling units by consecutive stratum/cluster blocks.
pub fn generate_truncnorm_stratified(spec: &TruncNormSpec, layout: ClusterLayout, seed: u64) -> Result<Population> {
    if layout.size() == 0 {
        return Err(Error::EmptyPopulation);
    }
    let mut units = draw_truncnorm_units(spec, layout.size(), seed)?;
    let per_stratum = layout.clusters_per_stratum * layout.cluster_size;
    for (i, u) in units.iter_mut().enumerate() {
        let h = i / per_stratum;
        let j = (i % per_stratum) / layout.cluster_size;
        u.stratum = Some(format!("{}", h + 1));
        u.cluster = Some(format!("{}-{}", h + 1, j + 1));
    }
    Population::new(units)
}

fn draw_truncnorm_units(spec: &TruncNormSpec, n: usize, seed: u64) -> Result<Vec<PopulationUnit>> {
    if n == 0 {
        return Err(Error::EmptyPopulation);
    }
    spec.mass()?;
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let mut u: f64 = rng.random();
            while u == 0.0 {
                u = rng.random();
            }
            let y = spec.inverse(u)?;
            Ok(PopulationUnit::new(y, y.exp()))
        })
        .collect()
}
