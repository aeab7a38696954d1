//! Sampling designs, inclusion probabilities, design weights and an exhaustive
//! enumeration oracle for small populations.
//!
//! Every design weight is `d = 1/(N π)` except under RHC, where a drawn unit
//! carries its group's x-total `A` and `d = A/(N X)`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Population;

/// Consecutive Rao-Sampford rejections tolerated before giving up.
pub const RAO_SAMPFORD_MAX_REJECTIONS: usize = 1_000_000;

/// Outcome limit for [`enumerate_design`].
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Sampling design configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignSpec {
    Srswor { n: usize },
    Lms { n: usize },
    RaoSampford { n: usize },
    Rhc { n: usize },
    /// SRSWOR of `m[h]` clusters in stratum `h`, then SRSWOR of `r[h]` units
    /// in each selected cluster. Length-one vectors apply to every stratum.
    Stratified { m: Vec<usize>, r: Vec<usize> },
}

impl DesignSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DesignSpec::Srswor { .. } => "srswor",
            DesignSpec::Lms { .. } => "lms",
            DesignSpec::RaoSampford { .. } => "rao_sampford",
            DesignSpec::Rhc { .. } => "rhc",
            DesignSpec::Stratified { .. } => "stratified",
        }
    }

    /// Expected sample size for `pop`.
    pub fn sample_size(&self, pop: &Population) -> Result<usize> {
        match self {
            DesignSpec::Srswor { n } | DesignSpec::Lms { n } | DesignSpec::RaoSampford { n } | DesignSpec::Rhc { n } => {
                Ok(*n)
            }
            DesignSpec::Stratified { .. } => {
                let plan = stratum_plan(self, pop)?;
                Ok(plan.iter().map(|&(m, r)| m * r).sum())
            }
        }
    }

    /// Checks the design invariants against `pop`.
    pub fn validate(&self, pop: &Population) -> Result<()> {
        let big_n = pop.len();
        match self {
            DesignSpec::Srswor { n } | DesignSpec::Lms { n } | DesignSpec::Rhc { n } => check_size(*n, big_n),
            DesignSpec::RaoSampford { n } => {
                check_size(*n, big_n)?;
                pps_feasible(*n, pop).map(|_| ())
            }
            DesignSpec::Stratified { .. } => stratum_plan(self, pop).map(|_| ()),
        }
    }
}

fn check_size(n: usize, big_n: usize) -> Result<()> {
    if n >= 1 && n < big_n {
        Ok(())
    } else {
        Err(Error::InvalidDesign(format!("sample size must satisfy 1 ≤ n < N, got n = {n}, N = {big_n}")))
    }
}

/// Returns n·max(x)/Σx after checking it is below one.
fn pps_feasible(n: usize, pop: &Population) -> Result<f64> {
    let max = pop.xs().fold(f64::MIN, f64::max);
    let ratio = n as f64 * max / pop.x_total();
    if ratio < 1.0 {
        Ok(ratio)
    } else {
        Err(Error::PpsInfeasible { ratio })
    }
}

/// Per-stratum `(m_h, r_h)` after broadcasting and validation.
pub(crate) fn stratum_plan(spec: &DesignSpec, pop: &Population) -> Result<Vec<(usize, usize)>> {
    let DesignSpec::Stratified { m, r } = spec else {
        unreachable!("stratum_plan called on a single-stage design")
    };
    let strata = pop
        .strata()
        .ok_or_else(|| Error::InvalidDesign("stratified design needs stratum and cluster columns".into()))?;
    let h_count = strata.len();
    let pick = |v: &[usize], h: usize, name: &str| -> Result<usize> {
        match v.len() {
            1 => Ok(v[0]),
            len if len == h_count => Ok(v[h]),
            len => Err(Error::InvalidDesign(format!("`{name}` has {len} entries for {h_count} strata"))),
        }
    };
    strata
        .iter()
        .enumerate()
        .map(|(h, s)| {
            let (mh, rh) = (pick(m, h, "m")?, pick(r, h, "r")?);
            let big_m = s.clusters.len();
            if mh < 1 || mh >= big_m {
                return Err(Error::InvalidDesign(format!(
                    "stratum `{}`: need 1 ≤ m_h < M_h, got m_h = {mh}, M_h = {big_m}",
                    s.id
                )));
            }
            let min_size = s.clusters.iter().map(|c| c.units.len()).min().unwrap_or(0);
            if rh < 1 || rh >= min_size {
                return Err(Error::InvalidDesign(format!(
                    "stratum `{}`: need 1 ≤ r_h < min_j N_hj, got r_h = {rh}, min N_hj = {min_size}",
                    s.id
                )));
            }
            Ok((mh, rh))
        })
        .collect()
}

/// Stratum and cluster metadata attached to a unit drawn by the stratified design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterInfo {
    /// Stratum index h.
    pub stratum: usize,
    /// Cluster index j within the stratum.
    pub cluster: usize,
    /// Number of clusters M_h.
    pub clusters_in_stratum: usize,
    /// Cluster size N_hj.
    pub cluster_size: usize,
    /// Clusters drawn m_h.
    pub clusters_drawn: usize,
    /// Units drawn per cluster r_h.
    pub units_per_cluster: usize,
    /// Stratum size N_h.
    pub stratum_size: usize,
}

impl ClusterInfo {
    /// n_h = m_h r_h.
    pub fn stratum_sample_size(&self) -> usize {
        self.clusters_drawn * self.units_per_cluster
    }
}

/// A drawn unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleUnit {
    pub index: usize,
    pub y: f64,
    pub x: f64,
    /// Inclusion probability. Under RHC this is the within-group selection
    /// probability X/A, which is not the unconditional inclusion probability.
    pub pi: f64,
    pub d: f64,
    pub a_total: Option<f64>,
    pub cluster: Option<ClusterInfo>,
}

/// A drawn sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub units: Vec<SampleUnit>,
    pub design: DesignSpec,
    pub pop_size: usize,
    pub x_total: f64,
}

impl Sample {
    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.units.iter().map(|u| u.index).collect()
    }

    /// Σ_{i∈s} d(i,s)·g(Y_i, X_i).
    pub fn weighted_sum(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.units.iter().map(|u| u.d * g(u.y, u.x)).sum()
    }

    /// Same sample with every y replaced by `f(y)`.
    pub fn map_y(&self, f: impl Fn(f64) -> f64) -> Sample {
        let mut s = self.clone();
        for u in &mut s.units {
            u.y = f(u.y);
        }
        s
    }
}

/// RHC group sizes: k = n(⌊N/n⌋+1) − N groups of size ⌊N/n⌋ come first,
/// the remaining n − k groups have size ⌊N/n⌋ + 1.
pub fn rhc_group_sizes(big_n: usize, n: usize) -> Vec<usize> {
    let base = big_n / n;
    let k = n * (base + 1) - big_n;
    (0..n).map(|r| if r < k { base } else { base + 1 }).collect()
}

/// γ = Σ N_r(N_r − 1)/(N(N − 1)).
pub fn rhc_gamma(big_n: usize, n: usize) -> f64 {
    let num: usize = rhc_group_sizes(big_n, n).iter().map(|&g| g * (g - 1)).sum();
    num as f64 / (big_n as f64 * (big_n as f64 - 1.0))
}

/// First-order inclusion probabilities of every population unit.
///
/// RHC has no closed form and returns [`Error::UnsupportedDesign`]; use
/// [`enumerate_design`] on small populations instead.
pub fn inclusion_probabilities(spec: &DesignSpec, pop: &Population) -> Result<Vec<f64>> {
    spec.validate(pop)?;
    let big_n = pop.len() as f64;
    let total = pop.x_total();
    match spec {
        DesignSpec::Srswor { n } => Ok(vec![*n as f64 / big_n; pop.len()]),
        DesignSpec::Lms { n } => {
            let n = *n as f64;
            Ok(pop.xs().map(|x| (n - 1.0) / (big_n - 1.0) + (x / total) * (big_n - n) / (big_n - 1.0)).collect())
        }
        DesignSpec::RaoSampford { n } => Ok(pop.xs().map(|x| *n as f64 * x / total).collect()),
        DesignSpec::Rhc { .. } => Err(Error::UnsupportedDesign { design: "rhc", operation: "inclusion_probabilities" }),
        DesignSpec::Stratified { .. } => {
            let plan = stratum_plan(spec, pop)?;
            let mut pi = vec![0.0; pop.len()];
            for (s, &(mh, rh)) in pop.strata().unwrap().iter().zip(&plan) {
                for c in &s.clusters {
                    let p = (mh * rh) as f64 / (s.clusters.len() * c.units.len()) as f64;
                    for &i in &c.units {
                        pi[i] = p;
                    }
                }
            }
            Ok(pi)
        }
    }
}

/// Draws one sample according to `spec`.
pub fn draw<R: Rng + ?Sized>(spec: &DesignSpec, pop: &Population, rng: &mut R) -> Result<Sample> {
    match spec {
        DesignSpec::Srswor { n } => draw_srswor(pop, *n, rng),
        DesignSpec::Lms { n } => draw_lms(pop, *n, rng),
        DesignSpec::RaoSampford { n } => draw_rao_sampford(pop, *n, rng),
        DesignSpec::Rhc { n } => draw_rhc(pop, *n, rng),
        DesignSpec::Stratified { .. } => draw_stratified(pop, spec, rng),
    }
}

fn single_stage(spec: DesignSpec, pop: &Population, mut idx: Vec<usize>, pi: impl Fn(usize) -> f64) -> Sample {
    idx.sort_unstable();
    let big_n = pop.len();
    let units = idx
        .into_iter()
        .map(|i| {
            let p = pi(i);
            SampleUnit { index: i, y: pop.y(i), x: pop.x(i), pi: p, d: 1.0 / (big_n as f64 * p), a_total: None, cluster: None }
        })
        .collect();
    Sample { units, design: spec, pop_size: big_n, x_total: pop.x_total() }
}

/// Simple random sampling without replacement.
pub fn draw_srswor<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<Sample> {
    check_size(n, pop.len())?;
    let idx = index::sample(rng, pop.len(), n).into_vec();
    let p = n as f64 / pop.len() as f64;
    Ok(single_stage(DesignSpec::Srswor { n }, pop, idx, |_| p))
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn pick<R: Rng + ?Sized>(rng: &mut R, cum: &[f64]) -> usize {
    let u = rng.random::<f64>() * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

/// Lahiri-Midzuno-Sen: one unit with probability ∝ x, then SRSWOR of n − 1
/// from the remaining units.
pub fn draw_lms<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<Sample> {
    let spec = DesignSpec::Lms { n };
    let pi = inclusion_probabilities(&spec, pop)?;
    let first = pick(rng, &cumulative(pop.xs()));
    let mut idx: Vec<usize> = index::sample(rng, pop.len() - 1, n - 1)
        .into_iter()
        .map(|i| if i >= first { i + 1 } else { i })
        .collect();
    idx.push(first);
    Ok(single_stage(spec, pop, idx, |i| pi[i]))
}

/// Rao-Sampford rejective πPS scheme: the first unit with probability ∝ x,
/// n − 1 further units with replacement and probability ∝ p/(1 − n p),
/// restarting until all n units are distinct.
pub fn draw_rao_sampford<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<Sample> {
    let spec = DesignSpec::RaoSampford { n };
    spec.validate(pop)?;
    let total = pop.x_total();
    let nf = n as f64;
    let first_cum = cumulative(pop.xs());
    let rest_cum = cumulative(pop.xs().map(|x| {
        let p = x / total;
        p / (1.0 - nf * p)
    }));
    let mut chosen = Vec::with_capacity(n);
    let mut seen = vec![false; pop.len()];
    for _ in 0..RAO_SAMPFORD_MAX_REJECTIONS {
        for &i in &chosen {
            seen[i] = false;
        }
        chosen.clear();
        let first = pick(rng, &first_cum);
        seen[first] = true;
        chosen.push(first);
        let mut ok = true;
        for _ in 1..n {
            let i = pick(rng, &rest_cum);
            if seen[i] {
                ok = false;
                break;
            }
            seen[i] = true;
            chosen.push(i);
        }
        if ok {
            return Ok(single_stage(spec, pop, chosen, |i| nf * pop.x(i) / total));
        }
    }
    Err(Error::RejectionLimit(RAO_SAMPFORD_MAX_REJECTIONS))
}

fn rhc_sample(pop: &Population, n: usize, picks: &[(usize, f64)]) -> Sample {
    let big_n = pop.len() as f64;
    let mut units: Vec<SampleUnit> = picks
        .iter()
        .map(|&(i, a)| {
            let x = pop.x(i);
            SampleUnit { index: i, y: pop.y(i), x, pi: x / a, d: a / (big_n * x), a_total: Some(a), cluster: None }
        })
        .collect();
    units.sort_by_key(|u| u.index);
    Sample { units, design: DesignSpec::Rhc { n }, pop_size: pop.len(), x_total: pop.x_total() }
}

/// Rao-Hartley-Cochran: a random split into n groups by successive SRSWOR,
/// then one unit per group with probability ∝ x.
pub fn draw_rhc<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<Sample> {
    check_size(n, pop.len())?;
    let perm = index::sample(rng, pop.len(), pop.len()).into_vec();
    let mut picks = Vec::with_capacity(n);
    let mut start = 0;
    for size in rhc_group_sizes(pop.len(), n) {
        let group = &perm[start..start + size];
        start += size;
        let cum = cumulative(group.iter().map(|&i| pop.x(i)));
        let a = cum[cum.len() - 1];
        picks.push((group[pick(rng, &cum)], a));
    }
    Ok(rhc_sample(pop, n, &picks))
}

fn cluster_unit(pop: &Population, i: usize, info: ClusterInfo) -> SampleUnit {
    let pi = info.stratum_sample_size() as f64 / (info.clusters_in_stratum * info.cluster_size) as f64;
    SampleUnit { index: i, y: pop.y(i), x: pop.x(i), pi, d: 1.0 / (pop.len() as f64 * pi), a_total: None, cluster: Some(info) }
}

fn info_for(pop: &Population, h: usize, j: usize, plan: &[(usize, usize)]) -> ClusterInfo {
    let s = &pop.strata().unwrap()[h];
    ClusterInfo {
        stratum: h,
        cluster: j,
        clusters_in_stratum: s.clusters.len(),
        cluster_size: s.clusters[j].units.len(),
        clusters_drawn: plan[h].0,
        units_per_cluster: plan[h].1,
        stratum_size: s.size(),
    }
}

/// Stratified two-stage SRSWOR, independent across strata and clusters.
pub fn draw_stratified<R: Rng + ?Sized>(pop: &Population, spec: &DesignSpec, rng: &mut R) -> Result<Sample> {
    if !matches!(spec, DesignSpec::Stratified { .. }) {
        return Err(Error::InvalidDesign(format!("expected a stratified design, got `{}`", spec.name())));
    }
    let plan = stratum_plan(spec, pop)?;
    let mut units = Vec::new();
    for (h, s) in pop.strata().unwrap().iter().enumerate() {
        let (mh, rh) = plan[h];
        let mut clusters = index::sample(rng, s.clusters.len(), mh).into_vec();
        clusters.sort_unstable();
        for j in clusters {
            let c = &s.clusters[j];
            let info = info_for(pop, h, j, &plan);
            let mut within = index::sample(rng, c.units.len(), rh).into_vec();
            within.sort_unstable();
            units.extend(within.into_iter().map(|l| cluster_unit(pop, c.units[l], info)));
        }
    }
    Ok(Sample { units, design: spec.clone(), pop_size: pop.len(), x_total: pop.x_total() })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// All k-subsets of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn guard(count: u128) -> Result<()> {
    if count > ENUMERATION_LIMIT {
        Err(Error::EnumerationTooLarge { count, limit: ENUMERATION_LIMIT })
    } else {
        Ok(())
    }
}

/// Every possible sample with its probability.
///
/// RHC outcomes are ordered partitions combined with the within-group picks;
/// distinct outcomes may share a unit set but differ in group totals.
pub fn enumerate_design(spec: &DesignSpec, pop: &Population) -> Result<Vec<(Sample, f64)>> {
    spec.validate(pop)?;
    let big_n = pop.len();
    match spec {
        DesignSpec::Srswor { n } | DesignSpec::Lms { n } | DesignSpec::RaoSampford { n } => {
            guard(binomial(big_n, *n))?;
            let pi = inclusion_probabilities(spec, pop)?;
            let total = pop.x_total();
            let subsets = combinations(big_n, *n);
            let raw: Vec<f64> = match spec {
                DesignSpec::Srswor { .. } => vec![1.0; subsets.len()],
                DesignSpec::Lms { .. } => subsets.iter().map(|s| s.iter().map(|&i| pop.x(i) / total).sum()).collect(),
                _ => {
                    let nf = *n as f64;
                    subsets
                        .iter()
                        .map(|s| {
                            let lam: f64 = s
                                .iter()
                                .map(|&i| {
                                    let p = pop.x(i) / total;
                                    p / (1.0 - nf * p)
                                })
                                .product();
                            lam * s.iter().map(|&i| 1.0 - nf * pop.x(i) / total).sum::<f64>()
                        })
                        .collect()
                }
            };
            let norm: f64 = raw.iter().sum();
            Ok(subsets
                .into_iter()
                .zip(raw)
                .map(|(s, w)| (single_stage(spec.clone(), pop, s, |i| pi[i]), w / norm))
                .collect())
        }
        DesignSpec::Rhc { n } => enumerate_rhc(pop, *n),
        DesignSpec::Stratified { .. } => enumerate_stratified(spec, pop),
    }
}

fn enumerate_rhc(pop: &Population, n: usize) -> Result<Vec<(Sample, f64)>> {
    let big_n = pop.len();
    let sizes = rhc_group_sizes(big_n, n);
    let mut count: u128 = 1;
    let mut remaining = big_n;
    for &g in &sizes {
        count = count.saturating_mul(binomial(remaining, g)).saturating_mul(g as u128);
        remaining -= g;
    }
    guard(count)?;

    // Enumerate ordered partitions as successive subsets of the remaining units.
    let mut partitions: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for &g in &sizes {
        let mut next = Vec::new();
        for part in &partitions {
            let used: Vec<usize> = part.iter().flatten().copied().collect();
            let rest: Vec<usize> = (0..big_n).filter(|i| !used.contains(i)).collect();
            for sub in combinations(rest.len(), g) {
                let mut p = part.clone();
                p.push(sub.into_iter().map(|k| rest[k]).collect());
                next.push(p);
            }
        }
        partitions = next;
    }
    let part_prob = 1.0 / partitions.len() as f64;
    let mut out = Vec::with_capacity(count as usize);
    for part in partitions {
        let totals: Vec<f64> = part.iter().map(|g| g.iter().map(|&i| pop.x(i)).sum()).collect();
        let mut choice = vec![0usize; n];
        loop {
            let picks: Vec<(usize, f64)> = (0..n).map(|r| (part[r][choice[r]], totals[r])).collect();
            let prob = picks.iter().map(|&(i, a)| pop.x(i) / a).product::<f64>() * part_prob;
            out.push((rhc_sample(pop, n, &picks), prob));
            // Odometer over the within-group choices.
            let mut r = 0;
            while r < n {
                choice[r] += 1;
                if choice[r] < part[r].len() {
                    break;
                }
                choice[r] = 0;
                r += 1;
            }
            if r == n {
                break;
            }
        }
    }
    Ok(out)
}

fn enumerate_stratified(spec: &DesignSpec, pop: &Population) -> Result<Vec<(Sample, f64)>> {
    let plan = stratum_plan(spec, pop)?;
    let strata = pop.strata().unwrap();
    let mut bound: u128 = 1;
    for (s, &(mh, rh)) in strata.iter().zip(&plan) {
        let widest = s.clusters.iter().map(|c| binomial(c.units.len(), rh)).max().unwrap_or(1);
        bound = bound.saturating_mul(binomial(s.clusters.len(), mh));
        for _ in 0..mh {
            bound = bound.saturating_mul(widest);
        }
    }
    guard(bound)?;

    // Per-stratum outcomes, then their Cartesian product.
    let mut per_stratum: Vec<Vec<(Vec<SampleUnit>, f64)>> = Vec::new();
    for (h, s) in strata.iter().enumerate() {
        let (mh, rh) = plan[h];
        let mut outcomes = Vec::new();
        for clusters in combinations(s.clusters.len(), mh) {
            let p_clusters = 1.0 / binomial(s.clusters.len(), mh) as f64;
            let mut partial: Vec<(Vec<SampleUnit>, f64)> = vec![(Vec::new(), p_clusters)];
            for &j in &clusters {
                let c = &s.clusters[j];
                let info = info_for(pop, h, j, &plan);
                let p_units = 1.0 / binomial(c.units.len(), rh) as f64;
                let mut next = Vec::new();
                for (units, p) in &partial {
                    for sub in combinations(c.units.len(), rh) {
                        let mut u = units.clone();
                        u.extend(sub.into_iter().map(|l| cluster_unit(pop, c.units[l], info)));
                        next.push((u, p * p_units));
                    }
                }
                partial = next;
            }
            outcomes.extend(partial);
        }
        per_stratum.push(outcomes);
    }
    let mut all: Vec<(Vec<SampleUnit>, f64)> = vec![(Vec::new(), 1.0)];
    for outcomes in per_stratum {
        let mut next = Vec::with_capacity(all.len() * outcomes.len());
        for (units, p) in &all {
            for (more, q) in &outcomes {
                let mut u = units.clone();
                u.extend(more.iter().cloned());
                next.push((u, p * q));
            }
        }
        all = next;
    }
    Ok(all
        .into_iter()
        .map(|(units, p)| (Sample { units, design: spec.clone(), pop_size: pop.len(), x_total: pop.x_total() }, p))
        .collect())
}

/// Marginal inclusion probabilities implied by an enumeration.
pub fn enumerated_inclusion(outcomes: &[(Sample, f64)], big_n: usize) -> Vec<f64> {
    let mut pi = vec![0.0; big_n];
    for (s, p) in outcomes {
        for u in &s.units {
            pi[u.index] += p;
        }
    }
    pi
}
