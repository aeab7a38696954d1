//! Limit covariance kernels evaluated on a large proxy population, asymptotic
//! MSEs, and the conditions under which one estimator or design beats another.
//!
//! Superpopulation expectations are replaced by averages over the proxy, and
//! densities by √N-differenced proxy quantiles. Every kernel has the form
//! `Σ_i w_i r_i(p₁) r_i(p₂)` and reuses [`ResidualKernel`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::design::{stratum_plan, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::functionals::ParameterSpec;
use crate::population::{generate_truncnorm, Population, TruncNormSpec, Variable};
use crate::variance::{
    density_reciprocal, sigma1_hat, sigma2_hat, CovarianceKernel, ResidualKernel, DEFAULT_QUADRATURE_INTERVALS,
};

/// Default proxy size for the truncated-normal case studies.
pub const DEFAULT_PROXY_SIZE: usize = 200_000;

/// Number of blocks used for the proxy-sampling standard error of a margin.
pub const MARGIN_BLOCKS: usize = 4;

/// Smallest flat proxy for which a block standard error is reported.
const MIN_BLOCKED_PROXY: usize = 1_000;

/// A large population standing in for the superpopulation, with limiting
/// sampling fraction λ.
#[derive(Debug, Clone)]
pub struct SuperpopProxy {
    pop: Population,
    lambda: f64,
    mean_y: f64,
    mean_x: f64,
    mean_xy: f64,
    mean_x2: f64,
}

impl SuperpopProxy {
    pub fn new(pop: Population, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("λ must lie in (0, 1), got {lambda}")));
        }
        let n = pop.len() as f64;
        let mean_y = pop.ys().sum::<f64>() / n;
        let mean_x = pop.xs().sum::<f64>() / n;
        let mean_xy = pop.units().iter().map(|u| u.x * u.y).sum::<f64>() / n;
        let mean_x2 = pop.xs().map(|x| x * x).sum::<f64>() / n;
        Ok(Self { pop, lambda, mean_y, mean_x, mean_xy, mean_x2 })
    }

    pub fn population(&self) -> &Population {
        &self.pop
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same population with a different λ.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.pop.clone(), lambda)
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn mean_x(&self) -> f64 {
        self.mean_x
    }

    /// Q_{·,N}(p).
    pub fn quantile(&self, var: Variable, p: f64) -> f64 {
        self.pop.ecdf(var).quantile_unchecked(p)
    }

    /// √N-differenced proxy for 1/f(Q(p)).
    pub fn density_reciprocal(&self, var: Variable, p: f64) -> f64 {
        density_reciprocal(self.pop.ecdf(var), self.pop.len(), p)
    }

    /// Limit of the auxiliary slope for `kind` at `p`.
    pub fn slope(&self, kind: EstimatorKind, p: f64) -> f64 {
        match kind {
            EstimatorKind::Sample => 0.0,
            EstimatorKind::Ratio => self.quantile(Variable::Y, p) / self.quantile(Variable::X, p),
            EstimatorKind::Difference => self.mean_y / self.mean_x,
            EstimatorKind::Regression => self.mean_xy / self.mean_x2,
        }
    }

    /// λ·max(x)/X̄, which must stay below one for πPS designs.
    pub fn pps_ratio(&self) -> f64 {
        self.lambda * self.pop.xs().fold(f64::MIN, f64::max) / self.mean_x
    }
}

/// ζ_i(p) over every proxy unit.
pub fn zeta_population(proxy: &SuperpopProxy, kind: EstimatorKind, p: f64) -> Vec<f64> {
    let qy = proxy.quantile(Variable::Y, p);
    let gy = proxy.density_reciprocal(Variable::Y, p);
    let correction = (kind != EstimatorKind::Sample)
        .then(|| (proxy.quantile(Variable::X, p), proxy.slope(kind, p) * proxy.density_reciprocal(Variable::X, p)));
    proxy
        .pop
        .units()
        .iter()
        .map(|u| {
            let mut z = if u.y <= qy { gy } else { 0.0 };
            if let Some((qx, bg)) = correction {
                if u.x <= qx {
                    z -= bg;
                }
            }
            z
        })
        .collect()
}

/// Design family of a limit kernel. SRSWOR and LMS share one kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AsymptoticDesign {
    SrsworLms,
    /// High-entropy πPS design such as Rao-Sampford.
    HePiPs,
    Rhc,
    Stratified { m: Vec<usize>, r: Vec<usize> },
}

impl AsymptoticDesign {
    pub fn of(design: &DesignSpec) -> Self {
        match design {
            DesignSpec::Srswor { .. } | DesignSpec::Lms { .. } => AsymptoticDesign::SrsworLms,
            DesignSpec::RaoSampford { .. } => AsymptoticDesign::HePiPs,
            DesignSpec::Rhc { .. } => AsymptoticDesign::Rhc,
            DesignSpec::Stratified { m, r } => AsymptoticDesign::Stratified { m: m.clone(), r: r.clone() },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AsymptoticDesign::SrsworLms => "srswor_lms",
            AsymptoticDesign::HePiPs => "he_pi_ps",
            AsymptoticDesign::Rhc => "rhc",
            AsymptoticDesign::Stratified { .. } => "stratified",
        }
    }
}

/// c = lim nγ: 1 − λ when 1/λ is an integer, else λ⌊1/λ⌋(2 − λ⌊1/λ⌋ − λ).
pub fn rhc_constant(lambda: f64) -> f64 {
    let inv = 1.0 / lambda;
    if (inv - inv.round()).abs() < 1e-12 {
        1.0 - lambda
    } else {
        let k = lambda * inv.floor();
        k * (2.0 - k - lambda)
    }
}

/// Limit kernel K(p₁, p₂) for one (design, estimator) pair.
pub struct AsymptoticKernel<'a> {
    pub design: AsymptoticDesign,
    pub kind: EstimatorKind,
    kernel: ResidualKernel<'a>,
}

impl CovarianceKernel for AsymptoticKernel<'_> {
    fn cov(&self, p1: f64, p2: f64) -> f64 {
        self.kernel.cov(p1, p2)
    }

    fn quadratic_form(&self, points: &[f64], coeffs: &[f64]) -> f64 {
        self.kernel.quadratic_form(points, coeffs)
    }
}

impl<'a> AsymptoticKernel<'a> {
    pub fn new(proxy: &'a SuperpopProxy, design: &AsymptoticDesign, kind: EstimatorKind) -> Result<Self> {
        let big_n = proxy.pop.len() as f64;
        let lambda = proxy.lambda;
        let centered = move |p: f64| {
            let z = zeta_population(proxy, kind, p);
            let mean = z.iter().sum::<f64>() / big_n;
            z.into_iter().map(|v| v - mean).collect::<Vec<f64>>()
        };
        let kernel = match design {
            AsymptoticDesign::SrsworLms => {
                ResidualKernel::new(vec![(1.0 - lambda) / big_n; proxy.pop.len()], centered)
            }
            AsymptoticDesign::HePiPs => {
                let ratio = proxy.pps_ratio();
                if ratio >= 1.0 {
                    return Err(Error::PpsInfeasible { ratio });
                }
                let mu = proxy.mean_x;
                let chi = mu - lambda * proxy.mean_x2 / mu;
                let weights = proxy.pop.xs().map(|x| (mu / x - lambda) / big_n).collect();
                ResidualKernel::new(weights, move |p| {
                    let r = centered(p);
                    let c = r.iter().zip(proxy.pop.xs()).map(|(v, x)| v * (x - mu)).sum::<f64>() / big_n;
                    let s = lambda * c / (chi * mu);
                    r.into_iter().zip(proxy.pop.xs()).map(|(v, x)| v + s * x).collect()
                })
            }
            AsymptoticDesign::Rhc => {
                let c = rhc_constant(lambda);
                let weights = proxy.pop.xs().map(|x| c * proxy.mean_x / (big_n * x)).collect();
                ResidualKernel::new(weights, centered)
            }
            AsymptoticDesign::Stratified { m, r } => {
                let spec = DesignSpec::Stratified { m: m.clone(), r: r.clone() };
                let plan = stratum_plan(&spec, &proxy.pop)?;
                let strata = proxy.pop.strata().expect("stratum_plan checked the structure");
                let n: usize = plan.iter().map(|&(m, r)| m * r).sum();
                let mut stratum_of = vec![0usize; proxy.pop.len()];
                let mut weights = vec![0.0; proxy.pop.len()];
                for (h, s) in strata.iter().enumerate() {
                    let (nh, big_nh) = ((plan[h].0 * plan[h].1) as f64, s.size() as f64);
                    let w = n as f64 * (big_nh - nh) / (big_n * big_n * nh);
                    for &i in s.clusters.iter().flat_map(|c| &c.units) {
                        stratum_of[i] = h;
                        weights[i] = w;
                    }
                }
                let sizes: Vec<f64> = strata.iter().map(|s| s.size() as f64).collect();
                ResidualKernel::new(weights, move |p| {
                    let z = zeta_population(proxy, kind, p);
                    let mut sums = vec![0.0; sizes.len()];
                    for (v, &h) in z.iter().zip(&stratum_of) {
                        sums[h] += v;
                    }
                    z.iter().zip(&stratum_of).map(|(v, &h)| v - sums[h] / sizes[h]).collect()
                })
            }
        };
        Ok(Self { design: design.clone(), kind, kernel })
    }
}

/// K(p₁, p₂) on the proxy.
pub fn asymptotic_kernel(
    proxy: &SuperpopProxy,
    design: &AsymptoticDesign,
    kind: EstimatorKind,
    p1: f64,
    p2: f64,
) -> Result<f64> {
    Ok(AsymptoticKernel::new(proxy, design, kind)?.cov(p1, p2))
}

/// Limit variance σ² of √n(θ̂ − θ). The gradient for functions of quantiles
/// is taken at the proxy quantiles Q_{y,N}(p_k).
pub fn asymptotic_sigma2(
    proxy: &SuperpopProxy,
    design: &AsymptoticDesign,
    kind: EstimatorKind,
    param: &ParameterSpec,
) -> Result<f64> {
    let kernel = AsymptoticKernel::new(proxy, design, kind)?;
    match param {
        ParameterSpec::SmoothL(s) => Ok(sigma1_hat(&kernel, s, DEFAULT_QUADRATURE_INTERVALS)),
        ParameterSpec::QuantileFn(shape) => {
            let q: Vec<f64> = shape.probabilities().iter().map(|&p| proxy.quantile(Variable::Y, p)).collect();
            sigma2_hat(&kernel, shape, &q)
        }
    }
}

/// σ²/n.
pub fn asymptotic_mse(
    proxy: &SuperpopProxy,
    design: &AsymptoticDesign,
    kind: EstimatorKind,
    param: &ParameterSpec,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    Ok(asymptotic_sigma2(proxy, design, kind, param)? / n as f64)
}

/// Which comparison a verdict answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Sample smooth-L estimator beats every auxiliary-corrected one.
    EstimatorsSmoothL,
    /// Sample function-of-quantiles estimator beats every corrected one.
    EstimatorsQuantileFn,
    /// SRSWOR beats RHC and HEπPS for a smooth-L parameter.
    DesignsSmoothL,
    /// SRSWOR beats RHC and HEπPS for a function of quantiles.
    DesignsQuantileFn,
    /// Sample median beats the sample mean.
    MedianVsMean,
    /// Sample median beats the GREG mean.
    MedianVsGreg,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::EstimatorsSmoothL => "estimators_smooth_l",
            Condition::EstimatorsQuantileFn => "estimators_quantile_fn",
            Condition::DesignsSmoothL => "designs_smooth_l",
            Condition::DesignsQuantileFn => "designs_quantile_fn",
            Condition::MedianVsMean => "median_vs_mean",
            Condition::MedianVsGreg => "median_vs_greg",
        }
    }

    /// Whether the condition reads `margin < 0` rather than `margin > 0`.
    pub fn holds_below_zero(self) -> bool {
        !matches!(self, Condition::MedianVsMean | Condition::MedianVsGreg)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of a comparison condition.
///
/// For the estimator and design comparisons the margin is the largest
/// variance difference `σ²_base − σ²_rival` and the condition holds when it is
/// negative. For the median conditions the margin is the left side minus the
/// right side and the condition holds when it is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonVerdict {
    pub condition: Condition,
    pub holds: bool,
    pub margin: f64,
    /// Proxy-sampling standard error of the margin, from disjoint proxy blocks.
    pub margin_se: Option<f64>,
}

impl ComparisonVerdict {
    pub fn new(condition: Condition, margin: f64, margin_se: Option<f64>) -> Self {
        let holds = if condition.holds_below_zero() { margin < 0.0 } else { margin > 0.0 };
        Self { condition, holds, margin, margin_se }
    }
}

/// Standard error of `margin` from [`MARGIN_BLOCKS`] contiguous proxy blocks.
/// `None` for stratified or small proxies.
pub fn block_standard_error(
    proxy: &SuperpopProxy,
    margin: impl Fn(&SuperpopProxy) -> Result<f64>,
) -> Result<Option<f64>> {
    let pop = &proxy.pop;
    if pop.is_stratified() || pop.len() < MIN_BLOCKED_PROXY {
        return Ok(None);
    }
    let size = pop.len() / MARGIN_BLOCKS;
    let mut values = Vec::with_capacity(MARGIN_BLOCKS);
    for b in 0..MARGIN_BLOCKS {
        let units = &pop.units()[b * size..(b + 1) * size];
        let y: Vec<f64> = units.iter().map(|u| u.y).collect();
        let x: Vec<f64> = units.iter().map(|u| u.x).collect();
        let block = SuperpopProxy::new(Population::from_xy(&y, &x)?, proxy.lambda)?;
        values.push(margin(&block)?);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    Ok(Some((var / k).sqrt()))
}

fn estimator_margin(proxy: &SuperpopProxy, design: &AsymptoticDesign, param: &ParameterSpec) -> Result<f64> {
    let base = asymptotic_sigma2(proxy, design, EstimatorKind::Sample, param)?;
    let mut margin = f64::NEG_INFINITY;
    for kind in [EstimatorKind::Ratio, EstimatorKind::Difference, EstimatorKind::Regression] {
        margin = margin.max(base - asymptotic_sigma2(proxy, design, kind, param)?);
    }
    Ok(margin)
}

fn design_margin(proxy: &SuperpopProxy, kind: EstimatorKind, param: &ParameterSpec) -> Result<f64> {
    let base = asymptotic_sigma2(proxy, &AsymptoticDesign::SrsworLms, kind, param)?;
    let rhc = asymptotic_sigma2(proxy, &AsymptoticDesign::Rhc, kind, param)?;
    let pps = asymptotic_sigma2(proxy, &AsymptoticDesign::HePiPs, kind, param)?;
    Ok((base - rhc).max(base - pps))
}

/// Does the sample-quantile-based estimator beat the ratio, difference and
/// regression versions under `design`?
pub fn compare_estimators(
    proxy: &SuperpopProxy,
    design: &AsymptoticDesign,
    param: &ParameterSpec,
) -> Result<ComparisonVerdict> {
    let condition = match param {
        ParameterSpec::SmoothL(_) => Condition::EstimatorsSmoothL,
        ParameterSpec::QuantileFn(_) => Condition::EstimatorsQuantileFn,
    };
    let margin = estimator_margin(proxy, design, param)?;
    let se = block_standard_error(proxy, |b| estimator_margin(b, design, param))?;
    Ok(ComparisonVerdict::new(condition, margin, se))
}

/// Does SRSWOR beat both RHC and HEπPS for estimator `kind`?
pub fn compare_designs(proxy: &SuperpopProxy, kind: EstimatorKind, param: &ParameterSpec) -> Result<ComparisonVerdict> {
    let condition = match param {
        ParameterSpec::SmoothL(_) => Condition::DesignsSmoothL,
        ParameterSpec::QuantileFn(_) => Condition::DesignsQuantileFn,
    };
    let margin = design_margin(proxy, kind, param)?;
    let se = block_standard_error(proxy, |b| design_margin(b, kind, param))?;
    Ok(ComparisonVerdict::new(condition, margin, se))
}

/// Symmetric location families with closed-form variance and median density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClosedFormFamily {
    /// Density ∝ exp(−|y|^α).
    ExponentialPower { alpha: f64 },
    /// Student t with `dof` degrees of freedom.
    StudentT { dof: f64 },
}

impl ClosedFormFamily {
    fn check(&self) -> Result<()> {
        match *self {
            ClosedFormFamily::ExponentialPower { alpha } if !(alpha > 0.0) => {
                Err(Error::InvalidParameter(format!("exponential-power shape must be positive, got {alpha}")))
            }
            ClosedFormFamily::StudentT { dof } if !(dof > 2.0) => {
                Err(Error::InvalidParameter(format!("Student t needs more than 2 degrees of freedom, got {dof}")))
            }
            _ => Ok(()),
        }
    }

    pub fn variance(&self) -> Result<f64> {
        self.check()?;
        Ok(match *self {
            ClosedFormFamily::ExponentialPower { alpha } => {
                (libm::lgamma(3.0 / alpha) - libm::lgamma(1.0 / alpha)).exp()
            }
            ClosedFormFamily::StudentT { dof } => dof / (dof - 2.0),
        })
    }

    /// 1/(4 f²) at the median.
    pub fn inverse_four_f2(&self) -> Result<f64> {
        self.check()?;
        Ok(match *self {
            ClosedFormFamily::ExponentialPower { alpha } => (2.0 * libm::lgamma(1.0 / alpha)).exp() / (alpha * alpha),
            ClosedFormFamily::StudentT { dof } => {
                let lg = libm::lgamma(dof / 2.0) - libm::lgamma((dof + 1.0) / 2.0);
                dof * std::f64::consts::PI * (2.0 * lg).exp() / 4.0
            }
        })
    }
}

/// Where the median-versus-mean quantities come from.
#[derive(Debug, Clone, Copy)]
pub enum MeanMedianSource<'a> {
    /// Empirical: S²_y, r_xy and a √N-differenced density on a proxy.
    Proxy(&'a Population),
    /// Closed form; the GREG comparison needs the squared correlation.
    ClosedForm { family: ClosedFormFamily, rho2: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanMedianVerdicts {
    pub median_vs_mean: ComparisonVerdict,
    pub median_vs_greg: Option<ComparisonVerdict>,
}

/// Median against the mean (σ²_y > 1/(4f²)) and against GREG
/// (ρ² > (1−λ)⁻¹(1 − 1/(4σ²_y f²))) under SRSWOR.
///
/// Both conditions assume the median equals the mean; that premise is not checked.
pub fn compare_mean_median_greg(source: MeanMedianSource, lambda: f64) -> Result<MeanMedianVerdicts> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("λ must lie in (0, 1), got {lambda}")));
    }
    let (sigma2, inv4f2, rho2) = match source {
        MeanMedianSource::Proxy(pop) => {
            let m = pop.moments()?;
            let g = density_reciprocal(pop.ecdf(Variable::Y), pop.len(), 0.5);
            (m.s2_y, g * g / 4.0, Some(m.r_xy * m.r_xy))
        }
        MeanMedianSource::ClosedForm { family, rho2 } => (family.variance()?, family.inverse_four_f2()?, rho2),
    };
    let median_vs_mean = ComparisonVerdict::new(Condition::MedianVsMean, sigma2 - inv4f2, None);
    let median_vs_greg = rho2.map(|r2| {
        let bound = (1.0 - inv4f2 / sigma2) / (1.0 - lambda);
        ComparisonVerdict::new(Condition::MedianVsGreg, r2 - bound, None)
    });
    Ok(MeanMedianVerdicts { median_vs_mean, median_vs_greg })
}

/// A truncated-normal setting with X = exp(Y) and its prescribed λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseStudy {
    pub spec: TruncNormSpec,
    pub lambda: f64,
}

impl CaseStudy {
    /// Y ~ N(μ, 1) on [ln 0.05, ln 500], λ = 1/(20 + ⌊500/E X⌋).
    pub fn estimators(mu: f64) -> Result<Self> {
        let spec = TruncNormSpec { mu, sigma: 1.0, lower: 0.05f64.ln(), upper: 500f64.ln() };
        Self::with_cap(spec, 500.0)
    }

    /// Y ~ N(10, σ²) on [ln 200, ln 300], λ = 1/(20 + ⌊300/E X⌋).
    pub fn designs(sigma: f64) -> Result<Self> {
        let spec = TruncNormSpec { mu: 10.0, sigma, lower: 200f64.ln(), upper: 300f64.ln() };
        Self::with_cap(spec, 300.0)
    }

    fn with_cap(spec: TruncNormSpec, cap: f64) -> Result<Self> {
        let lambda = 1.0 / (20.0 + (cap / spec.mean_x()?).floor());
        Ok(Self { spec, lambda })
    }

    pub fn proxy(&self, size: usize, seed: u64) -> Result<SuperpopProxy> {
        SuperpopProxy::new(generate_truncnorm(&self.spec, size, seed)?, self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::ClusterLayout;

    fn uniform_proxy(n: usize, lambda: f64) -> SuperpopProxy {
        let y: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let x: Vec<f64> = y.iter().map(|v| 1.0 + v + 0.3 * (17.0 * v).sin().abs()).collect();
        SuperpopProxy::new(Population::from_xy(&y, &x).unwrap(), lambda).unwrap()
    }

    #[test]
    fn rhc_constant_branches() {
        assert!((rhc_constant(0.5) - 0.5).abs() < 1e-15);
        assert!((rhc_constant(0.4) - 0.64).abs() < 1e-12);
        assert!((rhc_constant(0.25) - 0.75).abs() < 1e-15);
        // The two branches agree at integer reciprocals.
        let near = rhc_constant(0.25 + 1e-9);
        assert!((near - 0.75).abs() < 1e-6);
    }

    #[test]
    fn uniform_median_kernel() {
        let proxy = uniform_proxy(100_000, 0.1);
        let k = asymptotic_kernel(&proxy, &AsymptoticDesign::SrsworLms, EstimatorKind::Sample, 0.5, 0.5).unwrap();
        assert!((k - 0.225).abs() < 0.0225, "{k}");
        let mse = asymptotic_mse(&proxy, &AsymptoticDesign::SrsworLms, EstimatorKind::Sample, &ParameterSpec::median(), 100)
            .unwrap();
        assert!((mse - k / 100.0).abs() < 1e-15);
    }

    #[test]
    fn srswor_scales_with_one_minus_lambda() {
        let a = uniform_proxy(2_000, 0.1);
        let b = a.with_lambda(0.5).unwrap();
        for kind in EstimatorKind::ALL {
            let ka = asymptotic_kernel(&a, &AsymptoticDesign::SrsworLms, kind, 0.3, 0.6).unwrap();
            let kb = asymptotic_kernel(&b, &AsymptoticDesign::SrsworLms, kind, 0.3, 0.6).unwrap();
            assert!((kb - ka * 0.5 / 0.9).abs() <= 1e-12 * ka.abs().max(1.0));
        }
    }

    #[test]
    fn sample_zeta_two_valued() {
        let proxy = uniform_proxy(500, 0.2);
        let z = zeta_population(&proxy, EstimatorKind::Sample, 0.37);
        let g = proxy.density_reciprocal(Variable::Y, 0.37);
        assert!(z.iter().all(|&v| v == 0.0 || v == g));
    }

    #[test]
    fn zeta_matches_hand_computation() {
        let y = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0, 5.5, 3.5];
        let x = [2.0, 1.0, 3.0, 1.0, 4.0, 7.0, 2.0, 5.0, 4.0, 3.0];
        let proxy = SuperpopProxy::new(Population::from_xy(&y, &x).unwrap(), 0.3).unwrap();
        // N = 10, h = 1/√10 ≈ 0.316, p = 0.5: probes at 0.184 and 0.816.
        let mut ys = y.to_vec();
        ys.sort_by(f64::total_cmp);
        let mut xs = x.to_vec();
        xs.sort_by(f64::total_cmp);
        let h = 1.0 / 10f64.sqrt();
        let q = |v: &[f64], p: f64| v[((p * 10.0).ceil() as usize).max(1) - 1];
        let gy = (q(&ys, 0.5 + h) - q(&ys, 0.5 - h)) / (2.0 * h);
        let gx = (q(&xs, 0.5 + h) - q(&xs, 0.5 - h)) / (2.0 * h);
        let b = y.iter().sum::<f64>() / x.iter().sum::<f64>();
        let (qy, qx) = (q(&ys, 0.5), q(&xs, 0.5));
        let z = zeta_population(&proxy, EstimatorKind::Difference, 0.5);
        for i in 0..10 {
            let want = if y[i] <= qy { gy } else { 0.0 } - if x[i] <= qx { b * gx } else { 0.0 };
            assert!((z[i] - want).abs() < 1e-12, "unit {i}: {} vs {want}", z[i]);
        }
    }

    #[test]
    fn y_equal_x_zeroes_corrected_zetas() {
        let v: Vec<f64> = (1..=200).map(|i| (i as f64).sqrt()).collect();
        let proxy = SuperpopProxy::new(Population::from_xy(&v, &v).unwrap(), 0.1).unwrap();
        for kind in [EstimatorKind::Ratio, EstimatorKind::Difference, EstimatorKind::Regression] {
            assert!(zeta_population(&proxy, kind, 0.42).iter().all(|z| z.abs() < 1e-12));
        }
        let verdict = compare_estimators(&proxy, &AsymptoticDesign::SrsworLms, &ParameterSpec::median()).unwrap();
        assert!(verdict.margin > 0.0 && !verdict.holds);
    }

    #[test]
    fn pps_kernel_equals_high_entropy_form() {
        let proxy = uniform_proxy(3_000, 0.15);
        let pop = proxy.population();
        let big_n = pop.len() as f64;
        let pi: Vec<f64> = pop.xs().map(|x| proxy.lambda() * x / proxy.mean_x()).collect();
        for kind in EstimatorKind::ALL {
            let (p1, p2) = (0.35, 0.7);
            let resid = |p: f64| {
                let z = zeta_population(&proxy, kind, p);
                let zbar = z.iter().sum::<f64>() / big_n;
                let num: f64 = z.iter().zip(&pi).map(|(v, q)| (v - zbar) * (1.0 - q)).sum();
                let den: f64 = pi.iter().map(|q| q * (1.0 - q)).sum();
                let s = num / den;
                z.iter().zip(&pi).map(|(v, q)| v - zbar - s * q).collect::<Vec<_>>()
            };
            let (r1, r2) = (resid(p1), resid(p2));
            let oracle: f64 = (0..pop.len())
                .map(|i| proxy.lambda() / big_n * (1.0 / pi[i] - 1.0) * r1[i] * r2[i])
                .sum();
            let k = asymptotic_kernel(&proxy, &AsymptoticDesign::HePiPs, kind, p1, p2).unwrap();
            assert!((k - oracle).abs() < 1e-9 * oracle.abs().max(1e-3), "{kind:?}: {k} vs {oracle}");
        }
    }

    #[test]
    fn pps_feasibility() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let x = [1.0, 1.0, 1.0, 9.0];
        let proxy = SuperpopProxy::new(Population::from_xy(&y, &x).unwrap(), 0.4).unwrap();
        let err = asymptotic_kernel(&proxy, &AsymptoticDesign::HePiPs, EstimatorKind::Sample, 0.5, 0.5);
        assert!(matches!(err, Err(Error::PpsInfeasible { .. })));
        assert!(compare_designs(&proxy, EstimatorKind::Sample, &ParameterSpec::median()).is_err());
    }

    #[test]
    fn equal_x_designs_tie() {
        let y: Vec<f64> = (0..400).map(|i| ((i * 37) % 400) as f64).collect();
        let proxy = SuperpopProxy::new(Population::from_xy(&y, &vec![2.0; 400]).unwrap(), 0.5).unwrap();
        for param in [ParameterSpec::median(), ParameterSpec::trimmed_mean(0.1).unwrap()] {
            let v = compare_designs(&proxy, EstimatorKind::Sample, &param).unwrap();
            assert_eq!(v.margin, 0.0);
            assert!(!v.holds);
        }
    }

    #[test]
    fn stratified_kernel_centres_within_strata() {
        let spec = TruncNormSpec { mu: 3.0, sigma: 1.0, lower: 0.05f64.ln(), upper: 500f64.ln() };
        let layout = ClusterLayout { strata: 2, clusters_per_stratum: 4, cluster_size: 50 };
        let pop = crate::population::generate_truncnorm_stratified(&spec, layout, 9).unwrap();
        let proxy = SuperpopProxy::new(pop, 0.1).unwrap();
        let design = AsymptoticDesign::Stratified { m: vec![2], r: vec![10] };
        let k = AsymptoticKernel::new(&proxy, &design, EstimatorKind::Sample).unwrap();
        // n = 40, N = 400, N_h = 200, n_h = 20.
        let w = 40.0 * 180.0 / (400.0 * 400.0 * 20.0);
        assert!(k.kernel.weights().iter().all(|&v| (v - w).abs() < 1e-15));
        let r = k.kernel.residuals(0.5);
        for s in proxy.population().strata().unwrap() {
            let sum: f64 = s.clusters.iter().flat_map(|c| &c.units).map(|&i| r[i]).sum();
            assert!(sum.abs() < 1e-9);
        }
    }

    #[test]
    fn scale_invariance_of_verdicts() {
        let case = CaseStudy::estimators(3.0).unwrap();
        let proxy = case.proxy(20_000, 4).unwrap();
        let scaled = SuperpopProxy::new(proxy.population().map_y(|y| 3.0 * y).unwrap(), proxy.lambda()).unwrap();
        for param in [ParameterSpec::median(), ParameterSpec::iqr(), ParameterSpec::trimmed_mean(0.2).unwrap()] {
            let a = compare_estimators(&proxy, &AsymptoticDesign::SrsworLms, &param).unwrap();
            let b = compare_estimators(&scaled, &AsymptoticDesign::SrsworLms, &param).unwrap();
            assert_eq!(a.holds, b.holds);
            assert!((b.margin - 9.0 * a.margin).abs() < 1e-8 * a.margin.abs().max(1e-6), "{} {}", a.margin, b.margin);
        }
    }

    #[test]
    fn closed_form_median_conditions() {
        let normal = ClosedFormFamily::ExponentialPower { alpha: 2.0 };
        let v = compare_mean_median_greg(MeanMedianSource::ClosedForm { family: normal, rho2: Some(0.0) }, 0.3).unwrap();
        assert!(!v.median_vs_mean.holds);
        // For the normal the GREG bound is negative, so the condition holds for any ρ.
        assert!(v.median_vs_greg.unwrap().holds);

        let t3 = ClosedFormFamily::StudentT { dof: 3.0 };
        assert!(compare_mean_median_greg(MeanMedianSource::ClosedForm { family: t3, rho2: None }, 0.1)
            .unwrap()
            .median_vs_mean
            .holds);
        let t5 = ClosedFormFamily::StudentT { dof: 5.0 };
        assert!(!compare_mean_median_greg(MeanMedianSource::ClosedForm { family: t5, rho2: None }, 0.1)
            .unwrap()
            .median_vs_mean
            .holds);
        assert!(ClosedFormFamily::StudentT { dof: 2.0 }.variance().is_err());
    }

    #[test]
    fn laplace_greg_threshold() {
        // X = max(Y, 0) for a standard Laplace Y gives ρ² = 2/3.
        let laplace = ClosedFormFamily::ExponentialPower { alpha: 1.0 };
        for (lambda, want) in [(0.1, true), (0.2, true), (0.3, false), (0.6, false)] {
            let v = compare_mean_median_greg(MeanMedianSource::ClosedForm { family: laplace, rho2: Some(2.0 / 3.0) }, lambda)
                .unwrap();
            assert_eq!(v.median_vs_greg.unwrap().holds, want, "λ = {lambda}");
        }
    }

    #[test]
    fn empirical_median_condition_on_heavy_tails() {
        // Cauchy quantiles on a fine grid: huge variance, finite median density.
        let n = 50_000;
        let y: Vec<f64> = (0..n).map(|i| (std::f64::consts::PI * ((i as f64 + 0.5) / n as f64 - 0.5)).tan()).collect();
        let x: Vec<f64> = y.iter().map(|v| v.abs() + 1.0).collect();
        let pop = Population::from_xy(&y, &x).unwrap();
        let v = compare_mean_median_greg(MeanMedianSource::Proxy(&pop), 0.1).unwrap();
        assert!(v.median_vs_mean.holds);
        // Uniform grid: variance 1/12 is below 1/(4f²) = 1/4.
        let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let pop = Population::from_xy(&u, &x).unwrap();
        let v = compare_mean_median_greg(MeanMedianSource::Proxy(&pop), 0.1).unwrap();
        assert!(!v.median_vs_mean.holds);
        assert!((v.median_vs_mean.margin - (1.0 / 12.0 - 0.25)).abs() < 1e-3);
    }

    #[test]
    fn case_study_lambdas() {
        let c = CaseStudy::estimators(3.0).unwrap();
        let ex = c.spec.mean_x().unwrap();
        assert_eq!(c.lambda, 1.0 / (20.0 + (500.0 / ex).floor()));
        let d = CaseStudy::designs(2.0).unwrap();
        assert!(d.lambda > 0.0 && d.lambda <= 1.0 / 21.0);
    }
}
