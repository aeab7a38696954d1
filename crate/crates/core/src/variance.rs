//! Plug-in estimates of the covariance kernel K(p₁, p₂), the variance
//! estimates σ̂²₁ and σ̂²₂, and normal-theory confidence intervals.
//!
//! Each kernel estimate has the form `Σ_i w_i r_i(p₁) r_i(p₂)` with
//! nonnegative weights, so it is symmetric and positive semidefinite by
//! construction.

use crate::design::{rhc_gamma, DesignSpec, Sample};
use crate::ecdf::Ecdf;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, SampleView};
use crate::functionals::{ParameterSpec, QuantileShape, SmoothL};
use crate::normal;
use crate::population::{Population, Variable};

/// Subintervals per axis for the σ̂²₁ midpoint rule.
pub const DEFAULT_QUADRATURE_INTERVALS: usize = 100;

/// Difference-quotient estimate of 1/f(Q(p)) with bandwidth 1/√n:
/// `√n (Q(p + 1/√n) − Q(p − 1/√n)) / 2`.
///
/// When a probe point leaves (0, 1) it is moved to `p/2` or `(1 + p)/2` and
/// the quotient uses the actual probe distance.
pub fn density_reciprocal(ecdf: &Ecdf, n: usize, p: f64) -> f64 {
    let h = 1.0 / (n as f64).sqrt();
    let lo = if p - h > 0.0 { p - h } else { 0.5 * p };
    let hi = if p + h < 1.0 { p + h } else { 0.5 * (1.0 + p) };
    (ecdf.quantile_unchecked(hi) - ecdf.quantile_unchecked(lo)) / (hi - lo)
}

/// [`density_reciprocal`] on the weighted CDF of a sample.
pub fn density_reciprocal_hat(view: &SampleView, var: Variable, p: f64) -> f64 {
    density_reciprocal(view.ecdf(var), view.sample().n(), p)
}

/// Per-unit ζ̂_i(p) in sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaHat {
    pub kind: EstimatorKind,
    pub p: f64,
    pub values: Vec<f64>,
}

/// ζ̂_i(p) = 1[Y_i ≤ Q̂_y(p)] f̂_y⁻¹ − b̂ 1[X_i ≤ Q̂_x(p)] f̂_x⁻¹, where b̂ is 0,
/// Q̂_y/Q̂_x, Σ dY/Σ dX or Σ dXY/Σ dX² by estimator.
pub fn zeta_hat(view: &SampleView, kind: EstimatorKind, p: f64) -> ZetaHat {
    let qy = view.ecdf(Variable::Y).quantile_unchecked(p);
    let fy = density_reciprocal_hat(view, Variable::Y, p);
    let (b, qx, fx) = if kind == EstimatorKind::Sample {
        (0.0, 0.0, 0.0)
    } else {
        (view.slope(kind, p), view.ecdf(Variable::X).quantile_unchecked(p), density_reciprocal_hat(view, Variable::X, p))
    };
    let values = view
        .sample()
        .units
        .iter()
        .map(|u| {
            let mut z = if u.y <= qy { fy } else { 0.0 };
            if kind != EstimatorKind::Sample && u.x <= qx {
                z -= b * fx;
            }
            z
        })
        .collect();
    ZetaHat { kind, p, values }
}

/// A covariance kernel K(p₁, p₂).
pub trait CovarianceKernel {
    fn cov(&self, p1: f64, p2: f64) -> f64;

    /// Σ_{g,h} c_g c_h K(p_g, p_h).
    fn quadratic_form(&self, points: &[f64], coeffs: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, (&pi, &ci)) in points.iter().zip(coeffs).enumerate() {
            for (&pj, &cj) in points[i..].iter().zip(&coeffs[i..]).skip(1) {
                s += 2.0 * ci * cj * self.cov(pi, pj);
            }
            s += ci * ci * self.cov(pi, pi);
        }
        s
    }

    /// Matrix [K(p_i, p_j)].
    fn gram(&self, points: &[f64]) -> Vec<Vec<f64>> {
        points.iter().map(|&a| points.iter().map(|&b| self.cov(a, b)).collect()).collect()
    }
}

/// Kernel of the form Σ_i w_i r_i(p₁) r_i(p₂).
pub struct ResidualKernel<'a> {
    weights: Vec<f64>,
    residual: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync + 'a>,
}

impl<'a> ResidualKernel<'a> {
    pub fn new(weights: Vec<f64>, residual: impl Fn(f64) -> Vec<f64> + Send + Sync + 'a) -> Self {
        Self { weights, residual: Box::new(residual) }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn residuals(&self, p: f64) -> Vec<f64> {
        (self.residual)(p)
    }
}

impl CovarianceKernel for ResidualKernel<'_> {
    fn cov(&self, p1: f64, p2: f64) -> f64 {
        let (r1, r2) = (self.residuals(p1), self.residuals(p2));
        self.weights.iter().zip(r1.iter().zip(&r2)).map(|(w, (a, b))| w * (a * b)).sum()
    }

    fn quadratic_form(&self, points: &[f64], coeffs: &[f64]) -> f64 {
        let mut combined = vec![0.0; self.weights.len()];
        for (&p, &c) in points.iter().zip(coeffs) {
            for (acc, r) in combined.iter_mut().zip(self.residuals(p)) {
                *acc += c * r;
            }
        }
        self.weights.iter().zip(&combined).map(|(w, v)| w * (v * v)).sum()
    }
}

/// Kernel-estimator family, fixed by the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignFamily {
    HighEntropy,
    Rhc,
    Stratified,
}

impl DesignFamily {
    pub fn of(design: &DesignSpec) -> Self {
        match design {
            DesignSpec::Srswor { .. } | DesignSpec::Lms { .. } | DesignSpec::RaoSampford { .. } => {
                DesignFamily::HighEntropy
            }
            DesignSpec::Rhc { .. } => DesignFamily::Rhc,
            DesignSpec::Stratified { .. } => DesignFamily::Stratified,
        }
    }
}

/// Estimated kernel K̂ for one sample and estimator.
pub struct KernelEstimate<'a> {
    pub family: DesignFamily,
    pub kind: EstimatorKind,
    kernel: ResidualKernel<'a>,
}

impl CovarianceKernel for KernelEstimate<'_> {
    fn cov(&self, p1: f64, p2: f64) -> f64 {
        self.kernel.cov(p1, p2)
    }

    fn quadratic_form(&self, points: &[f64], coeffs: &[f64]) -> f64 {
        self.kernel.quadratic_form(points, coeffs)
    }
}

impl<'a> KernelEstimate<'a> {
    /// Picks the estimator matching the sample's design.
    pub fn new(view: &'a SampleView<'a>, kind: EstimatorKind) -> Result<Self> {
        match DesignFamily::of(&view.sample().design) {
            DesignFamily::HighEntropy => Self::high_entropy(view, kind),
            DesignFamily::Rhc => Self::rhc(view, kind),
            DesignFamily::Stratified => Self::stratified(view, kind),
        }
    }

    /// (n/N²) Σ (ζ̂ − ζ̄̂ − Ŝπ)(ζ̂ − ζ̄̂ − Ŝπ)(π⁻¹ − 1)π⁻¹ for d = (Nπ)⁻¹.
    pub fn high_entropy(view: &'a SampleView<'a>, kind: EstimatorKind) -> Result<Self> {
        let s = view.sample();
        if DesignFamily::of(&s.design) != DesignFamily::HighEntropy {
            return Err(Error::UnsupportedDesign { design: s.design.name(), operation: "the high-entropy kernel" });
        }
        let (n, big_n) = (s.n() as f64, s.pop_size as f64);
        let pi: Vec<f64> = s.units.iter().map(|u| u.pi).collect();
        let weights = pi.iter().map(|&p| n / (big_n * big_n) * (1.0 / p - 1.0) / p).collect();
        let denom: f64 = pi.iter().map(|&p| 1.0 - p).sum();
        let residual = move |p: f64| {
            let z = zeta_hat(view, kind, p).values;
            let s = view.sample();
            let zbar: f64 = s.units.iter().zip(&z).map(|(u, z)| z / (big_n * u.pi)).sum();
            let shat = if denom > 0.0 {
                s.units.iter().zip(&z).map(|(u, z)| (z - zbar) * (1.0 / u.pi - 1.0)).sum::<f64>() / denom
            } else {
                0.0
            };
            s.units.iter().zip(z).map(|(u, z)| z - zbar - shat * u.pi).collect()
        };
        Ok(Self { family: DesignFamily::HighEntropy, kind, kernel: ResidualKernel::new(weights, residual) })
    }

    /// nγ(X̄/N) Σ (ζ̂ − ζ̄̂)(ζ̂ − ζ̄̂) A/X² for d = A/(NX).
    pub fn rhc(view: &'a SampleView<'a>, kind: EstimatorKind) -> Result<Self> {
        let s = view.sample();
        let DesignSpec::Rhc { n } = s.design else {
            return Err(Error::UnsupportedDesign { design: s.design.name(), operation: "the RHC kernel" });
        };
        let big_n = s.pop_size as f64;
        let xbar = s.x_total / big_n;
        let scale = n as f64 * rhc_gamma(s.pop_size, n) * xbar / big_n;
        let weights = s
            .units
            .iter()
            .map(|u| u.a_total.map(|a| scale * a / (u.x * u.x)).ok_or(Error::MissingGroupTotals))
            .collect::<Result<Vec<f64>>>()?;
        let residual = move |p: f64| {
            let z = zeta_hat(view, kind, p).values;
            let zbar: f64 = view.sample().units.iter().zip(&z).map(|(u, z)| z * u.d).sum();
            z.into_iter().map(|z| z - zbar).collect()
        };
        Ok(Self { family: DesignFamily::Rhc, kind, kernel: ResidualKernel::new(weights, residual) })
    }

    /// (n/N²) Σ_h (N_h²/n_h − N_h) Σ_{j,l} M_h N_hj (ζ̂ − ζ̄̂_h)(ζ̂ − ζ̄̂_h)/(m_h r_h N_h).
    pub fn stratified(view: &'a SampleView<'a>, kind: EstimatorKind) -> Result<Self> {
        let s = view.sample();
        if !matches!(s.design, DesignSpec::Stratified { .. }) {
            return Err(Error::UnsupportedDesign { design: s.design.name(), operation: "the stratified kernel" });
        }
        let infos = s.units.iter().map(|u| u.cluster.ok_or(Error::MissingClusterInfo)).collect::<Result<Vec<_>>>()?;
        let strata = infos.iter().map(|c| c.stratum).max().map_or(0, |h| h + 1);
        let mut counts = vec![0usize; strata];
        for c in &infos {
            counts[c.stratum] += 1;
        }
        for c in &infos {
            if counts[c.stratum] != c.stratum_sample_size() {
                return Err(Error::InvalidDesign(format!(
                    "stratum {} has {} sampled units, expected m_h r_h = {}",
                    c.stratum,
                    counts[c.stratum],
                    c.stratum_sample_size()
                )));
            }
        }
        if let Some(h) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyStratum(h));
        }
        let (n, big_n) = (s.n() as f64, s.pop_size as f64);
        // Within-stratum expansion factor M_h N_hj/(m_h r_h N_h).
        let expand: Vec<f64> = infos
            .iter()
            .map(|c| {
                (c.clusters_in_stratum * c.cluster_size) as f64 / (c.stratum_sample_size() * c.stratum_size) as f64
            })
            .collect();
        let weights = infos
            .iter()
            .zip(&expand)
            .map(|(c, e)| {
                let (nh, big_nh) = (c.stratum_sample_size() as f64, c.stratum_size as f64);
                n / (big_n * big_n) * (big_nh * big_nh / nh - big_nh) * e
            })
            .collect();
        let residual = move |p: f64| {
            let z = zeta_hat(view, kind, p).values;
            let mut means = vec![0.0; strata];
            for ((c, e), z) in infos.iter().zip(&expand).zip(&z) {
                means[c.stratum] += e * z;
            }
            infos.iter().zip(z).map(|(c, z)| z - means[c.stratum]).collect()
        };
        Ok(Self { family: DesignFamily::Stratified, kind, kernel: ResidualKernel::new(weights, residual) })
    }
}

/// Midpoints and weights `J(p_g)Δ` of the σ̂²₁ grid on [α, β].
pub fn quadrature_grid(spec: &SmoothL, intervals: usize) -> (Vec<f64>, Vec<f64>) {
    let width = (spec.beta - spec.alpha) / intervals as f64;
    let points: Vec<f64> = (0..intervals).map(|g| spec.alpha + (g as f64 + 0.5) * width).collect();
    let coeffs = points.iter().map(|&p| spec.weight.eval(p) * width).collect();
    (points, coeffs)
}

/// σ̂²₁ = ∫∫ K̂(p₁,p₂) J(p₁) J(p₂) dp₁ dp₂ by the midpoint rule.
pub fn sigma1_hat(kernel: &impl CovarianceKernel, spec: &SmoothL, intervals: usize) -> f64 {
    let (points, coeffs) = quadrature_grid(spec, intervals);
    kernel.quadratic_form(&points, &coeffs)
}

/// σ̂²₂ = â Δ̂ âᵀ with â = ∇f at `quantiles`.
pub fn sigma2_hat(kernel: &impl CovarianceKernel, shape: &QuantileShape, quantiles: &[f64]) -> Result<f64> {
    let a = shape.gradient(quantiles)?;
    Ok(kernel.quadratic_form(&shape.probabilities(), &a))
}

/// Asymptotic variance estimate of a parameter under the sample's design.
pub fn sigma2_for(
    kernel: &impl CovarianceKernel,
    view: &SampleView,
    param: &ParameterSpec,
    intervals: usize,
) -> Result<f64> {
    match param {
        ParameterSpec::SmoothL(s) => Ok(sigma1_hat(kernel, s, intervals)),
        ParameterSpec::QuantileFn(shape) => {
            let q: Vec<f64> =
                shape.probabilities().iter().map(|&p| view.ecdf(Variable::Y).quantile_unchecked(p)).collect();
            sigma2_hat(kernel, shape, &q)
        }
    }
}

/// Point estimate and estimated asymptotic variance of √n(θ̂ − θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterEstimate {
    pub theta: f64,
    pub sigma2: f64,
    pub n: usize,
}

impl ParameterEstimate {
    pub fn interval(&self, level: f64) -> Result<ConfidenceInterval> {
        confidence_interval(self.theta, self.sigma2.max(0.0).sqrt(), self.n, 1.0 - level)
    }
}

/// θ̂ and σ̂² for one parameter and estimator on a sample.
pub fn estimate_parameter(
    view: &SampleView,
    pop: &Population,
    kind: EstimatorKind,
    param: &ParameterSpec,
    intervals: usize,
) -> Result<ParameterEstimate> {
    let theta = param.evaluate(&view.quantile_function(kind, pop))?;
    let kernel = KernelEstimate::new(view, kind)?;
    let sigma2 = sigma2_for(&kernel, view, param, intervals)?;
    Ok(ParameterEstimate { theta, sigma2, n: view.sample().n() })
}

/// Convenience wrapper building the sample view internally.
pub fn estimate_on_sample(
    sample: &Sample,
    pop: &Population,
    kind: EstimatorKind,
    param: &ParameterSpec,
) -> Result<ParameterEstimate> {
    let view = SampleView::new(sample)?;
    estimate_parameter(&view, pop, kind, param, DEFAULT_QUADRATURE_INTERVALS)
}

/// [θ̂ − z σ̂/√n, θ̂ + z σ̂/√n] with z the upper η/2 normal quantile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub theta_hat: f64,
    pub sigma_hat: f64,
    pub n: usize,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lower <= t && t <= self.upper
    }

    /// A zero-width interval, produced when σ̂ = 0.
    pub fn is_degenerate(&self) -> bool {
        self.sigma_hat == 0.0
    }
}

pub fn confidence_interval(theta_hat: f64, sigma_hat: f64, n: usize, eta: f64) -> Result<ConfidenceInterval> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("η = {eta} outside (0, 1)")));
    }
    if !(sigma_hat >= 0.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("need σ̂ ≥ 0 and n ≥ 1, got σ̂ = {sigma_hat}, n = {n}")));
    }
    let half = normal::two_sided_critical(eta) * sigma_hat / (n as f64).sqrt();
    Ok(ConfidenceInterval {
        lower: theta_hat - half,
        upper: theta_hat + half,
        level: 1.0 - eta,
        theta_hat,
        sigma_hat,
        n,
    })
}
