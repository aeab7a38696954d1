use nalgebra::DMatrix;
use proptest::prelude::*;
use qproc::asymptotics::{
    asymptotic_kernel, asymptotic_mse, asymptotic_sigma2, compare_designs, compare_estimators, compare_mean_median_greg,
    rhc_constant, AsymptoticKernel, CaseStudy, ClosedFormFamily, MeanMedianSource,
};
use qproc::population::{generate_truncnorm, generate_truncnorm_stratified, ClusterLayout};
use qproc::variance::CovarianceKernel;
use qproc::{AsymptoticDesign, Variable, Condition, DesignSpec, EstimatorKind, ParameterSpec, SuperpopProxy, TruncNormSpec};

fn proxy(mu: f64, n: usize, seed: u64, lambda: f64) -> SuperpopProxy {
    let spec = TruncNormSpec { mu, sigma: 1.0, lower: 0.05f64.ln(), upper: 500f64.ln() };
    SuperpopProxy::new(generate_truncnorm(&spec, n, seed).unwrap(), lambda).unwrap()
}

/// Variance and 1/(4f(0)²) of the density ∝ exp(−|y|^α), by Simpson's rule.
fn exponential_power_oracle(alpha: f64) -> (f64, f64) {
    let (m, hi) = (200_000, 40.0f64.powf(1.0 / alpha));
    let h = hi / m as f64;
    let (mut mass, mut second) = (0.0, 0.0);
    for k in 0..=m {
        let y = k as f64 * h;
        let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let f = (-y.powf(alpha)).exp();
        mass += w * f;
        second += w * y * y * f;
    }
    let (mass, second) = (2.0 * mass * h / 3.0, 2.0 * second * h / 3.0);
    let f0 = 1.0 / mass;
    (second / mass, 1.0 / (4.0 * f0 * f0))
}

#[test]
fn closed_forms_match_numeric_integration() {
    for alpha in [1.0, 1.5, 2.0, 3.0] {
        let fam = ClosedFormFamily::ExponentialPower { alpha };
        let (var, inv) = exponential_power_oracle(alpha);
        assert!((fam.variance().unwrap() - var).abs() < 1e-6 * var, "α={alpha}");
        assert!((fam.inverse_four_f2().unwrap() - inv).abs() < 1e-6 * inv, "α={alpha}");
    }
    // t₃: variance 3 and f(0) = 2/(π√3), so 1/(4f²) = 3π²/16.
    let t3 = ClosedFormFamily::StudentT { dof: 3.0 };
    assert!((t3.variance().unwrap() - 3.0).abs() < 1e-12);
    assert!((t3.inverse_four_f2().unwrap() - 3.0 * std::f64::consts::PI.powi(2) / 16.0).abs() < 1e-12);
    assert!(ClosedFormFamily::StudentT { dof: 2.0 }.variance().is_err());
}

#[test]
fn median_beats_mean_for_heavy_tails_only() {
    let verdict = |family| {
        compare_mean_median_greg(MeanMedianSource::ClosedForm { family, rho2: None }, 0.1).unwrap().median_vs_mean
    };
    let laplace = verdict(ClosedFormFamily::ExponentialPower { alpha: 1.0 });
    assert!(laplace.holds && (laplace.margin - 1.0).abs() < 1e-12);
    assert!(!verdict(ClosedFormFamily::ExponentialPower { alpha: 2.0 }).holds);
    assert!(verdict(ClosedFormFamily::StudentT { dof: 3.0 }).holds);
    assert!(!verdict(ClosedFormFamily::StudentT { dof: 30.0 }).holds);
    assert_eq!(laplace.condition, Condition::MedianVsMean);
    assert!(compare_mean_median_greg(MeanMedianSource::ClosedForm { family: ClosedFormFamily::StudentT { dof: 3.0 }, rho2: None }, 1.0).is_err());
}

#[test]
fn greg_threshold_moves_with_lambda() {
    // Laplace: bound = (1 − 1/2)/(1 − λ); ρ² = 0.6 clears it only while λ < 1/6.
    let laplace = ClosedFormFamily::ExponentialPower { alpha: 1.0 };
    for (lambda, holds) in [(0.1, true), (0.16, true), (0.17, false), (0.5, false)] {
        let v = compare_mean_median_greg(MeanMedianSource::ClosedForm { family: laplace, rho2: Some(0.6) }, lambda)
            .unwrap()
            .median_vs_greg
            .unwrap();
        assert_eq!(v.holds, holds, "λ={lambda}");
        assert!((v.margin - (0.6 - 0.5 / (1.0 - lambda))).abs() < 1e-12);
    }
}

#[test]
fn median_sigma2_is_kernel_diagonal() {
    let p = proxy(4.0, 5000, 1, 0.05);
    for design in [AsymptoticDesign::SrsworLms, AsymptoticDesign::Rhc] {
        for kind in EstimatorKind::ALL {
            let s2 = asymptotic_sigma2(&p, &design, kind, &ParameterSpec::median()).unwrap();
            let k = asymptotic_kernel(&p, &design, kind, 0.5, 0.5).unwrap();
            assert!((s2 - k).abs() < 1e-12 * (1.0 + k));
            let mse = asymptotic_mse(&p, &design, kind, &ParameterSpec::median(), 200).unwrap();
            assert!((mse - s2 / 200.0).abs() < 1e-15 * (1.0 + s2));
        }
    }
    assert!(asymptotic_mse(&p, &AsymptoticDesign::SrsworLms, EstimatorKind::Sample, &ParameterSpec::median(), 0).is_err());
}

#[test]
fn design_mapping_and_rhc_constant() {
    assert_eq!(AsymptoticDesign::of(&DesignSpec::Lms { n: 3 }), AsymptoticDesign::SrsworLms);
    assert_eq!(AsymptoticDesign::of(&DesignSpec::Srswor { n: 3 }), AsymptoticDesign::SrsworLms);
    assert_eq!(AsymptoticDesign::of(&DesignSpec::RaoSampford { n: 3 }), AsymptoticDesign::HePiPs);
    assert_eq!(AsymptoticDesign::of(&DesignSpec::Rhc { n: 3 }), AsymptoticDesign::Rhc);
    assert!((rhc_constant(0.25) - 0.75).abs() < 1e-15);
    // 1/λ = 2.5: λ⌊1/λ⌋ = 0.8, so 0.8·(2 − 0.8 − 0.4) = 0.64.
    assert!((rhc_constant(0.4) - 0.64).abs() < 1e-15);
    // c(λ) is continuous at integer 1/λ.
    assert!((rhc_constant(0.25 + 1e-12) - 0.75).abs() < 1e-9);
    assert!((rhc_constant(0.25 - 1e-12) - 0.75).abs() < 1e-9);
}

#[test]
fn case_study_verdicts_follow_location() {
    // Low μ: the sample estimator loses to some corrected estimator; high μ: it wins.
    let median = ParameterSpec::median();
    let low = CaseStudy::estimators(3.0).unwrap();
    let high = CaseStudy::estimators(6.0).unwrap();
    let v_low = compare_estimators(&low.proxy(20_000, 3).unwrap(), &AsymptoticDesign::SrsworLms, &median).unwrap();
    let v_high = compare_estimators(&high.proxy(20_000, 3).unwrap(), &AsymptoticDesign::SrsworLms, &median).unwrap();
    assert!(!v_low.holds && v_high.holds);
    assert!(v_low.margin_se.unwrap() > 0.0);
    assert_eq!(v_low.condition, Condition::EstimatorsQuantileFn);
}

/// SRSWOR-minus-RHC median margin assembled directly: g²·[(1−λ)·mean(r²) − c·μ_x·mean(r²/x)].
fn rhc_median_margin_oracle(p: &SuperpopProxy) -> f64 {
    let pop = p.population();
    let n = pop.len() as f64;
    let q = p.quantile(Variable::Y, 0.5);
    let f = pop.ys().filter(|&y| y <= q).count() as f64 / n;
    let (mut a, mut b) = (0.0, 0.0);
    for (y, x) in pop.ys().zip(pop.xs()) {
        let r = if y <= q { 1.0 - f } else { -f };
        a += r * r / n;
        b += r * r / (x * n);
    }
    let g = p.density_reciprocal(Variable::Y, 0.5);
    let lambda = p.lambda();
    g * g * ((1.0 - lambda) * a - rhc_constant(lambda) * p.mean_x() * b)
}

#[test]
fn srswor_beats_unequal_probability_designs_for_the_sample_median() {
    let median = ParameterSpec::median();
    for sigma in [2.0, 10.0] {
        let case = CaseStudy::designs(sigma).unwrap();
        let p = case.proxy(50_000, 5).unwrap();
        let rhc = asymptotic_sigma2(&p, &AsymptoticDesign::Rhc, EstimatorKind::Sample, &median).unwrap();
        let srs = asymptotic_sigma2(&p, &AsymptoticDesign::SrsworLms, EstimatorKind::Sample, &median).unwrap();
        let oracle = rhc_median_margin_oracle(&p);
        assert!(((srs - rhc) - oracle).abs() <= 1e-9 * srs, "sigma={sigma}: {} vs {oracle}", srs - rhc);
        // The centred indicator has r² ≈ 1/4, so the margin carries the sign of 1 − μ_x·E[1/x] ≤ 0.
        let v = compare_designs(&p, EstimatorKind::Sample, &median).unwrap();
        assert_eq!(v.condition, Condition::DesignsQuantileFn);
        assert!(v.holds, "sigma={sigma}: margin {}", v.margin);
    }
}

#[test]
fn constant_x_collapses_all_designs() {
    let y: Vec<f64> = (0..4000).map(|i| ((i * 7919) % 4000) as f64 / 4000.0).collect();
    let x = vec![5.0; y.len()];
    let lambda = 0.05;
    let p = SuperpopProxy::new(qproc::Population::from_xy(&y, &x).unwrap(), lambda).unwrap();
    let median = ParameterSpec::median();
    let srs = asymptotic_sigma2(&p, &AsymptoticDesign::SrsworLms, EstimatorKind::Sample, &median).unwrap();
    let pps = asymptotic_sigma2(&p, &AsymptoticDesign::HePiPs, EstimatorKind::Sample, &median).unwrap();
    assert!((srs - pps).abs() <= 1e-12 * srs);
    // 1/λ = 20 is an integer, so c(λ) = 1 − λ and RHC coincides too.
    let rhc = asymptotic_sigma2(&p, &AsymptoticDesign::Rhc, EstimatorKind::Sample, &median).unwrap();
    assert!((srs - rhc).abs() <= 1e-12 * srs);
    let v = compare_designs(&p, EstimatorKind::Sample, &median).unwrap();
    assert!(v.margin.abs() <= 1e-12 * srs && !v.holds);
}

#[test]
fn pps_infeasible_proxy_is_rejected() {
    let p = proxy(2.0, 2000, 2, 0.3);
    assert!(p.pps_ratio() >= 1.0);
    assert!(AsymptoticKernel::new(&p, &AsymptoticDesign::HePiPs, EstimatorKind::Sample).is_err());
    assert!(compare_designs(&p, EstimatorKind::Sample, &ParameterSpec::median()).is_err());
}

fn gram_min_ratio(k: &impl CovarianceKernel) -> f64 {
    let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let g = k.gram(&grid);
    let m = DMatrix::from_fn(9, 9, |i, j| g[i][j]);
    let tr = m.trace();
    m.symmetric_eigen().eigenvalues.min() / tr.max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn limit_kernels_are_psd(mu in 2.0f64..6.0, seed in any::<u64>(), lambda in 0.001f64..0.05) {
        let p = proxy(mu, 3000, seed, lambda);
        let mut designs = vec![AsymptoticDesign::SrsworLms, AsymptoticDesign::Rhc];
        if p.pps_ratio() < 1.0 {
            designs.push(AsymptoticDesign::HePiPs);
        }
        for design in &designs {
            for kind in EstimatorKind::ALL {
                let k = AsymptoticKernel::new(&p, design, kind).unwrap();
                prop_assert!(gram_min_ratio(&k) >= -1e-9, "{:?} {:?}", design, kind);
                prop_assert_eq!(k.cov(0.2, 0.7), k.cov(0.7, 0.2));
            }
        }
    }

    #[test]
    fn verdicts_are_scale_invariant(mu in 2.5f64..5.5, seed in 0u64..1000, c in 0.05f64..30.0) {
        let base = proxy(mu, 1500, seed, 0.01);
        let pop = base.population().map_y(|y| c * y).unwrap();
        let scaled = SuperpopProxy::new(pop, 0.01).unwrap();
        for param in [ParameterSpec::median(), ParameterSpec::trimmed_mean(0.1).unwrap()] {
            let (a, b) = (
                compare_estimators(&base, &AsymptoticDesign::SrsworLms, &param).unwrap(),
                compare_estimators(&scaled, &AsymptoticDesign::SrsworLms, &param).unwrap(),
            );
            prop_assert_eq!(a.holds, b.holds);
            prop_assert!((b.margin - c * c * a.margin).abs() <= 1e-8 * (c * c * a.margin.abs()).max(1e-12));
        }
    }
}

#[test]
fn stratified_limit_kernel_is_psd() {
    let spec = TruncNormSpec { mu: 1.0, sigma: 1.0, lower: -1.0, upper: 3.0 };
    let pop = generate_truncnorm_stratified(&spec, ClusterLayout { strata: 3, clusters_per_stratum: 8, cluster_size: 25 }, 4).unwrap();
    let p = SuperpopProxy::new(pop, 0.1).unwrap();
    let design = AsymptoticDesign::Stratified { m: vec![4], r: vec![5] };
    for kind in EstimatorKind::ALL {
        let k = AsymptoticKernel::new(&p, &design, kind).unwrap();
        assert!(gram_min_ratio(&k) >= -1e-9);
    }
}
