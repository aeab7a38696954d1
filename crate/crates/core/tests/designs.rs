use std::collections::HashMap;

use proptest::prelude::*;
use qproc::design::{
    draw, draw_lms, draw_rao_sampford, draw_rhc, draw_srswor, draw_stratified, enumerate_design, enumerated_inclusion,
    inclusion_probabilities, rhc_group_sizes,
};
use qproc::rng::{rng_from_seed, stream};
use qproc::{DesignSpec, Error, Population, PopulationUnit, Variable};

fn subset_law(outcomes: &[(qproc::Sample, f64)]) -> HashMap<Vec<usize>, f64> {
    let mut law = HashMap::new();
    for (s, p) in outcomes {
        let mut idx = s.indices();
        idx.sort();
        *law.entry(idx).or_insert(0.0) += p;
    }
    law
}

#[test]
fn srswor_subset_frequencies() {
    let pop = Population::from_xy(&[0.0; 5], &[1.0; 5]).unwrap();
    let draws = 1_000_000;
    let mut g = rng_from_seed(3);
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..draws {
        let mut idx = draw_srswor(&pop, 2, &mut g).unwrap().indices();
        idx.sort();
        *counts.entry(idx).or_default() += 1;
    }
    assert_eq!(counts.len(), 10);
    let se = (0.1f64 * 0.9 / draws as f64).sqrt();
    for c in counts.values() {
        assert!((*c as f64 / draws as f64 - 0.1).abs() < 4.0 * se);
    }
    assert!(draw_srswor(&pop, 5, &mut g).is_err());
}

#[test]
fn lms_subset_law_and_frequencies() {
    let pop = Population::from_xy(&[0.0; 3], &[1.0, 2.0, 3.0]).unwrap();
    let law = subset_law(&enumerate_design(&DesignSpec::Lms { n: 2 }, &pop).unwrap());
    assert!((law[&vec![0, 1]] - 0.25).abs() < 1e-15);
    assert!((law[&vec![0, 2]] - 1.0 / 3.0).abs() < 1e-15);
    assert!((law[&vec![1, 2]] - 5.0 / 12.0).abs() < 1e-15);

    let pi = inclusion_probabilities(&DesignSpec::Lms { n: 2 }, &pop).unwrap();
    let draws = 1_000_000;
    let mut g = rng_from_seed(5);
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        for i in draw_lms(&pop, 2, &mut g).unwrap().indices() {
            counts[i] += 1;
        }
    }
    for i in 0..3 {
        let se = (pi[i] * (1.0 - pi[i]) / draws as f64).sqrt();
        assert!((counts[i] as f64 / draws as f64 - pi[i]).abs() < 4.0 * se);
    }
}

#[test]
fn pps_probabilities_and_infeasibility() {
    let pop = Population::from_xy(&[0.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let pi = inclusion_probabilities(&DesignSpec::RaoSampford { n: 2 }, &pop).unwrap();
    for (a, b) in pi.iter().zip([0.2, 0.4, 0.6, 0.8]) {
        assert!((a - b).abs() < 1e-15);
    }
    let bad = Population::from_xy(&[0.0; 3], &[1.0, 1.0, 8.0]).unwrap();
    let err = draw_rao_sampford(&bad, 2, &mut rng_from_seed(1)).unwrap_err();
    assert!(matches!(err, Error::PpsInfeasible { .. }));
    assert!(err.to_string().contains("πPS feasibility"));
}

#[test]
fn equal_sizes_reduce_to_srswor() {
    let pop = Population::from_xy(&[0.0; 5], &[2.0; 5]).unwrap();
    let reference = subset_law(&enumerate_design(&DesignSpec::Srswor { n: 2 }, &pop).unwrap());
    for spec in [DesignSpec::Lms { n: 2 }, DesignSpec::RaoSampford { n: 2 }] {
        let law = subset_law(&enumerate_design(&spec, &pop).unwrap());
        for (k, p) in &reference {
            assert!((law[k] - p).abs() < 1e-12);
        }
    }
}

#[test]
fn srswor_enumeration_and_rhc_outcomes() {
    let pop = Population::from_xy(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let out = enumerate_design(&DesignSpec::Srswor { n: 2 }, &pop).unwrap();
    assert_eq!(out.len(), 6);
    assert!(out.iter().all(|(_, p)| (p - 1.0 / 6.0).abs() < 1e-15));

    // Each ordered partition has probability 1/6; the within-group picks multiply it.
    let out = enumerate_design(&DesignSpec::Rhc { n: 2 }, &pop).unwrap();
    assert_eq!(out.len(), 24);
    for (s, p) in &out {
        let picks: f64 = s.units.iter().map(|u| u.x / u.a_total.unwrap()).product();
        assert!((p - picks / 6.0).abs() < 1e-15);
    }
}

#[test]
fn rhc_unbiased_for_identity_and_thresholds() {
    let y = [2.0, -1.0, 4.0, 0.5, 3.0];
    let x = [1.0, 3.0, 2.0, 5.0, 1.5];
    let pop = Population::from_xy(&y, &x).unwrap();
    for n in 1..5 {
        let out = enumerate_design(&DesignSpec::Rhc { n }, &pop).unwrap();
        let mean: f64 = out.iter().map(|(s, p)| p * s.weighted_sum(|v, _| v)).sum();
        assert!((mean - y.iter().sum::<f64>() / 5.0).abs() < 1e-12);
        for t in [-1.0, 0.5, 2.0, 3.0] {
            let e: f64 = out.iter().map(|(s, p)| p * s.weighted_sum(|v, _| (v <= t) as u8 as f64)).sum();
            assert!((e - pop.cdf(Variable::Y, t)).abs() < 1e-12);
        }
    }
}

#[test]
fn rhc_group_size_examples() {
    let mut s = rhc_group_sizes(10, 3);
    s.sort();
    assert_eq!(s, vec![3, 3, 4]);
    assert_eq!(rhc_group_sizes(6, 3), vec![2, 2, 2]);
}

fn stratified_fixture() -> Population {
    let mut units = Vec::new();
    for (j, size) in [2, 2, 2].into_iter().enumerate() {
        for k in 0..size {
            units.push(PopulationUnit::clustered((j * 2 + k) as f64, 1.0 + k as f64, "a", format!("a{j}")));
        }
    }
    Population::new(units).unwrap()
}

#[test]
fn stratified_inclusion_and_frequencies() {
    let pop = stratified_fixture();
    let spec = DesignSpec::Stratified { m: vec![2], r: vec![1] };
    let pi = inclusion_probabilities(&spec, &pop).unwrap();
    assert!(pi.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));

    let draws = 100_000;
    let mut counts = vec![0usize; pop.len()];
    let mut g = rng_from_seed(17);
    for _ in 0..draws {
        for i in draw_stratified(&pop, &spec, &mut g).unwrap().indices() {
            counts[i] += 1;
        }
    }
    let se = (pi[0] * (1.0 - pi[0]) / draws as f64).sqrt();
    for c in counts {
        assert!((c as f64 / draws as f64 - pi[0]).abs() < 4.0 * se);
    }
    // r_h must stay below every cluster size.
    assert!(draw_stratified(&pop, &DesignSpec::Stratified { m: vec![2], r: vec![2] }, &mut g).is_err());
}

fn population_strategy() -> impl Strategy<Value = Population> {
    prop::collection::vec((-10.0f64..10.0, 0.5f64..4.0), 6..40)
        .prop_map(|v| Population::new(v.into_iter().map(|(y, x)| PopulationUnit::new(y, x)).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_stage_samples_are_fixed_size_and_distinct(pop in population_strategy(), seed in any::<u64>(), frac in 0.1f64..0.3) {
        let n = ((pop.len() as f64 * frac) as usize).max(1);
        let specs = [DesignSpec::Srswor { n }, DesignSpec::Lms { n }, DesignSpec::Rhc { n }, DesignSpec::RaoSampford { n }];
        for spec in specs {
            if spec.validate(&pop).is_err() {
                continue;
            }
            let s = draw(&spec, &pop, &mut stream(seed, 0)).unwrap();
            let mut idx = s.indices();
            idx.sort();
            idx.dedup();
            prop_assert_eq!(idx.len(), n);
            prop_assert!(s.units.iter().all(|u| u.d > 0.0 && u.pi > 0.0 && u.pi <= 1.0));
            if matches!(spec, DesignSpec::Rhc { .. }) {
                let a: f64 = s.units.iter().map(|u| u.a_total.unwrap()).sum();
                prop_assert!((a - pop.x_total()).abs() < 1e-9 * pop.x_total());
            } else {
                let pi = inclusion_probabilities(&spec, &pop).unwrap();
                prop_assert!((pi.iter().sum::<f64>() - n as f64).abs() < 1e-9);
                for u in &s.units {
                    prop_assert!((u.d - 1.0 / (pop.len() as f64 * u.pi)).abs() < 1e-12 * u.d);
                }
            }
            let again = draw(&spec, &pop, &mut stream(seed, 0)).unwrap();
            prop_assert_eq!(s, again);
        }
    }

    #[test]
    fn enumeration_marginals_match_closed_forms(x in prop::collection::vec(0.5f64..3.0, 3..=6), n in 1usize..3) {
        let pop = Population::from_xy(&vec![0.0; x.len()], &x).unwrap();
        for spec in [DesignSpec::Srswor { n }, DesignSpec::Lms { n }, DesignSpec::RaoSampford { n }] {
            if spec.validate(&pop).is_err() {
                continue;
            }
            let out = enumerate_design(&spec, &pop).unwrap();
            prop_assert!((out.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12);
            let want = inclusion_probabilities(&spec, &pop).unwrap();
            for (a, b) in enumerated_inclusion(&out, x.len()).iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn rhc_draws_carry_group_totals() {
    let pop = Population::from_xy(&[0.0; 7], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
    let s = draw_rhc(&pop, 3, &mut rng_from_seed(2)).unwrap();
    for u in &s.units {
        let a = u.a_total.unwrap();
        assert!((u.d - a / (7.0 * u.x)).abs() < 1e-15);
    }
}
