mod common;

use common::{bfs_component, iid_field};
use gfflab_core::gff::{dirichlet_green, DirichletSampler};
use gfflab_core::lattice::{inner_boundary, BoxRegion, LatticePoint};
use gfflab_core::level_set::{clusters, open_edges, Sign};
use gfflab_core::observables::{
    crossing_indicator, exact_two_point, one_arm_indicator, two_point_indicator, BoundaryWeights,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn one_arm_events_are_nested_and_match_search(seed in any::<u64>(), shift in -0.3f64..1.2) {
        let field = iid_field(3, 6, shift, seed);
        let opened = open_edges(&field, Sign::NonNegative, seed ^ 1);
        let labeling = clusters(&opened);
        let reach = bfs_component(&opened, field.region.center());
        let mut previous = true;
        for n in 0..=6 {
            let arm = one_arm_indicator(&field, &labeling, n).unwrap();
            let oracle = field.values[field.region.center_index()] >= 0.0 && reach.iter().any(|p| p.sup_norm() == n as i64);
            prop_assert_eq!(arm, oracle);
            prop_assert!(previous || !arm);
            previous = arm;
            if n >= 1 && arm {
                prop_assert!(crossing_indicator(&field, &labeling, 1, n).unwrap());
            }
        }
    }

    #[test]
    fn crossings_are_monotone(seed in any::<u64>(), shift in -0.3f64..1.2, n in 1u32..=3, big in 4u32..=6) {
        let field = iid_field(3, 6, shift, seed);
        let labeling = clusters(&open_edges(&field, Sign::NonNegative, seed));
        let cross = |a, b| crossing_indicator(&field, &labeling, a, b).unwrap();
        if cross(n, big) {
            prop_assert!(cross(n, big - 1));
            prop_assert!(cross(n + 1, big));
        }
    }

    #[test]
    fn a_point_reaches_itself(seed in any::<u64>(), coords in prop::collection::vec(-3i64..=3, 3)) {
        let field = iid_field(3, 3, -2.0, seed);
        let labeling = clusters(&open_edges(&field, Sign::NonNegative, seed));
        let x = LatticePoint::new(coords);
        prop_assert!(two_point_indicator(&field, &labeling, &x, &x).unwrap());
    }
}

#[test]
fn one_arm_at_radius_zero_is_a_fair_coin() {
    let sampler = DirichletSampler::new(3, 2).unwrap();
    let trials = 20_000u64;
    let hits = (0..trials)
        .filter(|&s| {
            let field = sampler.sample(s);
            one_arm_indicator(
                &field,
                &clusters(&open_edges(&field, Sign::NonNegative, s)),
                0,
            )
            .unwrap()
        })
        .count() as f64;
    let se = (0.25 / trials as f64).sqrt();
    assert!((hits / trials as f64 - 0.5).abs() <= 3.0 * se);
}

#[test]
fn two_point_frequency_matches_arcsine_law() {
    let m = 6;
    let bx = BoxRegion::centered(3, m).unwrap();
    let sampler = DirichletSampler::new(3, m).unwrap();
    let o = LatticePoint::origin(3);
    for y in [LatticePoint::axis(3, 0, 1), LatticePoint::axis(3, 1, 3)] {
        let trials = 20_000u64;
        let hits = (0..trials)
            .filter(|&s| {
                let field = sampler.sample(s);
                two_point_indicator(
                    &field,
                    &clusters(&open_edges(&field, Sign::NonNegative, s ^ 77)),
                    &o,
                    &y,
                )
                .unwrap()
            })
            .count() as f64;
        let g = |a: &LatticePoint, b: &LatticePoint| dirichlet_green(&bx, a, b).unwrap();
        let exact = exact_two_point(g(&o, &y), g(&o, &o), g(&y, &y));
        let p = hits / trials as f64;
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!(
            (p - exact).abs() <= 3.0 * se,
            "{y:?}: {p} vs {exact} (se {se})"
        );
    }
}

#[test]
fn boundary_average_variance_matches_samples() {
    let (n, m) = (3, 6);
    let weights = BoundaryWeights::new(3, n).unwrap();
    let total: f64 = weights.weights.iter().map(|(_, w)| w).sum();
    assert!((total - 1.0).abs() < 1e-10);
    let shell = inner_boundary(&BoxRegion::centered(3, n).unwrap());
    assert!(weights
        .weights
        .iter()
        .all(|(z, w)| shell.contains(z) && *w > 0.0));

    let sampler = DirichletSampler::new(3, m).unwrap();
    let qs: Vec<f64> = (0..10_000u64)
        .map(|s| weights.q(&sampler.sample(s)).unwrap())
        .collect();
    let var = weights.variance(3, m).unwrap();
    let second = qs.iter().map(|q| q * q).sum::<f64>() / qs.len() as f64;
    let se = var * (2.0 / qs.len() as f64).sqrt();
    assert!((second - var).abs() <= 4.0 * se, "{second} vs {var}");
}
