mod common;

use common::{bfs_component, bfs_labels, iid_field};
use gfflab_core::gff::{fullspace_green, FieldSample, FullspaceSampler, SamplerKind};
use gfflab_core::lattice::{edges_of_box, inner_boundary, BoxRegion, EdgeId, LatticePoint, Region};
use gfflab_core::level_set::{clusters, negative_cluster, open_edges, Sign};
use gfflab_core::observables::cluster_stats;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn labels_match_breadth_first_search(seed in any::<u64>(), radius in 1u32..=4, shift in -0.5f64..1.5) {
        let field = iid_field(3, radius, shift, seed);
        let opened = open_edges(&field, Sign::NonNegative, seed ^ 0x5eed);
        let labeling = clusters(&opened);
        let oracle = bfs_labels(&opened);
        let n = oracle.len();
        for i in 0..n {
            for j in (i + 1)..n.min(i + 40) {
                prop_assert_eq!(labeling.labels()[i] == labeling.labels()[j], oracle[i] == oracle[j]);
            }
        }
        prop_assert_eq!(labeling.count(), oracle.iter().max().unwrap() + 1);
        let stats = cluster_stats(&labeling);
        prop_assert_eq!(stats.histogram.iter().map(|(s, c)| s * c).sum::<usize>(), n);
    }

    #[test]
    fn connected_agrees_with_search(seed in any::<u64>(), k in 0usize..125, m in 0usize..125) {
        let field = iid_field(3, 2, 0.8, seed);
        let opened = open_edges(&field, Sign::NonNegative, seed.wrapping_add(1));
        let labeling = clusters(&opened);
        let (a, b) = (field.region.point_at(k).unwrap(), field.region.point_at(m).unwrap());
        let reach = bfs_component(&opened, &a);
        prop_assert_eq!(labeling.connected(std::slice::from_ref(&a), std::slice::from_ref(&b)).unwrap(), reach.contains(&b));
    }

    #[test]
    fn open_edges_join_strict_same_sign_endpoints(seed in any::<u64>(), positive in any::<bool>()) {
        let sign = if positive { Sign::NonNegative } else { Sign::NonPositive };
        let field = iid_field(3, 2, 0.0, seed);
        let opened = open_edges(&field, sign, seed);
        for e in edges_of_box(&field.region) {
            if !field.region.contains(e.hi()) || !field.region.contains(e.lo()) {
                continue;
            }
            if opened.is_open(&e).unwrap() {
                prop_assert!(sign.admits(field.value_at(e.lo()).unwrap()) && sign.admits(field.value_at(e.hi()).unwrap()));
            }
        }
    }

    #[test]
    fn raising_the_field_never_closes_an_edge(seed in any::<u64>(), lift in prop::collection::vec(0.0f64..1.0, 125)) {
        let low = iid_field(3, 2, 0.0, seed);
        let high_values = low.values.iter().zip(&lift).map(|(v, l)| v + l).collect();
        let high = FieldSample::from_values(low.region.clone(), high_values, seed, SamplerKind::DirichletSpectral);
        let (a, b) = (open_edges(&low, Sign::NonNegative, 7), open_edges(&high, Sign::NonNegative, 7));
        for e in edges_of_box(&low.region) {
            if a.region().contains(e.hi()) && a.is_open(&e).unwrap() {
                prop_assert!(b.is_open(&e).unwrap());
            }
        }
    }

    #[test]
    fn negative_cluster_matches_search(seed in any::<u64>(), shift in -1.0f64..0.5) {
        let field = iid_field(3, 3, shift, seed);
        let opened = open_edges(&field, Sign::NonPositive, seed ^ 3);
        let seeds: Vec<LatticePoint> = inner_boundary(&field.region).into_iter().step_by(7).collect();
        let mask = negative_cluster(&field, &opened, &seeds).unwrap();
        let mut oracle = vec![false; field.region.volume()];
        for s in &seeds {
            for p in bfs_component(&opened, s) {
                oracle[field.region.linear_index(&p).unwrap()] = true;
            }
        }
        prop_assert_eq!(mask.members(), &oracle[..]);
        for s in &seeds {
            prop_assert!(mask.is_member(field.region.linear_index(s).unwrap()));
        }
    }
}

/// `E[1{a > 0, b > 0} (1 - exp(-ab/d))]` for a centred Gaussian pair with
/// variance `v` and covariance `c`, by a tensor midpoint rule.
fn adjacent_open_probability(v: f64, c: f64, d: f64) -> f64 {
    let det = v * v - c * c;
    let s = v.sqrt();
    let (n, hi) = (1500, 9.0 * s);
    let h = hi / n as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let mut total = 0.0;
    for i in 0..n {
        let a = (i as f64 + 0.5) * h;
        for j in 0..n {
            let b = (j as f64 + 0.5) * h;
            let q = (v * a * a - 2.0 * c * a * b + v * b * b) / det;
            total += norm * (-0.5 * q).exp() * -(-a * b / d).exp_m1();
        }
    }
    total * h * h
}

#[test]
fn adjacent_opening_matches_gaussian_integral() {
    let region = BoxRegion::centered(3, 1).unwrap();
    let points: Vec<LatticePoint> = region.points().collect();
    let sampler = FullspaceSampler::new(points).unwrap();
    let o = LatticePoint::origin(3);
    let e1 = LatticePoint::axis(3, 0, 1);
    let edge = EdgeId::new(o.clone(), e1.clone()).unwrap();
    let trials = 100_000u64;
    let hits = (0..trials)
        .filter(|&t| {
            let s = sampler.sample(t);
            let field =
                FieldSample::from_values(region.clone(), s.values, t, SamplerKind::FullspaceDense);
            open_edges(&field, Sign::NonNegative, t.wrapping_mul(31) + 1)
                .is_open(&edge)
                .unwrap()
        })
        .count() as f64;
    let p_hat = hits / trials as f64;
    let se = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    let exact = adjacent_open_probability(
        fullspace_green(&o).unwrap(),
        fullspace_green(&e1).unwrap(),
        3.0,
    );
    assert!(
        (p_hat - exact).abs() <= 3.0 * se,
        "p_hat {p_hat} exact {exact} se {se}"
    );
}
