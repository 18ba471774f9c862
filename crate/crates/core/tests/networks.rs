mod common;

use common::iid_field;
use gfflab_core::gff::{bridge_crossing_probability, dirichlet_green, FieldSample, SamplerKind};
use gfflab_core::harmonic::{
    blocked_green, dense_absorbing_chain, exploration_martingale_record, harmonic_average,
    hat_harmonic_average, hitting_distribution, quadratic_variation, BlockedNetwork,
};
use gfflab_core::lattice::{
    external_boundary, inner_boundary, BallRegion, BoxRegion, LatticePoint,
};
use gfflab_core::level_set::{open_edges, EdgeStatus, Sign};
use gfflab_core::seeding::stream_rng;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;

fn region(m: u32) -> BoxRegion {
    BoxRegion::centered(3, m).unwrap()
}

fn neighbours(bx: &BoxRegion, v: usize) -> Vec<usize> {
    let p = bx.point_at(v).unwrap();
    p.neighbors()
        .filter_map(|q| bx.linear_index(&q).ok())
        .collect()
}

fn random_set(n: usize, k: usize, seed: u64, exclude: &[usize]) -> Vec<usize> {
    let mut rng = stream_rng(seed);
    sample(&mut rng, n, k)
        .into_iter()
        .filter(|v| !exclude.contains(v))
        .collect()
}

/// Network on `bx` keeping only the listed edges (as endpoint pairs), with
/// a reflecting outer boundary.
fn sparse_network(bx: &BoxRegion, keep: &[(LatticePoint, LatticePoint)]) -> BlockedNetwork {
    let mut net = BlockedNetwork::free(bx.clone());
    net.set_outer_absorbing(false);
    let kept: Vec<usize> = keep
        .iter()
        .map(|(a, b)| {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            let axis = b.sub(a).coords().iter().position(|&c| c != 0).unwrap();
            bx.edge_index(bx.linear_index(a).unwrap(), axis)
        })
        .collect();
    for e in (0..bx.edge_slots()).filter(|&e| bx.edge_exists(e) && !kept.contains(&e)) {
        net.set_edge_status(e, EdgeStatus::Removed).unwrap();
    }
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn hitting_weights_match_dense_chain(seed in any::<u64>(), k in 1usize..40) {
        let bx = region(2);
        let v = bx.center_index();
        let d_set = random_set(bx.volume(), k, seed, &[v]);
        let solve = hitting_distribution(&BlockedNetwork::free(bx.clone()), v, &d_set).unwrap();
        let mut absorbing = vec![false; bx.volume()];
        for &a in &d_set {
            absorbing[a] = true;
        }
        let oracle = dense_absorbing_chain(&bx, &absorbing, v).unwrap();
        for &a in &d_set {
            prop_assert!((solve.vertex_weight(a) - oracle[a]).abs() < 1e-9);
        }
        prop_assert!(solve.weights.iter().all(|&(_, w)| w >= -1e-14));
        prop_assert!((solve.total_weight() - 1.0).abs() < 1e-10);
        prop_assert!(solve.residual <= 1e-10);
    }

    #[test]
    fn blocked_green_shrinks_as_the_set_grows(seed in any::<u64>(), k in 1usize..30, extra in 1usize..30) {
        let bx = region(3);
        let x = bx.center_index();
        let small = random_set(bx.volume(), k, seed, &[x]);
        let mut large = small.clone();
        large.extend(random_set(bx.volume(), extra, seed ^ 1, &[x]));
        let mut a = BlockedNetwork::free(bx.clone());
        a.add_absorbing(&small);
        let mut b = BlockedNetwork::free(bx);
        b.add_absorbing(&large);
        prop_assert!(blocked_green(&b, x).unwrap() <= blocked_green(&a, x).unwrap() + 1e-12);
    }

    #[test]
    fn quadratic_variation_forms_agree(seed in any::<u64>(), shift in -1.0f64..0.5, fraction in 0.05f64..1.0) {
        let field = iid_field(3, 4, shift, seed);
        let opened = open_edges(&field, Sign::NonPositive, seed ^ 9);
        let seeds: Vec<LatticePoint> = inner_boundary(&field.region).into_iter().step_by(5).collect();
        let mask = gfflab_core::level_set::negative_cluster_with_fraction(&field, &opened, &seeds, fraction).unwrap();
        let net = BlockedNetwork::from_mask(&mask);
        let x = field.region.center_index();
        prop_assume!(!mask.is_member(x));
        let qv = quadratic_variation(&net, x, &[]).unwrap();
        prop_assert!(qv.direct >= -1e-12);
        prop_assert!((qv.direct - qv.sum).abs() <= 1e-8, "{} vs {}", qv.direct, qv.sum);
    }

    #[test]
    fn hat_average_is_the_neighbour_mean(seed in any::<u64>(), k in 3usize..40) {
        let bx = region(2);
        let field = iid_field(3, 2, 0.0, seed);
        let y = bx.center_index();
        let d2 = random_set(bx.volume(), k, seed, &[y]);
        let d1: Vec<usize> = d2.iter().copied().step_by(2).collect();
        let net = BlockedNetwork::free(bx.clone());
        let direct: f64 = neighbours(&bx, y).iter().map(|&z| harmonic_average(&field, &net, z, &d1, &d2).unwrap()).sum::<f64>() / 6.0;
        prop_assert!((hat_harmonic_average(&field, &net, y, &d1, &d2).unwrap() - direct).abs() < 1e-12);
    }
}

#[test]
fn harmonic_average_examples() {
    let bx = region(2);
    let v = bx.center_index();
    let field = iid_field(3, 2, 0.0, 4);
    let net = BlockedNetwork::free(bx.clone());
    assert_eq!(
        harmonic_average(&field, &net, v, &[v], &[v]).unwrap(),
        field.values[v]
    );

    // v with every incident edge inside D2 is interior
    let mut around = neighbours(&bx, v);
    around.push(v);
    let mut covered = net.clone();
    let strides = bx.strides();
    for (axis, st) in strides.into_iter().enumerate() {
        covered
            .set_edge_status(bx.edge_index(v, axis), EdgeStatus::FullyBlocked)
            .unwrap();
        covered
            .set_edge_status(bx.edge_index(v - st, axis), EdgeStatus::FullyBlocked)
            .unwrap();
    }
    assert_eq!(
        harmonic_average(&field, &covered, v, &around, &around).unwrap(),
        0.0
    );

    // every path out of the box crosses the inner boundary first
    let shell: Vec<usize> = inner_boundary(&bx)
        .iter()
        .map(|p| bx.linear_index(p).unwrap())
        .collect();
    let constant = FieldSample::from_values(
        bx.clone(),
        vec![2.5; bx.volume()],
        0,
        SamplerKind::DirichletSpectral,
    );
    assert!((harmonic_average(&constant, &net, v, &shell, &shell).unwrap() - 2.5).abs() < 1e-10);
}

#[test]
fn hat_average_vanishes_when_every_edge_is_blocked() {
    let bx = region(2);
    let y = bx.center_index();
    let field = iid_field(3, 2, 1.0, 2);
    let mut net = BlockedNetwork::free(bx.clone());
    let strides = bx.strides();
    for (axis, st) in strides.into_iter().enumerate() {
        net.set_edge_status(bx.edge_index(y, axis), EdgeStatus::FullyBlocked)
            .unwrap();
        net.set_edge_status(bx.edge_index(y - st, axis), EdgeStatus::FullyBlocked)
            .unwrap();
    }
    let d: Vec<usize> = inner_boundary(&bx)
        .iter()
        .map(|p| bx.linear_index(p).unwrap())
        .collect();
    assert_eq!(hat_harmonic_average(&field, &net, y, &d, &d).unwrap(), 0.0);
}

#[test]
fn blocked_green_examples() {
    let bx = region(3);
    let x = bx.center_index();
    let free = BlockedNetwork::free(bx.clone());
    let g = dirichlet_green(&bx, &LatticePoint::origin(3), &LatticePoint::origin(3)).unwrap();
    assert!((blocked_green(&free, x).unwrap() - g).abs() < 1e-9);
    let mut surrounded = free.clone();
    surrounded.add_absorbing(&neighbours(&bx, x));
    assert!((blocked_green(&surrounded, x).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn quadratic_variation_examples() {
    let bx = region(3);
    let x = bx.center_index();
    let net = BlockedNetwork::free(bx.clone());
    let empty = quadratic_variation(&net, x, &[]).unwrap();
    assert!(empty.direct.abs() < 1e-10 && empty.sum.abs() < 1e-10);

    let o = LatticePoint::origin(3);
    let g = dirichlet_green(&bx, &o, &o).unwrap();
    let nb = neighbours(&bx, x);
    let first_step: f64 = nb
        .iter()
        .map(|&y| dirichlet_green(&bx, &bx.point_at(y).unwrap(), &o).unwrap())
        .sum::<f64>()
        / 6.0;
    let qv = quadratic_variation(&net, x, &nb).unwrap();
    assert!((qv.direct - (g - 1.0)).abs() < 1e-9);
    assert!((qv.sum - first_step).abs() < 1e-9);
}

#[test]
fn single_edge_conductance() {
    let bx = region(1);
    let (a, b) = (LatticePoint::origin(3), LatticePoint::axis(3, 0, 1));
    let net = sparse_network(&bx, &[(a.clone(), b.clone())]);
    let k = net
        .effective_conductance(bx.linear_index(&a).unwrap(), bx.linear_index(&b).unwrap())
        .unwrap();
    assert!((k - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn parallel_paths_add() {
    let bx = region(1);
    let p = |x: i64, y: i64| LatticePoint::new(vec![x, y, 0]);
    let square = [
        (p(0, 0), p(1, 0)),
        (p(1, 0), p(1, 1)),
        (p(0, 0), p(0, 1)),
        (p(0, 1), p(1, 1)),
    ];
    let net = sparse_network(&bx, &square);
    let k = net
        .effective_conductance(
            bx.linear_index(&p(0, 0)).unwrap(),
            bx.linear_index(&p(1, 1)).unwrap(),
        )
        .unwrap();
    // two series pairs of 1/6 conductances: 2 * (1/12)
    assert!((k - 1.0 / 6.0).abs() < 1e-12);
    let one_path = sparse_network(&bx, &square[..2]);
    let k1 = one_path
        .effective_conductance(
            bx.linear_index(&p(0, 0)).unwrap(),
            bx.linear_index(&p(1, 1)).unwrap(),
        )
        .unwrap();
    assert!((k1 - 1.0 / 12.0).abs() < 1e-12);
    let apart = sparse_network(&bx, &square[..1]);
    assert_eq!(
        apart
            .effective_conductance(
                bx.linear_index(&p(0, 0)).unwrap(),
                bx.linear_index(&p(1, 1)).unwrap()
            )
            .unwrap(),
        0.0
    );
}

/// On a path of two edges with end values `a`, `b`, the connection
/// probability is `1 - exp(-2 K ab)`. The oracle integrates the single-edge
/// law over the Gaussian midpoint value and also runs one long bridge.
#[test]
fn three_vertex_path_matches_bridge_law() {
    let bx = region(1);
    let (l, m, r) = (
        LatticePoint::axis(3, 0, -1),
        LatticePoint::origin(3),
        LatticePoint::axis(3, 0, 1),
    );
    let net = sparse_network(&bx, &[(l.clone(), m.clone()), (m, r.clone())]);
    let k = net
        .effective_conductance(bx.linear_index(&l).unwrap(), bx.linear_index(&r).unwrap())
        .unwrap();
    let d: f64 = 3.0;
    for (a, b) in [(0.5, 1.0), (1.0, 1.0), (1.5, 2.0)] {
        let closed = -(-2.0 * k * a * b).exp_m1();
        // midpoint of a variance-2 bridge over length 2d: mean (a+b)/2, variance d
        let (n, lo, hi) = (
            20_000,
            (a + b) / 2.0 - 12.0 * d.sqrt(),
            (a + b) / 2.0 + 12.0 * d.sqrt(),
        );
        let h = (hi - lo) / n as f64;
        let integral: f64 = (0..n)
            .map(|i| {
                let x: f64 = lo + (i as f64 + 0.5) * h;
                let density = (-(x - (a + b) / 2.0).powi(2) / (2.0 * d)).exp()
                    / (2.0 * std::f64::consts::PI * d).sqrt();
                let open = |u: f64, v: f64| {
                    if u * v > 0.0 {
                        -(-u * v / d).exp_m1()
                    } else {
                        0.0
                    }
                };
                density
                    * if x > 0.0 {
                        open(a, x) * open(x, b)
                    } else {
                        0.0
                    }
                    * h
            })
            .sum();
        assert!(
            (integral - closed).abs() < 1e-6,
            "a={a} b={b}: {integral} vs {closed}"
        );
        let mc = bridge_crossing_probability(a, b, 2.0 * d, 1 << 12, 20_000, 17).unwrap();
        assert!(
            (mc.p_extrapolated - closed).abs() <= 3.0 * mc.se_extrapolated + 1e-3,
            "{mc:?} vs {closed}"
        );
    }
}

#[test]
fn green_over_hitting_probability_stays_bounded() {
    let bx = region(3);
    let x = bx.center_index();
    let y = x + bx.strides()[0];
    let mut worst = 0.0f64;
    for s in 0..200u64 {
        let mut rng = stream_rng(s);
        let k = rng.random_range(1..60);
        let d_set = random_set(bx.volume(), k, s, &[x, y]);
        let mut net = BlockedNetwork::free(bx.clone());
        net.add_absorbing(&d_set);
        let g = blocked_green(&net, x).unwrap();
        let reach = hitting_distribution(&net, x, &[y])
            .unwrap()
            .vertex_weight(y);
        worst = worst.max(g / reach);
    }
    // the direct step gives reach >= 1/(2d) and G_D <= G
    let g = dirichlet_green(&bx, &LatticePoint::origin(3), &LatticePoint::origin(3)).unwrap();
    assert!(worst.is_finite() && worst <= 6.0 * g, "max ratio {worst}");
}

#[test]
fn positive_field_explores_only_the_seeds() {
    let n = 6;
    let field = iid_field(3, n, 0.0, 8);
    let positive = FieldSample::from_values(
        field.region.clone(),
        field.values.iter().map(|v| v.abs() + 0.1).collect(),
        8,
        SamplerKind::DirichletSpectral,
    );
    let opened = open_edges(&positive, Sign::NonPositive, 1);
    let ball = BallRegion::new(LatticePoint::origin(3), n as f64 / 2.0).unwrap();
    let seeds: Vec<LatticePoint> = external_boundary(&ball).into_iter().collect();
    let rec =
        exploration_martingale_record(&positive, &opened, &LatticePoint::origin(3), &seeds, 0.5)
            .unwrap();
    assert_eq!(rec.cluster_size, seeds.len());
    assert!(rec.qv_increment.abs() < 1e-10);
    assert!((rec.qv - rec.qv_sum).abs() < 1e-8);
}
