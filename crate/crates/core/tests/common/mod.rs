#![allow(dead_code)]

use std::collections::VecDeque;

use gfflab_core::gff::{FieldSample, SamplerKind};
use gfflab_core::lattice::{BoxRegion, EdgeId, LatticePoint, Region};
use gfflab_core::level_set::OpenedEdgeSet;
use gfflab_core::seeding::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// I.i.d. standard normal values on `B(radius)`, shifted by `shift`.
pub fn iid_field(dim: usize, radius: u32, shift: f64, seed: u64) -> FieldSample {
    let region = BoxRegion::centered(dim, radius).unwrap();
    let mut rng = stream_rng(seed);
    let values = (0..region.volume())
        .map(|_| rng.sample::<f64, _>(StandardNormal) + shift)
        .collect();
    FieldSample::from_values(region, values, seed, SamplerKind::DirichletSpectral)
}

/// Component of `start` in the open-edge graph, by breadth-first search over
/// lattice points with edges queried by endpoint pair.
pub fn bfs_component(opened: &OpenedEdgeSet, start: &LatticePoint) -> Vec<LatticePoint> {
    let region = opened.region();
    let mut seen = std::collections::BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(p) = queue.pop_front() {
        for q in p.neighbors() {
            if region.contains(&q)
                && !seen.contains(&q)
                && opened
                    .is_open(&EdgeId::new(p.clone(), q.clone()).unwrap())
                    .unwrap()
            {
                seen.insert(q.clone());
                queue.push_back(q);
            }
        }
    }
    seen.into_iter().collect()
}

/// Component id of every point of the box by repeated BFS.
pub fn bfs_labels(opened: &OpenedEdgeSet) -> Vec<usize> {
    let region = opened.region();
    let mut label = vec![usize::MAX; region.volume()];
    let mut next = 0;
    for p in region.points() {
        let i = region.linear_index(&p).unwrap();
        if label[i] != usize::MAX {
            continue;
        }
        for q in bfs_component(opened, &p) {
            label[region.linear_index(&q).unwrap()] = next;
        }
        next += 1;
    }
    label
}
