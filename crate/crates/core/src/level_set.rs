//! Exact vertex-level connectivity of the metric-graph sign level sets.
//!
//! Given the field at the vertices, the field along each edge is an
//! independent Brownian bridge. An edge whose endpoints share a strict sign
//! lies entirely in that level set with probability `1 - exp(-|ab|/d)`; an
//! edge with a sign change contains a zero, so no path of one sign can cross
//! it end to end. Hence metric connectivity between vertices equals
//! connectivity through open edges between same-sign vertices.
//!
//! Zero vertex values (a null event) are treated as belonging to neither
//! strict sign side, so every edge touching them is closed.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gff::FieldSample;
use crate::lattice::{BoxRegion, EdgeId, LatticePoint};
use crate::seeding::CounterUniforms;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    /// The level set `{phi >= 0}`.
    NonNegative,
    /// The level set `{phi <= 0}`.
    NonPositive,
}

impl Sign {
    /// Whether a vertex value lies strictly on this side.
    #[inline]
    pub fn admits(self, v: f64) -> bool {
        match self {
            Sign::NonNegative => v > 0.0,
            Sign::NonPositive => v < 0.0,
        }
    }
}

/// Probability that the bridge between endpoint values `a` and `b` on an edge
/// of length `d` keeps the sign shared by `a` and `b`.
#[inline]
pub fn edge_open_probability(a: f64, b: f64, dim: usize) -> f64 {
    let ab = a * b;
    if ab <= 0.0 {
        0.0
    } else {
        -(-ab / dim as f64).exp_m1()
    }
}

/// Decide whether edge slot `edge` with endpoint values `a`, `b` is open.
#[inline]
pub(crate) fn edge_is_open(
    uniforms: &CounterUniforms,
    edge: usize,
    a: f64,
    b: f64,
    sign: Sign,
    dim: usize,
) -> bool {
    sign.admits(a)
        && sign.admits(b)
        && uniforms.uniform(edge as u64) < edge_open_probability(a, b, dim)
}

/// One bit per edge slot of the box (see [`BoxRegion::edge_index`]).
#[derive(Clone, Debug)]
pub struct OpenedEdgeSet {
    region: BoxRegion,
    sign: Sign,
    open: Vec<bool>,
}

/// Open each same-sign edge independently. The uniform for an edge is the
/// counter-based draw at its canonical index, so the decisions equal those of
/// a stream consumed in canonical edge order and can also be reproduced
/// lazily one edge at a time.
pub fn open_edges(field: &FieldSample, sign: Sign, seed: u64) -> OpenedEdgeSet {
    let region = field.region.clone();
    let dim = region.dim();
    let uniforms = CounterUniforms::new(seed);
    let strides = region.strides();
    let side = region.side();
    let mut open = vec![false; region.edge_slots()];
    for lo in 0..region.volume() {
        let a = field.values[lo];
        if !sign.admits(a) {
            continue;
        }
        for (axis, &st) in strides.iter().enumerate() {
            if (lo / st) % side + 1 < side {
                let e = region.edge_index(lo, axis);
                open[e] = edge_is_open(&uniforms, e, a, field.values[lo + st], sign, dim);
            }
        }
    }
    OpenedEdgeSet { region, sign, open }
}

impl OpenedEdgeSet {
    /// Build directly from open flags (tests and oracles).
    pub fn from_flags(region: BoxRegion, sign: Sign, open: Vec<bool>) -> Result<Self> {
        if open.len() != region.edge_slots() {
            return Err(Error::InvalidParameter(format!(
                "expected {} edge slots, got {}",
                region.edge_slots(),
                open.len()
            )));
        }
        if open
            .iter()
            .enumerate()
            .any(|(e, &o)| o && !region.edge_exists(e))
        {
            return Err(Error::InvalidParameter(
                "open flag on a non-existent edge slot".into(),
            ));
        }
        Ok(Self { region, sign, open })
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    #[inline]
    pub fn is_open_slot(&self, edge: usize) -> bool {
        self.open[edge]
    }

    pub fn is_open(&self, edge: &EdgeId) -> Result<bool> {
        let lo = self.region.linear_index(edge.lo())?;
        self.region.linear_index(edge.hi())?;
        Ok(self.open[self.region.edge_index(lo, edge.axis())])
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// Open edges as `(lo, hi)` vertex indices in canonical order.
    pub fn open_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.open
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(e, _)| {
                let (lo, _, hi) = self.region.edge_endpoints(e);
                (lo, hi)
            })
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (ka, kb) = (self.rank[ra as usize], self.rank[rb as usize]);
        if ka < kb {
            self.parent[ra as usize] = rb;
        } else {
            self.parent[rb as usize] = ra;
            if ka == kb {
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Component ids numbered by first appearance in row-major vertex order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabeling {
    region: BoxRegion,
    labels: Vec<u32>,
    count: usize,
}

pub fn clusters(opened: &OpenedEdgeSet) -> ClusterLabeling {
    let n = opened.region.volume();
    let mut uf = UnionFind::new(n);
    for (lo, hi) in opened.open_pairs() {
        uf.union(lo as u32, hi as u32);
    }
    let mut remap = vec![u32::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut count = 0u32;
    for v in 0..n as u32 {
        let r = uf.find(v) as usize;
        if remap[r] == u32::MAX {
            remap[r] = count;
            count += 1;
        }
        labels.push(remap[r]);
    }
    ClusterLabeling {
        region: opened.region.clone(),
        labels,
        count: count as usize,
    }
}

impl ClusterLabeling {
    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_of(&self, p: &LatticePoint) -> Result<u32> {
        Ok(self.labels[self.region.linear_index(p)?])
    }

    /// Whether some `a` in `a_set` and `b` in `b_set` share a component.
    /// Pure label semantics: a vertex is always connected to itself.
    pub fn connected(&self, a_set: &[LatticePoint], b_set: &[LatticePoint]) -> Result<bool> {
        if a_set.is_empty() || b_set.is_empty() {
            return Err(Error::InvalidParameter(
                "connected() needs two nonempty vertex sets".into(),
            ));
        }
        let mut seen = vec![false; self.count];
        for a in a_set {
            seen[self.label_of(a)? as usize] = true;
        }
        for b in b_set {
            if seen[self.label_of(b)? as usize] {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub fn connected(
    labeling: &ClusterLabeling,
    a_set: &[LatticePoint],
    b_set: &[LatticePoint],
) -> Result<bool> {
    labeling.connected(a_set, b_set)
}

/// How an edge touching the negative cluster enters the electrical network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EdgeStatus {
    /// Full resistance `2d` between its endpoints.
    Free,
    /// Entirely inside the absorbing set; carries no current.
    FullyBlocked,
    /// Absorbed at fraction `fraction` of the way from `free_end` (a vertex
    /// index) towards the cluster.
    FarEndBlocked { free_end: usize, fraction: f64 },
    /// Not part of the network at all.
    Removed,
}

/// The negative cluster `C^-_A` of a seed set together with the status of
/// every non-free edge it touches (keyed by edge slot).
#[derive(Clone, Debug)]
pub struct NegativeClusterMask {
    region: BoxRegion,
    seeds: Vec<usize>,
    members: Vec<bool>,
    member_count: usize,
    blocked: BTreeMap<usize, EdgeStatus>,
    fraction: f64,
}

pub const DEFAULT_ABSORPTION_FRACTION: f64 = 0.5;

pub fn negative_cluster(
    field: &FieldSample,
    opened_neg: &OpenedEdgeSet,
    seeds: &[LatticePoint],
) -> Result<NegativeClusterMask> {
    negative_cluster_with_fraction(field, opened_neg, seeds, DEFAULT_ABSORPTION_FRACTION)
}

/// Vertices reachable from `seeds` through `<= 0`-open edges. Only members
/// with a negative value spread; a seed with positive value is a member but
/// is isolated from the rest of the cluster.
///
/// Edge statuses: both endpoints negative members gives [`EdgeStatus::FullyBlocked`];
/// one negative member and one non-member gives [`EdgeStatus::FarEndBlocked`]
/// (the bridge reaches zero somewhere on the edge, placed at `fraction` from
/// the free end). Edges between a positive seed and a non-member stay free.
pub fn negative_cluster_with_fraction(
    field: &FieldSample,
    opened_neg: &OpenedEdgeSet,
    seeds: &[LatticePoint],
    fraction: f64,
) -> Result<NegativeClusterMask> {
    if opened_neg.sign != Sign::NonPositive {
        return Err(Error::InvalidParameter(
            "negative cluster needs a <= 0 opened edge set".into(),
        ));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "absorption fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if opened_neg.region != field.region {
        return Err(Error::InvalidParameter(
            "field and edge set live on different boxes".into(),
        ));
    }
    let region = &field.region;
    let mut members = vec![false; region.volume()];
    let mut seed_idx = Vec::with_capacity(seeds.len());
    let mut queue = VecDeque::new();
    for s in seeds {
        let i = region.linear_index(s)?;
        seed_idx.push(i);
        if !members[i] {
            members[i] = true;
            queue.push_back(i);
        }
    }
    let strides = region.strides();
    let side = region.side();
    let negative = |i: usize| field.values[i] < 0.0;
    while let Some(v) = queue.pop_front() {
        if !negative(v) {
            continue;
        }
        for (axis, &st) in strides.iter().enumerate() {
            let c = (v / st) % side;
            if c + 1 < side && opened_neg.open[region.edge_index(v, axis)] && !members[v + st] {
                members[v + st] = true;
                queue.push_back(v + st);
            }
            if c > 0 && opened_neg.open[region.edge_index(v - st, axis)] && !members[v - st] {
                members[v - st] = true;
                queue.push_back(v - st);
            }
        }
    }

    let mut blocked = BTreeMap::new();
    for v in 0..region.volume() {
        for (axis, &st) in strides.iter().enumerate() {
            if (v / st) % side + 1 == side {
                continue;
            }
            let w = v + st;
            let (nv, nw) = (members[v] && negative(v), members[w] && negative(w));
            let e = region.edge_index(v, axis);
            let status = if members[v] && members[w] && (nv || nw) {
                EdgeStatus::FullyBlocked
            } else if nv && !members[w] {
                EdgeStatus::FarEndBlocked {
                    free_end: w,
                    fraction,
                }
            } else if nw && !members[v] {
                EdgeStatus::FarEndBlocked {
                    free_end: v,
                    fraction,
                }
            } else {
                continue;
            };
            blocked.insert(e, status);
        }
    }
    let member_count = members.iter().filter(|&&m| m).count();
    Ok(NegativeClusterMask {
        region: region.clone(),
        seeds: seed_idx,
        members,
        member_count,
        blocked,
        fraction,
    })
}

impl NegativeClusterMask {
    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    #[inline]
    pub fn is_member(&self, v: usize) -> bool {
        self.members[v]
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn member_count(&self) -> usize {
        self.member_count
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    /// Status of an edge slot; edges not touching a negative member are free.
    pub fn edge_status(&self, edge: usize) -> EdgeStatus {
        self.blocked.get(&edge).copied().unwrap_or(EdgeStatus::Free)
    }

    pub fn blocked_edges(&self) -> impl Iterator<Item = (usize, EdgeStatus)> + '_ {
        self.blocked.iter().map(|(&e, &s)| (e, s))
    }
}

/// Result of growing same-sign clusters from a set of sources without
/// materialising the full edge set.
#[derive(Clone, Debug)]
pub struct Exploration {
    /// Visited vertices in BFS order (sources first).
    pub visited: Vec<usize>,
    /// Largest sup-norm distance from the box centre among visited vertices.
    pub max_radius: u32,
}

/// Lazy breadth-first exploration of the `sign` clusters of `sources`, using
/// the same uniforms as [`open_edges`] with key `seed`. Sources not strictly
/// on the sign side are skipped. Stops early once a vertex at sup-radius
/// `stop_radius` is reached, if given.
pub fn explore(
    field: &FieldSample,
    sign: Sign,
    seed: u64,
    sources: &[usize],
    stop_radius: Option<u32>,
) -> Exploration {
    let region = &field.region;
    let dim = region.dim();
    let uniforms = CounterUniforms::new(seed);
    let strides = region.strides();
    let side = region.side();
    let mut seen = vec![false; region.volume()];
    let mut visited = Vec::new();
    let mut max_radius = 0u32;
    for &s in sources {
        if !seen[s] && sign.admits(field.values[s]) {
            seen[s] = true;
            visited.push(s);
        }
    }
    let mut head = 0;
    while head < visited.len() {
        let v = visited[head];
        head += 1;
        let r = region.sup_radius_of(v);
        max_radius = max_radius.max(r);
        if stop_radius.is_some_and(|s| max_radius >= s) {
            break;
        }
        let a = field.values[v];
        for (axis, &st) in strides.iter().enumerate() {
            let c = (v / st) % side;
            if c + 1 < side
                && !seen[v + st]
                && edge_is_open(
                    &uniforms,
                    region.edge_index(v, axis),
                    a,
                    field.values[v + st],
                    sign,
                    dim,
                )
            {
                seen[v + st] = true;
                visited.push(v + st);
            }
            if c > 0
                && !seen[v - st]
                && edge_is_open(
                    &uniforms,
                    region.edge_index(v - st, axis),
                    field.values[v - st],
                    a,
                    sign,
                    dim,
                )
            {
                seen[v - st] = true;
                visited.push(v - st);
            }
        }
    }
    for &v in &visited[head..] {
        max_radius = max_radius.max(region.sup_radius_of(v));
    }
    Exploration {
        visited,
        max_radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::{DirichletSampler, SamplerKind};

    fn field(m: u32, seed: u64) -> FieldSample {
        DirichletSampler::new(3, m).unwrap().sample(seed)
    }

    #[test]
    fn open_probability_matches_closed_form() {
        assert!((edge_open_probability(1.0, 1.0, 3) - (1.0 - (-1.0f64 / 3.0).exp())).abs() < 1e-15);
        assert_eq!(edge_open_probability(-1.0, 1.0, 3), 0.0);
        assert_eq!(edge_open_probability(0.0, 1.0, 3), 0.0);
    }

    #[test]
    fn no_open_edges_gives_singletons() {
        let bx = BoxRegion::centered(3, 2).unwrap();
        let opened =
            OpenedEdgeSet::from_flags(bx.clone(), Sign::NonNegative, vec![false; bx.edge_slots()])
                .unwrap();
        assert_eq!(clusters(&opened).count(), bx.volume());
    }

    #[test]
    fn fully_open_box_is_one_component() {
        let bx = BoxRegion::centered(3, 2).unwrap();
        let flags = (0..bx.edge_slots()).map(|e| bx.edge_exists(e)).collect();
        let opened = OpenedEdgeSet::from_flags(bx, Sign::NonNegative, flags).unwrap();
        assert_eq!(clusters(&opened).count(), 1);
    }

    #[test]
    fn sign_symmetry_under_shared_uniforms() {
        let f = field(4, 8);
        let a = open_edges(&f, Sign::NonNegative, 77);
        let b = open_edges(&f.negated(), Sign::NonPositive, 77);
        assert_eq!(a.open, b.open);
    }

    #[test]
    fn lazy_exploration_matches_labels() {
        let f = field(5, 21);
        let opened = open_edges(&f, Sign::NonNegative, 5);
        let lab = clusters(&opened);
        for src in [0usize, 100, f.region.center_index(), 1000] {
            let ex = explore(&f, Sign::NonNegative, 5, &[src], None);
            let mut got = ex.visited.clone();
            got.sort_unstable();
            let want: Vec<usize> = if f.values[src] > 0.0 {
                (0..f.region.volume())
                    .filter(|&v| lab.labels[v] == lab.labels[src])
                    .collect()
            } else {
                Vec::new()
            };
            assert_eq!(got, want);
        }
    }

    #[test]
    fn all_positive_field_keeps_mask_at_seeds() {
        let bx = BoxRegion::centered(3, 2).unwrap();
        let f = FieldSample::from_values(
            bx.clone(),
            vec![1.0; bx.volume()],
            0,
            SamplerKind::DirichletSpectral,
        );
        let opened = open_edges(&f, Sign::NonPositive, 1);
        let seeds = vec![
            LatticePoint::new(vec![2, 0, 0]),
            LatticePoint::new(vec![-2, 1, 1]),
        ];
        let mask = negative_cluster(&f, &opened, &seeds).unwrap();
        assert_eq!(mask.member_count(), 2);
        assert_eq!(mask.blocked_edges().count(), 0);
    }

    #[test]
    fn all_negative_fully_open_mask_is_the_box() {
        let bx = BoxRegion::centered(3, 2).unwrap();
        let f = FieldSample::from_values(
            bx.clone(),
            vec![-1.0; bx.volume()],
            0,
            SamplerKind::DirichletSpectral,
        );
        let flags = (0..bx.edge_slots()).map(|e| bx.edge_exists(e)).collect();
        let opened = OpenedEdgeSet::from_flags(bx.clone(), Sign::NonPositive, flags).unwrap();
        let mask = negative_cluster(&f, &opened, &[LatticePoint::origin(3)]).unwrap();
        assert_eq!(mask.member_count(), bx.volume());
    }

    #[test]
    fn connected_rejects_empty_sets() {
        let f = field(2, 1);
        let lab = clusters(&open_edges(&f, Sign::NonNegative, 1));
        assert!(lab.connected(&[], &[LatticePoint::origin(3)]).is_err());
        let o = LatticePoint::origin(3);
        assert!(lab
            .connected(std::slice::from_ref(&o), std::slice::from_ref(&o))
            .unwrap());
    }
}
