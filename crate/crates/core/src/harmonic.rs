//! Electrical-network reduction of Brownian motion on the metric graph of a
//! box with absorbing sets.
//!
//! Every edge has conductance `1/(2d)`; with this normalisation the
//! network Laplacian of a free box is `I - P` and its inverse is the
//! random-walk Green's function. An edge absorbed at distance `t` (as a
//! fraction of its length) from a free endpoint contributes conductance
//! `1/(2d t)` from that endpoint to a zero-valued absorbing point. Edges
//! leaving the box lead to the zero boundary ("escape").

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gff::FieldSample;
use crate::lattice::{BoxRegion, LatticePoint};
use crate::level_set::{
    negative_cluster_with_fraction, EdgeStatus, NegativeClusterMask, OpenedEdgeSet,
};
use crate::linalg::{conjugate_gradient, dense_spd_solve, BoxWalkOperator, CsrMatrix, DENSE_LIMIT};

/// Relative residual used for all network solves.
pub const NETWORK_TOLERANCE: f64 = 1e-12;

/// A place where the walk can be absorbed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum AbsorbingSite {
    Vertex(usize),
    /// Zero point on an edge at `distance` (fraction of the edge) from `from`
    /// towards `to`; `to` is `None` when it lies outside the box.
    EdgePoint {
        edge: usize,
        from: usize,
        to: Option<usize>,
        distance: f64,
    },
    /// The zero boundary outside the box.
    Escape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolverChoice {
    #[default]
    ConjugateGradient,
    /// Dense Cholesky; only for systems up to [`DENSE_LIMIT`] unknowns.
    Dense,
}

#[derive(Clone, Debug)]
pub struct BlockedNetwork {
    region: BoxRegion,
    status: Vec<EdgeStatus>,
    absorbing: Vec<bool>,
    outer_absorbing: bool,
    solver: SolverChoice,
}

#[derive(Clone, Copy, Debug)]
enum Link {
    Vertex(usize),
    Site(AbsorbingSite),
}

struct Assembly {
    /// Unknown index -> vertex.
    vertices: Vec<usize>,
    /// Vertex -> unknown index.
    index: BTreeMap<usize, usize>,
    matrix: CsrMatrix,
    /// Conductances from each unknown to absorbing sites.
    sites: Vec<Vec<(AbsorbingSite, f64)>>,
}

impl BlockedNetwork {
    /// Free network on `region`: no absorbing vertices, escape through the
    /// outer boundary.
    pub fn free(region: BoxRegion) -> Self {
        let slots = region.edge_slots();
        let volume = region.volume();
        Self {
            region,
            status: vec![EdgeStatus::Free; slots],
            absorbing: vec![false; volume],
            outer_absorbing: true,
            solver: SolverChoice::default(),
        }
    }

    /// Network whose absorbing set is the negative cluster, with its edge
    /// annotations.
    pub fn from_mask(mask: &NegativeClusterMask) -> Self {
        let mut net = Self::free(mask.region().clone());
        net.absorbing.copy_from_slice(mask.members());
        for (e, s) in mask.blocked_edges() {
            net.status[e] = s;
        }
        net
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn set_solver(&mut self, solver: SolverChoice) {
        self.solver = solver;
    }

    pub fn set_outer_absorbing(&mut self, on: bool) {
        self.outer_absorbing = on;
    }

    pub fn set_edge_status(&mut self, edge: usize, status: EdgeStatus) -> Result<()> {
        if !self.region.edge_exists(edge) {
            return Err(Error::InvalidParameter(format!(
                "edge slot {edge} is not an edge of the box"
            )));
        }
        self.status[edge] = status;
        Ok(())
    }

    pub fn edge_status(&self, edge: usize) -> EdgeStatus {
        self.status[edge]
    }

    pub fn set_absorbing(&mut self, vertex: usize, on: bool) {
        self.absorbing[vertex] = on;
    }

    pub fn add_absorbing(&mut self, vertices: &[usize]) {
        for &v in vertices {
            self.absorbing[v] = true;
        }
    }

    pub fn is_absorbing(&self, v: usize) -> bool {
        self.absorbing[v]
    }

    /// Whether any edge uses the approximate zero location.
    pub fn midpoint_approximation(&self) -> bool {
        self.status
            .iter()
            .any(|s| matches!(s, EdgeStatus::FarEndBlocked { .. }))
    }

    pub fn index_of(&self, p: &LatticePoint) -> Result<usize> {
        self.region.linear_index(p)
    }

    /// An absorbing vertex is interior when no free edge or outer edge
    /// leaves it, i.e. the absorbing set surrounds it on the metric graph.
    pub fn is_interior(&self, v: usize) -> bool {
        if !self.absorbing[v] {
            return false;
        }
        let side = self.region.side();
        for (axis, &st) in self.region.strides().iter().enumerate() {
            let c = (v / st) % side;
            for (inside, lo) in [(c > 0, v.wrapping_sub(st)), (c + 1 < side, v)] {
                if !inside {
                    if self.outer_absorbing {
                        return false;
                    }
                    continue;
                }
                if self.status[self.region.edge_index(lo, axis)] == EdgeStatus::Free {
                    return false;
                }
            }
        }
        true
    }

    fn links(&self, u: usize, out: &mut Vec<(Link, f64)>) -> Result<()> {
        out.clear();
        let d = self.region.dim();
        let c = 1.0 / (2 * d) as f64;
        let side = self.region.side();
        for (axis, &st) in self.region.strides().iter().enumerate() {
            let coord = (u / st) % side;
            for dir in [-1i64, 1] {
                let inside = if dir < 0 { coord > 0 } else { coord + 1 < side };
                if !inside {
                    if self.outer_absorbing {
                        out.push((Link::Site(AbsorbingSite::Escape), c));
                    }
                    continue;
                }
                let w = if dir < 0 { u - st } else { u + st };
                let edge = self.region.edge_index(u.min(w), axis);
                match self.status[edge] {
                    EdgeStatus::Free => {
                        let link = if self.absorbing[w] {
                            Link::Site(AbsorbingSite::Vertex(w))
                        } else {
                            Link::Vertex(w)
                        };
                        out.push((link, c));
                    }
                    EdgeStatus::FullyBlocked | EdgeStatus::Removed => {}
                    EdgeStatus::FarEndBlocked { free_end, fraction } => {
                        let distance = if free_end == u {
                            fraction
                        } else {
                            1.0 - fraction
                        };
                        if distance <= 0.0 {
                            return Err(Error::InvalidParameter(format!(
                                "vertex {u} sits on the absorbing point of edge {edge} but is not absorbing"
                            )));
                        }
                        out.push((
                            Link::Site(AbsorbingSite::EdgePoint {
                                edge,
                                from: u,
                                to: Some(w),
                                distance,
                            }),
                            c / distance,
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Laplacian restricted to the non-absorbing vertices connected to `starts`.
    fn assemble(&self, starts: &[usize]) -> Result<Assembly> {
        let mut index = BTreeMap::new();
        let mut vertices = Vec::new();
        let mut queue = VecDeque::new();
        for &s in starts {
            if !self.absorbing[s] && !index.contains_key(&s) {
                index.insert(s, vertices.len());
                vertices.push(s);
                queue.push_back(s);
            }
        }
        let mut buf = Vec::new();
        while let Some(u) = queue.pop_front() {
            self.links(u, &mut buf)?;
            for &(l, _) in &buf {
                if let Link::Vertex(w) = l {
                    if let std::collections::btree_map::Entry::Vacant(slot) = index.entry(w) {
                        slot.insert(vertices.len());
                        vertices.push(w);
                        queue.push_back(w);
                    }
                }
            }
        }
        let mut rows = Vec::with_capacity(vertices.len());
        let mut sites = Vec::with_capacity(vertices.len());
        for &u in &vertices {
            self.links(u, &mut buf)?;
            let total: f64 = buf.iter().map(|&(_, c)| c).sum();
            let mut row = vec![(index[&u], total)];
            let mut srow = Vec::new();
            for &(l, c) in &buf {
                match l {
                    Link::Vertex(w) => row.push((index[&w], -c)),
                    Link::Site(s) => srow.push((s, c)),
                }
            }
            rows.push(row);
            sites.push(srow);
        }
        if !vertices.is_empty() && sites.iter().all(|s| s.is_empty()) {
            return Err(Error::SingularSystem {
                vertex: vertices[0],
            });
        }
        Ok(Assembly {
            vertices,
            index,
            matrix: CsrMatrix::from_rows(rows),
            sites,
        })
    }

    fn solve(&self, asm: &Assembly, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        match self.solver {
            SolverChoice::ConjugateGradient => {
                let sol =
                    conjugate_gradient(&asm.matrix, rhs, NETWORK_TOLERANCE, 20 * rhs.len() + 1000)?;
                Ok((sol.x, sol.residual))
            }
            SolverChoice::Dense => {
                if rhs.len() > DENSE_LIMIT {
                    return Err(Error::ResourceLimit {
                        what: format!("dense network solve with {} unknowns", rhs.len()),
                        required: (rhs.len() as u128).pow(2) * 8,
                        budget: (DENSE_LIMIT as u128).pow(2) * 8,
                    });
                }
                let x = dense_spd_solve(&asm.matrix.to_dense(), rhs)?;
                let residual = relative_residual(&asm.matrix, &x, rhs);
                Ok((x, residual))
            }
        }
    }

    /// Hitting distribution of the absorbing sites from vertex `v`.
    pub fn hitting_distribution(&self, v: usize) -> Result<HarmonicSolve> {
        let midpoint = self.midpoint_approximation();
        if self.absorbing[v] {
            return Ok(HarmonicSolve {
                source: v,
                weights: vec![(AbsorbingSite::Vertex(v), 1.0)],
                green: vec![],
                residual: 0.0,
                midpoint_approximation: midpoint,
            });
        }
        let asm = self.assemble(&[v])?;
        let mut rhs = vec![0.0; asm.vertices.len()];
        rhs[asm.index[&v]] = 1.0;
        let (g, residual) = self.solve(&asm, &rhs)?;
        // last-exit decomposition: P_v(hit s) = sum_u G_D(v, u) c(u, s)
        let mut acc: Vec<(AbsorbingSite, f64)> = Vec::new();
        let mut vertex_pos: BTreeMap<usize, usize> = BTreeMap::new();
        let mut escape = 0.0;
        for (k, srow) in asm.sites.iter().enumerate() {
            for &(s, c) in srow {
                let w = g[k] * c;
                match s {
                    AbsorbingSite::Escape => escape += w,
                    AbsorbingSite::Vertex(x) => match vertex_pos.get(&x) {
                        Some(&p) => acc[p].1 += w,
                        None => {
                            vertex_pos.insert(x, acc.len());
                            acc.push((s, w));
                        }
                    },
                    AbsorbingSite::EdgePoint { .. } => acc.push((s, w)),
                }
            }
        }
        if self.outer_absorbing {
            acc.push((AbsorbingSite::Escape, escape));
        }
        Ok(HarmonicSolve {
            source: v,
            weights: acc,
            green: asm.vertices.iter().copied().zip(g).collect(),
            residual,
            midpoint_approximation: midpoint,
        })
    }

    /// `G_D(x, x)`; zero on absorbing vertices.
    pub fn blocked_green(&self, x: usize) -> Result<f64> {
        Ok(self.hitting_distribution(x)?.green_at(x))
    }

    /// Two-terminal effective conductance between `v` and `w`, holding `v` at
    /// potential 1 and every other absorbing site (including `w`) at 0.
    /// Terminals that are not connected give 0.
    pub fn effective_conductance(&self, v: usize, w: usize) -> Result<f64> {
        if v == w {
            return Err(Error::InvalidParameter(
                "effective conductance needs two distinct terminals".into(),
            ));
        }
        let mut net = self.clone();
        net.absorbing[v] = true;
        net.absorbing[w] = true;
        let mut buf = Vec::new();
        // v's own links: direct current into w plus the starts of the solve
        net.links(v, &mut buf)?;
        let mut direct = 0.0;
        let mut starts = Vec::new();
        for &(l, c) in &buf {
            match l {
                Link::Site(AbsorbingSite::Vertex(x)) if x == w => direct += c,
                Link::Vertex(x) => starts.push(x),
                _ => {}
            }
        }
        if starts.is_empty() {
            return Ok(direct);
        }
        let asm = match net.assemble(&starts) {
            Ok(a) => a,
            Err(Error::SingularSystem { .. }) => return Ok(direct),
            Err(e) => return Err(e),
        };
        let rhs: Vec<f64> = asm
            .sites
            .iter()
            .map(|srow| {
                srow.iter()
                    .filter(|(s, _)| *s == AbsorbingSite::Vertex(v))
                    .map(|&(_, c)| c)
                    .sum()
            })
            .collect();
        let (pot, _) = net.solve(&asm, &rhs)?;
        let into_w: f64 = asm
            .sites
            .iter()
            .zip(&pot)
            .map(|(srow, &p)| {
                srow.iter()
                    .filter(|(s, _)| *s == AbsorbingSite::Vertex(w))
                    .map(|&(_, c)| c * p)
                    .sum::<f64>()
            })
            .sum();
        Ok(direct + into_w)
    }
}

fn relative_residual(m: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    use crate::linalg::LinearOperator;
    let mut ax = vec![0.0; x.len()];
    m.apply(x, &mut ax);
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    r / b
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE)
}

/// Hitting distribution and Green's column from one source.
#[derive(Clone, Debug, Serialize)]
pub struct HarmonicSolve {
    pub source: usize,
    /// `(site, P_v(first absorbed at site))`; vertex sites appear once, the
    /// escape weight (if the outer boundary absorbs) is last.
    pub weights: Vec<(AbsorbingSite, f64)>,
    /// `(vertex, G_D(source, vertex))` over the source's component.
    pub green: Vec<(usize, f64)>,
    pub residual: f64,
    pub midpoint_approximation: bool,
}

impl HarmonicSolve {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w).sum()
    }

    pub fn escape_weight(&self) -> f64 {
        self.weights
            .iter()
            .filter(|(s, _)| *s == AbsorbingSite::Escape)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn vertex_weight(&self, v: usize) -> f64 {
        self.weights
            .iter()
            .filter(|(s, _)| *s == AbsorbingSite::Vertex(v))
            .map(|(_, w)| w)
            .sum()
    }

    pub fn green_at(&self, v: usize) -> f64 {
        self.green
            .iter()
            .find(|(u, _)| *u == v)
            .map_or(0.0, |&(_, g)| g)
    }
}

/// Hitting distribution from `v` with the extra absorbing vertices `d_set`.
pub fn hitting_distribution(
    network: &BlockedNetwork,
    v: usize,
    d_set: &[usize],
) -> Result<HarmonicSolve> {
    let mut net = network.clone();
    net.add_absorbing(d_set);
    net.hitting_distribution(v)
}

/// `H_v(D1, D2)`: the field averaged over the first hitting point of `D2`,
/// counting only hits of `D1` (zero points and escape contribute 0). Zero
/// when `v` is interior to `D2`.
pub fn harmonic_average(
    field: &FieldSample,
    network: &BlockedNetwork,
    v: usize,
    d1: &[usize],
    d2: &[usize],
) -> Result<f64> {
    let mut net = network.clone();
    net.add_absorbing(d2);
    net.add_absorbing(d1);
    let in_d1 = |x: usize| d1.contains(&x);
    if net.is_absorbing(v) {
        return Ok(if net.is_interior(v) || !in_d1(v) {
            0.0
        } else {
            field.values[v]
        });
    }
    let solve = net.hitting_distribution(v)?;
    Ok(solve
        .weights
        .iter()
        .map(|&(s, w)| match s {
            AbsorbingSite::Vertex(x) if in_d1(x) => w * field.values[x],
            _ => 0.0,
        })
        .sum())
}

/// `(2d)^{-1} sum_{z ~ y, edge {y,z} free} H_z(D1, D2)`.
pub fn hat_harmonic_average(
    field: &FieldSample,
    network: &BlockedNetwork,
    y: usize,
    d1: &[usize],
    d2: &[usize],
) -> Result<f64> {
    let region = network.region();
    let d = region.dim();
    let side = region.side();
    let mut total = 0.0;
    for (axis, &st) in region.strides().iter().enumerate() {
        let c = (y / st) % side;
        if c > 0 && network.edge_status(region.edge_index(y - st, axis)) == EdgeStatus::Free {
            total += harmonic_average(field, network, y - st, d1, d2)?;
        }
        if c + 1 < side && network.edge_status(region.edge_index(y, axis)) == EdgeStatus::Free {
            total += harmonic_average(field, network, y + st, d1, d2)?;
        }
    }
    Ok(total / (2 * d) as f64)
}

/// `G_D(x, x)` on the network.
pub fn blocked_green(network: &BlockedNetwork, x: usize) -> Result<f64> {
    network.blocked_green(x)
}

/// Green's function column of the free box network, `G(x, .)`.
pub fn box_green_column(region: &BoxRegion, x: usize) -> Result<Vec<f64>> {
    let op = BoxWalkOperator::new(region, None);
    let mut rhs = vec![0.0; region.volume()];
    rhs[x] = 1.0;
    Ok(conjugate_gradient(&op, &rhs, NETWORK_TOLERANCE, 10 * rhs.len() + 1000)?.x)
}

/// `G(x, s)` for an absorbing site, linear along edges, zero outside.
fn green_at_site(column: &[f64], site: AbsorbingSite) -> f64 {
    match site {
        AbsorbingSite::Vertex(v) => column[v],
        AbsorbingSite::EdgePoint {
            from, to, distance, ..
        } => (1.0 - distance) * column[from] + distance * to.map_or(0.0, |t| column[t]),
        AbsorbingSite::Escape => 0.0,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadraticVariation {
    /// `G(x, x) - G_D(x, x)`.
    pub direct: f64,
    /// `sum_s P_x(tau_D = tau_s) G(x, s)`.
    pub sum: f64,
    pub midpoint_approximation: bool,
}

/// Both evaluations of the quadratic variation for absorbing set `D` (the
/// network's absorbing set plus `d_set`). The base Green's function is that
/// of the free box; the network must have an absorbing outer boundary.
pub fn quadratic_variation(
    network: &BlockedNetwork,
    x: usize,
    d_set: &[usize],
) -> Result<QuadraticVariation> {
    let mut net = network.clone();
    net.add_absorbing(d_set);
    let column = box_green_column(net.region(), x)?;
    let solve = net.hitting_distribution(x)?;
    let direct = column[x] - solve.green_at(x);
    let sum = solve
        .weights
        .iter()
        .map(|&(s, w)| w * green_at_site(&column, s))
        .sum();
    Ok(QuadraticVariation {
        direct,
        sum,
        midpoint_approximation: solve.midpoint_approximation,
    })
}

/// Endpoints of the exploration martingale of `phi_x` from the seed set `A`
/// through the negative cluster.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleRecord {
    pub x: Vec<i64>,
    /// `sum_z P_x(tau_A = tau_z) phi_z`.
    pub m0: f64,
    /// Harmonic average over the negative cluster; 0 when `x` is in it.
    pub m_infinity: f64,
    /// `G(x,x) - G_D(x,x)` with `D` the blocked cluster.
    pub qv: f64,
    /// The same through the hitting-distribution sum.
    pub qv_sum: f64,
    /// `G_A(x,x) - G_D(x,x)`, the part accrued after conditioning on `A`.
    pub qv_increment: f64,
    pub cluster_size: usize,
    pub absorption_fraction: f64,
    pub midpoint_approximation: bool,
    pub config_hash: String,
}

pub fn exploration_martingale_record(
    field: &FieldSample,
    opened_neg: &OpenedEdgeSet,
    x: &LatticePoint,
    seeds: &[LatticePoint],
    fraction: f64,
) -> Result<MartingaleRecord> {
    let region = &field.region;
    let xi = region.linear_index(x)?;
    let seed_idx: Vec<usize> = seeds
        .iter()
        .map(|s| region.linear_index(s))
        .collect::<Result<_>>()?;
    if seed_idx.contains(&xi) {
        return Err(Error::InvalidParameter(
            "x must not belong to the seed set".into(),
        ));
    }
    let mask = negative_cluster_with_fraction(field, opened_neg, seeds, fraction)?;

    let mut base = BlockedNetwork::free(region.clone());
    base.add_absorbing(&seed_idx);
    let m0: f64 = base
        .hitting_distribution(xi)?
        .weights
        .iter()
        .map(|&(s, w)| {
            if let AbsorbingSite::Vertex(z) = s {
                w * field.values[z]
            } else {
                0.0
            }
        })
        .sum();
    let g_a = base.blocked_green(xi)?;

    let net = BlockedNetwork::from_mask(&mask);
    let members: Vec<usize> = (0..region.volume())
        .filter(|&v| mask.is_member(v))
        .collect();
    let m_infinity = if mask.is_member(xi) {
        0.0
    } else {
        harmonic_average(field, &net, xi, &seed_idx, &members)?
    };
    let qv = quadratic_variation(&net, xi, &[])?;
    let g_d = net.blocked_green(xi)?;

    let mut h = Sha256::new();
    for v in &field.values {
        h.update(v.to_le_bytes());
    }
    for &m in mask.members() {
        h.update([m as u8]);
    }
    let digest = h.finalize();
    let config_hash = digest[..8].iter().map(|b| format!("{b:02x}")).collect();

    Ok(MartingaleRecord {
        x: x.coords().to_vec(),
        m0,
        m_infinity,
        qv: qv.direct,
        qv_sum: qv.sum,
        qv_increment: g_a - g_d,
        cluster_size: mask.member_count(),
        absorption_fraction: fraction,
        midpoint_approximation: qv.midpoint_approximation || net.midpoint_approximation(),
        config_hash,
    })
}

/// Dense absorbing-chain oracle: hitting probabilities of absorbing vertices
/// from `v` for simple random walk on a free box (no blocked edges).
pub fn dense_absorbing_chain(region: &BoxRegion, absorbing: &[bool], v: usize) -> Result<Vec<f64>> {
    let n = region.volume();
    let transient: Vec<usize> = (0..n).filter(|&u| !absorbing[u]).collect();
    let pos: BTreeMap<usize, usize> = transient.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let m = transient.len();
    let d = region.dim();
    let p = 1.0 / (2 * d) as f64;
    let mut q = DMatrix::<f64>::identity(m, m);
    let mut r = DMatrix::<f64>::zeros(m, n);
    let mut nb = Vec::new();
    for (i, &u) in transient.iter().enumerate() {
        region.neighbor_indices(u, &mut nb);
        for w in nb.iter().flatten() {
            match pos.get(w) {
                Some(&j) => q[(i, j)] -= p,
                None => r[(i, *w)] += p,
            }
        }
    }
    if absorbing[v] {
        let mut out = vec![0.0; n];
        out[v] = 1.0;
        return Ok(out);
    }
    let lu = q.lu();
    let b = lu.solve(&r).ok_or(Error::SingularSystem { vertex: v })?;
    let row = pos[&v];
    Ok((0..n).map(|k| b[(row, k)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(m: u32) -> BoxRegion {
        BoxRegion::centered(3, m).unwrap()
    }

    #[test]
    fn absorbing_source_hits_itself() {
        let net = BlockedNetwork::free(region(2));
        let c = net.region().center_index();
        let s = hitting_distribution(&net, c, &[c]).unwrap();
        assert_eq!(s.vertex_weight(c), 1.0);
    }

    #[test]
    fn neighbours_share_weight_equally() {
        let bx = region(3);
        let c = bx.center_index();
        let mut nb = Vec::new();
        bx.neighbor_indices(c, &mut nb);
        let d_set: Vec<usize> = nb.iter().flatten().copied().collect();
        let s = hitting_distribution(&BlockedNetwork::free(bx), c, &d_set).unwrap();
        for &w in &d_set {
            assert!((s.vertex_weight(w) - 1.0 / 6.0).abs() < 1e-12);
        }
        assert!(s.escape_weight().abs() < 1e-15);
        assert!((s.green_at(c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_box_green_matches_walk_operator() {
        let bx = region(3);
        let c = bx.center_index();
        let col = box_green_column(&bx, c).unwrap();
        let g = blocked_green(&BlockedNetwork::free(bx), c).unwrap();
        assert!((g - col[c]).abs() < 1e-10);
    }

    #[test]
    fn dense_and_iterative_solvers_agree() {
        let bx = region(2);
        let mut net = BlockedNetwork::free(bx.clone());
        net.add_absorbing(&[3, 40, 77]);
        net.set_edge_status(
            bx.edge_index(60, 1),
            EdgeStatus::FarEndBlocked {
                free_end: 60,
                fraction: 0.25,
            },
        )
        .unwrap();
        let a = net.hitting_distribution(62).unwrap();
        net.set_solver(SolverChoice::Dense);
        let b = net.hitting_distribution(62).unwrap();
        for ((_, x), (_, y)) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((a.total_weight() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn enclosed_component_is_singular() {
        let bx = region(1);
        let mut net = BlockedNetwork::free(bx.clone());
        net.set_outer_absorbing(false);
        for e in 0..bx.edge_slots() {
            if bx.edge_exists(e) {
                net.set_edge_status(e, EdgeStatus::Removed).unwrap();
            }
        }
        assert!(matches!(
            net.hitting_distribution(bx.center_index()),
            Err(Error::SingularSystem { .. })
        ));
    }
}
