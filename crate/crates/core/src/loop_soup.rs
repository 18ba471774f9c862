//! Random-walk loop soup of intensity 1/2 on a killed box.
//!
//! Vertices are eliminated in row-major order. With `V_k` the vertices from
//! the `k`-th on, the loops whose first vertex (in that order) is `x_k` live
//! in `V_k` and visit `x_k`. Their number is Poisson with mean
//! `(1/2) ln G_k`, `G_k = G_{V_k}(x_k, x_k)`, each visits `x_k` a
//! logarithmic(`1 - 1/G_k`) number of times, and the pieces between visits
//! are i.i.d. excursions of the walk in `V_k` conditioned to return, i.e. the
//! Doob transform by `h_k = G_{V_k}(., x_k) / G_k`.
//!
//! Continuous time: every visit holds for an Exp(1) time, and every vertex
//! carries an independent Gamma(1/2, 1) mass from the trivial loops.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gff::DirichletSampler;
use crate::lattice::{BoxRegion, LatticePoint};
use crate::level_set::Sign;
use crate::linalg::{conjugate_gradient, BoxWalkOperator};
use crate::seeding::{stream_rng, CounterUniforms, TrialSeed};
use crate::stats::{covariance_and_se, ks_two_sample, mean_and_se, KsResult};

/// Largest box (in vertices) the sampler accepts.
pub const MAX_VERTICES: usize = 10_000;

/// A nontrivial loop: cyclic visit sequence rotated to its lexicographically
/// smallest form, with one holding mass per visit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteLoop {
    pub visits: Vec<usize>,
    pub holding: Vec<f64>,
}

impl DiscreteLoop {
    pub fn new(visits: Vec<usize>, holding: Vec<f64>) -> Result<Self> {
        if visits.is_empty() || visits.len() != holding.len() {
            return Err(Error::InvalidParameter(
                "a loop needs matching nonempty visits and holding masses".into(),
            ));
        }
        let m = visits.len();
        let best = (0..m)
            .min_by(|&a, &b| {
                (0..m)
                    .map(|i| visits[(a + i) % m])
                    .cmp((0..m).map(|i| visits[(b + i) % m]))
            })
            .unwrap_or(0);
        let rot = |v: &[f64]| (0..m).map(|i| v[(best + i) % m]).collect::<Vec<_>>();
        Ok(Self {
            visits: (0..m).map(|i| visits[(best + i) % m]).collect(),
            holding: rot(&holding),
        })
    }

    pub fn distinct_vertices(&self) -> usize {
        let mut v = self.visits.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    /// Unordered edges crossed between consecutive visits (cyclically).
    pub fn crossed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.visits.len();
        (0..m).filter(move |_| m > 1).map(move |i| {
            let (a, b) = (self.visits[i], self.visits[(i + 1) % m]);
            (a.min(b), a.max(b))
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopSoupSample {
    pub region: BoxRegion,
    pub loops: Vec<DiscreteLoop>,
    /// Gamma(1/2, 1) mass of the trivial loops at each vertex.
    pub point_masses: Vec<f64>,
    pub seed: u64,
}

/// Precomputed elimination data for one box.
pub struct LoopSoupSampler {
    region: BoxRegion,
    /// `G_k` per vertex.
    green_diag: Vec<f64>,
    /// `h_k` restricted to vertices `>= k`, stored from index `k`.
    harmonic: Vec<Vec<f64>>,
}

impl LoopSoupSampler {
    pub fn new(region: BoxRegion) -> Result<Self> {
        let n = region.volume();
        if n > MAX_VERTICES {
            return Err(Error::ResourceLimit {
                what: format!("loop soup on {n} vertices (cap {MAX_VERTICES})"),
                required: (n as u128).pow(2) * 4,
                budget: (MAX_VERTICES as u128).pow(2) * 4,
            });
        }
        let columns: Vec<Result<(f64, Vec<f64>)>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let killed: Vec<bool> = (0..n).map(|v| v < k).collect();
                let op = BoxWalkOperator::new(&region, Some(&killed));
                let mut rhs = vec![0.0; n];
                rhs[k] = 1.0;
                let g = conjugate_gradient(&op, &rhs, 1e-13, 10 * n + 1000)?.x;
                let gk = g[k];
                Ok((gk, g[k..].iter().map(|v| (v / gk).max(0.0)).collect()))
            })
            .collect();
        let mut green_diag = Vec::with_capacity(n);
        let mut harmonic = Vec::with_capacity(n);
        for c in columns {
            let (g, h) = c?;
            green_diag.push(g);
            harmonic.push(h);
        }
        Ok(Self {
            region,
            green_diag,
            harmonic,
        })
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    /// `G_{V_k}(x_k, x_k)` for every `k`.
    pub fn green_diagonal(&self) -> &[f64] {
        &self.green_diag
    }

    /// Expected number of nontrivial loops, `(1/2) sum_k ln G_k`.
    pub fn expected_loop_count(&self) -> f64 {
        0.5 * self.green_diag.iter().map(|g| g.ln()).sum::<f64>()
    }

    pub fn sample(&self, seed: u64) -> LoopSoupSample {
        let mut rng = stream_rng(seed);
        let n = self.region.volume();
        let mut loops = Vec::new();
        let mut nb = Vec::new();
        for k in 0..n {
            let lambda = 0.5 * self.green_diag[k].ln();
            if lambda <= 0.0 {
                continue;
            }
            let count = Poisson::new(lambda)
                .expect("positive mean")
                .sample(&mut rng) as u64;
            let q = 1.0 - 1.0 / self.green_diag[k];
            for _ in 0..count {
                let j = sample_logarithmic(q, &mut rng);
                let mut visits = Vec::new();
                for _ in 0..j {
                    self.excursion(k, &mut rng, &mut nb, &mut visits);
                }
                let holding = (0..visits.len()).map(|_| Exp1.sample(&mut rng)).collect();
                loops.push(DiscreteLoop::new(visits, holding).expect("nonempty"));
            }
        }
        let gamma = Gamma::new(0.5, 1.0).expect("valid");
        let point_masses = (0..n).map(|_| gamma.sample(&mut rng)).collect();
        LoopSoupSample {
            region: self.region.clone(),
            loops,
            point_masses,
            seed,
        }
    }

    /// Append the visits `x_k, y_1, ..., y_m` of one excursion from `x_k`
    /// back to `x_k` inside `V_k`.
    fn excursion(
        &self,
        k: usize,
        rng: &mut ChaCha8Rng,
        nb: &mut Vec<Option<usize>>,
        visits: &mut Vec<usize>,
    ) {
        let h = &self.harmonic[k];
        let mut y = k;
        loop {
            visits.push(y);
            self.region.neighbor_indices(y, nb);
            let total: f64 = nb
                .iter()
                .flatten()
                .filter(|&&z| z >= k)
                .map(|&z| h[z - k])
                .sum();
            let mut u = rng.random::<f64>() * total;
            let mut next = k;
            for &z in nb.iter().flatten().filter(|&&z| z >= k) {
                next = z;
                u -= h[z - k];
                if u < 0.0 {
                    break;
                }
            }
            if next == k {
                return;
            }
            y = next;
        }
    }
}

/// `P(j) = q^j / (j * -ln(1 - q))`, `j >= 1`, by inversion.
fn sample_logarithmic<R: Rng>(q: f64, rng: &mut R) -> usize {
    let norm = -(1.0 - q).ln();
    let mut u: f64 = rng.random();
    let mut p = q / norm;
    let mut j = 1;
    while u > p && j < 100_000 {
        u -= p;
        p *= q * j as f64 / (j + 1) as f64;
        j += 1;
    }
    j
}

pub fn sample_loop_soup_half(region: BoxRegion, seed: u64) -> Result<LoopSoupSample> {
    Ok(LoopSoupSampler::new(region)?.sample(seed))
}

/// Total continuous-time local time per vertex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationField {
    pub values: Vec<f64>,
}

pub fn occupation_field(sample: &LoopSoupSample) -> OccupationField {
    let mut values = sample.point_masses.clone();
    add_loops(&mut values, &sample.loops);
    OccupationField { values }
}

/// Occupation of a subset of loops, without point masses.
pub fn loop_occupation(n: usize, loops: &[DiscreteLoop]) -> Vec<f64> {
    let mut values = vec![0.0; n];
    add_loops(&mut values, loops);
    values
}

fn add_loops(values: &mut [f64], loops: &[DiscreteLoop]) {
    for l in loops {
        for (&v, &t) in l.visits.iter().zip(&l.holding) {
            values[v] += t;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LoopClass {
    /// Visits at least two lattice points.
    Fundamental,
    /// Visits exactly one lattice point.
    Point,
    /// Inside one edge without visiting a lattice point; never produced at
    /// vertex resolution.
    Edge,
}

pub fn classify_loop(l: &DiscreteLoop) -> LoopClass {
    if l.distinct_vertices() >= 2 {
        LoopClass::Fundamental
    } else {
        LoopClass::Point
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoopClassCounts {
    pub fundamental: usize,
    pub point: usize,
    pub edge: usize,
    pub total: usize,
}

/// Class counts over the discrete loops plus one point loop per vertex with
/// positive trivial-loop mass.
pub fn classify_glued_loops(sample: &LoopSoupSample) -> LoopClassCounts {
    let mut c = LoopClassCounts::default();
    for l in &sample.loops {
        match classify_loop(l) {
            LoopClass::Fundamental => c.fundamental += 1,
            LoopClass::Point => c.point += 1,
            LoopClass::Edge => c.edge += 1,
        }
    }
    c.point += sample.point_masses.iter().filter(|&&m| m > 0.0).count();
    c.total = c.fundamental + c.point + c.edge;
    c
}

/// Whether `a` and `b` lie in one cluster of the metric loop soup: edges
/// crossed by a loop are covered; an uncrossed edge is covered by the
/// excursions inside it with probability `1 - exp(-sqrt(l_x l_y)/d)`.
pub fn loop_cluster_connected(
    sample: &LoopSoupSample,
    occupation: &OccupationField,
    edge_seed: u64,
    a: usize,
    b: usize,
) -> bool {
    let region = &sample.region;
    let d = region.dim();
    let mut crossed = vec![false; region.edge_slots()];
    let strides = region.strides();
    for l in &sample.loops {
        for (x, y) in l.crossed_edges() {
            let axis = strides.iter().position(|&s| s == y - x).expect("adjacent");
            crossed[region.edge_index(x, axis)] = true;
        }
    }
    let uniforms = CounterUniforms::new(edge_seed);
    let side = region.side();
    let mut seen = vec![false; region.volume()];
    let mut stack = vec![a];
    seen[a] = true;
    while let Some(v) = stack.pop() {
        if v == b {
            return true;
        }
        for (axis, &st) in strides.iter().enumerate() {
            let c = (v / st) % side;
            for (ok, lo, other) in [
                (c > 0, v.wrapping_sub(st), v.wrapping_sub(st)),
                (c + 1 < side, v, v + st),
            ] {
                if !ok || seen[other] {
                    continue;
                }
                let e = region.edge_index(lo, axis);
                let open = crossed[e] || {
                    let s = (occupation.values[v] * occupation.values[other]).sqrt() / d as f64;
                    uniforms.uniform(e as u64) < -(-s).exp_m1()
                };
                if open {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
    }
    false
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexComparison {
    pub vertex: Vec<i64>,
    pub ks: KsResult,
    /// Split-half control: `phi^2/2` against itself from independent fields.
    pub control: KsResult,
    pub mean_occupation: f64,
    pub mean_occupation_se: f64,
    pub half_green: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceComparison {
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub covariance: f64,
    pub se: f64,
    /// `G(x, y)^2 / 2`.
    pub expected: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HalvingCheck {
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    /// `P(x <-> y)` in the `>= 0` level set, from the field sampler.
    pub sign_probability: f64,
    pub sign_se: f64,
    /// `P(x <-> y)` through loop clusters, from the loop sampler.
    pub loop_probability: f64,
    pub loop_se: f64,
    /// `(sign - loop/2) / se`.
    pub z_score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsomorphismReport {
    pub header: String,
    pub box_radius: u32,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub expected_loop_count: f64,
    pub mean_loop_count: f64,
    pub mean_loop_count_se: f64,
    pub vertices: Vec<VertexComparison>,
    pub covariances: Vec<CovarianceComparison>,
    pub halving: Vec<HalvingCheck>,
}

pub const REPORT_HEADER: &str = "The connectivity halving check compares two samplers that are coupled \
through the same edge-opening law; it validates their mutual coherence, not the identity independently.";

/// Compare loop-soup occupations with `phi^2 / 2` from the exact Dirichlet
/// sampler at `vertices`, covariances between the first vertex and the
/// others, and the connectivity halving between the first vertex and the
/// others.
pub fn isomorphism_check(
    region: &BoxRegion,
    vertices: &[LatticePoint],
    samples_each: usize,
    seed: u64,
) -> Result<IsomorphismReport> {
    if samples_each < 20 {
        return Err(Error::InsufficientSamples(format!(
            "need at least 20 samples per side, got {samples_each}"
        )));
    }
    if vertices.is_empty() {
        return Err(Error::InvalidParameter("no vertices to compare".into()));
    }
    let idx: Vec<usize> = vertices
        .iter()
        .map(|p| region.linear_index(p))
        .collect::<Result<_>>()?;
    let soup = LoopSoupSampler::new(region.clone())?;
    let field = DirichletSampler::new(region.dim(), region.radius())?;
    let offset = region.center().clone();
    if offset != LatticePoint::origin(region.dim()) {
        return Err(Error::InvalidParameter(
            "isomorphism check expects a box centred at the origin".into(),
        ));
    }

    struct Draw {
        occ: Vec<f64>,
        loops: f64,
        loop_conn: Vec<bool>,
        half_phi2: Vec<f64>,
        control: Vec<f64>,
        sign_conn: Vec<bool>,
    }
    let draws: Vec<Draw> = (0..samples_each as u64)
        .into_par_iter()
        .map(|t| {
            let ts = TrialSeed::derive(seed, "isomorphism", t);
            let s = soup.sample(ts.sub_seed("soup"));
            let occ = occupation_field(&s);
            let loop_conn = idx[1..]
                .iter()
                .map(|&b| loop_cluster_connected(&s, &occ, ts.sub_seed("soup-edges"), idx[0], b))
                .collect();
            let f = field.sample(ts.sub_seed("field"));
            let g = field.sample(ts.sub_seed("control"));
            let ex = crate::level_set::explore(
                &f,
                Sign::NonNegative,
                ts.sub_seed("edges+"),
                &[idx[0]],
                None,
            );
            let mut reached = vec![false; region.volume()];
            ex.visited.iter().for_each(|&v| reached[v] = true);
            let sign_conn = idx[1..].iter().map(|&b| reached[b]).collect();
            Draw {
                occ: idx.iter().map(|&v| occ.values[v]).collect(),
                loops: s.loops.len() as f64,
                loop_conn,
                half_phi2: idx.iter().map(|&v| 0.5 * f.values[v].powi(2)).collect(),
                control: idx.iter().map(|&v| 0.5 * g.values[v].powi(2)).collect(),
                sign_conn,
            }
        })
        .collect();

    let column0 = crate::gff::dirichlet_green_column(region, &vertices[0], 1e-12)?;
    let mut comparisons = Vec::new();
    for (k, p) in vertices.iter().enumerate() {
        let occ: Vec<f64> = draws.iter().map(|d| d.occ[k]).collect();
        let phi: Vec<f64> = draws.iter().map(|d| d.half_phi2[k]).collect();
        let ctl: Vec<f64> = draws.iter().map(|d| d.control[k]).collect();
        let (m, se) = mean_and_se(&occ);
        let gxx = crate::gff::dirichlet_green_tol(region, p, p, 1e-12)?;
        comparisons.push(VertexComparison {
            vertex: p.coords().to_vec(),
            ks: ks_two_sample(&occ, &phi)?,
            control: ks_two_sample(&phi, &ctl)?,
            mean_occupation: m,
            mean_occupation_se: se,
            half_green: 0.5 * gxx,
        });
    }
    let occ0: Vec<f64> = draws.iter().map(|d| d.occ[0]).collect();
    let mut covariances = Vec::new();
    let mut halving = Vec::new();
    let n = draws.len() as f64;
    for (k, p) in vertices.iter().enumerate().skip(1) {
        let occ: Vec<f64> = draws.iter().map(|d| d.occ[k]).collect();
        let (c, se) = covariance_and_se(&occ0, &occ);
        let expected = 0.5 * column0[idx[k]].powi(2);
        covariances.push(CovarianceComparison {
            x: vertices[0].coords().to_vec(),
            y: p.coords().to_vec(),
            covariance: c,
            se,
            expected,
            z_score: (c - expected) / se,
        });
        let ps = draws.iter().filter(|d| d.sign_conn[k - 1]).count() as f64 / n;
        let pl = draws.iter().filter(|d| d.loop_conn[k - 1]).count() as f64 / n;
        let ses = (ps * (1.0 - ps) / n).sqrt();
        let sel = (pl * (1.0 - pl) / n).sqrt();
        let joint = (ses * ses + 0.25 * sel * sel).sqrt();
        halving.push(HalvingCheck {
            x: vertices[0].coords().to_vec(),
            y: p.coords().to_vec(),
            sign_probability: ps,
            sign_se: ses,
            loop_probability: pl,
            loop_se: sel,
            z_score: (ps - 0.5 * pl) / joint.max(f64::MIN_POSITIVE),
        });
    }
    let counts: Vec<f64> = draws.iter().map(|d| d.loops).collect();
    let (mc, mcse) = mean_and_se(&counts);
    Ok(IsomorphismReport {
        header: REPORT_HEADER.to_string(),
        box_radius: region.radius(),
        dim: region.dim(),
        samples: samples_each,
        seed,
        expected_loop_count: soup.expected_loop_count(),
        mean_loop_count: mc,
        mean_loop_count_se: mcse,
        vertices: comparisons,
        covariances,
        halving,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex_box_has_only_point_mass() {
        let s = sample_loop_soup_half(BoxRegion::centered(3, 0).unwrap(), 4).unwrap();
        assert!(s.loops.is_empty());
        let occ = occupation_field(&s);
        assert_eq!(occ.values, s.point_masses);
    }

    #[test]
    fn canonical_rotation() {
        let l = DiscreteLoop::new(vec![5, 2, 7, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(l.visits, vec![2, 3, 5, 2, 7]);
        assert_eq!(l.holding, vec![4.0, 5.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn loop_classes() {
        let f = DiscreteLoop::new(vec![0, 1, 2, 3, 4], vec![1.0; 5]).unwrap();
        assert_eq!(classify_loop(&f), LoopClass::Fundamental);
        let p = DiscreteLoop::new(vec![3], vec![1.0]).unwrap();
        assert_eq!(classify_loop(&p), LoopClass::Point);
    }

    #[test]
    fn elimination_parameters_reproduce_determinant() {
        // sum_k ln G_k = -ln det(I - P)
        let bx = BoxRegion::centered(3, 1).unwrap();
        let s = LoopSoupSampler::new(bx.clone()).unwrap();
        let n = bx.volume();
        let mut a = nalgebra::DMatrix::<f64>::identity(n, n);
        let mut nb = Vec::new();
        for u in 0..n {
            bx.neighbor_indices(u, &mut nb);
            for w in nb.iter().flatten() {
                a[(u, *w)] -= 1.0 / 6.0;
            }
        }
        let logdet = a
            .cholesky()
            .unwrap()
            .l()
            .diagonal()
            .iter()
            .map(|v| 2.0 * v.ln())
            .sum::<f64>();
        assert!((s.expected_loop_count() + 0.5 * logdet).abs() < 1e-10);
    }

    #[test]
    fn same_seed_same_soup() {
        let s = LoopSoupSampler::new(BoxRegion::centered(3, 1).unwrap()).unwrap();
        assert_eq!(s.sample(3).loops, s.sample(3).loops);
    }

    #[test]
    fn loops_are_nearest_neighbour_cycles() {
        let bx = BoxRegion::centered(3, 2).unwrap();
        let s = LoopSoupSampler::new(bx.clone()).unwrap().sample(17);
        for l in &s.loops {
            let m = l.visits.len();
            assert!(m >= 2);
            for i in 0..m {
                let a = bx.point_at(l.visits[i]).unwrap();
                let b = bx.point_at(l.visits[(i + 1) % m]).unwrap();
                assert!(a.is_adjacent(&b));
            }
        }
    }
}
