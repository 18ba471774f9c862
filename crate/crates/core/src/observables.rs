//! Connectivity events of the `>= 0` level set and their Monte Carlo
//! estimators.
//!
//! A vertex belongs to a `>= 0` cluster only if its own value is
//! nonnegative, so the one-arm event at `N = 0` is `{phi_0 >= 0}`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gff::{DirichletSampler, FieldSample};
use crate::harmonic::{AbsorbingSite, BlockedNetwork, NETWORK_TOLERANCE};
use crate::lattice::{inner_boundary, BoxRegion, LatticePoint};
use crate::level_set::{explore, ClusterLabeling, Sign};
use crate::linalg::{conjugate_gradient, BoxWalkOperator};
use crate::seeding::TrialSeed;
use crate::stats::{wilson_interval, Z95};

fn check_radius(field: &FieldSample, r: u32) -> Result<()> {
    if r > field.region.radius() {
        return Err(Error::InvalidParameter(format!(
            "radius {r} exceeds the sampled window of radius {}",
            field.region.radius()
        )));
    }
    Ok(())
}

fn centred(field: &FieldSample, offsets: &[i64]) -> LatticePoint {
    field
        .region
        .center()
        .add(&LatticePoint::new(offsets.to_vec()))
}

/// `{0 <-> inner boundary of B(N)}` in the `>= 0` level set.
pub fn one_arm_indicator(field: &FieldSample, labeling: &ClusterLabeling, n: u32) -> Result<bool> {
    check_radius(field, n)?;
    let c = field.region.center_index();
    if !Sign::NonNegative.admits(field.values[c]) {
        return Ok(false);
    }
    let shell = field.region.shrink_to(n)?;
    let boundary: Vec<LatticePoint> = inner_boundary(&shell).into_iter().collect();
    labeling.connected(&[field.region.center().clone()], &boundary)
}

/// `{B(n) <-> inner boundary of B(N)}` in the `>= 0` level set.
pub fn crossing_indicator(
    field: &FieldSample,
    labeling: &ClusterLabeling,
    n: u32,
    big_n: u32,
) -> Result<bool> {
    if n < 1 || n > big_n {
        return Err(Error::InvalidParameter(format!(
            "crossing needs 1 <= n <= N, got n={n}, N={big_n}"
        )));
    }
    check_radius(field, big_n)?;
    let inner = field.region.shrink_to(n)?;
    let sources: Vec<LatticePoint> = inner
        .points()
        .filter(|p| Sign::NonNegative.admits(field.value_at(p).unwrap_or(0.0)))
        .collect();
    if sources.is_empty() {
        return Ok(false);
    }
    let boundary: Vec<LatticePoint> = inner_boundary(&field.region.shrink_to(big_n)?)
        .into_iter()
        .collect();
    labeling.connected(&sources, &boundary)
}

/// `{x <-> y}`; always true for `x = y`.
pub fn two_point_indicator(
    field: &FieldSample,
    labeling: &ClusterLabeling,
    x: &LatticePoint,
    y: &LatticePoint,
) -> Result<bool> {
    let ix = field.region.linear_index(x)?;
    field.region.linear_index(y)?;
    if x == y {
        return Ok(true);
    }
    if !Sign::NonNegative.admits(field.values[ix]) {
        return Ok(false);
    }
    labeling.connected(std::slice::from_ref(x), std::slice::from_ref(y))
}

/// Exact `P(x <-> y)` in the `>= 0` level set of the metric-graph field
/// with Green's function entries `g_xy`, `g_xx`, `g_yy`:
/// `arcsin(g_xy / sqrt(g_xx g_yy)) / pi`. Clusters of `{|phi| > 0}` carry
/// independent fair signs, so `E[sgn phi_x sgn phi_y]` is the probability
/// that `x` and `y` share a cluster, and half of that is the `>= 0` event.
pub fn exact_two_point(g_xy: f64, g_xx: f64, g_yy: f64) -> f64 {
    (g_xy / (g_xx * g_yy).sqrt()).clamp(-1.0, 1.0).asin() / std::f64::consts::PI
}

/// A ladder of related events evaluated on every field sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    /// One-arm events for each radius `N`.
    OneArm { radii: Vec<u32> },
    /// Crossing events `B(n) <-> boundary of B(N)` for each pair.
    Crossing { pairs: Vec<(u32, u32)> },
    /// Two-point events `0 <-> r e_1` for each distance `r`.
    TwoPoint { distances: Vec<u32> },
}

impl Observable {
    pub fn tag(&self) -> &'static str {
        match self {
            Observable::OneArm { .. } => "one-arm",
            Observable::Crossing { .. } => "crossing",
            Observable::TwoPoint { .. } => "two-point",
        }
    }

    fn params(&self) -> Vec<(u32, Option<u32>)> {
        match self {
            Observable::OneArm { radii } => radii.iter().map(|&r| (r, None)).collect(),
            Observable::Crossing { pairs } => pairs.iter().map(|&(n, m)| (n, Some(m))).collect(),
            Observable::TwoPoint { distances } => distances.iter().map(|&r| (r, None)).collect(),
        }
    }

    /// Largest radius the events look at.
    pub fn reach(&self) -> u32 {
        match self {
            Observable::OneArm { radii } => radii.iter().copied().max().unwrap_or(0),
            Observable::Crossing { pairs } => pairs.iter().map(|p| p.1).max().unwrap_or(0),
            Observable::TwoPoint { distances } => distances.iter().copied().max().unwrap_or(0),
        }
    }

    fn validate(&self) -> Result<()> {
        let strictly_increasing = |v: &[u32]| v.windows(2).all(|w| w[0] < w[1]);
        match self {
            Observable::OneArm { radii } if radii.is_empty() || !strictly_increasing(radii) => {
                Err(Error::InvalidParameter(format!(
                    "one-arm radii must be nonempty and strictly increasing: {radii:?}"
                )))
            }
            Observable::TwoPoint { distances }
                if distances.is_empty() || !strictly_increasing(distances) =>
            {
                Err(Error::InvalidParameter(format!(
                    "two-point distances must be nonempty and strictly increasing: {distances:?}"
                )))
            }
            Observable::Crossing { pairs } => {
                if pairs.is_empty() || pairs.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter(format!(
                        "crossing pairs must be nonempty and strictly increasing: {pairs:?}"
                    )));
                }
                if let Some(p) = pairs.iter().find(|p| p.0 < 1 || p.0 > p.1) {
                    return Err(Error::InvalidParameter(format!(
                        "crossing pair {p:?} violates 1 <= n <= N"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// An observable together with the sampling geometry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderPlan {
    pub dim: usize,
    pub observable: Observable,
    /// Ratio of the Dirichlet box radius to the observable's reach.
    pub margin: f64,
    pub box_radius: u32,
}

pub const DEFAULT_MARGIN: f64 = 2.0;

impl LadderPlan {
    /// Box radius `ceil(margin * reach)`.
    pub fn new(dim: usize, observable: Observable, margin: f64) -> Result<Self> {
        observable.validate()?;
        if dim < 3 {
            return Err(Error::InvalidParameter(format!(
                "d must be at least 3, got {dim}"
            )));
        }
        if !(margin >= 1.0) || !margin.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "margin must be at least 1, got {margin}"
            )));
        }
        let box_radius = ((margin * observable.reach() as f64).ceil() as u32)
            .max(observable.reach())
            .max(1);
        Ok(Self {
            dim,
            observable,
            margin,
            box_radius,
        })
    }

    /// Explicit box radius; the recorded margin is `box_radius / reach`.
    pub fn with_box_radius(dim: usize, observable: Observable, box_radius: u32) -> Result<Self> {
        observable.validate()?;
        let reach = observable.reach().max(1);
        if box_radius < observable.reach() {
            return Err(Error::InvalidParameter(format!(
                "box radius {box_radius} is smaller than the reach {reach}"
            )));
        }
        Ok(Self {
            dim,
            observable,
            margin: box_radius as f64 / reach as f64,
            box_radius,
        })
    }

    /// Window the events need: connectivity to a sphere of radius `N` can be
    /// decided inside `B(N)`, while two-point paths may use the whole box.
    pub fn window(&self) -> u32 {
        match self.observable {
            Observable::TwoPoint { .. } => self.box_radius,
            _ => self.observable.reach(),
        }
    }

    pub fn sampler(&self) -> Result<DirichletSampler> {
        DirichletSampler::with_window(self.dim, self.box_radius, self.window())
    }

    /// Field and edge seeds of one trial.
    pub fn trial_seeds(&self, master_seed: u64, trial: u64) -> (u64, u64) {
        let s = TrialSeed::derive(master_seed, self.observable.tag(), trial);
        (s.sub_seed("field"), s.sub_seed("edges+"))
    }

    /// Indicators for every ladder point on one field, by lazy cluster
    /// exploration with the shared edge uniforms.
    pub fn evaluate(&self, field: &FieldSample, edge_seed: u64) -> Vec<bool> {
        let region = &field.region;
        let c = region.center_index();
        match &self.observable {
            Observable::OneArm { radii } => {
                let reach = *radii.last().unwrap();
                let ex = explore(field, Sign::NonNegative, edge_seed, &[c], Some(reach));
                radii
                    .iter()
                    .map(|&n| !ex.visited.is_empty() && n <= ex.max_radius)
                    .collect()
            }
            Observable::Crossing { pairs } => {
                let mut by_n: BTreeMap<u32, u32> = BTreeMap::new();
                for &(n, m) in pairs {
                    let e = by_n.entry(n).or_insert(m);
                    *e = (*e).max(m);
                }
                let mut reached: BTreeMap<u32, Option<u32>> = BTreeMap::new();
                for (&n, &stop) in &by_n {
                    let inner = region.shrink_to(n).expect("validated");
                    let sources: Vec<usize> = inner
                        .points()
                        .map(|p| region.linear_index(&p).expect("inside"))
                        .collect();
                    let ex = explore(field, Sign::NonNegative, edge_seed, &sources, Some(stop));
                    reached.insert(
                        n,
                        if ex.visited.is_empty() {
                            None
                        } else {
                            Some(ex.max_radius)
                        },
                    );
                }
                pairs
                    .iter()
                    .map(|&(n, m)| reached[&n].is_some_and(|r| m <= r))
                    .collect()
            }
            Observable::TwoPoint { distances } => {
                let ex = explore(field, Sign::NonNegative, edge_seed, &[c], None);
                let members: BTreeSet<usize> = ex.visited.into_iter().collect();
                let stride0 = region.strides()[0];
                distances
                    .iter()
                    .map(|&r| members.contains(&(c + r as usize * stride0)))
                    .collect()
            }
        }
    }
}

/// A Bernoulli estimate with everything needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub quantity: String,
    pub d: usize,
    pub param1: u32,
    pub param2: Option<u32>,
    pub margin: f64,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub master_seed: u64,
    pub wall_time_s: f64,
}

impl EstimateRecord {
    pub fn new(
        quantity: &str,
        d: usize,
        param: (u32, Option<u32>),
        margin: f64,
        trials: u64,
        successes: u64,
        master_seed: u64,
    ) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials, Z95);
        Self {
            quantity: quantity.to_string(),
            d,
            param1: param.0,
            param2: param.1,
            margin,
            trials,
            successes,
            p_hat: if trials == 0 {
                0.0
            } else {
                successes as f64 / trials as f64
            },
            ci_low,
            ci_high,
            master_seed,
            wall_time_s: 0.0,
        }
    }
}

/// Per-trial indicator vectors and the records they aggregate to.
#[derive(Clone, Debug)]
pub struct LadderEstimate {
    pub plan: LadderPlan,
    pub records: Vec<EstimateRecord>,
    /// `outcomes[t][k]`: indicator of ladder point `k` in trial `t`.
    pub outcomes: Vec<Vec<bool>>,
    /// Trials that failed, with their errors.
    pub failures: Vec<(u64, Error)>,
}

/// Run `f` on trials `0..trials` on a pool of `workers` threads; results come
/// back in trial order regardless of scheduling.
pub fn run_trials<T, F>(trials: u64, workers: usize, f: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| (0..trials).into_par_iter().map(&f).collect()))
}

/// Estimate every ladder point of `plan` from `trials` independent fields.
pub fn estimate_ladder(
    plan: &LadderPlan,
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<LadderEstimate> {
    if trials < 1 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let start = Instant::now();
    let sampler = plan.sampler()?;
    let results = run_trials(trials, workers, |t| {
        let (fs, es) = plan.trial_seeds(master_seed, t);
        let field = sampler.sample(fs);
        Ok(plan.evaluate(&field, es))
    })?;
    let mut outcomes = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => outcomes.push(v),
            Err(e) => failures.push((t as u64, e)),
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let params = plan.observable.params();
    let records = params
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let successes = outcomes.iter().filter(|o| o[k]).count() as u64;
            let mut r = EstimateRecord::new(
                plan.observable.tag(),
                plan.dim,
                p,
                plan.margin,
                outcomes.len() as u64,
                successes,
                master_seed,
            );
            r.wall_time_s = elapsed;
            r
        })
        .collect();
    Ok(LadderEstimate {
        plan: plan.clone(),
        records,
        outcomes,
        failures,
    })
}

/// Single-point convenience wrapper around [`estimate_ladder`].
pub fn estimate(
    plan: &LadderPlan,
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<EstimateRecord> {
    let mut est = estimate_ladder(plan, trials, master_seed, workers)?;
    if let Some((t, e)) = est.failures.into_iter().next() {
        return Err(Error::Trial {
            trial: t,
            source: Box::new(e),
        });
    }
    Ok(est.records.remove(0))
}

/// Harmonic measure from the centre on the inner boundary of `B(N)`.
#[derive(Clone, Debug)]
pub struct BoundaryWeights {
    pub radius: u32,
    /// `(offset from the centre, weight)`.
    pub weights: Vec<(LatticePoint, f64)>,
}

impl BoundaryWeights {
    pub fn new(dim: usize, radius: u32) -> Result<Self> {
        let bx = BoxRegion::centered(dim, radius)?;
        let shell: Vec<usize> = inner_boundary(&bx)
            .iter()
            .map(|p| bx.linear_index(p))
            .collect::<Result<_>>()?;
        let mut net = BlockedNetwork::free(bx.clone());
        net.add_absorbing(&shell);
        let solve = net.hitting_distribution(bx.center_index())?;
        let weights = solve
            .weights
            .iter()
            .filter_map(|&(s, w)| match s {
                AbsorbingSite::Vertex(v) => Some((bx.point_at(v).expect("in box"), w)),
                _ => None,
            })
            .collect();
        Ok(Self { radius, weights })
    }

    /// `Q_N = sum_z w_z phi_z` for a field whose window contains `B(N)`.
    pub fn q(&self, field: &FieldSample) -> Result<f64> {
        check_radius(field, self.radius)?;
        self.weights
            .iter()
            .map(|(z, w)| {
                Ok(w * field.values[field.region.linear_index(&centred(field, z.coords()))?])
            })
            .sum()
    }

    /// `sigma_N^2 = sum w_z w_z' G_B(z, z')` for the zero-boundary box `B(M)`.
    pub fn variance(&self, dim: usize, box_radius: u32) -> Result<f64> {
        let bx = BoxRegion::centered(dim, box_radius)?;
        let mut rhs = vec![0.0; bx.volume()];
        for (z, w) in &self.weights {
            rhs[bx.linear_index(z)?] += w;
        }
        let op = BoxWalkOperator::new(&bx, None);
        let u = conjugate_gradient(&op, &rhs, NETWORK_TOLERANCE, 10 * rhs.len() + 1000)?.x;
        Ok(rhs.iter().zip(&u).map(|(a, b)| a * b).sum())
    }
}

pub fn boundary_average_q(field: &FieldSample, radius: u32) -> Result<f64> {
    check_radius(field, radius)?;
    BoundaryWeights::new(field.dim(), radius)?.q(field)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterStats {
    /// Cluster size -> number of clusters of that size.
    pub histogram: BTreeMap<usize, usize>,
    pub largest: usize,
    /// Largest sup-norm distance from the box centre within the largest
    /// cluster (lowest label on ties).
    pub largest_radius: u32,
}

pub fn cluster_stats(labeling: &ClusterLabeling) -> ClusterStats {
    let mut sizes = vec![0usize; labeling.count()];
    for &l in labeling.labels() {
        sizes[l as usize] += 1;
    }
    let mut histogram = BTreeMap::new();
    for &s in &sizes {
        *histogram.entry(s).or_insert(0) += 1;
    }
    let (big, &largest) =
        sizes.iter().enumerate().fold(
            (0, &0),
            |acc, (i, s)| if *s > *acc.1 { (i, s) } else { acc },
        );
    let region = labeling.region();
    let largest_radius = labeling
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l as usize == big)
        .map(|(v, _)| region.sup_radius_of(v))
        .max()
        .unwrap_or(0);
    ClusterStats {
        histogram,
        largest,
        largest_radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::SamplerKind;
    use crate::level_set::{clusters, open_edges};

    #[test]
    fn ladder_validation() {
        assert!(LadderPlan::new(3, Observable::OneArm { radii: vec![8, 4] }, 2.0).is_err());
        assert!(LadderPlan::new(
            3,
            Observable::Crossing {
                pairs: vec![(5, 4)]
            },
            2.0
        )
        .is_err());
        let p = LadderPlan::new(3, Observable::OneArm { radii: vec![2, 4] }, 1.5).unwrap();
        assert_eq!(p.box_radius, 6);
        assert_eq!(p.window(), 4);
    }

    #[test]
    fn fast_path_agrees_with_labels() {
        let plan = LadderPlan::new(
            3,
            Observable::OneArm {
                radii: vec![0, 1, 2, 3, 4],
            },
            2.0,
        )
        .unwrap();
        let sampler = plan.sampler().unwrap();
        for t in 0..40 {
            let (fs, es) = plan.trial_seeds(9, t);
            let f = sampler.sample(fs);
            let lab = clusters(&open_edges(&f, Sign::NonNegative, es));
            let fast = plan.evaluate(&f, es);
            for (k, n) in [0u32, 1, 2, 3, 4].into_iter().enumerate() {
                assert_eq!(fast[k], one_arm_indicator(&f, &lab, n).unwrap());
            }
        }
    }

    #[test]
    fn constant_field_q_is_constant() {
        let bx = BoxRegion::centered(3, 5).unwrap();
        let f = FieldSample::from_values(
            bx.clone(),
            vec![2.5; bx.volume()],
            0,
            SamplerKind::DirichletSpectral,
        );
        assert!((boundary_average_q(&f, 3).unwrap() - 2.5).abs() < 1e-10);
    }

    #[test]
    fn closed_edges_give_singletons() {
        let bx = BoxRegion::centered(3, 2).unwrap();
        let f = FieldSample::from_values(
            bx.clone(),
            vec![-1.0; bx.volume()],
            0,
            SamplerKind::DirichletSpectral,
        );
        let s = cluster_stats(&clusters(&open_edges(&f, Sign::NonNegative, 0)));
        assert_eq!(s.histogram.get(&1), Some(&bx.volume()));
        assert_eq!(s.largest, 1);
    }
}
