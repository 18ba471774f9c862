//! Acceptance suite AC-1 to AC-12.
//!
//! Three suites: `fast` runs AC-1, AC-2 and AC-8 at full size; `full` runs
//! everything at the stated sample sizes; `ci` runs everything with smaller
//! Monte Carlo budgets for the heavy lattice criteria (AC-3 to AC-6, AC-11,
//! AC-12) so the whole suite fits in a test run on one core. Verdicts are
//! deterministic given the seed.

use std::time::Instant;

use gfflab_core::gff::{dirichlet_green_column, dirichlet_green_tol, DirichletSampler};
use gfflab_core::harmonic::{quadratic_variation, BlockedNetwork};
use gfflab_core::lattice::{BoxRegion, LatticePoint};
use gfflab_core::level_set::{negative_cluster_with_fraction, open_edges, Sign};
use gfflab_core::loop_soup::isomorphism_check;
use gfflab_core::observables::{
    estimate_ladder, exact_two_point, run_trials, EstimateRecord, LadderEstimate, LadderPlan,
    Observable, DEFAULT_MARGIN,
};
use gfflab_core::seeding::TrialSeed;
use gfflab_core::stats::mean_and_se;
use serde::Serialize;

use crate::diagnostics::{bridge_grid, martingale_batch, martingale_seeds, q_variance};
use crate::fit::{fit_exponent_blocks, weighted_line, FitReport, DEFAULT_REPLICATES};
use crate::run::{isomorphism_vertices, BRIDGE_STEPS, BRIDGE_VALUES};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Fast,
    Ci,
    Full,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fast" => Ok(Suite::Fast),
            "ci" => Ok(Suite::Ci),
            "full" => Ok(Suite::Full),
            other => Err(format!("unknown suite {other:?} (fast | ci | full)")),
        }
    }
}

/// Monte Carlo budgets per criterion.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Budget {
    pub bridge_reps: usize,
    pub covariance_samples: usize,
    pub two_point_trials: u64,
    pub one_arm_d3_trials: u64,
    pub one_arm_d4_trials: u64,
    pub one_arm_d5_trials: u64,
    pub one_arm_d6_trials: u64,
    pub qv_configurations: usize,
    pub martingale_samples: usize,
    pub soup_samples: usize,
    pub q_samples: usize,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Fast => &[1, 2, 8],
            Suite::Ci | Suite::Full => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
        }
    }

    pub fn budget(self) -> Budget {
        let full = Budget {
            bridge_reps: 100_000,
            covariance_samples: 10_000,
            two_point_trials: 10_000,
            one_arm_d3_trials: 20_000,
            one_arm_d4_trials: 20_000,
            one_arm_d5_trials: 10_000,
            one_arm_d6_trials: 1_000,
            qv_configurations: 100,
            martingale_samples: 1_000,
            soup_samples: 10_000,
            q_samples: 10_000,
        };
        match self {
            Suite::Fast | Suite::Full => full,
            Suite::Ci => Budget {
                two_point_trials: 3_000,
                one_arm_d3_trials: 1_200,
                one_arm_d4_trials: 1_200,
                one_arm_d5_trials: 500,
                one_arm_d6_trials: 40,
                q_samples: 4_000,
                ..full
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
    Error,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
            Verdict::Error => "ERROR",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub verdict: Verdict,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<6} {:<5} {}: {} [{:.1} s]",
            self.id, self.verdict, self.title, self.detail, self.seconds
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AcceptanceReport {
    pub suite: Suite,
    pub seed: u64,
    pub budget: Budget,
    pub results: Vec<CriterionResult>,
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        self.results
            .iter()
            .all(|r| matches!(r.verdict, Verdict::Pass | Verdict::Skip))
    }
}

type Outcome = Result<(bool, String), String>;

/// One-arm and crossing indicators of one joint sample.
type Outcomes = (Vec<bool>, Vec<bool>);

fn title(id: u8) -> &'static str {
    match id {
        1 => "bridge-opening law",
        2 => "sampler exactness",
        3 => "two-point exponent d=3",
        4 => "one-arm exponent d=3",
        5 => "one-arm exponent d=4",
        6 => "one-arm d=5 ratio and d=6 monotonicity",
        7 => "mean-field regime d>=7",
        8 => "quadratic-variation identity",
        9 => "martingale tail bound",
        10 => "loop-soup isomorphism",
        11 => "crossing scaling d=3",
        12 => "boundary observable variance",
        _ => "unknown",
    }
}

/// Shared state: AC-4 and AC-11 read the same d=3 fields.
struct Context {
    seed: u64,
    budget: Budget,
    workers: usize,
    d3_ladder: Option<Result<JointLadder, String>>,
}

struct JointLadder {
    one_arm: LadderEstimate,
    crossing: Vec<EstimateRecord>,
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn run_suite(
    suite: Suite,
    seed: u64,
    workers: usize,
    mut on_result: impl FnMut(&CriterionResult),
) -> AcceptanceReport {
    let mut ctx = Context {
        seed,
        budget: suite.budget(),
        workers,
        d3_ladder: None,
    };
    let mut results = Vec::new();
    for &id in suite.criteria() {
        let start = Instant::now();
        let outcome = match id {
            1 => ac1(&ctx),
            2 => ac2(&ctx),
            3 => ac3(&ctx),
            4 => ac4(&mut ctx),
            5 => ac5(&ctx),
            6 => ac6(&ctx),
            7 => Ok((true, String::new())),
            8 => ac8(&ctx),
            9 => ac9(&ctx),
            10 => ac10(&ctx),
            11 => ac11(&mut ctx),
            12 => ac12(&ctx),
            _ => Err("unknown criterion".into()),
        };
        let (verdict, detail) = match (id, outcome) {
            (7, _) => (
                Verdict::Skip,
                "out of scale: the d >= 7 prediction c N^-2 <= theta_d(N) <= C N^-2 needs boxes beyond memory at useful N".into(),
            ),
            (_, Ok((true, d))) => (Verdict::Pass, d),
            (_, Ok((false, d))) => (Verdict::Fail, d),
            (_, Err(e)) => (Verdict::Error, e),
        };
        let r = CriterionResult {
            id: format!("AC-{id}"),
            title: title(id).into(),
            verdict,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_result(&r);
        results.push(r);
    }
    AcceptanceReport {
        suite,
        seed,
        budget: ctx.budget,
        results,
    }
}

fn ac1(ctx: &Context) -> Outcome {
    let rows = bridge_grid(
        &BRIDGE_VALUES,
        3,
        BRIDGE_STEPS,
        ctx.budget.bridge_reps,
        ctx.seed + 1,
    )
    .map_err(err)?;
    let worst = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    let converged = rows.iter().all(|r| r.estimate.converged);
    let ok = rows.iter().all(|r| r.within);
    Ok((
        ok,
        format!(
            "{} pairs, max |z| = {worst:.2} (limit 3), step-doubling converged: {converged}",
            rows.len()
        ),
    ))
}

fn ac2(ctx: &Context) -> Outcome {
    let mut worst = 0.0f64;
    for m in 1..=6u32 {
        let sampler = DirichletSampler::new(3, m).map_err(err)?;
        let bx = sampler.domain().clone();
        for x in bx.points() {
            let a = sampler.analytic_variance(&x).map_err(err)?;
            let g = dirichlet_green_tol(&bx, &x, &x, 1e-14).map_err(err)?;
            worst = worst.max((a - g).abs());
        }
    }
    let m = 8;
    let sampler = DirichletSampler::new(3, m).map_err(err)?;
    let bx = sampler.domain().clone();
    let o = LatticePoint::origin(3);
    let stencil = [
        o.clone(),
        LatticePoint::axis(3, 0, 1),
        LatticePoint::axis(3, 0, -1),
        LatticePoint::axis(3, 1, 1),
        LatticePoint::axis(3, 1, -1),
    ];
    let idx: Vec<usize> = stencil
        .iter()
        .map(|p| bx.linear_index(p))
        .collect::<gfflab_core::Result<_>>()
        .map_err(err)?;
    let column = dirichlet_green_column(&bx, &o, 1e-12).map_err(err)?;
    let samples = run_trials(ctx.budget.covariance_samples as u64, ctx.workers, |t| {
        let f = sampler.sample(TrialSeed::derive(ctx.seed + 2, "covariance", t).sub_seed("field"));
        Ok(idx
            .iter()
            .map(|&i| f.values[idx[0]] * f.values[i])
            .collect::<Vec<f64>>())
    })
    .map_err(err)?
    .into_iter()
    .collect::<gfflab_core::Result<Vec<_>>>()
    .map_err(err)?;
    let mut worst_z = 0.0f64;
    for (k, &i) in idx.iter().enumerate() {
        let prods: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let (c, se) = mean_and_se(&prods);
        worst_z = worst_z.max(((c - column[i]) / se).abs());
    }
    Ok((
        worst <= 1e-8 && worst_z <= 4.0,
        format!("spectral vs solved variance max error {worst:.2e} (limit 1e-8, M <= 6); covariance stencil max |z| = {worst_z:.2} (limit 4)"),
    ))
}

fn fit_slice(
    est: &LadderEstimate,
    range: std::ops::Range<usize>,
    seed: u64,
) -> Result<FitReport, String> {
    let outcomes: Vec<Vec<bool>> = est
        .outcomes
        .iter()
        .map(|o| o[range.clone()].to_vec())
        .collect();
    fit_exponent_blocks(&est.records[range], &outcomes, DEFAULT_REPLICATES, seed).map_err(err)
}

fn fmt_p(records: &[EstimateRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{}:{:.4}", crate::fit::ladder_param(r), r.p_hat))
        .collect::<Vec<_>>()
        .join(" ")
}

fn ac3(ctx: &Context) -> Outcome {
    let distances = [4u32, 6, 8, 12, 16];
    let plan = LadderPlan::with_box_radius(
        3,
        Observable::TwoPoint {
            distances: distances.to_vec(),
        },
        64,
    )
    .map_err(err)?;
    let est = estimate_ladder(
        &plan,
        ctx.budget.two_point_trials,
        ctx.seed + 3,
        ctx.workers,
    )
    .map_err(err)?;
    let fit = fit_slice(&est, 0..5, ctx.seed + 3)?;
    let exact = exact_two_point_slope(&distances, 64)?;
    Ok((
        (fit.slope + 1.0).abs() <= 0.15,
        format!(
            "slope {:.3} (95% CI {:.3}..{:.3}), target -1 +/- 0.15; exact slope in this box {exact:.3}; p: {}; {} trials in B(64)",
            fit.slope,
            fit.slope_ci.0,
            fit.slope_ci.1,
            fmt_p(&est.records),
            est.outcomes.len()
        ),
    ))
}

/// Log-log slope of the exact two-point probabilities in the Dirichlet box.
fn exact_two_point_slope(distances: &[u32], box_radius: u32) -> std::result::Result<f64, String> {
    let sampler = DirichletSampler::new(3, box_radius).map_err(err)?;
    let o = LatticePoint::origin(3);
    let g00 = sampler.analytic_variance(&o).map_err(err)?;
    let mut ys = Vec::new();
    for &r in distances {
        let x = LatticePoint::axis(3, 0, r as i64);
        let p = exact_two_point(
            sampler.analytic_covariance(&o, &x).map_err(err)?,
            g00,
            sampler.analytic_variance(&x).map_err(err)?,
        );
        ys.push(p.ln());
    }
    let xs: Vec<f64> = distances.iter().map(|&r| (r as f64).ln()).collect();
    Ok(weighted_line(&xs, &ys, &vec![1.0; xs.len()]).0)
}

fn d3_ladder(ctx: &mut Context) -> Result<&JointLadder, String> {
    if ctx.d3_ladder.is_none() {
        ctx.d3_ladder = Some(joint_d3(ctx));
    }
    ctx.d3_ladder
        .as_ref()
        .expect("set")
        .as_ref()
        .map_err(Clone::clone)
}

/// One-arm radii {4, 8, 16, 32, 64} and crossings (4, N), N in {16, 32, 64},
/// evaluated on the same fields of `B(128)`.
fn joint_d3(ctx: &Context) -> Result<JointLadder, String> {
    let one = LadderPlan::new(
        3,
        Observable::OneArm {
            radii: vec![4, 8, 16, 32, 64],
        },
        DEFAULT_MARGIN,
    )
    .map_err(err)?;
    let cross = LadderPlan::with_box_radius(
        3,
        Observable::Crossing {
            pairs: vec![(4, 16), (4, 32), (4, 64)],
        },
        one.box_radius,
    )
    .map_err(err)?;
    let trials = ctx.budget.one_arm_d3_trials;
    let master = ctx.seed + 4;
    let sampler = one.sampler().map_err(err)?;
    let start = Instant::now();
    let results = run_trials(trials, ctx.workers, |t| {
        let (fs, es) = one.trial_seeds(master, t);
        let field = sampler.sample(fs);
        Ok((one.evaluate(&field, es), cross.evaluate(&field, es)))
    })
    .map_err(err)?;
    let pairs: Vec<Outcomes> = results
        .into_iter()
        .collect::<gfflab_core::Result<_>>()
        .map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let record = |tag: &str, param: (u32, Option<u32>), pick: &dyn Fn(&Outcomes) -> bool| {
        let mut r = EstimateRecord::new(
            tag,
            3,
            param,
            DEFAULT_MARGIN,
            trials,
            pairs.iter().filter(|p| pick(p)).count() as u64,
            master,
        );
        r.wall_time_s = elapsed;
        r
    };
    let radii = [4u32, 8, 16, 32, 64];
    let records = radii
        .iter()
        .enumerate()
        .map(|(k, &n)| record("one-arm", (n, None), &|p| p.0[k]))
        .collect();
    let crossing = [16u32, 32, 64]
        .iter()
        .enumerate()
        .map(|(k, &m)| record("crossing", (4, Some(m)), &|p| p.1[k]))
        .collect();
    let one_arm = LadderEstimate {
        plan: one,
        records,
        outcomes: pairs.iter().map(|p| p.0.clone()).collect(),
        failures: Vec::new(),
    };
    Ok(JointLadder { one_arm, crossing })
}

fn ac4(ctx: &mut Context) -> Outcome {
    let seed = ctx.seed + 4;
    let joint = d3_ladder(ctx)?;
    let est = &joint.one_arm;
    let fit = fit_slice(est, 1..5, seed)?;
    let ratio = est.records[4].p_hat / est.records[3].p_hat;
    Ok((
        (fit.slope + 0.5).abs() <= 0.1 && (0.62..=0.80).contains(&ratio),
        format!(
            "slope {:.3} (95% CI {:.3}..{:.3}) over N=8..64, target -0.5 +/- 0.1; theta(64)/theta(32) = {ratio:.3} (target 0.62..0.80); theta: {}; {} trials",
            fit.slope,
            fit.slope_ci.0,
            fit.slope_ci.1,
            fmt_p(&est.records),
            est.outcomes.len()
        ),
    ))
}

fn ac5(ctx: &Context) -> Outcome {
    let plan = LadderPlan::new(
        4,
        Observable::OneArm {
            radii: vec![4, 8, 16],
        },
        DEFAULT_MARGIN,
    )
    .map_err(err)?;
    let est = estimate_ladder(
        &plan,
        ctx.budget.one_arm_d4_trials,
        ctx.seed + 5,
        ctx.workers,
    )
    .map_err(err)?;
    let fit = fit_slice(&est, 0..3, ctx.seed + 5)?;
    Ok((
        (fit.slope + 1.0).abs() <= 0.2,
        format!(
            "slope {:.3} (95% CI {:.3}..{:.3}), target -1 +/- 0.2; theta: {}; {} trials",
            fit.slope,
            fit.slope_ci.0,
            fit.slope_ci.1,
            fmt_p(&est.records),
            est.outcomes.len()
        ),
    ))
}

fn ac6(ctx: &Context) -> Outcome {
    let p5 = LadderPlan::new(5, Observable::OneArm { radii: vec![4, 8] }, DEFAULT_MARGIN)
        .map_err(err)?;
    let e5 = estimate_ladder(&p5, ctx.budget.one_arm_d5_trials, ctx.seed + 6, ctx.workers)
        .map_err(err)?;
    let ratio = e5.records[1].p_hat / e5.records[0].p_hat;
    let p6 = LadderPlan::new(
        6,
        Observable::OneArm {
            radii: vec![1, 2, 4],
        },
        DEFAULT_MARGIN,
    )
    .map_err(err)?;
    let e6 = estimate_ladder(
        &p6,
        ctx.budget.one_arm_d6_trials,
        ctx.seed + 60,
        ctx.workers,
    )
    .map_err(err)?;
    let nested = e6
        .outcomes
        .iter()
        .chain(&e5.outcomes)
        .all(|o| o.windows(2).all(|w| w[0] >= w[1]));
    let monotone = e6.records.windows(2).all(|w| w[0].p_hat >= w[1].p_hat);
    Ok((
        (0.20..=0.50).contains(&ratio) && nested && monotone,
        format!(
            "d=5 theta(8)/theta(4) = {ratio:.3} (target 0.20..0.50; {} trials, theta: {}); d=6 theta: {} monotone {monotone}, samplewise nested {nested} ({} trials)",
            e5.outcomes.len(),
            fmt_p(&e5.records),
            fmt_p(&e6.records),
            e6.outcomes.len()
        ),
    ))
}

fn ac8(ctx: &Context) -> Outcome {
    let n = 8;
    let sampler = DirichletSampler::new(3, n).map_err(err)?;
    let seeds = martingale_seeds(3, n).map_err(err)?;
    let x = LatticePoint::origin(3);
    let fractions = [0.25, 0.5, 0.75];
    let gaps = run_trials(ctx.budget.qv_configurations as u64, ctx.workers, |t| {
        let ts = TrialSeed::derive(ctx.seed + 8, "qv-identity", t);
        let field = sampler.sample(ts.sub_seed("field"));
        let opened = open_edges(&field, Sign::NonPositive, ts.sub_seed("edges-"));
        let mask =
            negative_cluster_with_fraction(&field, &opened, &seeds, fractions[t as usize % 3])?;
        let net = BlockedNetwork::from_mask(&mask);
        let xi = field.region.linear_index(&x)?;
        let qv = quadratic_variation(&net, xi, &[])?;
        Ok(((qv.direct - qv.sum).abs(), mask.member_count()))
    })
    .map_err(err)?
    .into_iter()
    .collect::<gfflab_core::Result<Vec<_>>>()
    .map_err(err)?;
    let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let mean_size = gaps.iter().map(|g| g.1 as f64).sum::<f64>() / gaps.len() as f64;
    Ok((
        worst <= 1e-8,
        format!("{} blocked configurations in B(8), max |direct - sum| = {worst:.2e} (limit 1e-8), mean cluster size {mean_size:.1}", gaps.len()),
    ))
}

fn ac9(ctx: &Context) -> Outcome {
    let batch = martingale_batch(
        3,
        8,
        ctx.budget.martingale_samples,
        ctx.seed + 9,
        0.5,
        ctx.workers,
    )
    .map_err(err)?;
    let worst = batch
        .tail
        .iter()
        .map(|c| (c.frequency - c.gaussian_bound - 3.0 * c.se, c))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty grid");
    let ok = batch.tail.iter().all(|c| c.within);
    Ok((
        ok,
        format!(
            "{} cells; tightest: t/sqrt(T) = {}, T = {:.3}, frequency {:.4} vs bound {:.4} + 3 SE {:.4}; mean increment {:.4} +/- {:.4}; midpoint approximation",
            batch.tail.len(),
            worst.1.ratio,
            worst.1.qv_bound,
            worst.1.frequency,
            worst.1.gaussian_bound,
            3.0 * worst.1.se,
            batch.mean_increment,
            batch.increment_se
        ),
    ))
}

fn ac10(ctx: &Context) -> Outcome {
    let bx = BoxRegion::centered(3, 4).map_err(err)?;
    let rep = isomorphism_check(
        &bx,
        &isomorphism_vertices(3),
        ctx.budget.soup_samples,
        ctx.seed + 10,
    )
    .map_err(err)?;
    let p = rep.vertices[0].ks.p_value;
    let worst_cov = rep
        .covariances
        .iter()
        .map(|c| c.z_score.abs())
        .fold(0.0, f64::max);
    let worst_halving = rep
        .halving
        .iter()
        .map(|h| h.z_score.abs())
        .fold(0.0, f64::max);
    Ok((
        p > 0.01 && worst_cov <= 4.0,
        format!(
            "KS p at centre {p:.3} (limit 0.01, control p {:.3}); covariance max |z| = {worst_cov:.2} (limit 4); loop count {:.2} vs {:.2}; halving max |z| = {worst_halving:.2} (internal consistency)",
            rep.vertices[0].control.p_value, rep.mean_loop_count, rep.expected_loop_count
        ),
    ))
}

fn ac11(ctx: &mut Context) -> Outcome {
    let joint = d3_ladder(ctx)?;
    let theta = |n: u32| {
        joint
            .one_arm
            .records
            .iter()
            .find(|r| r.param1 == n)
            .map(|r| r.p_hat)
            .expect("ladder radius")
    };
    let rho: Vec<f64> = joint.crossing.iter().map(|r| r.p_hat).collect();
    let ratio = rho[0] / rho[2];
    let prop: Vec<f64> = [16u32, 32, 64]
        .iter()
        .zip(&rho)
        .map(|(&m, &r)| r / (4.0 * theta(4) * theta(m / 4)))
        .collect();
    let jumps_ok = prop
        .windows(2)
        .all(|w| (w[1] / w[0]) <= 3.0 && (w[0] / w[1]) <= 3.0);
    let max_prop = prop.iter().cloned().fold(0.0, f64::max);
    Ok((
        (1.6..=2.4).contains(&ratio) && jumps_ok && prop.iter().all(|v| v.is_finite()),
        format!(
            "rho(4,16)/rho(4,64) = {ratio:.3} (target 2 +/- 0.4); rho: {}; bounded ratios {} (max {max_prop:.3}, adjacent factor <= 3: {jumps_ok})",
            fmt_p(&joint.crossing),
            prop.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")
        ),
    ))
}

fn ac12(ctx: &Context) -> Outcome {
    let rep = q_variance(
        3,
        &[4, 8, 16],
        DEFAULT_MARGIN,
        ctx.budget.q_samples,
        ctx.seed + 12,
        ctx.workers,
    )
    .map_err(err)?;
    let zs_ok = rep
        .rows
        .iter()
        .filter(|r| r.n <= 8)
        .all(|r| r.z_score.abs() <= 4.0);
    let slope_ok = (rep.empirical_slope + 1.0).abs() <= 0.3;
    Ok((
        zs_ok && slope_ok,
        format!(
            "{}; empirical slope {:.3} (target -1 +/- 0.3), solved slope {:.3}; {} samples per radius",
            rep.rows
                .iter()
                .map(|r| format!("N={}: var {:.5} vs sigma^2 {:.5} (z {:.2})", r.n, r.empirical, r.sigma2, r.z_score))
                .collect::<Vec<_>>()
                .join(", "),
            rep.empirical_slope,
            rep.sigma_slope,
            rep.samples
        ),
    ))
}
