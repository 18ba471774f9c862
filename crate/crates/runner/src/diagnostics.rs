//! Batch diagnostics: exploration martingales, the boundary observable
//! `Q_N`, and the bridge-opening oracle grid.

use gfflab_core::gff::{bridge_crossing_oracle, BridgeEstimate, DirichletSampler};
use gfflab_core::harmonic::{exploration_martingale_record, MartingaleRecord};
use gfflab_core::lattice::{external_boundary, BallRegion, LatticePoint};
use gfflab_core::level_set::{open_edges, Sign};
use gfflab_core::observables::{run_trials, BoundaryWeights};
use gfflab_core::seeding::TrialSeed;
use gfflab_core::stats::{mean_and_se, normal_two_sided_tail};
use serde::Serialize;

use crate::error::{Result, RunnerError};
use crate::fit::weighted_line;

/// Ratios `t / sqrt(T)` of the martingale tail grid.
pub const TAIL_RATIOS: [f64; 3] = [0.5, 1.0, 2.0];
/// Quantiles of the observed quadratic variation used as `T`.
pub const TAIL_QV_QUANTILES: [f64; 3] = [0.25, 0.5, 1.0];
/// Absorption fractions of the sensitivity report.
pub const SENSITIVITY_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];
const SENSITIVITY_SAMPLES: usize = 50;

#[derive(Clone, Debug, Serialize)]
pub struct TailCell {
    pub ratio: f64,
    pub t: f64,
    pub qv_bound: f64,
    pub frequency: f64,
    pub se: f64,
    pub gaussian_bound: f64,
    pub within: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FractionSensitivity {
    pub fraction: f64,
    pub mean_m_infinity: f64,
    /// Mean of `|M_inf(f) - M_inf(1/2)|` over the probed samples.
    pub mean_abs_shift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleBatch {
    pub d: usize,
    pub n: u32,
    pub samples: usize,
    pub seed: u64,
    pub absorption_fraction: f64,
    /// Every report uses the midpoint (or fixed-fraction) zero location on
    /// sign-changing edges.
    pub midpoint_approximation: bool,
    pub mean_increment: f64,
    pub increment_se: f64,
    pub max_qv_discrepancy: f64,
    pub tail: Vec<TailCell>,
    pub sensitivity: Vec<FractionSensitivity>,
    pub records: Vec<MartingaleRecord>,
}

/// Seed set `A`: the external boundary of the Euclidean ball of radius
/// `N/2` around the origin.
pub fn martingale_seeds(d: usize, n: u32) -> Result<Vec<LatticePoint>> {
    let ball = BallRegion::new(LatticePoint::origin(d), n as f64 / 2.0)?;
    Ok(external_boundary(&ball).into_iter().collect())
}

/// Martingale endpoints for `samples` fields on `B(N)` with `x = 0`.
pub fn martingale_batch(
    d: usize,
    n: u32,
    samples: usize,
    seed: u64,
    fraction: f64,
    workers: usize,
) -> Result<MartingaleBatch> {
    if n < 2 {
        return Err(RunnerError::Config(format!(
            "martingale diagnostics need N >= 2, got {n}"
        )));
    }
    if samples < 2 {
        return Err(RunnerError::Config(
            "martingale diagnostics need at least 2 samples".into(),
        ));
    }
    let sampler = DirichletSampler::new(d, n)?;
    let seeds = martingale_seeds(d, n)?;
    let x = LatticePoint::origin(d);
    let probes = samples.min(SENSITIVITY_SAMPLES);
    let results = run_trials(samples as u64, workers, |t| {
        let ts = TrialSeed::derive(seed, "martingale", t);
        let field = sampler.sample(ts.sub_seed("field"));
        let opened = open_edges(&field, Sign::NonPositive, ts.sub_seed("edges-"));
        let rec = exploration_martingale_record(&field, &opened, &x, &seeds, fraction)?;
        let shifts = if (t as usize) < probes {
            SENSITIVITY_FRACTIONS
                .iter()
                .map(|&f| {
                    Ok(exploration_martingale_record(&field, &opened, &x, &seeds, f)?.m_infinity)
                })
                .collect::<gfflab_core::Result<Vec<f64>>>()?
        } else {
            Vec::new()
        };
        Ok((rec, shifts))
    })?;
    let mut records = Vec::with_capacity(samples);
    let mut probe_values = Vec::new();
    for r in results {
        let (rec, shifts) = r?;
        records.push(rec);
        if !shifts.is_empty() {
            probe_values.push(shifts);
        }
    }

    let incr: Vec<f64> = records.iter().map(|r| r.m_infinity - r.m0).collect();
    let (mean_increment, increment_se) = mean_and_se(&incr);
    let max_qv_discrepancy = records
        .iter()
        .map(|r| (r.qv - r.qv_sum).abs())
        .fold(0.0, f64::max);

    let mut qvs: Vec<f64> = records.iter().map(|r| r.qv).collect();
    qvs.sort_by(f64::total_cmp);
    let m = records.len() as f64;
    let mut tail = Vec::new();
    for &q in &TAIL_QV_QUANTILES {
        let big_t = qvs[((q * (qvs.len() - 1) as f64).round() as usize).min(qvs.len() - 1)];
        for &ratio in &TAIL_RATIOS {
            let t = ratio * big_t.sqrt();
            let hits = records
                .iter()
                .filter(|r| r.m_infinity - r.m0 >= t && r.qv <= big_t)
                .count() as f64;
            let frequency = hits / m;
            let se = (frequency * (1.0 - frequency) / m).sqrt();
            let gaussian_bound = normal_two_sided_tail(ratio);
            tail.push(TailCell {
                ratio,
                t,
                qv_bound: big_t,
                frequency,
                se,
                gaussian_bound,
                within: frequency <= gaussian_bound + 3.0 * se,
            });
        }
    }

    let half = SENSITIVITY_FRACTIONS
        .iter()
        .position(|&f| f == 0.5)
        .expect("grid contains 1/2");
    let sensitivity = SENSITIVITY_FRACTIONS
        .iter()
        .enumerate()
        .map(|(k, &fraction)| FractionSensitivity {
            fraction,
            mean_m_infinity: probe_values.iter().map(|v| v[k]).sum::<f64>()
                / probe_values.len() as f64,
            mean_abs_shift: probe_values
                .iter()
                .map(|v| (v[k] - v[half]).abs())
                .sum::<f64>()
                / probe_values.len() as f64,
        })
        .collect();

    Ok(MartingaleBatch {
        d,
        n,
        samples,
        seed,
        absorption_fraction: fraction,
        midpoint_approximation: records.iter().any(|r| r.midpoint_approximation),
        mean_increment,
        increment_se,
        max_qv_discrepancy,
        tail,
        sensitivity,
        records,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct QVarianceRow {
    pub n: u32,
    pub box_radius: u32,
    /// `sigma_N^2` from one linear solve on the Dirichlet box.
    pub sigma2: f64,
    /// Sample mean of `Q_N^2` (the mean of `Q_N` is exactly zero).
    pub empirical: f64,
    pub se: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QVarianceReport {
    pub d: usize,
    pub margin: f64,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<QVarianceRow>,
    /// Log-log slope of the empirical variances against `N`.
    pub empirical_slope: f64,
    /// Log-log slope of the solved variances against `N`.
    pub sigma_slope: f64,
}

/// Variance of `Q_N` for each radius, each on its own box `B(ceil(margin N))`.
pub fn q_variance(
    d: usize,
    radii: &[u32],
    margin: f64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<QVarianceReport> {
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) || radii[0] < 1 {
        return Err(RunnerError::Config(format!(
            "radii must be positive and strictly increasing: {radii:?}"
        )));
    }
    if samples < 2 {
        return Err(RunnerError::Config(
            "q-variance needs at least 2 samples".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in radii {
        let box_radius = ((margin * n as f64).ceil() as u32).max(n + 1);
        let weights = BoundaryWeights::new(d, n)?;
        let sigma2 = weights.variance(d, box_radius)?;
        let sampler = DirichletSampler::with_window(d, box_radius, n)?;
        let q2 = run_trials(samples as u64, workers, |t| {
            let field = sampler
                .sample(TrialSeed::derive(seed, "q-variance", t).sub_seed(&format!("field-{n}")));
            Ok(weights.q(&field)?.powi(2))
        })?
        .into_iter()
        .collect::<gfflab_core::Result<Vec<f64>>>()?;
        let (empirical, se) = mean_and_se(&q2);
        rows.push(QVarianceRow {
            n,
            box_radius,
            sigma2,
            empirical,
            se,
            z_score: (empirical - sigma2) / se,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ones = vec![1.0; rows.len()];
    let slope = |ys: Vec<f64>| {
        if rows.len() >= 2 {
            weighted_line(&xs, &ys, &ones).0
        } else {
            f64::NAN
        }
    };
    Ok(QVarianceReport {
        d,
        margin,
        samples,
        seed,
        empirical_slope: slope(rows.iter().map(|r| r.empirical.ln()).collect()),
        sigma_slope: slope(rows.iter().map(|r| r.sigma2.ln()).collect()),
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BridgeRow {
    pub a: f64,
    pub b: f64,
    pub exact: f64,
    pub estimate: BridgeEstimate,
    /// `(estimate - exact) / se`.
    pub z_score: f64,
    pub within: bool,
}

/// Bridge oracle against `1 - exp(-ab/d)` on every pair of `values`.
pub fn bridge_grid(
    values: &[f64],
    d: usize,
    steps: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<BridgeRow>> {
    let mut rows = Vec::new();
    for (i, &a) in values.iter().enumerate() {
        for (j, &b) in values.iter().enumerate() {
            let pair_seed = TrialSeed::derive(seed, "oracle-bridge", (i * values.len() + j) as u64)
                .sub_seed("bridge");
            let estimate = bridge_crossing_oracle(a, b, d, steps, reps, pair_seed)?;
            let exact = -(-a * b / d as f64).exp_m1();
            let z_score = (estimate.p_extrapolated - exact) / estimate.se_extrapolated;
            rows.push(BridgeRow {
                a,
                b,
                exact,
                within: z_score.abs() <= 3.0 && estimate.converged,
                estimate,
                z_score,
            });
        }
    }
    Ok(rows)
}
