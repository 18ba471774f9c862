//! Power-law exponent fits of Bernoulli ladders.
//!
//! Weighted least squares of `log p_hat` on `log N` with delta-method
//! weights `trials * p / (1 - p)`. The slope interval is a percentile
//! bootstrap: over whole trials when the per-trial indicator vectors are
//! available (one field sample is one block, so nested reuse across the
//! ladder is respected), otherwise over independent binomial redraws.

use gfflab_core::observables::EstimateRecord;
use gfflab_core::seeding::stream_rng;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunnerError};

pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub param: f64,
    pub log_param: f64,
    pub p_hat: f64,
    pub log_p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRef {
    pub quantity: String,
    pub d: usize,
    pub param1: u32,
    pub param2: Option<u32>,
    pub margin: f64,
    pub trials: u64,
    pub master_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapKind {
    Block,
    Binomial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub points: Vec<FitPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub r_squared: f64,
    pub bootstrap: BootstrapKind,
    pub replicates: usize,
    /// Replicates dropped because some ladder point had zero successes.
    pub skipped_replicates: usize,
    pub provenance: Vec<RecordRef>,
}

/// The ladder coordinate of a record: the outer radius for crossings, the
/// first parameter otherwise.
pub fn ladder_param(r: &EstimateRecord) -> u32 {
    match (r.quantity.as_str(), r.param2) {
        ("crossing", Some(m)) => m,
        _ => r.param1,
    }
}

fn weight(p: f64, n: f64) -> f64 {
    n * p / (1.0 - p).max(1.0 / n)
}

/// Weighted least squares line; returns `(slope, intercept, r_squared)`.
pub fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().zip(ws).map(|(y, w)| w * (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    (slope, my - slope * mx, r2)
}

fn validate(records: &[EstimateRecord]) -> Result<()> {
    if records.len() < 3 {
        return Err(RunnerError::Fit(format!(
            "need at least 3 ladder points, got {}",
            records.len()
        )));
    }
    if let Some(r) = records.iter().find(|r| r.successes == 0 || r.p_hat <= 0.0) {
        return Err(RunnerError::Fit(format!(
            "zero successes at {} N = {}; rerun with more trials",
            r.quantity,
            ladder_param(r)
        )));
    }
    if records
        .windows(2)
        .any(|w| ladder_param(&w[0]) >= ladder_param(&w[1]))
    {
        return Err(RunnerError::Fit(
            "records must be sorted by strictly increasing ladder parameter".into(),
        ));
    }
    Ok(())
}

fn point_fit(records: &[EstimateRecord]) -> (Vec<FitPoint>, f64, f64, f64) {
    let points: Vec<FitPoint> = records
        .iter()
        .map(|r| {
            let param = ladder_param(r) as f64;
            FitPoint {
                param,
                log_param: param.ln(),
                p_hat: r.p_hat,
                log_p: r.p_hat.ln(),
                ci_low: r.ci_low,
                ci_high: r.ci_high,
                weight: weight(r.p_hat, r.trials as f64),
            }
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.log_param).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.log_p).collect();
    let ws: Vec<f64> = points.iter().map(|p| p.weight).collect();
    let (slope, intercept, r2) = weighted_line(&xs, &ys, &ws);
    (points, slope, intercept, r2)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn finish(
    records: &[EstimateRecord],
    kind: BootstrapKind,
    replicates: usize,
    mut slopes: Vec<f64>,
) -> Result<FitReport> {
    let (points, slope, intercept, r_squared) = point_fit(records);
    let skipped = replicates - slopes.len();
    if slopes.len() < 2 || slopes.len() * 2 < replicates {
        return Err(RunnerError::Fit(format!("{skipped} of {replicates} bootstrap replicates had an empty ladder point; rerun with more trials")));
    }
    slopes.sort_by(f64::total_cmp);
    let slope_ci = (percentile(&slopes, 0.025), percentile(&slopes, 0.975));
    Ok(FitReport {
        points,
        slope,
        intercept,
        slope_ci,
        r_squared,
        bootstrap: kind,
        replicates,
        skipped_replicates: skipped,
        provenance: records
            .iter()
            .map(|r| RecordRef {
                quantity: r.quantity.clone(),
                d: r.d,
                param1: r.param1,
                param2: r.param2,
                margin: r.margin,
                trials: r.trials,
                master_seed: r.master_seed,
            })
            .collect(),
    })
}

fn slope_of(xs: &[f64], p: &[f64], n: &[f64]) -> Option<f64> {
    if p.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let ys: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let ws: Vec<f64> = p.iter().zip(n).map(|(&v, &m)| weight(v, m)).collect();
    Some(weighted_line(xs, &ys, &ws).0)
}

/// Fit from records alone; the interval comes from independent binomial
/// redraws of every ladder point.
pub fn fit_exponent(records: &[EstimateRecord], replicates: usize, seed: u64) -> Result<FitReport> {
    validate(records)?;
    let xs: Vec<f64> = records
        .iter()
        .map(|r| (ladder_param(r) as f64).ln())
        .collect();
    let n: Vec<f64> = records.iter().map(|r| r.trials as f64).collect();
    let mut rng = stream_rng(seed);
    let draws: Vec<Binomial> = records
        .iter()
        .map(|r| Binomial::new(r.trials, r.p_hat.clamp(0.0, 1.0)).expect("valid binomial"))
        .collect();
    let slopes = (0..replicates)
        .filter_map(|_| {
            let p: Vec<f64> = draws
                .iter()
                .zip(&n)
                .map(|(b, &m)| b.sample(&mut rng) as f64 / m)
                .collect();
            slope_of(&xs, &p, &n)
        })
        .collect();
    finish(records, BootstrapKind::Binomial, replicates, slopes)
}

/// Fit with a block bootstrap over trials; `outcomes[t][k]` is the indicator
/// of ladder point `k` in trial `t`.
pub fn fit_exponent_blocks(
    records: &[EstimateRecord],
    outcomes: &[Vec<bool>],
    replicates: usize,
    seed: u64,
) -> Result<FitReport> {
    validate(records)?;
    if outcomes.is_empty() || outcomes.iter().any(|o| o.len() != records.len()) {
        return Err(RunnerError::Fit(
            "outcome vectors must have one entry per record".into(),
        ));
    }
    let xs: Vec<f64> = records
        .iter()
        .map(|r| (ladder_param(r) as f64).ln())
        .collect();
    let t = outcomes.len();
    let n = vec![t as f64; records.len()];
    let mut rng = stream_rng(seed);
    let mut counts = vec![0u64; records.len()];
    let slopes = (0..replicates)
        .filter_map(|_| {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..t {
                let o = &outcomes[rng.random_range(0..t)];
                for (c, &b) in counts.iter_mut().zip(o) {
                    *c += b as u64;
                }
            }
            let p: Vec<f64> = counts.iter().map(|&c| c as f64 / t as f64).collect();
            slope_of(&xs, &p, &n)
        })
        .collect();
    finish(records, BootstrapKind::Block, replicates, slopes)
}
