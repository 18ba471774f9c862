//! Quantifying the Dirichlet truncation of the field.

use gfflab_core::gff::{DirichletSampler, FieldSample, FullspaceSampler, SamplerKind};
use gfflab_core::lattice::{BoxRegion, LatticePoint};
use gfflab_core::level_set::{explore, Sign};
use gfflab_core::observables::{estimate, EstimateRecord, LadderPlan, Observable};
use gfflab_core::seeding::TrialSeed;
use gfflab_core::stats::Z95;
use serde::Serialize;

use crate::error::{Result, RunnerError};

pub const MIN_MARGIN: f64 = 1.5;

#[derive(Clone, Debug, Serialize)]
pub struct BiasRow {
    pub margin: f64,
    pub box_radius: u32,
    pub record: EstimateRecord,
}

#[derive(Clone, Debug, Serialize)]
pub struct BiasTable {
    pub d: usize,
    pub n: u32,
    pub rows: Vec<BiasRow>,
    /// Adjacent margin pairs whose estimates differ beyond the joint 95%
    /// interval.
    pub disagreements: Vec<(f64, f64)>,
}

/// `theta(N)` at each margin, with a flag when adjacent margins disagree.
pub fn bias_harness(
    d: usize,
    n: u32,
    margins: &[f64],
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<BiasTable> {
    if margins.len() < 2 {
        return Err(RunnerError::Config(format!(
            "the bias harness needs at least 2 margins, got {}",
            margins.len()
        )));
    }
    if let Some(m) = margins
        .iter()
        .find(|&&m| !(m >= MIN_MARGIN) || !m.is_finite())
    {
        return Err(RunnerError::Config(format!(
            "margins must be at least {MIN_MARGIN}, got {m}"
        )));
    }
    if margins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RunnerError::Config(format!(
            "margins must be strictly increasing: {margins:?}"
        )));
    }
    let rows = margins
        .iter()
        .map(|&margin| {
            let plan = LadderPlan::new(d, Observable::OneArm { radii: vec![n] }, margin)?;
            Ok(BiasRow {
                margin,
                box_radius: plan.box_radius,
                record: estimate(&plan, trials, seed, workers)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let se = |r: &EstimateRecord| (r.p_hat * (1.0 - r.p_hat) / r.trials as f64).sqrt();
    let disagreements = rows
        .windows(2)
        .filter(|w| {
            let (a, b) = (&w[0].record, &w[1].record);
            (a.p_hat - b.p_hat).abs() > Z95 * (se(a).powi(2) + se(b).powi(2)).sqrt()
        })
        .map(|w| (w[0].margin, w[1].margin))
        .collect();
    Ok(BiasTable {
        d,
        n,
        rows,
        disagreements,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FullspaceComparison {
    pub d: usize,
    pub distance: u32,
    /// Connectivity is decided inside `B(window)` for both fields.
    pub window: u32,
    pub box_radius: u32,
    pub dirichlet: EstimateRecord,
    pub fullspace: EstimateRecord,
    /// `ln(p_dirichlet / p_fullspace)`.
    pub log_ratio: f64,
    pub log_ratio_se: f64,
    pub tolerance: f64,
    pub within: bool,
}

/// Slope tolerance of the two-point fit spread over its log-range
/// `ln(16 / 4)`: the largest log-bias at one point the fit can absorb.
pub fn two_point_log_tolerance() -> f64 {
    0.15 * 4f64.ln()
}

/// `P(0 <-> r e_1)` through paths inside `B(window)`, once with the Dirichlet
/// field of `B(box_radius)` and once with the exact full-space field.
pub fn fullspace_comparison(
    d: usize,
    distance: u32,
    window: u32,
    box_radius: u32,
    trials: u64,
    seed: u64,
) -> Result<FullspaceComparison> {
    if distance > window || window > box_radius {
        return Err(RunnerError::Config(format!(
            "need distance <= window <= box radius, got {distance}, {window}, {box_radius}"
        )));
    }
    let region = BoxRegion::centered(d, window)?;
    let points: Vec<LatticePoint> = region.points().collect();
    let exact = FullspaceSampler::new(points)?;
    let dirichlet = DirichletSampler::with_window(d, box_radius, window)?;
    let (c, target) = (
        region.center_index(),
        region.center_index() + distance as usize * region.strides()[0],
    );
    let connected = |field: &FieldSample, edge_seed: u64| {
        explore(field, Sign::NonNegative, edge_seed, &[c], None)
            .visited
            .contains(&target)
    };
    let (mut hits_d, mut hits_f) = (0u64, 0u64);
    for t in 0..trials {
        let ts = TrialSeed::derive(seed, "fullspace-bias", t);
        hits_d += connected(
            &dirichlet.sample(ts.sub_seed("dirichlet")),
            ts.sub_seed("edges-dirichlet"),
        ) as u64;
        let f = exact.sample(ts.sub_seed("fullspace"));
        let field = FieldSample::from_values(
            region.clone(),
            f.values,
            f.seed,
            SamplerKind::FullspaceDense,
        );
        hits_f += connected(&field, ts.sub_seed("edges-fullspace")) as u64;
    }
    let margin = box_radius as f64 / window as f64;
    let rec =
        |hits| EstimateRecord::new("two-point", d, (distance, None), margin, trials, hits, seed);
    let (rd, rf) = (rec(hits_d), rec(hits_f));
    let var = |p: f64| (1.0 - p) / (p * trials as f64);
    let log_ratio = (rd.p_hat / rf.p_hat).ln();
    let log_ratio_se = (var(rd.p_hat) + var(rf.p_hat)).sqrt();
    let tolerance = two_point_log_tolerance();
    Ok(FullspaceComparison {
        d,
        distance,
        window,
        box_radius,
        within: log_ratio.abs() < tolerance,
        dirichlet: rd,
        fullspace: rf,
        log_ratio,
        log_ratio_se,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_two_margins_of_at_least_one_and_a_half() {
        assert!(bias_harness(3, 4, &[2.0], 10, 1, 1).is_err());
        assert!(bias_harness(3, 4, &[1.2, 2.0], 10, 1, 1).is_err());
        assert!(bias_harness(3, 4, &[2.0, 1.5], 10, 1, 1).is_err());
    }

    #[test]
    fn replays_under_the_same_seed() {
        let a = bias_harness(3, 2, &[1.5, 2.0], 40, 5, 1).unwrap();
        let b = bias_harness(3, 2, &[1.5, 2.0], 40, 5, 2).unwrap();
        let s = |t: &BiasTable| {
            t.rows
                .iter()
                .map(|r| r.record.successes)
                .collect::<Vec<_>>()
        };
        assert_eq!(s(&a), s(&b));
    }
}
