//! Executing an [`ExperimentConfig`].

use gfflab_core::lattice::{BoxRegion, LatticePoint};
use gfflab_core::loop_soup::{isomorphism_check, IsomorphismReport};
use gfflab_core::observables::{estimate_ladder, EstimateRecord};
use serde::Serialize;

use crate::config::{ExperimentConfig, Quantity};
use crate::diagnostics::{
    bridge_grid, martingale_batch, q_variance, BridgeRow, MartingaleBatch, QVarianceReport,
};
use crate::error::{Result, RunnerError};
use crate::export::{export, write_file, FailureEntry, FailureManifest, Format};
use crate::fit::{fit_exponent_blocks, FitReport, DEFAULT_REPLICATES};

/// Endpoint values of the bridge oracle grid.
pub const BRIDGE_VALUES: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
pub const BRIDGE_STEPS: usize = 1 << 12;
pub const DEFAULT_MARTINGALE_RADIUS: u32 = 8;
pub const DEFAULT_SOUP_RADIUS: u32 = 4;

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum RunOutput {
    Ladder {
        records: Vec<EstimateRecord>,
        fit: Option<FitReport>,
    },
    QVariance(QVarianceReport),
    Martingale(MartingaleBatch),
    Isomorphism(IsomorphismReport),
    Bridge(Vec<BridgeRow>),
}

/// Vertices compared by the isomorphism check: the centre first.
pub fn isomorphism_vertices(d: usize) -> Vec<LatticePoint> {
    let e1 = LatticePoint::axis(d, 0, 1);
    vec![
        LatticePoint::origin(d),
        e1.clone(),
        e1.add(&LatticePoint::axis(d, 1, 1)),
        LatticePoint::axis(d, 0, 2),
    ]
}

/// Run one experiment. Bernoulli ladders write `<output>.csv` and
/// `<output>.json`; diagnostics write `<output>.json`. When trials fail,
/// the completed records are still written, a failure manifest is emitted
/// and the result is an error.
///
/// The non-Bernoulli quantities read the config as follows: `q-variance`
/// uses the ladder as radii and `trials` as samples per radius;
/// `martingale` uses the first ladder entry as `N` (default 8);
/// `isomorphism` uses the first ladder entry as the box radius (default 4);
/// `oracle-bridge` uses `trials` as bridge repetitions.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let workers = cfg.workers();
    let output = match cfg.quantity {
        Quantity::OneArm | Quantity::Crossing | Quantity::TwoPoint => {
            let plan = cfg.plan()?.expect("Bernoulli quantity");
            let est = estimate_ladder(&plan, cfg.trials, cfg.master_seed, workers)?;
            let fit = if est.records.len() >= 3 && est.records.iter().all(|r| r.successes > 0) {
                Some(fit_exponent_blocks(
                    &est.records,
                    &est.outcomes,
                    DEFAULT_REPLICATES,
                    cfg.master_seed,
                )?)
            } else {
                None
            };
            export(&est.records, fit.as_ref(), Format::Csv, &cfg.csv_path())?;
            export(&est.records, fit.as_ref(), Format::Json, &cfg.json_path())?;
            if !est.failures.is_empty() {
                let manifest = FailureManifest {
                    quantity: cfg.quantity.tag().to_string(),
                    master_seed: cfg.master_seed,
                    total_trials: cfg.trials,
                    failures: est
                        .failures
                        .iter()
                        .map(|(t, e)| FailureEntry {
                            trial: *t,
                            error: e.to_string(),
                        })
                        .collect(),
                };
                let path = cfg.failure_manifest_path();
                write_file(&path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
                return Err(RunnerError::PartialFailure {
                    failed: est.failures.len(),
                    total: cfg.trials,
                    manifest: path,
                });
            }
            return Ok(RunOutput::Ladder {
                records: est.records,
                fit,
            });
        }
        Quantity::QVariance => RunOutput::QVariance(q_variance(
            cfg.d,
            &cfg.ladder,
            cfg.margin,
            cfg.trials as usize,
            cfg.master_seed,
            workers,
        )?),
        Quantity::Martingale => {
            let n = cfg
                .ladder
                .first()
                .copied()
                .unwrap_or(DEFAULT_MARTINGALE_RADIUS);
            RunOutput::Martingale(martingale_batch(
                cfg.d,
                n,
                cfg.trials as usize,
                cfg.master_seed,
                0.5,
                workers,
            )?)
        }
        Quantity::Isomorphism => {
            let m = cfg.ladder.first().copied().unwrap_or(DEFAULT_SOUP_RADIUS);
            let bx = BoxRegion::centered(cfg.d, m)?;
            let vertices: Vec<LatticePoint> = isomorphism_vertices(cfg.d)
                .into_iter()
                .filter(|p| p.sup_norm() <= m as i64)
                .collect();
            RunOutput::Isomorphism(isomorphism_check(
                &bx,
                &vertices,
                cfg.trials as usize,
                cfg.master_seed,
            )?)
        }
        Quantity::OracleBridge => RunOutput::Bridge(bridge_grid(
            &BRIDGE_VALUES,
            cfg.d,
            BRIDGE_STEPS,
            cfg.trials as usize,
            cfg.master_seed,
        )?),
    };
    write_file(
        &cfg.json_path(),
        &(serde_json::to_string_pretty(&output)? + "\n"),
    )?;
    Ok(output)
}
