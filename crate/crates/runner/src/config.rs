//! Declarative experiment description.
//!
//! A config file is flat TOML, one `key = value` per line:
//!
//! ```toml
//! d = 3
//! quantity = "one-arm"      # one-arm | crossing | two-point | q-variance |
//!                           # martingale | isomorphism | oracle-bridge
//! ladder = [8, 16, 32, 64]  # radii, distances, or outer radii for crossing
//! inner = 4                 # crossing only: the inner radius n
//! trials = 20000
//! margin = 2.0
//! master_seed = 1
//! workers = 4               # optional; defaults to GFFLAB_THREADS or all cores
//! output = "results/one_arm_d3"
//! ```
//!
//! Outputs go to `<output>.csv` and `<output>.json`.

use std::path::{Path, PathBuf};

use gfflab_core::observables::{LadderPlan, Observable, DEFAULT_MARGIN};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result, RunnerError};

pub const THREADS_ENV: &str = "GFFLAB_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    OneArm,
    Crossing,
    TwoPoint,
    QVariance,
    Martingale,
    Isomorphism,
    OracleBridge,
}

impl Quantity {
    pub fn tag(self) -> &'static str {
        match self {
            Quantity::OneArm => "one-arm",
            Quantity::Crossing => "crossing",
            Quantity::TwoPoint => "two-point",
            Quantity::QVariance => "q-variance",
            Quantity::Martingale => "martingale",
            Quantity::Isomorphism => "isomorphism",
            Quantity::OracleBridge => "oracle-bridge",
        }
    }
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_output() -> PathBuf {
    PathBuf::from("gfflab_out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub quantity: Quantity,
    #[serde(default)]
    pub ladder: Vec<u32>,
    /// Inner radius `n` of crossing events.
    #[serde(default)]
    pub inner: Option<u32>,
    pub trials: u64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunnerError::Config(m));
        if self.d < 3 {
            return bad(format!("d must be at least 3, got {}", self.d));
        }
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "ladder must be strictly increasing: {:?}",
                self.ladder
            ));
        }
        if !(self.margin >= 1.0) {
            return bad(format!("margin must be at least 1, got {}", self.margin));
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        let needs_ladder = matches!(
            self.quantity,
            Quantity::OneArm | Quantity::Crossing | Quantity::TwoPoint | Quantity::QVariance
        );
        if needs_ladder && self.ladder.is_empty() {
            return bad(format!("{} needs a nonempty ladder", self.quantity.tag()));
        }
        if self.quantity == Quantity::Crossing {
            match self.inner {
                None => return bad("crossing needs `inner`".into()),
                Some(n) if n < 1 || self.ladder.first().is_some_and(|&m| m < n) => {
                    return bad(format!(
                        "crossing needs 1 <= inner <= every ladder radius, got inner {n}"
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(default_workers)
    }

    /// Ladder plan for the Bernoulli quantities.
    pub fn plan(&self) -> Result<Option<LadderPlan>> {
        let observable = match self.quantity {
            Quantity::OneArm => Observable::OneArm {
                radii: self.ladder.clone(),
            },
            Quantity::TwoPoint => Observable::TwoPoint {
                distances: self.ladder.clone(),
            },
            Quantity::Crossing => {
                let n = self.inner.expect("validated");
                Observable::Crossing {
                    pairs: self.ladder.iter().map(|&m| (n, m)).collect(),
                }
            }
            _ => return Ok(None),
        };
        Ok(Some(LadderPlan::new(self.d, observable, self.margin)?))
    }

    pub fn csv_path(&self) -> PathBuf {
        with_suffix(&self.output, "csv")
    }

    pub fn json_path(&self) -> PathBuf {
        with_suffix(&self.output, "json")
    }

    pub fn failure_manifest_path(&self) -> PathBuf {
        with_suffix(&self.output, "failures.json")
    }
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Worker count from `GFFLAB_THREADS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}
