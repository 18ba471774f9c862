use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfflab_runner::acceptance::{run_suite, Suite, DEFAULT_SEED};
use gfflab_runner::bias::{bias_harness, fullspace_comparison};
use gfflab_runner::config::{default_workers, ExperimentConfig, THREADS_ENV};
use gfflab_runner::error::io_err;
use gfflab_runner::export::{load_records, write_file};
use gfflab_runner::fit::{fit_exponent, DEFAULT_REPLICATES};
use gfflab_runner::run::{run, RunOutput};
use gfflab_runner::{Quantity, Result, RunnerError};

#[derive(Parser)]
#[command(
    name = "gfflab",
    version,
    about = "Level-set percolation experiments for the lattice Gaussian free field"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file; flags override file keys.
    Estimate(EstimateArgs),
    /// Refit the exponent of a stored CSV or JSON record file.
    Fit {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exploration-martingale batch with tail-bound report.
    DiagnoseMartingale {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        n: u32,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare the loop-soup occupation field with half the squared field.
    CheckIsomorphism {
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// Box radius.
        #[arg(long, default_value_t = 4)]
        m: u32,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Brownian-bridge oracle for the edge-opening probability.
    OracleBridge {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// One-arm probability at several outer margins.
    BiasHarness {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        n: u32,
        #[arg(long, value_delimiter = ',', default_values_t = [1.5, 2.0, 3.0])]
        margins: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also compare two-point connectivity at this distance with the
        /// exact full-space field on `B(2 distance)`.
        #[arg(long)]
        fullspace_distance: Option<u32>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the acceptance suite and print one line per criterion.
    Acceptance {
        /// fast | ci | full
        #[arg(long, default_value = "fast")]
        suite: Suite,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Machine-readable verdicts.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EstimateArgs {
    /// Config file; optional when the flags give every required key.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// one-arm | crossing | two-point | q-variance | martingale | isomorphism | oracle-bridge
    #[arg(long)]
    quantity: Option<String>,
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<u32>>,
    #[arg(long)]
    inner: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl EstimateArgs {
    /// File keys overlaid by the flags that were given.
    fn config(&self) -> Result<ExperimentConfig> {
        let mut table: toml::Table = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(io_err(path))?
                .parse()?,
            None => toml::Table::new(),
        };
        let mut set = |k: &str, v: Option<toml::Value>| {
            if let Some(v) = v {
                table.insert(k.to_string(), v);
            }
        };
        let int = |v: u64| toml::Value::Integer(v as i64);
        set("d", self.d.map(|v| int(v as u64)));
        set("quantity", self.quantity.clone().map(toml::Value::String));
        set(
            "ladder",
            self.ladder
                .as_ref()
                .map(|l| toml::Value::Array(l.iter().map(|&v| int(v as u64)).collect())),
        );
        set("inner", self.inner.map(|v| int(v as u64)));
        set("trials", self.trials.map(int));
        set("margin", self.margin.map(toml::Value::Float));
        set("master_seed", self.master_seed.map(int));
        set("workers", self.workers.map(|v| int(v as u64)));
        set(
            "output",
            self.output
                .as_ref()
                .map(|p| toml::Value::String(p.to_string_lossy().into_owned())),
        );
        let text = toml::to_string(&table).map_err(|e| RunnerError::Config(e.to_string()))?;
        ExperimentConfig::from_toml_str(&text)
    }
}

fn emit<T: serde::Serialize>(value: &T, output: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match output {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summarize(cfg: &ExperimentConfig, out: &RunOutput) {
    if let RunOutput::Ladder { records, fit } = out {
        for r in records {
            eprintln!(
                "{} d={} {}:{:?} p_hat={:.5} [{:.5}, {:.5}]",
                r.quantity, r.d, r.param1, r.param2, r.p_hat, r.ci_low, r.ci_high
            );
        }
        if let Some(f) = fit {
            eprintln!(
                "slope {:.4} (95% CI {:.4}..{:.4}), R^2 {:.4}",
                f.slope, f.slope_ci.0, f.slope_ci.1, f.r_squared
            );
        }
        eprintln!(
            "wrote {} and {}",
            cfg.csv_path().display(),
            cfg.json_path().display()
        );
    } else {
        eprintln!("wrote {}", cfg.json_path().display());
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let workers = default_workers();
    match cli.command {
        Command::Estimate(args) => {
            let cfg = args.config()?;
            let out = run(&cfg)?;
            summarize(&cfg, &out);
        }
        Command::Fit {
            input,
            replicates,
            seed,
            output,
        } => {
            let records = load_records(&input)?;
            emit(&fit_exponent(&records, replicates, seed)?, output.as_ref())?;
        }
        Command::DiagnoseMartingale {
            d,
            n,
            samples,
            seed,
            output,
        } => {
            let cfg = diagnostic_config(d, Quantity::Martingale, vec![n], samples, seed, output);
            let RunOutput::Martingale(batch) = run_config(&cfg)? else {
                unreachable!()
            };
            for c in &batch.tail {
                eprintln!(
                    "t/sqrt(T)={} T={:.4}: frequency {:.4} +/- {:.4} vs bound {:.4} within={}",
                    c.ratio, c.qv_bound, c.frequency, c.se, c.gaussian_bound, c.within
                );
            }
        }
        Command::CheckIsomorphism {
            d,
            m,
            samples,
            seed,
            output,
        } => {
            let cfg = diagnostic_config(d, Quantity::Isomorphism, vec![m], samples, seed, output);
            let RunOutput::Isomorphism(rep) = run_config(&cfg)? else {
                unreachable!()
            };
            eprintln!("{}", rep.header);
            for v in &rep.vertices {
                eprintln!(
                    "vertex {:?}: KS p {:.4} (control {:.4})",
                    v.vertex, v.ks.p_value, v.control.p_value
                );
            }
        }
        Command::OracleBridge {
            d,
            reps,
            seed,
            output,
        } => {
            let cfg = diagnostic_config(d, Quantity::OracleBridge, Vec::new(), reps, seed, output);
            let RunOutput::Bridge(rows) = run_config(&cfg)? else {
                unreachable!()
            };
            for r in &rows {
                eprintln!(
                    "a={} b={}: {:.5} vs {:.5} (z {:.2})",
                    r.a, r.b, r.estimate.p_extrapolated, r.exact, r.z_score
                );
            }
        }
        Command::BiasHarness {
            d,
            n,
            margins,
            trials,
            seed,
            fullspace_distance,
            output,
        } => {
            let table = bias_harness(d, n, &margins, trials, seed, workers)?;
            for r in &table.rows {
                eprintln!(
                    "margin {}: theta {:.5} [{:.5}, {:.5}]",
                    r.margin, r.record.p_hat, r.record.ci_low, r.record.ci_high
                );
            }
            let fullspace = fullspace_distance
                .map(|r| fullspace_comparison(d, r, 2 * r, (2 * r) * 2, trials, seed))
                .transpose()?;
            emit(
                &serde_json::json!({ "margins": table, "fullspace": fullspace }),
                output.as_ref(),
            )?;
        }
        Command::Acceptance { suite, seed, json } => {
            let report = run_suite(suite, seed, workers, |r| println!("{r}"));
            if let Some(path) = json {
                emit(&report, Some(&path))?;
            }
            return Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn diagnostic_config(
    d: usize,
    quantity: Quantity,
    ladder: Vec<u32>,
    trials: u64,
    seed: u64,
    output: Option<PathBuf>,
) -> ExperimentConfig {
    ExperimentConfig {
        d,
        quantity,
        ladder,
        inner: None,
        trials,
        margin: gfflab_core::observables::DEFAULT_MARGIN,
        master_seed: seed,
        workers: None,
        output: output
            .map(|p| p.with_extension(""))
            .unwrap_or_else(|| PathBuf::from(format!("gfflab_{}", quantity.tag()))),
    }
}

fn run_config(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let out = run(cfg)?;
    summarize(cfg, &out);
    Ok(out)
}

fn main() -> ExitCode {
    // The thread cap also bounds rayon's global pool.
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if std::env::var_os("RAYON_NUM_THREADS").is_none() {
            std::env::set_var("RAYON_NUM_THREADS", v);
        }
    }
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
