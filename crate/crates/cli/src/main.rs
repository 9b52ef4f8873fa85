//! `fbas`: sample systems, check quorum intersection, evaluate the quorum
//! probability, run sweeps and simulate Slush.
//!
//! Exit status is 0 when a command completes (whatever the verdict), 2 for
//! usage or configuration errors and 1 for I/O failures.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use fbas_core::analytics::{
    classify_regime, expected_quorum_count, quorum_probability, DEFAULT_LOWER_EXPONENT,
};
use fbas_core::genmodel::{sample_with_metadata, GenerativeParams};
use fbas_core::qip::{
    brute_force_disjoint_quorums_with_cap, check_safety_after_deletion, find_disjoint_quorums,
    DEFAULT_ORACLE_CAP,
};
use fbas_core::slush::{run_slush, SlushConfig};
use fbas_core::sweep::{run_sweep, summarize_sweep, to_csv, SweepConfig};
use fbas_core::{Error, Fbas, NodeSet, QipVerdict};

#[derive(Parser)]
#[command(
    name = "fbas",
    version,
    about = "Quorum intersection tools for federated Byzantine agreement systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a system from the Poisson slice model and write it as JSON.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file. A `.meta.json` sidecar with the raw slice counts is
        /// written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a system for disjoint quorums.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        /// Use the exhaustive oracle instead of the branch-and-bound engine.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        oracle_cap: usize,
        /// Comma-separated nodes to delete before checking.
        #[arg(long, value_delimiter = ',')]
        byzantine: Option<Vec<usize>>,
    },
    /// Quorum probability, expected quorum count and regime of a parameter point.
    Prob {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        m: usize,
        /// Exponent c of the lower-bound condition λ <= n^c.
        #[arg(long, default_value_t = DEFAULT_LOWER_EXPONENT)]
        c: f64,
    },
    /// Sample and check every (k, λ, trial) cell and write the records as CSV.
    Sweep {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        k_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_list: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Per-instance time budget in seconds; 0 disables it.
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        oracle_cap: usize,
        /// Record wall-clock milliseconds per instance (the CSV is then no
        /// longer reproducible byte for byte).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Slush majority detector on a population with `ones` true votes.
    Slush {
        #[arg(long)]
        size: usize,
        #[arg(long)]
        ones: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
        #[arg(long, default_value_t = 100)]
        max_rounds: u64,
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn run(command: Command) -> Result<(), Failure> {
    let mut stdout = io::stdout().lock();
    match command {
        Command::Sample {
            n,
            k,
            lambda,
            seed,
            out,
        } => {
            let params = GenerativeParams::new(n, k, lambda, seed)?;
            let sample = sample_with_metadata(&params)?;
            write(&out, &(sample.fbas.to_json() + "\n"))?;
            write(&sidecar_path(&out), &(sample.metadata.to_json() + "\n"))?;
        }
        Command::Check {
            input,
            oracle,
            oracle_cap,
            byzantine,
        } => {
            let fbas = Fbas::from_json(&read(&input)?)?;
            let verdict = match byzantine {
                Some(nodes) => {
                    let b = NodeSet::from_indices(fbas.n(), nodes)?;
                    if oracle {
                        let (reduced, map) = fbas.delete_nodes(&b)?;
                        match brute_force_disjoint_quorums_with_cap(&reduced, oracle_cap, None)? {
                            QipVerdict::Satisfied => QipVerdict::Satisfied,
                            QipVerdict::Violated(a, c) => {
                                QipVerdict::Violated(map.lift(&a)?, map.lift(&c)?)
                            }
                        }
                    } else {
                        check_safety_after_deletion(&fbas, &b)?
                    }
                }
                None if oracle => brute_force_disjoint_quorums_with_cap(&fbas, oracle_cap, None)?,
                None => find_disjoint_quorums(&fbas)?,
            };
            writeln!(stdout, "{}", verdict.to_json()).map_err(|e| Failure::Io(e.to_string()))?;
        }
        Command::Prob { n, k, lambda, m, c } => {
            let doc = serde_json::json!({
                "p": quorum_probability(n, k, lambda, m)?,
                "expected_count": expected_quorum_count(n, k, lambda, m)?,
                "regime": classify_regime(n, k, lambda, c)?.as_str(),
            });
            writeln!(stdout, "{doc}").map_err(|e| Failure::Io(e.to_string()))?;
        }
        Command::Sweep {
            n,
            k_list,
            lambda_list,
            trials,
            seed,
            jobs,
            timeout,
            oracle,
            oracle_cap,
            timing,
            out,
        } => {
            if !(timeout.is_finite() && timeout >= 0.0) {
                return Err(Failure::Config(format!(
                    "timeout must be a non-negative number of seconds, got {timeout}"
                )));
            }
            let mut config = SweepConfig::new(n, k_list, lambda_list, trials, seed);
            config.jobs = jobs;
            config.oracle = oracle;
            config.oracle_cap = oracle_cap;
            config.record_timing = timing;
            config.per_instance_timeout = (timeout > 0.0).then(|| Duration::from_secs_f64(timeout));
            config.validate()?;
            let flagged = config.flagged_k();
            if !flagged.is_empty() {
                eprintln!("note: k = {flagged:?} exceed n/2; any two such slices intersect");
            }
            let records = run_sweep(&config)?;
            write(&out, &to_csv(&records))?;
            let io = |e: io::Error| Failure::Io(e.to_string());
            writeln!(
                stdout,
                "{:>4} {:>12} {:>9} {:>9}",
                "k", "lambda", "trials", "qip_frac"
            )
            .map_err(io)?;
            for cell in summarize_sweep(&records)? {
                let frac = cell
                    .fraction
                    .map_or("missing".to_string(), |f| format!("{f:.3}"));
                writeln!(
                    stdout,
                    "{:>4} {:>12} {:>9} {:>9}",
                    cell.k, cell.lambda, cell.trials, frac
                )
                .map_err(io)?;
            }
        }
        Command::Slush {
            size,
            ones,
            k,
            confidence,
            max_rounds,
            phi,
            seed,
        } => {
            let mut config = SlushConfig::new(
                SlushConfig::population_with_ones(size, ones)?,
                k,
                confidence,
                max_rounds,
                seed,
            );
            config.phi = phi;
            let outcome = run_slush(&config)?;
            writeln!(stdout, "{}", outcome.to_json()).map_err(|e| Failure::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
