//! Parameter sweeps over `(k, λ)`.
//!
//! Every `(k, λ, trial)` cell samples one system with a seed derived from the
//! master seed and checks it for quorum intersection. Cells run in parallel;
//! the output is sorted by `(k, λ, trial)` so the CSV is identical for any
//! worker count.
//!
//! Wall-clock timing is off by default and `elapsed_ms` is then written as
//! 0, so the file depends on nothing but the configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::genmodel::{derive_seed, sample_fbas, GenerativeParams};
use crate::nodeset::MAX_NODES;
use crate::qip::{
    brute_force_disjoint_quorums_with_cap, find_disjoint_quorums_until, DEFAULT_ORACLE_CAP,
};

/// Exact header line of the sweep CSV.
pub const CSV_HEADER: &str = "n,k,lambda,trial,seed,qip,elapsed_ms,timed_out";

/// Default per-instance time budget.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// The decade grid `1, 10, ..., 10^4`.
pub const DECADE_LAMBDAS: [f64; 5] = [1.0, 10.0, 100.0, 1_000.0, 10_000.0];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub k_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Check with the brute-force oracle instead of the engine.
    pub oracle: bool,
    pub oracle_cap: usize,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    pub per_instance_timeout: Option<Duration>,
    /// Record wall-clock time per instance. Makes the CSV nondeterministic.
    pub record_timing: bool,
}

impl SweepConfig {
    pub fn new(
        n: usize,
        k_values: Vec<usize>,
        lambda_values: Vec<f64>,
        trials: usize,
        master_seed: u64,
    ) -> Self {
        SweepConfig {
            n,
            k_values,
            lambda_values,
            trials,
            master_seed,
            oracle: false,
            oracle_cap: DEFAULT_ORACLE_CAP,
            jobs: 0,
            per_instance_timeout: Some(DEFAULT_TIMEOUT),
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.k_values.is_empty() || self.lambda_values.is_empty() {
            return Err(invalid("k and lambda lists must be nonempty"));
        }
        for &k in &self.k_values {
            GenerativeParams::new(self.n, k, 0.0, 0)?;
        }
        for &lambda in &self.lambda_values {
            GenerativeParams::new(self.n, self.k_values[0], lambda, 0)?;
        }
        if self.oracle && self.n > self.oracle_cap.min(MAX_NODES - 1) {
            return Err(Error::UniverseTooLarge {
                n: self.n,
                max: self.oracle_cap,
            });
        }
        Ok(())
    }

    /// Slice sizes above n/2, where any two slices already intersect.
    pub fn flagged_k(&self) -> Vec<usize> {
        self.k_values
            .iter()
            .copied()
            .filter(|&k| 2 * k > self.n)
            .collect()
    }

    pub fn record_count(&self) -> usize {
        self.k_values.len() * self.lambda_values.len() * self.trials
    }
}

/// Seed of one sweep cell.
pub fn cell_seed(master_seed: u64, k: usize, lambda: f64, trial: usize) -> u64 {
    derive_seed(&[master_seed, k as u64, lambda.to_bits(), trial as u64])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub trial: usize,
    pub seed: u64,
    /// Whether quorum intersection held. Meaningless when `timed_out`.
    pub qip: bool,
    pub elapsed_ms: u64,
    pub timed_out: bool,
}

impl SweepRecord {
    fn csv_line(&self, out: &mut String) {
        // f64 Display never uses exponent notation.
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.k,
            self.lambda,
            self.trial,
            self.seed,
            u8::from(self.qip),
            self.elapsed_ms,
            u8::from(self.timed_out)
        )
        .expect("writing to a String");
    }
}

/// Samples and checks a single cell.
pub fn run_cell(config: &SweepConfig, k: usize, lambda: f64, trial: usize) -> Result<SweepRecord> {
    let seed = cell_seed(config.master_seed, k, lambda, trial);
    let params = GenerativeParams::new(config.n, k, lambda, seed)?;
    let start = Instant::now();
    let deadline = config.per_instance_timeout.map(|t| start + t);
    let fbas = sample_fbas(&params)?;
    let verdict = if config.oracle {
        brute_force_disjoint_quorums_with_cap(&fbas, config.oracle_cap, deadline)
    } else {
        find_disjoint_quorums_until(&fbas, deadline)
    };
    let (qip, timed_out) = match verdict {
        Ok(v) => (v.is_satisfied(), false),
        Err(Error::Timeout) => (false, true),
        Err(e) => return Err(e),
    };
    let elapsed_ms = if config.record_timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(SweepRecord {
        n: config.n,
        k,
        lambda,
        trial,
        seed,
        qip,
        elapsed_ms,
        timed_out,
    })
}

/// Runs every cell of the sweep and returns the records sorted by `(k, λ, trial)`.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let cells: Vec<(usize, f64, usize)> = config
        .k_values
        .iter()
        .flat_map(|&k| {
            config
                .lambda_values
                .iter()
                .flat_map(move |&l| (0..config.trials).map(move |t| (k, l, t)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let mut records = pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, l, t)| run_cell(config, k, l, t))
            .collect::<Result<Vec<_>>>()
    })?;
    records.sort_by(|a, b| {
        a.k.cmp(&b.k)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(records)
}

/// Renders records as sweep CSV, header included, `\n` line endings.
pub fn to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(48 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        r.csv_line(&mut out);
    }
    out
}

/// Parses sweep CSV produced by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header {CSV_HEADER:?}, found {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| parse_row(line).map_err(|e| Error::Parse(format!("row {}: {e}", i + 1))))
        .collect()
}

fn parse_row(line: &str) -> std::result::Result<SweepRecord, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 8 {
        return Err(format!("expected 8 fields, found {}", f.len()));
    }
    fn num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad value {s:?}"))
    }
    fn bit(s: &str) -> std::result::Result<bool, String> {
        match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(format!("expected 0 or 1, found {s:?}")),
        }
    }
    Ok(SweepRecord {
        n: num(f[0])?,
        k: num(f[1])?,
        lambda: num(f[2])?,
        trial: num(f[3])?,
        seed: num(f[4])?,
        qip: bit(f[5])?,
        elapsed_ms: num(f[6])?,
        timed_out: bit(f[7])?,
    })
}

/// Aggregate of one `(k, λ)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub trials: usize,
    /// Trials that finished within the time budget.
    pub completed: usize,
    pub satisfied: usize,
    /// Fraction of completed trials with quorum intersection; `None` when
    /// every trial timed out.
    pub fraction: Option<f64>,
}

/// Per-cell fraction of trials that satisfied quorum intersection.
pub fn summarize_sweep(records: &[SweepRecord]) -> Result<Vec<CellSummary>> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    if let Some(r) = records.iter().find(|r| r.n != first.n) {
        return Err(invalid(format!("records mix n={} and n={}", first.n, r.n)));
    }
    let mut cells: BTreeMap<(usize, u64), CellSummary> = BTreeMap::new();
    for r in records {
        // Order non-negative floats by their bit patterns.
        let cell = cells
            .entry((r.k, r.lambda.to_bits()))
            .or_insert(CellSummary {
                n: r.n,
                k: r.k,
                lambda: r.lambda,
                trials: 0,
                completed: 0,
                satisfied: 0,
                fraction: None,
            });
        cell.trials += 1;
        if !r.timed_out {
            cell.completed += 1;
            cell.satisfied += usize::from(r.qip);
        }
    }
    Ok(cells
        .into_values()
        .map(|mut c| {
            c.fraction = (c.completed > 0).then(|| c.satisfied as f64 / c.completed as f64);
            c
        })
        .collect())
}
