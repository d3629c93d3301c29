//! Replicated experiments: configuration, per-replication records, CSV
//! persistence with resume, quantiles, log-log fits and figure data.

mod config_file;
mod figures;
mod stats;
pub mod svg;

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolver::{smallest_eig, EigResult, Method, SolverOptions};
use crate::error::{Error, Result};
use crate::fourier_bound::{evaluate_bound, BoundMode};
use crate::rng::substream_seed;
use crate::structured_matrix::{draw_signal, validate_dims, EnsembleSpec, Kind, SignalVector};

pub use config_file::{parse_config, read_config, ConfigFile};
pub use figures::{
    figure_data, figure_from_records, fig1_data, histogram, is_unimodal, Fig1Data, FigureOutput,
    Histogram, HISTOGRAM_BINS,
};
pub use stats::{
    fit_groups, fit_loglog, mean_check, monotonicity, quantile_nearest_rank, quantiles, GroupFit,
    MonotonicityReport, QuantileRow, QuantileTable, RegressionFit,
};

/// Exact CSV header of the results file.
pub const CSV_HEADER: &str = "kind,p,n,rep,seed,lambda_min,solver,iters,residual,bound,wall_ms";

/// Replications computed and flushed together.
pub const CHUNK: usize = 64;

/// How `n` is chosen for each `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NRule {
    /// `n = q·p`.
    Ratio(usize),
    /// The same `n` for every `p`.
    Fixed(usize),
    /// `n_i` paired with `p_i`.
    Paired(Vec<usize>),
}

impl NRule {
    /// Label used in figure file names.
    pub fn label(&self) -> String {
        match self {
            NRule::Ratio(q) => q.to_string(),
            NRule::Fixed(n) => format!("n{n}"),
            NRule::Paired(_) => "paired".into(),
        }
    }
}

/// Periodogram-bound settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSettings {
    pub beta: f64,
    pub mode: BoundMode,
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self { beta: 0.5, mode: BoundMode::Practical }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub p_list: Vec<usize>,
    pub n_rule: NRule,
    pub reps: usize,
    pub base_seed: u64,
    pub solver: SolverOptions,
    pub bound: Option<BoundSettings>,
    pub out: Option<PathBuf>,
    /// Continue an interrupted run found at `out`.
    pub resume: bool,
    /// Fill the `wall_ms` column (makes the CSV non-reproducible).
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(kind: Kind, p_list: Vec<usize>, n_rule: NRule, reps: usize, base_seed: u64) -> Self {
        Self {
            kind,
            p_list,
            n_rule,
            reps,
            base_seed,
            solver: SolverOptions::default(),
            bound: None,
            out: None,
            resume: false,
            timing: false,
        }
    }

    /// `(p, n)` cells in run order.
    pub fn cells(&self) -> Result<Vec<(usize, usize)>> {
        if self.p_list.is_empty() {
            return Err(Error::Config("p list is empty".into()));
        }
        let cells: Vec<(usize, usize)> = match &self.n_rule {
            NRule::Ratio(q) => {
                if *q == 0 {
                    return Err(Error::Config("ratio must be at least 1".into()));
                }
                self.p_list.iter().map(|&p| (p, q * p)).collect()
            }
            NRule::Fixed(n) => self.p_list.iter().map(|&p| (p, *n)).collect(),
            NRule::Paired(ns) => {
                if ns.len() != self.p_list.len() {
                    return Err(Error::Config(format!(
                        "n list has {} entries but p list has {}",
                        ns.len(),
                        self.p_list.len()
                    )));
                }
                self.p_list.iter().copied().zip(ns.iter().copied()).collect()
            }
        };
        for &(p, n) in &cells {
            validate_dims(p, n)?;
        }
        Ok(cells)
    }

    pub fn validate(&self) -> Result<Vec<(usize, usize)>> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.bound.is_some() && self.kind != Kind::Circulant {
            return Err(Error::Config("bound evaluation needs kind = circulant".into()));
        }
        if let Some(b) = &self.bound {
            if !(b.beta > 0.0 && b.beta.is_finite()) {
                return Err(Error::Config(format!("beta must be positive, got {}", b.beta)));
            }
        }
        let cells = self.cells()?;
        let mut seen = cells.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != cells.len() {
            return Err(Error::Config("duplicate (p, n) cell".into()));
        }
        Ok(cells)
    }
}

/// One replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: Kind,
    pub p: usize,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub lambda_min: f64,
    pub solver: Method,
    pub iters: usize,
    pub residual: f64,
    pub bound: Option<f64>,
    pub wall_ms: Option<f64>,
}

/// `λ_p` for replication `rep` of cell `(p, n)`.
pub fn replicate(
    kind: Kind,
    p: usize,
    n: usize,
    base_seed: u64,
    rep: usize,
    opts: &SolverOptions,
) -> Result<EigResult> {
    let seed = substream_seed(base_seed, p, n, rep);
    let signal = draw_signal(kind, p, n, seed)?;
    smallest_eig(&EnsembleSpec::new(kind, p, n)?, &signal, opts)
}

/// Runs `config` with the standard Gaussian signals.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_experiment_with(config, draw_signal)
}

/// Runs `config`, obtaining each signal from `signal_for(kind, p, n, seed)`.
///
/// Records are ordered by cell and replication and do not depend on the
/// number of worker threads. With `config.out` set, they are appended to the
/// CSV in chunks of [`CHUNK`]; with `config.resume`, complete rows already in
/// the file are kept and only the missing replications are computed.
pub fn run_experiment_with<F>(config: &ExperimentConfig, signal_for: F) -> Result<Vec<RunRecord>>
where
    F: Fn(Kind, usize, usize, u64) -> Result<SignalVector> + Sync,
{
    let cells = config.validate()?;
    let keys: Vec<(usize, usize, usize)> = cells
        .iter()
        .flat_map(|&(p, n)| (0..config.reps).map(move |rep| (p, n, rep)))
        .collect();

    let (mut records, mut sink) = match &config.out {
        Some(path) => {
            let (done, file) = open_output(path, config, &keys)?;
            (done, Some(BufWriter::new(file)))
        }
        None => (Vec::new(), None),
    };

    for chunk in keys[records.len()..].chunks(CHUNK) {
        let fresh: Vec<RunRecord> = chunk
            .par_iter()
            .map(|&(p, n, rep)| compute_record(config, p, n, rep, &signal_for))
            .collect::<Result<_>>()?;
        if let Some(w) = sink.as_mut() {
            write_rows(w, &fresh)?;
            w.flush()?;
        }
        records.extend(fresh);
    }
    Ok(records)
}

fn compute_record<F>(
    config: &ExperimentConfig,
    p: usize,
    n: usize,
    rep: usize,
    signal_for: &F,
) -> Result<RunRecord>
where
    F: Fn(Kind, usize, usize, u64) -> Result<SignalVector>,
{
    let start = Instant::now();
    let seed = substream_seed(config.base_seed, p, n, rep);
    let signal = signal_for(config.kind, p, n, seed)?;
    let spec = EnsembleSpec::new(config.kind, p, n)?;
    let eig = smallest_eig(&spec, &signal, &config.solver)?;
    let bound = match &config.bound {
        Some(b) => Some(evaluate_bound(&signal, p, b.beta, b.mode)?.bound),
        None => None,
    };
    let wall_ms = config.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    Ok(RunRecord {
        kind: config.kind,
        p,
        n,
        rep,
        seed,
        lambda_min: eig.lambda_min.max(0.0),
        solver: eig.method,
        iters: eig.iterations,
        residual: eig.residual,
        bound,
        wall_ms,
    })
}

fn write_rows<W: Write>(w: &mut W, rows: &[RunRecord]) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

/// Serializes records as the results CSV, header included.
pub fn write_records<W: Write>(mut w: W, records: &[RunRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    write_rows(&mut w, records)
}

/// Reads a results CSV written by this module.
pub fn read_records<R: std::io::Read>(r: R) -> Result<Vec<RunRecord>> {
    let mut csv = csv::Reader::from_reader(r);
    let header: Vec<&str> = csv.headers()?.iter().collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config(format!("unexpected results header: {}", header.join(","))));
    }
    csv.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_records_path(path: &Path) -> Result<Vec<RunRecord>> {
    read_records(File::open(path)?)
}

/// Opens `path` for appending. On resume, returns the complete rows already
/// present (which must be a prefix of `keys`) and drops any partial row.
fn open_output(
    path: &Path,
    config: &ExperimentConfig,
    keys: &[(usize, usize, usize)],
) -> Result<(Vec<RunRecord>, File)> {
    if !(config.resume && path.exists()) {
        let mut file = File::create(path)?;
        writeln!(file, "{CSV_HEADER}")?;
        return Ok((Vec::new(), file));
    }
    let mut reader = BufReader::new(File::open(path)?);
    let mut kept = 0u64;
    let mut lines = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || !line.ends_with('\n') {
            break;
        }
        kept += line.len() as u64;
        lines.push(line.clone());
    }
    let mut file = OpenOptions::new().read(true).write(true).open(path)?;
    if lines.is_empty() {
        file.set_len(0)?;
        writeln!(file, "{CSV_HEADER}")?;
        return Ok((Vec::new(), file));
    }
    let done = read_records(lines.concat().as_bytes())?;
    if done.len() > keys.len() {
        return Err(Error::Config(format!(
            "{} already holds more rows than the configuration",
            path.display()
        )));
    }
    for (r, &(p, n, rep)) in done.iter().zip(keys) {
        if r.kind != config.kind || (r.p, r.n, r.rep) != (p, n, rep) {
            return Err(Error::Config(format!(
                "{} does not match the configuration at row ({}, {}, {}, {})",
                path.display(),
                r.kind,
                r.p,
                r.n,
                r.rep
            )));
        }
    }
    file.set_len(kept)?;
    file.seek(SeekFrom::End(0))?;
    Ok((done, file))
}

/// One-line summary of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub cells: usize,
    pub reps: usize,
    pub rows: usize,
    pub min_lambda: f64,
    pub median_lambda: f64,
}

pub fn summarize(config: &ExperimentConfig, records: &[RunRecord]) -> Result<RunSummary> {
    if records.is_empty() {
        return Err(Error::Empty("no records to summarize".into()));
    }
    let mut values: Vec<f64> = records.iter().map(|r| r.lambda_min).collect();
    values.sort_by(f64::total_cmp);
    Ok(RunSummary {
        cells: config.cells()?.len(),
        reps: config.reps,
        rows: records.len(),
        min_lambda: values[0],
        median_lambda: quantile_nearest_rank(&values, 0.5)?,
    })
}
