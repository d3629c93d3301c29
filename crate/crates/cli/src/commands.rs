use std::fs;
use std::path::Path;

use serde::Serialize;
use smalleig::eigensolver::{dense_spectrum, SolverOptions};
use smalleig::fourier_bound::{default_schedule, periodogram_bound, test_vector, BoundMode};
use smalleig::mc_harness::{
    fit_groups, figure_data, mean_check, monotonicity, quantiles, read_config, read_records_path,
    run_experiment, summarize, BoundSettings, ExperimentConfig, GroupFit, MonotonicityReport, NRule,
};
use smalleig::rng::substream_seed;
use smalleig::structured_matrix::{draw_signal, EnsembleSpec, Kind, SignalVector};
use smalleig::theory_checks::{run_suite, SuiteOptions};
use smalleig::{Error, Result};

use crate::{BoundArgs, CheckArgs, Command, EnsembleArgs, FiguresArgs, RegressArgs, SignalChoice, SimulateArgs};

/// Runs one subcommand and returns its exit code.
pub fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Bound(a) => bound(a),
        Command::Regress(a) => regress(a),
        Command::Figures(a) => figures(a),
        Command::Check(a) => check(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn solver_options(e: &EnsembleArgs) -> SolverOptions {
    SolverOptions {
        tol: e.tol,
        auto_threshold: e.auto_threshold,
        dense_cap: e.dense_cap,
        ..SolverOptions::with_solver(e.solver)
    }
}

fn experiment_from(e: &EnsembleArgs) -> Result<ExperimentConfig> {
    if let Some(path) = &e.config {
        return Ok(read_config(path)?.experiment);
    }
    let n_rule = match (e.n, e.ratio) {
        (Some(n), None) => NRule::Fixed(n),
        (None, Some(q)) => NRule::Ratio(q),
        _ => return Err(Error::Config("give exactly one of --n and --ratio".into())),
    };
    let mut cfg = ExperimentConfig::new(e.kind, e.p.clone(), n_rule, e.reps, e.seed);
    cfg.solver = solver_options(e);
    Ok(cfg)
}

fn simulate(a: SimulateArgs) -> Result<u8> {
    let mut cfg = experiment_from(&a.ensemble)?;
    if a.bound {
        cfg.bound = Some(BoundSettings { beta: a.beta, mode: a.mode });
    }
    if let Some(out) = a.out {
        cfg.out = Some(out);
    }
    if cfg.out.is_none() {
        return Err(Error::Config("an output path is required (--out)".into()));
    }
    cfg.resume = a.resume;
    cfg.timing = a.timing;
    if let Some(dir) = cfg.out.as_ref().and_then(|p| p.parent()).filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let records = run_experiment(&cfg)?;
    let s = summarize(&cfg, &records)?;
    println!(
        "cells={} reps={} rows={} min_lambda={:.6e} median_lambda={:.6e} out={}",
        s.cells,
        s.reps,
        s.rows,
        s.min_lambda,
        s.median_lambda,
        cfg.out.as_deref().map(Path::display).map(|d| d.to_string()).unwrap_or_default()
    );
    Ok(0)
}

#[derive(Serialize)]
struct Trial {
    trial: usize,
    seed: u64,
    lambda_min: f64,
    bound: f64,
    unshifted: f64,
    argmin_tau: usize,
    ratio: f64,
}

#[derive(Serialize)]
struct BoundReport {
    p: usize,
    n: usize,
    beta: f64,
    mode: BoundMode,
    sigma_p: f64,
    b_p: usize,
    shifts: usize,
    signal: &'static str,
    trials: Vec<Trial>,
    violations: usize,
    max_ratio: f64,
    median_ratio: f64,
}

fn bound(a: BoundArgs) -> Result<u8> {
    if a.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let spec = EnsembleSpec::new(Kind::Circulant, a.p, a.n)?;
    let schedule = default_schedule(a.p, a.n, a.beta, a.mode)?;
    let tv = test_vector(a.p, a.n, schedule.sigma_p)?;
    let mut trials = Vec::with_capacity(a.trials);
    for trial in 0..a.trials {
        let seed = substream_seed(a.seed, a.p, a.n, trial);
        let signal = match a.signal {
            SignalChoice::Gaussian => draw_signal(Kind::Circulant, a.p, a.n, seed)?,
            SignalChoice::Impulse => {
                let mut x = vec![0.0; a.n];
                x[0] = 1.0;
                SignalVector::circulant(x)
            }
        };
        let lambda_min = dense_spectrum(&spec, &signal)?[0];
        let eval = periodogram_bound(&signal, &tv, &schedule)?;
        trials.push(Trial {
            trial,
            seed,
            lambda_min,
            bound: eval.bound,
            unshifted: eval.unshifted,
            argmin_tau: eval.argmin_tau,
            ratio: eval.bound / lambda_min,
        });
    }
    let violations = trials.iter().filter(|t| t.lambda_min > t.bound + 1e-9).count();
    let mut ratios: Vec<f64> = trials.iter().map(|t| t.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let report = BoundReport {
        p: a.p,
        n: a.n,
        beta: a.beta,
        mode: a.mode,
        sigma_p: schedule.sigma_p,
        b_p: schedule.b_p,
        shifts: schedule.k,
        signal: match a.signal {
            SignalChoice::Gaussian => "gaussian",
            SignalChoice::Impulse => "impulse",
        },
        violations,
        max_ratio: *ratios.last().unwrap_or(&f64::NAN),
        median_ratio: ratios[(ratios.len() - 1) / 2],
        trials,
    };
    print_json(&report)?;
    Ok(if violations == 0 { 0 } else { 3 })
}

#[derive(Serialize)]
struct RegressReport {
    level: f64,
    fits: Vec<GroupFit>,
    monotonicity: Vec<MonotonicityReport>,
    /// `(kind, p, n, mean)` cells with mean λ_p above 1.1.
    mean_above_limit: Vec<(Kind, usize, usize, f64)>,
}

fn regress(a: RegressArgs) -> Result<u8> {
    if !(a.quantile > 0.0 && a.quantile <= 100.0) {
        return Err(Error::InvalidParameter(format!("--quantile must be in (0, 100], got {}", a.quantile)));
    }
    let level = a.quantile / 100.0;
    let records = read_records_path(&a.input)?;
    let table = quantiles(&records, &[level])?;
    let report = RegressReport {
        level,
        fits: fit_groups(&table, level)?,
        monotonicity: monotonicity(&table, level)?,
        mean_above_limit: mean_check(&table, 1.1),
    };
    print_json(&report)?;
    Ok(0)
}

fn figures(a: FiguresArgs) -> Result<u8> {
    let configs: Vec<ExperimentConfig> = if let Some(path) = &a.config {
        let file = read_config(path)?;
        let mut cfg = file.experiment;
        cfg.out = None;
        vec![cfg]
    } else {
        let rules: Vec<NRule> = match a.n {
            Some(n) => vec![NRule::Fixed(n)],
            None => a.ratio.iter().map(|&q| NRule::Ratio(q)).collect(),
        };
        rules
            .into_iter()
            .map(|rule| {
                let mut cfg = ExperimentConfig::new(a.kind, a.p.clone(), rule, a.reps, a.seed);
                cfg.solver = SolverOptions::with_solver(a.solver);
                cfg
            })
            .collect()
    };
    for cfg in &configs {
        let out = figure_data(a.fig, cfg, &a.out_dir)?;
        println!("{} {}", out.csv.display(), out.svg.display());
    }
    Ok(0)
}

fn check(a: CheckArgs) -> Result<u8> {
    if a.instances == 0 || a.mc_samples < 4 {
        return Err(Error::InvalidParameter("--instances must be >= 1 and --mc-samples >= 4".into()));
    }
    let opts = SuiteOptions { seed: a.seed, instances: a.instances, mc_samples: a.mc_samples };
    let report = run_suite(a.suite, &opts)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(out) = &a.out {
        fs::write(out, format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(if report.pass { 0 } else { 3 })
}
