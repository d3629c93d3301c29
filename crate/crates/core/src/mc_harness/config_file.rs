//! Plain-text `key = value` experiment configuration.
//!
//! ```text
//! # Figure 2, n/p = 5
//! kind = circulant
//! p_list = 100,200,300,400,500,600,700
//! ratio = 5
//! reps = 2000
//! seed = 20240101
//! solver = auto
//! quantiles = 25,50,75
//! out_dir = results
//! ```
//!
//! `n_list` may replace `ratio`: one value fixes `n`, several pair with `p_list`.
//! Optional keys: `bound` (on/off), `beta`, `mode`, `out`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{BoundSettings, ExperimentConfig, NRule};
use crate::eigensolver::{Solver, SolverOptions};
use crate::error::{Error, Result};
use crate::fourier_bound::BoundMode;
use crate::structured_matrix::Kind;

const KEYS: &[&str] = &[
    "kind", "p_list", "ratio", "n_list", "reps", "seed", "solver", "quantiles", "out_dir", "bound",
    "beta", "mode", "out",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    /// Quantile levels as fractions in `(0, 1]`.
    pub quantiles: Vec<f64>,
    pub out_dir: Option<PathBuf>,
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| Error::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

/// Parses percent levels such as `25,50,75` into fractions.
pub fn parse_levels(v: &str) -> Result<Vec<f64>> {
    parse_list::<f64>("quantiles", v)?
        .into_iter()
        .map(|q| {
            if q > 0.0 && q <= 100.0 {
                Ok(q / 100.0)
            } else {
                Err(Error::Config(format!("quantiles: {q} is not a percentage in (0, 100]")))
            }
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut seen: Vec<(&str, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key {k:?}", i + 1)));
        }
        if seen.iter().any(|(s, _)| *s == k) {
            return Err(Error::Config(format!("line {}: duplicate key {k:?}", i + 1)));
        }
        seen.push((k, v));
    }
    let get = |k: &str| seen.iter().find(|(s, _)| *s == k).map(|(_, v)| *v);

    let kind = match get("kind") {
        Some(v) => parse_one::<Kind>("kind", v)?,
        None => Kind::Circulant,
    };
    let p_list = parse_list("p_list", get("p_list").ok_or_else(|| Error::Config("missing p_list".into()))?)?;
    let n_rule = match (get("ratio"), get("n_list")) {
        (Some(r), None) => NRule::Ratio(parse_one("ratio", r)?),
        (None, Some(ns)) => {
            let ns: Vec<usize> = parse_list("n_list", ns)?;
            if ns.len() == 1 {
                NRule::Fixed(ns[0])
            } else {
                NRule::Paired(ns)
            }
        }
        (Some(_), Some(_)) => return Err(Error::Config("give either ratio or n_list, not both".into())),
        (None, None) => return Err(Error::Config("missing ratio or n_list".into())),
    };
    let reps = parse_one("reps", get("reps").ok_or_else(|| Error::Config("missing reps".into()))?)?;
    let base_seed = get("seed").map(|v| parse_one("seed", v)).transpose()?.unwrap_or(0);
    let solver = get("solver").map(|v| parse_one::<Solver>("solver", v)).transpose()?.unwrap_or(Solver::Auto);

    let mut experiment = ExperimentConfig::new(kind, p_list, n_rule, reps, base_seed);
    experiment.solver = SolverOptions::with_solver(solver);
    let bound_on = match get("bound") {
        None | Some("off") | Some("false") => false,
        Some("on") | Some("true") => true,
        Some(v) => return Err(Error::Config(format!("bound: expected on/off, got {v:?}"))),
    };
    if bound_on {
        let mut b = BoundSettings::default();
        if let Some(v) = get("beta") {
            b.beta = parse_one("beta", v)?;
        }
        if let Some(v) = get("mode") {
            b.mode = parse_one::<BoundMode>("mode", v)?;
        }
        experiment.bound = Some(b);
    } else if get("beta").is_some() || get("mode").is_some() {
        return Err(Error::Config("beta/mode given but bound is off".into()));
    }
    let out_dir = get("out_dir").map(PathBuf::from);
    experiment.out = get("out").map(|o| match &out_dir {
        Some(d) if Path::new(o).is_relative() => d.join(o),
        _ => PathBuf::from(o),
    });
    let quantiles = match get("quantiles") {
        Some(v) => parse_levels(v)?,
        None => vec![0.25, 0.5, 0.75],
    };
    experiment.validate()?;
    Ok(ConfigFile { experiment, quantiles, out_dir })
}

pub fn read_config(path: &Path) -> Result<ConfigFile> {
    parse_config(&std::fs::read_to_string(path)?)
}
