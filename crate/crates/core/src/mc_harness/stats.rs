use std::collections::BTreeMap;

use serde::Serialize;

use super::RunRecord;
use crate::error::{Error, Result};
use crate::structured_matrix::Kind;

/// Nearest-rank quantile of ascending `sorted`: the `⌈level·N⌉`-th value.
pub fn quantile_nearest_rank(sorted: &[f64], level: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Empty("quantile of an empty cell".into()));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level must be in (0, 1], got {level}")));
    }
    let rank = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Quantiles of one `(kind, p, n)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    pub kind: Kind,
    pub p: usize,
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    /// One value per table level.
    pub values: Vec<f64>,
}

impl QuantileRow {
    /// `n/p` as a label: the integer ratio when exact.
    pub fn ratio_label(&self) -> String {
        if self.n.is_multiple_of(self.p) {
            (self.n / self.p).to_string()
        } else {
            format!("{:.3}", self.n as f64 / self.p as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileTable {
    pub levels: Vec<f64>,
    pub rows: Vec<QuantileRow>,
}

impl QuantileTable {
    /// Rows of one kind and `n/p` label.
    pub fn select(&self, kind: Kind, ratio: &str) -> QuantileTable {
        QuantileTable {
            levels: self.levels.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| r.kind == kind && r.ratio_label() == ratio)
                .cloned()
                .collect(),
        }
    }

    /// Distinct `(kind, ratio)` groups in table order.
    pub fn groups(&self) -> Vec<(Kind, String)> {
        let mut out: Vec<(Kind, String)> = Vec::new();
        for r in &self.rows {
            let key = (r.kind, r.ratio_label());
            if !out.contains(&key) {
                out.push(key);
            }
        }
        out
    }

    fn column(&self, level: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| (l - level).abs() < 1e-12)
            .ok_or_else(|| Error::InvalidParameter(format!("level {level} not in quantile table")))
    }
}

/// Per-cell nearest-rank quantiles, cells sorted by kind, `p`, `n`.
pub fn quantiles(records: &[RunRecord], levels: &[f64]) -> Result<QuantileTable> {
    if records.is_empty() {
        return Err(Error::Empty("no records".into()));
    }
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no quantile levels requested".into()));
    }
    let mut cells: BTreeMap<(Kind, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        cells.entry((r.kind, r.p, r.n)).or_default().push(r.lambda_min);
    }
    let rows = cells
        .into_iter()
        .map(|((kind, p, n), mut v)| {
            v.sort_by(f64::total_cmp);
            let values = levels
                .iter()
                .map(|&l| quantile_nearest_rank(&v, l))
                .collect::<Result<Vec<_>>>()?;
            Ok(QuantileRow { kind, p, n, count: v.len(), mean: v.iter().sum::<f64>() / v.len() as f64, values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileTable { levels: levels.to_vec(), rows })
}

/// `log Q = intercept + slope · log p` by ordinary least squares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub level: f64,
    pub intercept: f64,
    pub slope: f64,
    /// `-slope`.
    pub beta_hat: f64,
    pub rss: f64,
    pub points: usize,
}

impl RegressionFit {
    pub fn predict(&self, p: f64) -> f64 {
        (self.intercept + self.slope * p.ln()).exp()
    }
}

/// OLS of `log Q_level` on `log p` over every row of `table`.
pub fn fit_loglog(table: &QuantileTable, level: f64) -> Result<RegressionFit> {
    let col = table.column(level)?;
    let mut pts = Vec::with_capacity(table.rows.len());
    for r in &table.rows {
        let q = r.values[col];
        if !(q > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile {level} is {q} at {} p = {}, n = {}; log undefined",
                r.kind, r.p, r.n
            )));
        }
        pts.push(((r.p as f64).ln(), q.ln()));
    }
    let mut ps: Vec<usize> = table.rows.iter().map(|r| r.p).collect();
    ps.sort_unstable();
    ps.dedup();
    if ps.len() < 2 {
        return Err(Error::InvalidParameter("log-log fit needs at least 2 distinct p values".into()));
    }
    let m = pts.len() as f64;
    let xbar = pts.iter().map(|(x, _)| x).sum::<f64>() / m;
    let ybar = pts.iter().map(|(_, y)| y).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|(x, _)| (x - xbar).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss = pts.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RegressionFit { level, intercept, slope, beta_hat: -slope, rss, points: pts.len() })
}

/// A fit for one `(kind, ratio)` group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFit {
    pub kind: Kind,
    pub ratio: String,
    pub fit: RegressionFit,
}

/// [`fit_loglog`] for every `(kind, ratio)` group of the table.
pub fn fit_groups(table: &QuantileTable, level: f64) -> Result<Vec<GroupFit>> {
    table
        .groups()
        .into_iter()
        .map(|(kind, ratio)| {
            let fit = fit_loglog(&table.select(kind, &ratio), level)?;
            Ok(GroupFit { kind, ratio, fit })
        })
        .collect()
}

/// Whether a quantile is nonincreasing in `p` within each group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub kind: Kind,
    pub ratio: String,
    pub level: f64,
    /// `(p_prev, p_next)` pairs where the quantile increased.
    pub increases: Vec<(usize, usize)>,
}

impl MonotonicityReport {
    pub fn nonincreasing(&self) -> bool {
        self.increases.is_empty()
    }
}

pub fn monotonicity(table: &QuantileTable, level: f64) -> Result<Vec<MonotonicityReport>> {
    let col = table.column(level)?;
    Ok(table
        .groups()
        .into_iter()
        .map(|(kind, ratio)| {
            let sub = table.select(kind, &ratio);
            let increases = sub
                .rows
                .windows(2)
                .filter(|w| w[1].values[col] > w[0].values[col])
                .map(|w| (w[0].p, w[1].p))
                .collect();
            MonotonicityReport { kind, ratio, level, increases }
        })
        .collect())
}

/// Cells whose mean `λ_p` exceeds `limit`.
pub fn mean_check(table: &QuantileTable, limit: f64) -> Vec<(Kind, usize, usize, f64)> {
    table
        .rows
        .iter()
        .filter(|r| r.mean > limit)
        .map(|r| (r.kind, r.p, r.n, r.mean))
        .collect()
}
