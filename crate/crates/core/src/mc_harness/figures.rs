use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::svg::{render, Layer, Panel, Series};
use super::{quantiles, run_experiment, fit_loglog, ExperimentConfig, RunRecord};
use crate::eigensolver::dense_spectrum;
use crate::error::{Error, Result};
use crate::rng::substream_seed;
use crate::structured_matrix::{draw_signal, EnsembleSpec, Kind};

pub const HISTOGRAM_BINS: usize = 64;

/// Equal-width histogram over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    /// Index of the most populated bin (first on ties).
    pub fn mode_bin(&self) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }
}

/// `bins` equal-width bins spanning the observed range.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() || bins == 0 {
        return Err(Error::Empty("histogram needs values and at least one bin".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0u64; bins];
    for &v in values {
        let i = if hi > lo { ((v - lo) / (hi - lo) * bins as f64) as usize } else { 0 };
        counts[i.min(bins - 1)] += 1;
    }
    Ok(Histogram { lo, hi, counts })
}

/// No bin dips below both a bin to its left and a bin to its right by more
/// than `z` Poisson standard deviations.
pub fn is_unimodal(counts: &[u64], z: f64) -> bool {
    let n = counts.len();
    let mut suffix = vec![0u64; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1].max(counts[i]);
    }
    let mut prefix = 0u64;
    for j in 0..n {
        let shoulder = prefix.min(suffix[j + 1]) as f64;
        let c = counts[j] as f64;
        if shoulder - c > z * (shoulder + c).sqrt() {
            return false;
        }
        prefix = prefix.max(counts[j]);
    }
    true
}

/// Monte Carlo spectrum summary for one `(p, n)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Data {
    pub kind: Kind,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    /// Average eigenvalue by rank, rank 1 being the largest.
    pub avg_eigenvalues: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub histogram: Histogram,
}

/// Dense spectra of `reps` replications, signals drawn as in `run_experiment`.
pub fn fig1_data(kind: Kind, p: usize, n: usize, reps: usize, base_seed: u64) -> Result<Fig1Data> {
    let spec = EnsembleSpec::new(kind, p, n)?;
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let spectra: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let signal = draw_signal(kind, p, n, substream_seed(base_seed, p, n, rep))?;
            dense_spectrum(&spec, &signal)
        })
        .collect::<Result<_>>()?;
    let mut avg = vec![0.0; p];
    for s in &spectra {
        for (a, v) in avg.iter_mut().zip(s.iter().rev()) {
            *a += v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= reps as f64);
    let lambda_min: Vec<f64> = spectra.iter().map(|s| s[0].max(0.0)).collect();
    let histogram = histogram(&lambda_min, HISTOGRAM_BINS)?;
    Ok(Fig1Data { kind, p, n, reps, avg_eigenvalues: avg, lambda_min, histogram })
}

/// Paths written for one figure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureOutput {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

fn figure_paths(out_dir: &Path, which: u8, kind: Kind, label: &str) -> FigureOutput {
    let stem = format!("fig{which}_{kind}_{label}");
    FigureOutput { csv: out_dir.join(format!("{stem}.csv")), svg: out_dir.join(format!("{stem}.svg")) }
}

fn write_figure(out: &FigureOutput, rows: &[(usize, &str, f64, f64)], panels: &[Panel]) -> Result<()> {
    let mut csv = String::from("p,series,x,y\n");
    for (p, series, x, y) in rows {
        csv.push_str(&format!("{p},{series},{x},{y}\n"));
    }
    fs::File::create(&out.csv)?.write_all(csv.as_bytes())?;
    fs::File::create(&out.svg)?.write_all(render(panels).as_bytes())?;
    Ok(())
}

/// Writes `fig{which}_{kind}_{ratio}.{csv,svg}` under `out_dir`.
///
/// Figure 1 holds the rank-averaged spectrum and the `λ_p` histogram of every
/// cell; Figures 2 (circulant) and 3 (Toeplitz) hold the quartiles of `λ_p`
/// against `p` with the fitted median line.
pub fn figure_data(which: u8, config: &ExperimentConfig, out_dir: &Path) -> Result<FigureOutput> {
    fs::create_dir_all(out_dir)?;
    let label = config.n_rule.label();
    match which {
        1 => {
            let cells = config.validate()?;
            let data = cells
                .iter()
                .map(|&(p, n)| fig1_data(config.kind, p, n, config.reps, config.base_seed))
                .collect::<Result<Vec<_>>>()?;
            write_fig1(&figure_paths(out_dir, 1, config.kind, &label), &data)
        }
        2 | 3 => {
            let records = run_experiment(config)?;
            figure_from_records(which, config.kind, &label, &records, out_dir)
        }
        _ => Err(Error::InvalidParameter(format!("figure must be 1, 2 or 3, got {which}"))),
    }
}

fn write_fig1(out: &FigureOutput, data: &[Fig1Data]) -> Result<FigureOutput> {
    let mut rows = Vec::new();
    let mut panels = Vec::new();
    for d in data {
        for (i, v) in d.avg_eigenvalues.iter().enumerate() {
            rows.push((d.p, "avg_eigenvalue", (i + 1) as f64, *v));
        }
        for (i, c) in d.histogram.counts.iter().enumerate() {
            rows.push((d.p, "lambda_min_hist", d.histogram.center(i), *c as f64));
        }
        panels.push(Panel {
            title: format!("{} p = {}, n = {}: average eigenvalues over {} reps", d.kind, d.p, d.n, d.reps),
            x_label: "rank".into(),
            y_label: "eigenvalue".into(),
            log_x: false,
            log_y: false,
            layer: Layer::Lines(vec![Series {
                name: "MC average".into(),
                points: d.avg_eigenvalues.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect(),
                color: "#1f4e8c",
                dashed: false,
                markers: false,
            }]),
        });
        let h = &d.histogram;
        panels.push(Panel {
            title: format!("smallest eigenvalue, {} bins", h.counts.len()),
            x_label: "lambda_p".into(),
            y_label: "count".into(),
            log_x: false,
            log_y: false,
            layer: Layer::Bars(
                (0..h.counts.len())
                    .map(|i| (h.lo + i as f64 * h.width(), h.lo + (i + 1) as f64 * h.width(), h.counts[i] as f64))
                    .collect(),
            ),
        });
    }
    write_figure(out, &rows, &panels)?;
    Ok(out.clone())
}

/// Figure 2 or 3 from existing records of one kind and ratio label.
pub fn figure_from_records(
    which: u8,
    kind: Kind,
    label: &str,
    records: &[RunRecord],
    out_dir: &Path,
) -> Result<FigureOutput> {
    let expected = match which {
        2 => Kind::Circulant,
        3 => Kind::Toeplitz,
        _ => return Err(Error::InvalidParameter(format!("quantile figures are 2 or 3, got {which}"))),
    };
    if kind != expected {
        return Err(Error::Config(format!("figure {which} is for {expected} matrices, got {kind}")));
    }
    fs::create_dir_all(out_dir)?;
    let mine: Vec<RunRecord> = records.iter().filter(|r| r.kind == kind).cloned().collect();
    let table = quantiles(&mine, &[0.25, 0.5, 0.75])?;
    let fit = fit_loglog(&table, 0.5)?;
    let names = ["q25", "q50", "q75"];
    let mut rows = Vec::new();
    for r in &table.rows {
        for (name, v) in names.iter().zip(&r.values) {
            rows.push((r.p, *name, r.p as f64, *v));
        }
        rows.push((r.p, "fit_q50", r.p as f64, fit.predict(r.p as f64)));
    }
    let line = |idx: usize| -> Vec<(f64, f64)> { table.rows.iter().map(|r| (r.p as f64, r.values[idx])).collect() };
    let series = vec![
        Series { name: "25%".into(), points: line(0), color: "#6a8fc4", dashed: false, markers: true },
        Series { name: "50%".into(), points: line(1), color: "#000000", dashed: false, markers: true },
        Series { name: "75%".into(), points: line(2), color: "#c46a6a", dashed: false, markers: true },
        Series {
            name: format!("OLS median, beta = {:.3}", fit.beta_hat),
            points: table.rows.iter().map(|r| (r.p as f64, fit.predict(r.p as f64))).collect(),
            color: "#2e8b57",
            dashed: true,
            markers: false,
        },
    ];
    let panel = Panel {
        title: format!("{kind}, n/p = {label}: quantiles of lambda_p"),
        x_label: "p (log scale)".into(),
        y_label: "lambda_p (log scale)".into(),
        log_x: true,
        log_y: true,
        layer: Layer::Lines(series),
    };
    let out = figure_paths(out_dir, which, kind, label);
    write_figure(&out, &rows, &[panel])?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc_harness::NRule;

    fn tmp_dir(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("smalleig-fig-{}-{name}", std::process::id()))
    }

    #[test]
    fn histogram_edges_and_degenerate_case() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0], 4).unwrap();
        assert_eq!(h.counts, vec![1, 0, 1, 2]);
        assert_eq!(h.mode_bin(), 3);
        let one = histogram(&[0.3], HISTOGRAM_BINS).unwrap();
        assert_eq!(one.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!(histogram(&[], 4).is_err());
    }

    #[test]
    fn unimodality_tolerates_noise_but_not_dips() {
        assert!(is_unimodal(&[1, 4, 9, 16, 15, 17, 9, 3, 1], 3.0));
        assert!(!is_unimodal(&[50, 100, 10, 100, 50], 3.0));
        assert!(is_unimodal(&[5], 3.0));
        assert!(is_unimodal(&[9, 7, 5, 3], 0.0));
    }

    #[test]
    fn fig1_average_curve_decreases_in_rank() {
        let d = fig1_data(Kind::Circulant, 12, 48, 40, 3).unwrap();
        assert_eq!(d.avg_eigenvalues.len(), 12);
        assert!(d.avg_eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(d.histogram.counts.iter().sum::<u64>(), 40);
        // trace identity: average eigenvalue mean is E[x_0^2] = 1
        let mean = d.avg_eigenvalues.iter().sum::<f64>() / 12.0;
        assert!((mean - 1.0).abs() < 0.2);
    }

    #[test]
    fn fig1_lambda_matches_run_experiment() {
        let cfg = ExperimentConfig::new(Kind::Toeplitz, vec![10], NRule::Ratio(3), 6, 8);
        let recs = run_experiment(&cfg).unwrap();
        let d = fig1_data(Kind::Toeplitz, 10, 30, 6, 8).unwrap();
        for (r, l) in recs.iter().zip(&d.lambda_min) {
            assert!((r.lambda_min - l).abs() < 1e-12);
        }
    }

    #[test]
    fn figure_files_are_written_deterministically() {
        let dir = tmp_dir("files");
        let cfg = ExperimentConfig::new(Kind::Circulant, vec![8, 12, 16], NRule::Ratio(4), 20, 1);
        let f2 = figure_data(2, &cfg, &dir).unwrap();
        assert!(f2.csv.ends_with("fig2_circulant_4.csv"));
        let svg_a = fs::read(&f2.svg).unwrap();
        figure_data(2, &cfg, &dir).unwrap();
        assert_eq!(svg_a, fs::read(&f2.svg).unwrap());
        let csv = fs::read_to_string(&f2.csv).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 4);

        let f1 = figure_data(1, &ExperimentConfig { reps: 1, ..cfg.clone() }, &dir).unwrap();
        assert!(f1.svg.ends_with("fig1_circulant_4.svg"));
        let csv1 = fs::read_to_string(&f1.csv).unwrap();
        assert_eq!(csv1.lines().filter(|l| l.contains("avg_eigenvalue")).count(), 8 + 12 + 16);

        assert!(figure_data(3, &cfg, &dir).is_err());
        assert!(figure_data(4, &cfg, &dir).is_err());
        let _ = fs::remove_dir_all(dir);
    }
}
