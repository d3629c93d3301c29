//! Smallest eigenvalue of `S`: a dense symmetric eigendecomposition for
//! small `p` and a matrix-free Lanczos iteration for large `p`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_START_VECTOR};
use crate::structured_matrix::{EnsembleSpec, GramOperator, SignalVector};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_DENSE_CAP: usize = 2048;
pub const DEFAULT_AUTO_THRESHOLD: usize = 300;
pub const DEFAULT_MAX_ITER_CAP: usize = 500;

/// Solver selection. `Auto` uses the dense path for `p <= auto_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Auto,
    Dense,
    Lanczos,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Auto => "auto",
            Solver::Dense => "dense",
            Solver::Lanczos => "lanczos",
        })
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Solver::Auto),
            "dense" => Ok(Solver::Dense),
            "lanczos" => Ok(Solver::Lanczos),
            other => Err(Error::InvalidParameter(format!(
                "unknown solver '{other}' (expected auto, dense or lanczos)"
            ))),
        }
    }
}

/// Method that actually produced an [`EigResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Lanczos,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dense => "dense",
            Method::Lanczos => "lanczos",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Method::Dense),
            "lanczos" => Ok(Method::Lanczos),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// Smallest eigenvalue with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigResult {
    pub lambda_min: f64,
    pub method: Method,
    pub iterations: usize,
    /// `‖S v − λ v‖` of the returned Ritz pair; 0 for the dense path.
    pub residual: f64,
    /// Residual threshold the run was judged against.
    pub threshold: f64,
}

impl EigResult {
    pub fn converged(&self) -> bool {
        self.residual <= self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub solver: Solver,
    pub tol: f64,
    /// `None` means `min(p, 500)`.
    pub max_iter: Option<usize>,
    pub dense_cap: usize,
    pub auto_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            solver: Solver::Auto,
            tol: DEFAULT_TOL,
            max_iter: None,
            dense_cap: DEFAULT_DENSE_CAP,
            auto_threshold: DEFAULT_AUTO_THRESHOLD,
        }
    }
}

impl SolverOptions {
    pub fn with_solver(solver: Solver) -> Self {
        Self { solver, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive and finite, got {}",
                self.tol
            )));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    fn resolve(&self, p: usize) -> Method {
        match self.solver {
            Solver::Dense => Method::Dense,
            Solver::Lanczos => Method::Lanczos,
            Solver::Auto if p <= self.auto_threshold => Method::Dense,
            Solver::Auto => Method::Lanczos,
        }
    }
}

/// All `p` eigenvalues of `S`, ascending.
pub fn dense_spectrum(spec: &EnsembleSpec, signal: &SignalVector) -> Result<Vec<f64>> {
    dense_spectrum_capped(spec, signal, DEFAULT_DENSE_CAP)
}

pub fn dense_spectrum_capped(
    spec: &EnsembleSpec,
    signal: &SignalVector,
    cap: usize,
) -> Result<Vec<f64>> {
    let op = GramOperator::new(*spec, signal.clone())?;
    operator_spectrum(&op, cap)
}

/// Ascending eigenvalues of the dense form of `op`.
pub fn operator_spectrum(op: &GramOperator, cap: usize) -> Result<Vec<f64>> {
    let p = op.dim();
    if p > cap {
        return Err(Error::DenseCapExceeded { p, cap });
    }
    let mut eig: Vec<f64> = op.dense().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Smallest eigenvalue of `S` for the given ensemble and signal.
pub fn smallest_eig(
    spec: &EnsembleSpec,
    signal: &SignalVector,
    opts: &SolverOptions,
) -> Result<EigResult> {
    opts.validate()?;
    let op = GramOperator::new(*spec, signal.clone())?;
    smallest_eig_op(&op, opts)
}

/// Smallest eigenvalue of an already-built operator.
pub fn smallest_eig_op(op: &GramOperator, opts: &SolverOptions) -> Result<EigResult> {
    opts.validate()?;
    let p = op.dim();
    match opts.resolve(p) {
        Method::Dense => {
            let eig = operator_spectrum(op, opts.dense_cap)?;
            Ok(EigResult {
                lambda_min: eig[0],
                method: Method::Dense,
                iterations: 0,
                residual: 0.0,
                threshold: opts.tol,
            })
        }
        Method::Lanczos => {
            let max_iter = opts.max_iter.unwrap_or(DEFAULT_MAX_ITER_CAP.min(p)).min(p);
            let start = start_vector(p, op.signal().seed);
            let run = lanczos_smallest(op, &start, opts.tol, max_iter, false);
            Ok(EigResult {
                lambda_min: run.lambda_min,
                method: Method::Lanczos,
                iterations: run.iterations,
                residual: run.residual,
                threshold: run.threshold,
            })
        }
    }
}

/// Deterministic pseudo-random unit start vector keyed by the signal seed.
pub fn start_vector(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_START_VECTOR);
    let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Outcome of one Lanczos run.
#[derive(Debug, Clone)]
pub struct LanczosRun {
    pub lambda_min: f64,
    pub lambda_max_estimate: f64,
    pub iterations: usize,
    /// True residual `‖S y − θ y‖` of the final Ritz pair.
    pub residual: f64,
    pub threshold: f64,
    /// Smallest Ritz value after each iteration (only when requested).
    pub ritz_history: Vec<f64>,
}

/// Lanczos with full reorthogonalization, targeting the smallest eigenvalue.
///
/// Stops when the estimated residual `β_j |s_j|` of the smallest Ritz pair
/// drops below `tol · max(1, θ_max)`, on breakdown, or after `max_iter` steps.
pub fn lanczos_smallest(
    op: &GramOperator,
    start: &[f64],
    tol: f64,
    max_iter: usize,
    keep_history: bool,
) -> LanczosRun {
    let p = op.dim();
    let max_iter = max_iter.clamp(1, p);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_iter);
    let mut betas: Vec<f64> = Vec::with_capacity(max_iter);
    let mut history = Vec::new();

    let norm = dot(start, start).sqrt();
    basis.push(start.iter().map(|x| x / norm).collect());
    let mut w = vec![0.0; p];
    for j in 0..max_iter {
        op.apply_into(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w);
        alphas.push(alpha);
        axpy(-alpha, &basis[j], &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &basis[j - 1], &mut w);
        }
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let beta = dot(&w, &w).sqrt();

        let (theta, theta_max) = tridiag_extremes(&alphas, &betas);
        let threshold = tol * theta_max.abs().max(1.0);
        if keep_history {
            history.push(theta);
        }
        let s = tridiag_eigvec(&alphas, &betas, theta);
        let estimate = beta * s.last().copied().unwrap_or(0.0).abs();
        let breakdown = beta <= 1e-14 * theta_max.abs().max(f64::MIN_POSITIVE);
        if estimate <= threshold || breakdown || j + 1 == max_iter {
            let residual = ritz_residual(op, &basis, &s, theta);
            return LanczosRun {
                lambda_min: theta,
                lambda_max_estimate: theta_max,
                iterations: j + 1,
                residual,
                threshold,
                ritz_history: history,
            };
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    unreachable!("loop returns on its last iteration")
}

fn ritz_residual(op: &GramOperator, basis: &[Vec<f64>], s: &[f64], theta: f64) -> f64 {
    let p = op.dim();
    let mut y = vec![0.0; p];
    for (q, &c) in basis.iter().zip(s) {
        axpy(c, q, &mut y);
    }
    let mut sy = vec![0.0; p];
    op.apply_into(&y, &mut sy);
    axpy(-theta, &y, &mut sy);
    dot(&sy, &sy).sqrt() / dot(&y, &y).sqrt()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
fn sturm_count(alphas: &[f64], betas: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in alphas.iter().enumerate() {
        let b2 = if i == 0 { 0.0 } else { betas[i - 1] * betas[i - 1] };
        d = a - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + x.abs() + f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest and largest eigenvalues of the tridiagonal matrix by bisection.
fn tridiag_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { betas[i - 1].abs() } else { 0.0 }
            + if i + 1 < k { betas[i].abs() } else { 0.0 };
        lo = lo.min(alphas[i] - r);
        hi = hi.max(alphas[i] + r);
    }
    let bisect = |target: usize| {
        // Smallest x with more than `target` eigenvalues below it.
        let (mut a, mut b) = (lo, hi);
        let span = (hi - lo).abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if sturm_count(alphas, betas, mid) > target {
                b = mid;
            } else {
                a = mid;
            }
            if b - a <= 2.0 * f64::EPSILON * span {
                break;
            }
        }
        0.5 * (a + b)
    };
    (bisect(0), bisect(k - 1))
}

/// Unit eigenvector of the tridiagonal matrix for eigenvalue `theta`, by
/// inverse iteration with a pivoted tridiagonal LU.
fn tridiag_eigvec(alphas: &[f64], betas: &[f64], theta: f64) -> Vec<f64> {
    let k = alphas.len();
    if k == 1 {
        return vec![1.0];
    }
    let scale = alphas
        .iter()
        .map(|a| a.abs())
        .chain(betas.iter().map(|b| b.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let shift = theta - 64.0 * f64::EPSILON * scale;
    let mut x: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    for _ in 0..3 {
        x = solve_shifted_tridiag(alphas, &betas[..k - 1], shift, &x, scale);
        let norm = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
    }
    x
}

/// Solves `(T − shift·I) z = rhs` by Gaussian elimination with partial
/// pivoting (LAPACK `gttrf`/`gttrs` layout).
fn solve_shifted_tridiag(
    alphas: &[f64],
    offs: &[f64],
    shift: f64,
    rhs: &[f64],
    scale: f64,
) -> Vec<f64> {
    let k = alphas.len();
    let tiny = f64::EPSILON * scale;
    let mut dl: Vec<f64> = offs.to_vec();
    let mut d: Vec<f64> = alphas.iter().map(|a| a - shift).collect();
    let mut du: Vec<f64> = offs.to_vec();
    let mut du2 = vec![0.0; k.saturating_sub(2)];
    let mut swapped = vec![false; k];
    let mut mult = vec![0.0; k];
    for i in 0..k - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let l = dl[i] / d[i];
            mult[i] = l;
            d[i + 1] -= l * du[i];
        } else {
            swapped[i] = true;
            let l = d[i] / dl[i];
            mult[i] = l;
            d[i] = dl[i];
            let tmp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = tmp - l * d[i + 1];
            if i + 1 < k - 1 {
                du2[i] = du[i + 1];
                du[i + 1] *= -l;
            }
        }
        dl[i] = 0.0;
    }
    if d[k - 1] == 0.0 {
        d[k - 1] = tiny;
    }
    let mut b = rhs.to_vec();
    for i in 0..k - 1 {
        if swapped[i] {
            b.swap(i, i + 1);
            b[i + 1] -= mult[i] * b[i];
        } else {
            b[i + 1] -= mult[i] * b[i];
        }
    }
    let mut z = vec![0.0; k];
    z[k - 1] = b[k - 1] / d[k - 1];
    if k >= 2 {
        z[k - 2] = (b[k - 2] - du[k - 2] * z[k - 1]) / d[k - 2];
    }
    for i in (0..k.saturating_sub(2)).rev() {
        z[i] = (b[i] - du[i] * z[i + 1] - du2[i] * z[i + 2]) / d[i];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structured_matrix::{draw_signal, Kind};
    use nalgebra::DMatrix;

    fn tridiag_dense(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
        let k = alphas.len();
        DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn tridiagonal_helpers_match_dense() {
        let alphas = [2.0, -1.0, 0.5, 3.0, 1.0, 0.0];
        let betas = [0.7, 1.3, 0.2, 0.9, 1.1];
        let t = tridiag_dense(&alphas, &betas);
        let eig = t.clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        let (lo, hi) = tridiag_extremes(&alphas, &betas);
        assert!((lo - vals[0]).abs() < 1e-13);
        assert!((hi - vals[5]).abs() < 1e-13);
        let s = nalgebra::DVector::from_vec(tridiag_eigvec(&alphas, &betas, lo));
        let r = &t * &s - &s * lo;
        assert!(r.norm() < 1e-10, "residual {}", r.norm());
    }

    #[test]
    fn pivoted_solve_matches_dense() {
        let alphas = [0.0, 1.0, -2.0, 0.5];
        let betas = [3.0, 0.1, 2.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let z = solve_shifted_tridiag(&alphas, &betas, 0.25, &rhs, 3.0);
        let t = tridiag_dense(&alphas, &betas) - DMatrix::identity(4, 4) * 0.25;
        let back = &t * nalgebra::DVector::from_vec(z);
        for (b, r) in back.iter().zip(rhs) {
            assert!((b - r).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_spectrum_is_flat() {
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        let spec = EnsembleSpec::new(Kind::Circulant, 3, 8).unwrap();
        let eig = dense_spectrum(&spec, &SignalVector::circulant(x)).unwrap();
        assert_eq!(eig.len(), 3);
        for e in eig {
            assert!((e - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn single_row_is_window_energy() {
        let spec = EnsembleSpec::new(Kind::Toeplitz, 1, 9).unwrap();
        let signal = draw_signal(Kind::Toeplitz, 1, 9, 2).unwrap();
        let eig = dense_spectrum(&spec, &signal).unwrap();
        let energy: f64 = signal.values.iter().map(|v| v * v).sum::<f64>() / 9.0;
        assert!((eig[0] - energy).abs() < 1e-14);
    }

    #[test]
    fn trace_equals_eigenvalue_sum() {
        for kind in [Kind::Circulant, Kind::Toeplitz] {
            let spec = EnsembleSpec::new(kind, 16, 40).unwrap();
            let signal = draw_signal(kind, 16, 40, 8).unwrap();
            let op = GramOperator::new(spec, signal.clone()).unwrap();
            let eig = dense_spectrum(&spec, &signal).unwrap();
            let trace = op.dense().trace();
            let sum: f64 = eig.iter().sum();
            assert!((trace - sum).abs() <= 1e-10 * trace.abs());
            assert!(eig.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let spec = EnsembleSpec::new(Kind::Circulant, 10, 20).unwrap();
        let signal = draw_signal(Kind::Circulant, 10, 20, 1).unwrap();
        let err = dense_spectrum_capped(&spec, &signal, 5).unwrap_err();
        assert!(matches!(err, Error::DenseCapExceeded { p: 10, cap: 5 }));
    }

    #[test]
    fn lanczos_on_impulse() {
        let mut x = vec![0.0; 200];
        x[0] = 1.0;
        let spec = EnsembleSpec::new(Kind::Circulant, 50, 200).unwrap();
        let res = smallest_eig(
            &spec,
            &SignalVector::circulant(x),
            &SolverOptions::with_solver(Solver::Lanczos),
        )
        .unwrap();
        assert_eq!(res.method, Method::Lanczos);
        assert!((res.lambda_min - 0.005).abs() < 1e-14);
        assert!(res.converged());
    }

    #[test]
    fn two_by_two_toeplitz_closed_form() {
        // x_{-1}, x_0, x_1, x_2 for p = 2, n = 3.
        let vals = vec![0.3, -1.2, 0.8, 2.0];
        let spec = EnsembleSpec::new(Kind::Toeplitz, 2, 3).unwrap();
        let signal = SignalVector::toeplitz(2, vals.clone());
        let x = |i: isize| vals[(i + 1) as usize];
        let s00 = (x(0) * x(0) + x(1) * x(1) + x(2) * x(2)) / 3.0;
        let s11 = (x(-1) * x(-1) + x(0) * x(0) + x(1) * x(1)) / 3.0;
        let s01 = (x(0) * x(-1) + x(1) * x(0) + x(2) * x(1)) / 3.0;
        let tr = s00 + s11;
        let det = s00 * s11 - s01 * s01;
        let root = 0.5 * (tr - (tr * tr - 4.0 * det).sqrt());
        for solver in [Solver::Dense, Solver::Lanczos] {
            let res = smallest_eig(&spec, &signal, &SolverOptions::with_solver(solver)).unwrap();
            assert!((res.lambda_min - root).abs() < 1e-12, "{solver}: {} vs {root}", res.lambda_min);
        }
    }

    #[test]
    fn lanczos_matches_dense_moderate() {
        let spec = EnsembleSpec::new(Kind::Circulant, 128, 512).unwrap();
        let signal = draw_signal(Kind::Circulant, 128, 512, 31).unwrap();
        let dense = smallest_eig(&spec, &signal, &SolverOptions::with_solver(Solver::Dense)).unwrap();
        let lan = smallest_eig(&spec, &signal, &SolverOptions::with_solver(Solver::Lanczos)).unwrap();
        assert!((lan.lambda_min - dense.lambda_min).abs() <= 1e-6 * dense.lambda_min.max(1.0));
        assert!(lan.converged(), "residual {} > {}", lan.residual, lan.threshold);
    }

    #[test]
    fn invalid_options_are_rejected() {
        let spec = EnsembleSpec::new(Kind::Circulant, 4, 8).unwrap();
        let signal = draw_signal(Kind::Circulant, 4, 8, 1).unwrap();
        let mut opts = SolverOptions { tol: 0.0, ..Default::default() };
        assert!(smallest_eig(&spec, &signal, &opts).is_err());
        opts.tol = 1e-8;
        opts.max_iter = Some(0);
        assert!(smallest_eig(&spec, &signal, &opts).is_err());
    }

    #[test]
    fn auto_dispatch_threshold() {
        let opts = SolverOptions::default();
        assert_eq!(opts.resolve(300), Method::Dense);
        assert_eq!(opts.resolve(301), Method::Lanczos);
    }

    #[test]
    fn start_vector_is_unit_and_deterministic() {
        let a = start_vector(10, 5);
        assert!((dot(&a, &a) - 1.0).abs() < 1e-14);
        assert_eq!(a, start_vector(10, 5));
    }
}
