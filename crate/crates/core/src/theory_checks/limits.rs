//! Distributional limits and rate floors checked by simulation.

use rayon::prelude::*;
use serde::Serialize;

use crate::eigensolver::SolverOptions;
use crate::error::{Error, Result};
use crate::mc_harness::replicate;
use crate::rng::substream_seed;
use crate::structured_matrix::{draw_signal, periodogram, Kind};

/// Rayleigh CDF `1 - exp(-x²/2)`.
pub fn rayleigh_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-0.5 * x * x).exp_m1()
    }
}

/// Exact CDF of `√(n λ_n)` for the square `n × n` circulant with Gaussian
/// entries.
///
/// The periodogram ordinates are independent: `χ²(1)` at `s = 0` (and at
/// `s = n/2` for even `n`), and `Exp(1)` pairs elsewhere.
pub fn square_circulant_cdf(n: usize, x: f64) -> f64 {
    if x <= 0.0 || n == 0 {
        return 0.0;
    }
    let t = x * x / n as f64;
    let chi1_tail = libm::erfc((0.5 * t).sqrt());
    let (pairs, singles) = if n.is_multiple_of(2) { (n / 2 - 1, 2) } else { ((n - 1) / 2, 1) };
    1.0 - (-(pairs as f64) * t).exp() * chi1_tail.powi(singles)
}

/// One-sample Kolmogorov–Smirnov distance between `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("KS statistic needs at least one sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    }))
}

/// `√(n λ_n)` for `reps` square circulant replications.
///
/// Replication `r` uses the same signal substream as a `p = n` experiment, and
/// `λ_n` is the smallest periodogram ordinate.
pub fn rayleigh_samples(n: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let signal = draw_signal(Kind::Circulant, n, n, substream_seed(seed, n, n, rep))?;
            let lambda = periodogram(&signal.values).into_iter().fold(f64::INFINITY, f64::min);
            Ok((n as f64 * lambda).sqrt())
        })
        .collect()
}

/// KS distance of simulated `√(n λ_n)` to the Rayleigh CDF.
pub fn rayleigh_ks(n: usize, reps: usize, seed: u64) -> Result<f64> {
    ks_statistic(&rayleigh_samples(n, reps, seed)?, rayleigh_cdf)
}

/// Which probability floor on `λ_p` is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFloor {
    /// `p^{-1/m - ε}`, for `n/p > π(m-1)`.
    Polynomial,
    /// `p^{-1/2 - 1/(2m) - ε}`, for `n/p >= m/(1-δ)`.
    Intermediate,
    /// `p^{-1-ε}`, for `p/n ∈ [1/2, 1]`.
    NearSquare,
}

impl RateFloor {
    pub fn exponent(self, m: usize, epsilon: f64) -> f64 {
        let m = m as f64;
        match self {
            RateFloor::Polynomial => 1.0 / m + epsilon,
            RateFloor::Intermediate => 0.5 + 0.5 / m + epsilon,
            RateFloor::NearSquare => 1.0 + epsilon,
        }
    }

    pub fn threshold(self, p: usize, m: usize, epsilon: f64) -> f64 {
        (p as f64).powf(-self.exponent(m, epsilon))
    }
}

/// Empirical exceedance of a floor on `λ_p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFloorOutcome {
    pub kind: Kind,
    pub p: usize,
    pub n: usize,
    pub threshold: f64,
    pub reps: usize,
    pub exceed: usize,
    pub fraction: f64,
    pub min_lambda: f64,
    pub mean_lambda: f64,
}

/// Fraction of replications with `λ_p > threshold`.
pub fn exceedance(
    kind: Kind,
    p: usize,
    n: usize,
    threshold: f64,
    reps: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<RateFloorOutcome> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let lambdas: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| replicate(kind, p, n, seed, rep, opts).map(|r| r.lambda_min))
        .collect::<Result<_>>()?;
    let exceed = lambdas.iter().filter(|&&l| l > threshold).count();
    Ok(RateFloorOutcome {
        kind,
        p,
        n,
        threshold,
        reps,
        exceed,
        fraction: exceed as f64 / reps as f64,
        min_lambda: lambdas.iter().copied().fold(f64::INFINITY, f64::min),
        mean_lambda: lambdas.iter().sum::<f64>() / reps as f64,
    })
}

/// Exceedance of `floor.threshold(p, m, ε)` under the default solver.
#[allow(clippy::too_many_arguments)]
pub fn rate_floor_check(
    kind: Kind,
    p: usize,
    n: usize,
    m: usize,
    epsilon: f64,
    reps: usize,
    seed: u64,
    floor: RateFloor,
) -> Result<RateFloorOutcome> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("m must be >= 2, got {m}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    exceedance(kind, p, n, floor.threshold(p, m, epsilon), reps, seed, &SolverOptions::default())
}
