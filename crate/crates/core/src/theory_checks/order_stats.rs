//! Order statistics of the half-grid periodogram ordinates.
//!
//! `ξ_1, …, ξ_{N-1}` are i.i.d. `Exp(1/2)` (mean 2); `ξ_(r)` is the `r`-th
//! smallest. A uniformly random `r`-subset of `{1, …, N-1}` models the
//! positions of the `r` smallest ordinates.

use rand::seq::index;
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Half-grid size `N`, rank `r` and cluster size `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrderStatSpec {
    pub n_half: usize,
    pub r: usize,
    pub m: usize,
}

impl OrderStatSpec {
    pub fn new(n_half: usize, r: usize, m: usize) -> Result<Self> {
        check_rank(n_half, r)?;
        if m < 2 {
            return Err(Error::InvalidParameter(format!("cluster size m must be >= 2, got {m}")));
        }
        Ok(Self { n_half, r, m })
    }
}

fn check_rank(n_half: usize, r: usize) -> Result<()> {
    if r < 1 || r >= n_half {
        return Err(Error::InvalidParameter(format!(
            "rank must satisfy 1 <= r < N, got r = {r}, N = {n_half}"
        )));
    }
    Ok(())
}

/// Half-grid size for a signal of length `n`: `(n+1)/2` for odd `n`,
/// `n/2 + 1` for even `n`.
pub fn half_grid(n: usize) -> usize {
    n / 2 + 1
}

/// Mean and variance of `ξ_(r)` from the Rényi representation.
pub fn renyi_moments(n_half: usize, r: usize) -> Result<(f64, f64)> {
    check_rank(n_half, r)?;
    let (mut mean, mut var) = (0.0, 0.0);
    for i in 1..=r {
        let d = (n_half - i) as f64;
        mean += 2.0 / d;
        var += 4.0 / (d * d);
    }
    Ok((mean, var))
}

/// `r(r-1)…(r-m+1) / ((N-1)(N-2)…(N-m+1))`, zero when `r < m`.
pub fn clustering_bound(spec: &OrderStatSpec) -> f64 {
    let OrderStatSpec { n_half, r, m } = *spec;
    if r < m {
        return 0.0;
    }
    let mut value = r as f64;
    for j in 1..m {
        value *= (r - j) as f64 / (n_half - j) as f64;
    }
    value
}

/// Whether a sorted set of integers contains `m` consecutive values.
pub fn has_run(sorted: &[usize], m: usize) -> bool {
    if m <= 1 {
        return !sorted.is_empty();
    }
    let mut run = 1;
    for w in sorted.windows(2) {
        run = if w[1] == w[0] + 1 { run + 1 } else { 1 };
        if run >= m {
            return true;
        }
    }
    false
}

/// Exact `P(N, r, m)` by enumerating every `r`-subset of `{1, …, N-1}`.
pub fn clustering_probability_exact(spec: &OrderStatSpec) -> Result<f64> {
    let universe = spec.n_half - 1;
    if universe > 24 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive enumeration limited to N <= 25, got N = {}",
            spec.n_half
        )));
    }
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << universe) {
        if mask.count_ones() as usize != spec.r {
            continue;
        }
        let set: Vec<usize> = (0..universe).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
        total += 1;
        hits += has_run(&set, spec.m) as u64;
    }
    Ok(hits as f64 / total as f64)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            let d = v - mean;
            mean += d / n as f64;
            m2 += d * (v - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self { mean, std_err: (var / n as f64).sqrt(), samples: n }
    }

    /// `|mean - target| <= z · std_err`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.std_err
    }
}

/// Monte Carlo mean of `ξ_(r)` over `samples` draws of `N-1` exponentials.
pub fn simulate_order_stat(n_half: usize, r: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    check_rank(n_half, r)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut buf = vec![0.0; n_half - 1];
    Ok(McEstimate::from_values((0..samples).map(|_| {
        for v in buf.iter_mut() {
            *v = 2.0 * rng.sample::<f64, _>(Exp1);
        }
        let (_, nth, _) = buf.select_nth_unstable_by(r - 1, f64::total_cmp);
        *nth
    })))
}

/// Monte Carlo frequency of an `m`-run among random `r`-subsets.
pub fn simulate_clustering(spec: &OrderStatSpec, samples: usize, seed: u64) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut set = Vec::with_capacity(spec.r);
    Ok(McEstimate::from_values((0..samples).map(|_| {
        set.clear();
        set.extend(index::sample(&mut rng, spec.n_half - 1, spec.r).iter().map(|i| i + 1));
        set.sort_unstable();
        has_run(&set, spec.m) as u8 as f64
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn renyi_smallest_of_two() {
        assert_eq!(renyi_moments(3, 1).unwrap(), (1.0, 1.0));
        assert!(renyi_moments(3, 3).is_err());
        assert!(renyi_moments(3, 0).is_err());
    }

    #[test]
    fn renyi_large_sample_bounds() {
        let (n, r) = (10_000usize, 100usize);
        let (mean, var) = renyi_moments(n, r).unwrap();
        assert!(mean > 2.0 * r as f64 / n as f64);
        assert!(var < 5.0 * r as f64 / (n * n) as f64);
    }

    #[test]
    fn renyi_matches_simulation() {
        let (mean, _) = renyi_moments(100, 10).unwrap();
        let est = simulate_order_stat(100, 10, 100_000, 11).unwrap();
        assert!(est.within(mean, 3.0), "{est:?} vs {mean}");
    }

    #[test]
    fn clustering_closed_cases() {
        let spec = OrderStatSpec::new(4, 2, 2).unwrap();
        assert_abs_diff_eq!(clustering_bound(&spec), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(clustering_probability_exact(&spec).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(clustering_bound(&OrderStatSpec::new(10, 2, 3).unwrap()), 0.0);
        assert!(OrderStatSpec::new(10, 2, 1).is_err());
        assert!(OrderStatSpec::new(10, 10, 2).is_err());
    }

    #[test]
    fn clustering_bound_dominates_enumeration() {
        for n_half in 4..=14 {
            for r in 1..n_half {
                for m in 2..=4 {
                    let spec = OrderStatSpec::new(n_half, r, m).unwrap();
                    let exact = clustering_probability_exact(&spec).unwrap();
                    assert!(exact <= clustering_bound(&spec) + 1e-12, "{spec:?}");
                }
            }
        }
    }

    #[test]
    fn clustering_large_grid_simulation() {
        let spec = OrderStatSpec::new(10_000, 100, 2).unwrap();
        let est = simulate_clustering(&spec, 100_000, 12).unwrap();
        assert!(est.mean <= clustering_bound(&spec) + 3.0 * est.std_err, "{est:?}");
    }

    #[test]
    fn runs_detected() {
        assert!(has_run(&[1, 3, 4, 5, 9], 3));
        assert!(!has_run(&[1, 3, 5, 7], 2));
        assert!(has_run(&[2], 1));
    }

    #[test]
    fn half_grid_sizes() {
        assert_eq!(half_grid(9), 5);
        assert_eq!(half_grid(8), 5);
    }
}
