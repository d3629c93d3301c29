//! Periodized-Gaussian test vectors and the shifted periodogram upper bound
//! on the smallest eigenvalue of a rectangular circulant Gram matrix.
//!
//! For any unit `u ∈ C^p`, `λ_p <= u* S u = (1/n) Σ_s |y_s|^2 |P_{u,s}|^2`,
//! where `y = F x` is the unitary DFT of the signal and
//! `P_{u,s} = Σ_j u_j e^{2πi sj/n}` is the zero-padded DFT of `u`.
//! Modulating `u` by `e^{-iω_τ j}` rotates the profile by `τ`, so the bound
//! can be minimized over a list of shifts.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structured_matrix::{periodogram, validate_dims, SignalVector};

/// Relative cutoff for the periodization series.
pub const SERIES_REL_TOL: f64 = 1e-18;

/// How `σ_p` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    /// `α_p = (2^5 β^3 / log p)^{1/2}`, `σ_p = n α_p / (2π)`.
    Theorem,
    /// `σ_p = p^{3/4}`.
    Practical,
}

impl fmt::Display for BoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundMode::Theorem => "theorem",
            BoundMode::Practical => "practical",
        })
    }
}

impl FromStr for BoundMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "theorem" => Ok(BoundMode::Theorem),
            "practical" => Ok(BoundMode::Practical),
            other => Err(Error::InvalidParameter(format!(
                "unknown bound mode '{other}' (expected theorem or practical)"
            ))),
        }
    }
}

/// Test-vector width, window half-width and shift list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSchedule {
    pub sigma_p: f64,
    pub alpha_p: f64,
    pub b_p: usize,
    /// Number of shifts `K = ⌊n/(4b_p+2)⌋ − 1`.
    pub k: usize,
    /// `τ_k = k (2 b_p + 1)` for `k = 1..=K`.
    pub taus: Vec<usize>,
    pub beta: f64,
    pub mode: BoundMode,
}

impl BoundSchedule {
    /// Shift windows `[τ_k − b_p, τ_k + b_p]` stay clear of the wrap-around.
    pub fn windows_fit(&self, n: usize) -> bool {
        self.taus
            .last()
            .is_none_or(|&t| t + self.b_p < n.saturating_sub(self.b_p))
    }
}

/// Test-vector width `σ_p` and `α_p = 2πσ_p/n` for `(p, n)`.
pub fn test_width(p: usize, n: usize, beta: f64, mode: BoundMode) -> Result<(f64, f64)> {
    validate_dims(p, n)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    match mode {
        BoundMode::Theorem => {
            if p < 2 {
                return Err(Error::Schedule("theorem mode needs p >= 2 (log p > 0)".into()));
            }
            let alpha = (32.0 * beta.powi(3) / (p as f64).ln()).sqrt();
            Ok((n as f64 * alpha / (2.0 * PI), alpha))
        }
        BoundMode::Practical => {
            let sigma = (p as f64).powf(0.75);
            Ok((sigma, 2.0 * PI * sigma / n as f64))
        }
    }
}

/// Default schedule for `(p, n)`.
pub fn default_schedule(p: usize, n: usize, beta: f64, mode: BoundMode) -> Result<BoundSchedule> {
    let (sigma_p, alpha_p) = test_width(p, n, beta, mode)?;
    let log_p = (p as f64).ln();
    let b_p = (log_p.floor() as usize).max(1);
    let count = (n / (4 * b_p + 2)) as isize - 1;
    if count < 1 {
        return Err(Error::Schedule(format!(
            "n = {n} is too small for shift windows of half-width {b_p} (K = {count})"
        )));
    }
    let k = count as usize;
    let taus = (1..=k).map(|i| i * (2 * b_p + 1)).collect();
    Ok(BoundSchedule { sigma_p, alpha_p, b_p, k, taus, beta, mode })
}

/// `Σ_{m∈Z} f(offset + m·period)` for a kernel decreasing in `|d|`,
/// truncated once a term falls below `SERIES_REL_TOL` of the running total.
fn image_sum(offset: f64, period: f64, kernel: impl Fn(f64) -> f64) -> f64 {
    let m0 = (-offset / period).round();
    let mut total = kernel(offset + m0 * period);
    for dir in [1.0, -1.0] {
        let mut m = m0 + dir;
        loop {
            let term = kernel(offset + m * period);
            total += term;
            if term <= SERIES_REL_TOL * total || term < f64::MIN_POSITIVE {
                break;
            }
            m += dir;
        }
    }
    total
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")))
    }
}

fn center(p: usize) -> usize {
    p.div_ceil(2)
}

/// Periodized Gaussian `w_j = (2πσ²)^{-1/2} Σ_s exp(−(j − ⌈p/2⌉ + sn)² / (2σ²))`.
pub fn periodized_gaussian(p: usize, n: usize, sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    if n == 0 {
        return Err(Error::Dimension("n must be at least 1".into()));
    }
    let c = center(p) as f64;
    let norm = (2.0 * PI * sigma * sigma).sqrt().recip();
    let inv = 1.0 / (2.0 * sigma * sigma);
    Ok((0..n)
        .map(|j| norm * image_sum(j as f64 - c, n as f64, |d| (-d * d * inv).exp()))
        .collect())
}

/// Closed-form DFT of the periodized Gaussian:
/// `ŵ_k = e^{2πi⌈p/2⌉k/n} Σ_m exp(−2(πσ/n)² (k + mn)²)`.
pub fn closed_form_dft(p: usize, n: usize, sigma: f64) -> Result<Vec<Complex64>> {
    check_sigma(sigma)?;
    if n == 0 {
        return Err(Error::Dimension("n must be at least 1".into()));
    }
    let c = center(p) as f64;
    let a = 2.0 * (PI * sigma / n as f64).powi(2);
    Ok((0..n)
        .map(|k| {
            let mag = image_sum(k as f64, n as f64, |d| (-a * d * d).exp());
            Complex64::from_polar(mag, 2.0 * PI * c * k as f64 / n as f64)
        })
        .collect())
}

/// `√n F v = (Σ_j v_j e^{2πi jk/n})_k` for `v` zero-padded to length `n`.
pub fn scaled_dft(v: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..v.len()].copy_from_slice(v);
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf
}

fn real_to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Unit test vector `u ∈ C^p` with its length-`n` DFT profile.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVector {
    pub u: Vec<Complex64>,
    /// `P_{u,s}` for `s = 0..n`.
    pub dft: Vec<Complex64>,
    /// `|P_{u,s}|`.
    pub profile: Vec<f64>,
}

impl TestVector {
    /// Normalizes `u` and computes its profile on the `n`-point grid.
    pub fn from_coefficients(u: Vec<Complex64>, n: usize) -> Result<Self> {
        if u.is_empty() || u.len() > n {
            return Err(Error::Dimension(format!(
                "test vector length {} must be in 1..={n}",
                u.len()
            )));
        }
        let norm = u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("test vector has zero norm".into()));
        }
        let u: Vec<Complex64> = u.into_iter().map(|c| c / norm).collect();
        let dft = scaled_dft(&u, n);
        let profile = dft.iter().map(|c| c.norm()).collect();
        Ok(Self { u, dft, profile })
    }

    pub fn n(&self) -> usize {
        self.profile.len()
    }

    pub fn p(&self) -> usize {
        self.u.len()
    }

    /// Weights `(1/n)|P_{u,s}|^2`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.profile.iter().map(|m| m * m / n).collect()
    }

    /// `(1/n) Σ_s |P_{u,s}|^2`, equal to 1 for a unit vector.
    pub fn parseval_mass(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// The vector with coordinates `e^{−iω_τ j} u_j`, `ω_τ = 2πτ/n`.
    pub fn modulated(&self, tau: usize) -> Result<Self> {
        let n = self.n();
        let coeffs = self
            .u
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let phase = -2.0 * PI * ((tau * j) % n) as f64 / n as f64;
                c * Complex64::from_polar(1.0, phase)
            })
            .collect();
        Self::from_coefficients(coeffs, n)
    }
}

/// Truncated and normalized periodized Gaussian `u = w[0..p] / ‖w[0..p]‖`.
pub fn test_vector(p: usize, n: usize, sigma: f64) -> Result<TestVector> {
    validate_dims(p, n)?;
    let w = periodized_gaussian(p, n, sigma)?;
    TestVector::from_coefficients(real_to_complex(&w[..p]), n)
}

/// The flat test vector `p^{-1/2}(1, ..., 1)`, whose weights form a Fejér kernel.
pub fn fejer_test_vector(p: usize, n: usize) -> Result<TestVector> {
    validate_dims(p, n)?;
    TestVector::from_coefficients(vec![Complex64::new(1.0, 0.0); p], n)
}

/// Closed-form Fejér weight `(1/n)|P_{u,s}|^2` of the flat test vector.
pub fn fejer_weight(p: usize, n: usize, s: usize) -> f64 {
    let (pf, nf) = (p as f64, n as f64);
    if s.is_multiple_of(n) {
        return pf / nf;
    }
    let x = PI * s as f64 / nf;
    let ratio = (x * pf).sin() / x.sin();
    ratio * ratio / (pf * nf)
}

/// Decay envelope
/// `(2^6 σ/n) e^{−4(πσ/n)² s²} + (2^8 σ³/(n p²)) e^{−p²/(4σ²)}` for `s ∈ [0, n/2]`.
pub fn lemma2_envelope(p: usize, n: usize, sigma: f64, s: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(0.0..=n as f64 / 2.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("s = {s} outside [0, n/2] for n = {n}")));
    }
    let (pf, nf) = (p as f64, n as f64);
    let head = 64.0 * sigma / nf * (-4.0 * (PI * sigma / nf).powi(2) * s * s).exp();
    let tail = 256.0 * sigma.powi(3) / (nf * pf * pf) * (-(pf * pf) / (4.0 * sigma * sigma)).exp();
    Ok(head + tail)
}

/// Points `s ∈ [0, n/2]` where `(1/n)|P_{u,s}|^2` exceeds the decay envelope.
pub fn envelope_violations(tv: &TestVector, sigma: f64) -> Result<Vec<(usize, f64, f64)>> {
    let n = tv.n();
    let weights = tv.weights();
    let mut out = Vec::new();
    for (s, &w) in weights.iter().enumerate().take(n / 2 + 1) {
        let env = lemma2_envelope(tv.p(), n, sigma, s as f64)?;
        if w > env {
            out.push((s, w, env));
        }
    }
    Ok(out)
}

/// Value of the periodogram bound for one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    /// `min_k (1/n) Σ_s |y_{s+τ_k}|^2 |P_{u,s}|^2`.
    pub bound: f64,
    /// The unshifted (`τ = 0`) sum.
    pub unshifted: f64,
    /// Shift attaining the minimum.
    pub argmin_tau: usize,
}

/// `(1/n) Σ_s |y_{(s+τ) mod n}|^2 |P_{u,s}|^2`.
pub fn shifted_sum(power: &[f64], weights: &[f64], tau: usize) -> f64 {
    let n = power.len();
    weights
        .iter()
        .enumerate()
        .map(|(s, w)| power[(s + tau) % n] * w)
        .sum()
}

/// Shifted periodogram bound for a circulant signal.
pub fn periodogram_bound(
    signal: &SignalVector,
    tv: &TestVector,
    schedule: &BoundSchedule,
) -> Result<BoundEvaluation> {
    let n = signal.len();
    if signal.offset != 0 {
        return Err(Error::InvalidParameter(
            "periodogram bound needs a circulant-layout signal".into(),
        ));
    }
    if tv.n() != n {
        return Err(Error::LengthMismatch { expected: n, actual: tv.n() });
    }
    if let Some(&bad) = schedule.taus.iter().find(|&&t| t >= n) {
        return Err(Error::Schedule(format!("shift {bad} out of range for n = {n}")));
    }
    let power = periodogram(&signal.values);
    let weights = tv.weights();
    let unshifted = shifted_sum(&power, &weights, 0);
    let (argmin_tau, bound) = schedule
        .taus
        .iter()
        .map(|&t| (t, shifted_sum(&power, &weights, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, unshifted));
    Ok(BoundEvaluation { bound, unshifted, argmin_tau })
}

/// Bound for a circulant signal of length `n` with the default schedule.
///
/// When `n` is too short for a single shift window the unshifted sum is
/// returned; it is an upper bound on its own.
pub fn evaluate_bound(
    signal: &SignalVector,
    p: usize,
    beta: f64,
    mode: BoundMode,
) -> Result<BoundEvaluation> {
    let n = signal.len();
    let (sigma, _) = test_width(p, n, beta, mode)?;
    let tv = test_vector(p, n, sigma)?;
    let schedule = match default_schedule(p, n, beta, mode) {
        Ok(s) => s,
        Err(Error::Schedule(_)) => {
            let power = periodogram(&signal.values);
            let unshifted = shifted_sum(&power, &tv.weights(), 0);
            return Ok(BoundEvaluation { bound: unshifted, unshifted, argmin_tau: 0 });
        }
        Err(e) => return Err(e),
    };
    periodogram_bound(signal, &tv, &schedule)
}
