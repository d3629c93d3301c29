//! Real trigonometric polynomials and the Stechkin and Bernstein checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// `T(ω) = a_0 + Σ_{d=1}^{k} (a_d cos dω + b_d sin dω)`.
///
/// Polynomials built from a certificate `q` equal `|q(e^{iω})|² / Σ|q_j|²`,
/// so they are nonnegative with `a_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    cos: Vec<f64>,
    sin: Vec<f64>,
    certificate: Option<Vec<Complex64>>,
}

impl TrigPoly {
    /// Cosine polynomial `a_0 + Σ a_d cos dω`.
    pub fn cosine(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Empty("trigonometric polynomial needs a_0".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("coefficients must be finite".into()));
        }
        let sin = vec![0.0; coeffs.len()];
        Ok(Self { cos: coeffs, sin, certificate: None })
    }

    /// `|q(e^{iω})|² / Σ|q_j|²` for `q(z) = Σ_j q_j z^j`.
    pub fn from_certificate(q: Vec<Complex64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Empty("certificate polynomial is empty".into()));
        }
        let norm: f64 = q.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter(
                "certificate polynomial must be nonzero and finite".into(),
            ));
        }
        let k = q.len() - 1;
        let mut cos = vec![0.0; k + 1];
        let mut sin = vec![0.0; k + 1];
        for d in 0..=k {
            // c_d = Σ_j q_{j+d} conj(q_j); T = c_0 + 2 Σ Re(c_d e^{idω})
            let c: Complex64 = (0..=k - d).map(|j| q[j + d] * q[j].conj()).sum();
            if d == 0 {
                cos[0] = c.re / norm;
            } else {
                cos[d] = 2.0 * c.re / norm;
                sin[d] = -2.0 * c.im / norm;
            }
        }
        Ok(Self { cos, sin, certificate: Some(q) })
    }

    /// Random certificate of degree `k` with i.i.d. complex Gaussian coefficients.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let q = (0..=k)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::from_certificate(q).expect("Gaussian certificate is nonzero almost surely")
    }

    /// Normalized Fejér kernel `|Σ_{j<p} e^{ijω}|² / p` of degree `p - 1`.
    pub fn fejer(p: usize) -> Result<Self> {
        Self::from_certificate(vec![Complex64::new(1.0, 0.0); p])
    }

    pub fn degree(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    pub fn certificate(&self) -> Option<&[Complex64]> {
        self.certificate.as_deref()
    }

    /// Mean value `a_0 = (1/2π) ∫ T`.
    pub fn mean(&self) -> f64 {
        self.cos[0]
    }

    pub fn eval(&self, w: f64) -> f64 {
        let step = Complex64::cis(w);
        let mut z = Complex64::new(1.0, 0.0);
        let mut acc = self.cos[0];
        for d in 1..self.cos.len() {
            z *= step;
            acc += self.cos[d] * z.re + self.sin[d] * z.im;
        }
        acc
    }

    pub fn deriv(&self, w: f64) -> f64 {
        let step = Complex64::cis(w);
        let mut z = Complex64::new(1.0, 0.0);
        let mut acc = 0.0;
        for d in 1..self.cos.len() {
            z *= step;
            acc += d as f64 * (self.sin[d] * z.re - self.cos[d] * z.im);
        }
        acc
    }

    /// `T(2πm/len)` for `m = 0..len`; `len` must exceed the degree.
    pub fn grid_values(&self, len: usize) -> Vec<f64> {
        assert!(len > self.degree(), "grid shorter than the degree");
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        buf[0] = Complex64::new(self.cos[0], 0.0);
        for d in 1..self.cos.len() {
            buf[d] = Complex64::new(self.cos[d], -self.sin[d]);
        }
        FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

/// Location and value of the global maximum of `T` over one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximum {
    pub omega: f64,
    pub value: f64,
}

/// Global maximum by a `4096·k` point grid and a bisection on `T′` around the
/// leading grid peaks.
pub fn locate_maximum(t: &TrigPoly) -> Maximum {
    let k = t.degree().max(1);
    let len = 4096 * k;
    let h = 2.0 * PI / len as f64;
    let grid = t.grid_values(len);
    let best = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-3 * best.abs().max(f64::MIN_POSITIVE);
    let mut out = Maximum { omega: 0.0, value: f64::NEG_INFINITY };
    for m in 0..len {
        let (prev, next) = (grid[(m + len - 1) % len], grid[(m + 1) % len]);
        let g = grid[m];
        if g < prev || g < next || g < best - slack {
            continue;
        }
        let omega = refine_peak(t, m as f64 * h, h);
        let value = t.eval(omega);
        if value > out.value {
            out = Maximum { omega, value };
        }
    }
    out
}

fn refine_peak(t: &TrigPoly, center: f64, h: f64) -> f64 {
    let (mut lo, mut hi) = (center - h, center + h);
    if !(t.deriv(lo) > 0.0 && t.deriv(hi) < 0.0) {
        return center;
    }
    while hi - lo > 1e-15 * (1.0 + center.abs()) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t.deriv(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Outcome of [`stechkin_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StechkinOutcome {
    pub degree: usize,
    pub argmax: f64,
    pub max_value: f64,
    /// `min_η T(ω̄+η) − M cos²(kη/2)` over the sampled window.
    pub worst_margin: f64,
    pub worst_eta: f64,
    pub pass: bool,
}

/// Checks `T(ω̄+η) ≥ M cos²(kη/2)` on 2048 points of `|η| ≤ π/k`.
pub fn stechkin_check(t: &TrigPoly) -> Result<StechkinOutcome> {
    let k = t.degree();
    if k == 0 {
        return Err(Error::InvalidParameter("Stechkin check needs degree k >= 1".into()));
    }
    let max = locate_maximum(t);
    if !(max.value > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "polynomial maximum must be positive, got {}",
            max.value
        )));
    }
    let kf = k as f64;
    let half = PI / kf;
    let points = 2048;
    let mut worst = (f64::INFINITY, 0.0);
    for i in 0..points {
        let eta = -half + 2.0 * half * i as f64 / (points - 1) as f64;
        let c = (kf * eta / 2.0).cos();
        let margin = t.eval(max.omega + eta) - max.value * c * c;
        if margin < worst.0 {
            worst = (margin, eta);
        }
    }
    Ok(StechkinOutcome {
        degree: k,
        argmax: max.omega,
        max_value: max.value,
        worst_margin: worst.0,
        worst_eta: worst.1,
        pass: worst.0 >= -1e-9 * max.value,
    })
}

/// Outcome of [`bernstein_l1_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernsteinOutcome {
    pub degree: usize,
    pub derivative_l1: f64,
    pub l1: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Ratio `∫|T′| / ∫|T|` over a full period for a nonnegative `T`.
///
/// For cosine polynomials this equals the ratio over `[0, π]`.
pub fn bernstein_l1_check(t: &TrigPoly) -> Result<BernsteinOutcome> {
    let l1 = 2.0 * PI * t.mean();
    if !(l1 > 0.0) {
        return Err(Error::InvalidParameter(
            "Bernstein check needs a nonnegative polynomial with positive mean".into(),
        ));
    }
    let k = t.degree();
    let panels = 8 * k.max(1);
    let width = 2.0 * PI / panels as f64;
    let scale = t.cos.iter().chain(&t.sin).map(|c| c.abs()).sum::<f64>() * k.max(1) as f64;
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE) / panels as f64;
    let f = |w: f64| t.deriv(w).abs();
    let derivative_l1: f64 = (0..panels)
        .map(|i| {
            let a = i as f64 * width;
            adaptive_simpson(&f, a, a + width, tol, 40)
        })
        .sum();
    let ratio = derivative_l1 / l1;
    Ok(BernsteinOutcome {
        degree: k,
        derivative_l1,
        l1,
        ratio,
        pass: ratio <= k as f64 * (1.0 + 1e-8),
    })
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
