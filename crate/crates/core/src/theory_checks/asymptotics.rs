//! Gaussian-damped sums and their leading asymptotics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier_bound::SERIES_REL_TOL;

/// Direct sums beside their asymptotes, for `L = ℓα`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma3Sums {
    /// `Σ_{s≥0} log(1 + L e^{-(αs)²})`
    pub sum_log: f64,
    /// `Σ_{s≥0} 1 / (L^{-1} e^{(αs)²} + 1)`
    pub sum_frac: f64,
    /// `(2/3) log^{3/2}(L) / α`
    pub asymptote_log: f64,
    /// `log^{1/2}(L) / α`
    pub asymptote_frac: f64,
}

impl Lemma3Sums {
    pub fn ratio_log(&self) -> f64 {
        self.sum_log / self.asymptote_log
    }

    pub fn ratio_frac(&self) -> f64 {
        self.sum_frac / self.asymptote_frac
    }
}

pub fn lemma3_sums(ell: f64, alpha: f64) -> Result<Lemma3Sums> {
    if !(alpha > 0.0 && alpha.is_finite() && ell.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need finite alpha > 0 and finite ell, got alpha = {alpha}, ell = {ell}"
        )));
    }
    let big = ell * alpha;
    if !(big > 1.0) {
        return Err(Error::InvalidParameter(format!("need ell * alpha > 1, got {big}")));
    }
    let log_big = big.ln();
    let (mut sum_log, mut sum_frac) = (0.0, 0.0);
    let mut s = 0u64;
    loop {
        // exponent (αs)² - log L, kept in log space so huge L cannot overflow
        let e = (alpha * s as f64).powi(2) - log_big;
        let (term_log, term_frac) = if e < 0.0 {
            (-e + e.exp().ln_1p(), 1.0 / (e.exp() + 1.0))
        } else {
            let t = (-e).exp();
            (t.ln_1p(), t / (1.0 + t))
        };
        sum_log += term_log;
        sum_frac += term_frac;
        if e > 0.0 && term_log <= SERIES_REL_TOL * sum_log && term_frac <= SERIES_REL_TOL * sum_frac {
            break;
        }
        s += 1;
    }
    Ok(Lemma3Sums {
        sum_log,
        sum_frac,
        asymptote_log: 2.0 / 3.0 * log_big.powf(1.5) / alpha,
        asymptote_frac: log_big.sqrt() / alpha,
    })
}
