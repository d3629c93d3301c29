//! Gaussian generating sequences, the structured matrices built from them,
//! and the scaled Gram operator `S = X Xᵀ / n` (dense and matrix-free).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_SIGNAL};

/// Structured matrix family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// `X_{ij} = x_{j-i}`, built from `x_{1-p}, ..., x_{n-1}`.
    Toeplitz,
    /// `X_{ij} = x_{(j-i) mod n}`, the first `p` rows of an `n × n` circulant.
    Circulant,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Toeplitz => "toeplitz",
            Kind::Circulant => "circulant",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "toeplitz" => Ok(Kind::Toeplitz),
            "circulant" => Ok(Kind::Circulant),
            other => Err(Error::InvalidParameter(format!(
                "unknown matrix kind '{other}' (expected toeplitz or circulant)"
            ))),
        }
    }
}

/// Matrix family and shape, with `1 <= p <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: Kind,
    pub p: usize,
    pub n: usize,
}

impl EnsembleSpec {
    pub fn new(kind: Kind, p: usize, n: usize) -> Result<Self> {
        validate_dims(p, n)?;
        Ok(Self { kind, p, n })
    }

    /// Length of the generating sequence: `n + p - 1` for Toeplitz, `n` for circulant.
    pub fn signal_len(&self) -> usize {
        match self.kind {
            Kind::Toeplitz => self.n + self.p - 1,
            Kind::Circulant => self.n,
        }
    }

    /// Aspect ratio `c = p / n`.
    pub fn aspect(&self) -> f64 {
        self.p as f64 / self.n as f64
    }
}

pub(crate) fn validate_dims(p: usize, n: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::Dimension("p must be at least 1".into()));
    }
    if p > n {
        return Err(Error::Dimension(format!(
            "p must not exceed n (p = {p}, n = {n})"
        )));
    }
    Ok(())
}

/// Generating sequence stored contiguously; `values[offset + i]` is `x_i`.
///
/// Toeplitz signals hold `x_{1-p}, ..., x_{n-1}` with `offset = p - 1`;
/// circulant signals hold `x_0, ..., x_{n-1}` with `offset = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalVector {
    pub values: Vec<f64>,
    pub seed: u64,
    pub offset: usize,
}

impl SignalVector {
    /// Circulant-layout signal from explicit values (seed recorded as 0).
    pub fn circulant(values: Vec<f64>) -> Self {
        Self { values, seed: 0, offset: 0 }
    }

    /// Toeplitz-layout signal `x_{1-p}, ..., x_{n-1}` from explicit values.
    pub fn toeplitz(p: usize, values: Vec<f64>) -> Self {
        Self { values, seed: 0, offset: p.saturating_sub(1) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `x_i` for a (possibly negative) sequence index.
    #[inline]
    pub fn at(&self, i: isize) -> f64 {
        self.values[(self.offset as isize + i) as usize]
    }

    /// Same sequence multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    fn check(&self, spec: &EnsembleSpec) -> Result<()> {
        let expected = spec.signal_len();
        if self.values.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: self.values.len() });
        }
        let expected_offset = match spec.kind {
            Kind::Toeplitz => spec.p - 1,
            Kind::Circulant => 0,
        };
        if self.offset != expected_offset {
            return Err(Error::InvalidParameter(format!(
                "signal offset {} does not match {} layout (expected {expected_offset})",
                self.offset, spec.kind
            )));
        }
        Ok(())
    }
}

/// Draws the i.i.d. standard normal generating sequence for `(kind, p, n)`.
///
/// The draws come from the ChaCha20 stream keyed by `seed`, so they are
/// bit-identical for identical inputs.
pub fn draw_signal(kind: Kind, p: usize, n: usize, seed: u64) -> Result<SignalVector> {
    let spec = EnsembleSpec::new(kind, p, n)?;
    let mut rng = stream_rng(seed, STREAM_SIGNAL);
    let values = (0..spec.signal_len())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let offset = match kind {
        Kind::Toeplitz => p - 1,
        Kind::Circulant => 0,
    };
    Ok(SignalVector { values, seed, offset })
}

/// Explicit `p × n` matrix `X`.
pub fn materialize(spec: &EnsembleSpec, signal: &SignalVector) -> Result<DMatrix<f64>> {
    signal.check(spec)?;
    let (p, n) = (spec.p, spec.n);
    Ok(match spec.kind {
        Kind::Toeplitz => DMatrix::from_fn(p, n, |i, j| signal.at(j as isize - i as isize)),
        Kind::Circulant => DMatrix::from_fn(p, n, |i, j| signal.values[(j + n - i) % n]),
    })
}

fn planner_pair(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
}

fn to_complex(values: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, &v) in buf.iter_mut().zip(values) {
        b.re = v;
    }
    buf
}

/// Squared magnitudes `|Y_s|^2` of the unnormalized forward DFT of `x`.
pub(crate) fn raw_power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf = to_complex(x, n);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

/// Periodogram `|y_s|^2` where `y = F x` is the unitary DFT of `x`.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    raw_power_spectrum(x).into_iter().map(|v| v / n).collect()
}

/// Circular sample autocovariances `c_l = (1/n) sum_m x_m x_{(m+l) mod n}`, via FFT.
pub fn circular_autocov(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Empty("circular autocovariance of an empty signal".into()));
    }
    let power = raw_power_spectrum(x);
    let mut buf: Vec<Complex64> = power.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / (n as f64 * n as f64);
    Ok(buf.iter().map(|c| c.re * scale).collect())
}

#[derive(Clone)]
enum GramCache {
    /// `weights[s] = |Y_s|^2 / n^2`; `S v` is the first `p` entries of
    /// `IDFT(weights ⊙ DFT(v padded to n))`.
    Circulant {
        weights: Vec<f64>,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    /// Zero-padded embedding of the Toeplitz sequence, length a power of two
    /// `>= n + p`, with its spectrum pre-divided by the embedding length.
    Toeplitz {
        len: usize,
        spectrum: Vec<Complex64>,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
}

/// Matrix-free `S = X Xᵀ / n`. Immutable after construction and shareable
/// across threads.
#[derive(Clone)]
pub struct GramOperator {
    spec: EnsembleSpec,
    signal: SignalVector,
    cache: GramCache,
}

impl fmt::Debug for GramOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GramOperator")
            .field("spec", &self.spec)
            .field("seed", &self.signal.seed)
            .finish_non_exhaustive()
    }
}

impl GramOperator {
    pub fn new(spec: EnsembleSpec, signal: SignalVector) -> Result<Self> {
        signal.check(&spec)?;
        let cache = match spec.kind {
            Kind::Circulant => {
                let n = spec.n;
                let scale = 1.0 / (n as f64 * n as f64);
                let weights = raw_power_spectrum(&signal.values)
                    .into_iter()
                    .map(|v| v * scale)
                    .collect();
                let (forward, inverse) = planner_pair(n);
                GramCache::Circulant { weights, forward, inverse }
            }
            Kind::Toeplitz => {
                let len = (spec.n + spec.p).next_power_of_two();
                let (forward, inverse) = planner_pair(len);
                let mut spectrum = to_complex(&signal.values, len);
                forward.process(&mut spectrum);
                let inv_len = 1.0 / len as f64;
                spectrum.iter_mut().for_each(|c| *c *= inv_len);
                GramCache::Toeplitz { len, spectrum, forward, inverse }
            }
        };
        Ok(Self { spec, signal, cache })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn signal(&self) -> &SignalVector {
        &self.signal
    }

    pub fn dim(&self) -> usize {
        self.spec.p
    }

    /// Factor turning `S` back into the unscaled Gram matrix `X Xᵀ`.
    pub fn unscaled_factor(&self) -> f64 {
        self.spec.n as f64
    }

    /// Periodogram `|y_s|^2` of a circulant signal (`None` for Toeplitz).
    pub fn periodogram(&self) -> Option<Vec<f64>> {
        match &self.cache {
            GramCache::Circulant { weights, .. } => {
                let n = self.spec.n as f64;
                Some(weights.iter().map(|w| w * n).collect())
            }
            GramCache::Toeplitz { .. } => None,
        }
    }

    /// `S v` in `O(n log n)`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.spec.p {
            return Err(Error::Dimension(format!(
                "gram_apply expects a vector of length {}, got {}",
                self.spec.p,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.spec.p];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked `out = S v`; both slices have length `p`.
    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let (p, n) = (self.spec.p, self.spec.n);
        match &self.cache {
            GramCache::Circulant { weights, forward, inverse } => {
                let mut buf = to_complex(v, n);
                forward.process(&mut buf);
                buf.iter_mut().zip(weights).for_each(|(b, &w)| *b *= w);
                inverse.process(&mut buf);
                out.iter_mut().zip(&buf).for_each(|(o, b)| *o = b.re);
            }
            GramCache::Toeplitz { len, spectrum, forward, inverse } => {
                // w = Xᵀ v: (Xᵀv)_j = conv(a, v)[j + p - 1]
                let mut buf = to_complex(v, *len);
                forward.process(&mut buf);
                buf.iter_mut().zip(spectrum).for_each(|(b, a)| *b *= a);
                inverse.process(&mut buf);
                let mut w = vec![Complex64::new(0.0, 0.0); *len];
                for j in 0..n {
                    w[j].re = buf[j + p - 1].re;
                }
                // X w: (Xw)_i = sum_j a_{j+m} w_j with m = p - 1 - i
                forward.process(&mut w);
                w.iter_mut().zip(spectrum).for_each(|(b, a)| *b = a * b.conj());
                inverse.process(&mut w);
                let inv_n = 1.0 / n as f64;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = w[p - 1 - i].re * inv_n;
                }
            }
        }
    }

    /// Dense `p × p` matrix `S`.
    pub fn dense(&self) -> DMatrix<f64> {
        let (p, n) = (self.spec.p, self.spec.n);
        match self.spec.kind {
            Kind::Circulant => {
                let acov = circular_autocov(&self.signal.values).expect("nonempty signal");
                DMatrix::from_fn(p, p, |i, k| acov[(i + n - k) % n])
            }
            Kind::Toeplitz => {
                // First row directly, then G_{i+1,k+1} = G_{ik} + x_{-1-i} x_{-1-k} - x_{n-1-i} x_{n-1-k}.
                let x = &self.signal;
                let mut g = DMatrix::<f64>::zeros(p, p);
                for k in 0..p {
                    let s: f64 = (0..n as isize).map(|j| x.at(j) * x.at(j - k as isize)).sum();
                    g[(0, k)] = s;
                    g[(k, 0)] = s;
                }
                for i in 0..p - 1 {
                    for k in i..p - 1 {
                        let (ii, kk) = (i as isize, k as isize);
                        let head = x.at(-1 - ii) * x.at(-1 - kk);
                        let tail = x.at(n as isize - 1 - ii) * x.at(n as isize - 1 - kk);
                        let v = g[(i, k)] + head - tail;
                        g[(i + 1, k + 1)] = v;
                        g[(k + 1, i + 1)] = v;
                    }
                }
                g / n as f64
            }
        }
    }
}

/// Gram operator of the Toeplitz block formed by the last `n - p + 1` columns
/// of a rectangular circulant matrix.
///
/// The returned operator is the scaled `X̃ X̃ᵀ / ñ` of a `p × ñ` Toeplitz
/// matrix; multiply eigenvalues by [`GramOperator::unscaled_factor`] to
/// compare against the unscaled circulant Gram matrix.
pub fn toeplitz_minor_of_circulant(
    spec: &EnsembleSpec,
    signal: &SignalVector,
) -> Result<GramOperator> {
    if spec.kind != Kind::Circulant {
        return Err(Error::InvalidParameter(
            "toeplitz minor requires a circulant ensemble".into(),
        ));
    }
    signal.check(spec)?;
    let tail = spec.n - spec.p + 1;
    // ñ may be smaller than p here, so the usual p <= n rule does not apply.
    let minor = EnsembleSpec { kind: Kind::Toeplitz, p: spec.p, n: tail };
    // X̃_{i,j} = x_{j + p - 1 - i}: the Toeplitz sequence z_t = x_{t + p - 1}
    // for t in 1-p..=ñ-1 is exactly x_0, ..., x_{n-1}.
    let z = SignalVector {
        values: signal.values.clone(),
        seed: signal.seed,
        offset: spec.p - 1,
    };
    GramOperator::new(minor, z)
}
