//! The one-sample-fits-all framework: sampling vectors, the convergence
//! functional `D(m, q)`, the fill rate `gamma(q)`, and the sample
//! complexity bound.
//!
//! A sampling vector `q` has `n - 3` entries; `q[j]` is the probability of
//! drawing a subset of size `j + 2`, i.e. the interior sizes `2..=n-2`.
//! Sizes `0, 1, n-1, n` are never sampled because their buckets are
//! computed exactly from `2n + 2` evaluations.

mod framework;

pub(crate) use framework::run_ofa_as;
pub use framework::{
    aggregate, run_ofa, run_ofa_shared, AllocationMode, Bucket, BucketEstimates, OfaConfig, OfaRun,
};

use crate::error::{Error, Result};
use crate::weights::WeightVector;

const SUM_TOL: f64 = 1e-12;

/// Where a sampling vector came from; recorded in trace metadata.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QSource {
    OfaA,
    OfaS,
    Custom,
}

impl std::fmt::Display for QSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QSource::OfaA => "ofa-a",
            QSource::OfaS => "ofa-s",
            QSource::Custom => "custom",
        })
    }
}

/// Probability vector over the interior sizes `2..=n-2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingVector {
    n: usize,
    q: Vec<f64>,
    source: QSource,
}

impl SamplingVector {
    /// Wraps an already normalized, strictly positive vector.
    pub fn new(n: usize, q: Vec<f64>) -> Result<Self> {
        Self::with_source(n, q, QSource::Custom)
    }

    /// Normalizes non-negative `weights` (at least one positive).
    pub fn from_weights(n: usize, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidSamplingVector(
                "weights must be non-negative with a positive sum".into(),
            ));
        }
        Self::new(n, weights.iter().map(|w| w / total).collect())
    }

    fn with_source(n: usize, q: Vec<f64>, source: QSource) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidSamplingVector(format!(
                "n = {n} leaves no interior sizes"
            )));
        }
        if q.len() != n - 3 {
            return Err(Error::DimensionMismatch {
                expected: n - 3,
                got: q.len(),
            });
        }
        if let Some(bad) = q.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidSamplingVector(format!(
                "entries must be strictly positive, found {bad}"
            )));
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidSamplingVector(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(SamplingVector { n, q, source })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn source(&self) -> QSource {
        self.source
    }

    /// Probability of drawing size `s` (`2 <= s <= n-2`).
    pub fn at_size(&self, s: usize) -> f64 {
        self.q[s - 2]
    }
}

fn normalize(n: usize, raw: Vec<f64>, source: QSource) -> Result<SamplingVector> {
    let total: f64 = raw.iter().sum();
    SamplingVector::with_source(n, raw.into_iter().map(|x| x / total).collect(), source)
}

/// The average-case optimal vector: `q_{s-1} ∝ 1 / sqrt(s (n - s))`.
pub fn q_ofa_a(n: usize) -> Result<SamplingVector> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "q_ofa_a needs n >= 5, got {n}"
        )));
    }
    let raw = (2..=n - 2)
        .map(|s| 1.0 / ((s * (n - s)) as f64).sqrt())
        .collect();
    normalize(n, raw, QSource::OfaA)
}

/// The vector minimizing `D(m, q)` for one weight vector:
/// `q_{s-1} ∝ sqrt(m_s^2 / s + m_{s+1}^2 / (n - s))`.
///
/// Sizes with zero weight on both sides would get probability zero; they
/// receive a `1e-12` share of uniform mass instead so `q` stays positive.
pub fn q_ofa_s(w: &WeightVector) -> Result<SamplingVector> {
    let n = w.n();
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "q_ofa_s needs n >= 5, got {n}"
        )));
    }
    let raw: Vec<f64> = (2..=n - 2)
        .map(|s| {
            let (a, b) = (w.m_at(s), w.m_at(s + 1));
            (a * a / s as f64 + b * b / (n - s) as f64).sqrt()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidSamplingVector(format!(
            "{} puts no mass on sizes 2..={}",
            w.spec(),
            n - 1
        )));
    }
    let floor = 1e-12 / raw.len() as f64;
    let mixed = if raw.iter().any(|x| *x == 0.0) {
        raw.iter()
            .map(|x| (1.0 - 1e-12) * x / total + floor)
            .collect()
    } else {
        raw
    };
    normalize(n, mixed, QSource::OfaS)
}

/// `D(m, q) = sum_{s=2}^{n-2} (n / q_{s-1}) (m_s^2 / s + m_{s+1}^2 / (n - s))`.
pub fn d_value(w: &WeightVector, q: &SamplingVector) -> Result<f64> {
    d_value_raw(w.m(), q.as_slice())
}

/// [`d_value`] on bare slices: `m` has `n` entries and `q` has `n - 3`.
pub fn d_value_raw(m: &[f64], q: &[f64]) -> Result<f64> {
    let n = m.len();
    if n < 4 || q.len() != n - 3 {
        return Err(Error::DimensionMismatch {
            expected: n.saturating_sub(3),
            got: q.len(),
        });
    }
    if let Some(bad) = q.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::InvalidSamplingVector(format!(
            "q entry {bad} is not positive"
        )));
    }
    let nf = n as f64;
    Ok((2..=n - 2)
        .map(|s| {
            let (a, b) = (m[s - 1], m[s]);
            nf / q[s - 2] * (a * a / s as f64 + b * b / (n - s) as f64)
        })
        .sum())
}

/// `gamma(q) = min_s min(q_{s-1} s / n, q_{s-1} (n - s) / n)`.
pub fn gamma_value(q: &SamplingVector) -> f64 {
    let n = q.n();
    let nf = n as f64;
    (2..=n - 2)
        .map(|s| q.at_size(s) * s.min(n - s) as f64 / nf)
        .fold(f64::INFINITY, f64::min)
}

/// `D(m, q)` averaged over `m` uniform on the simplex:
/// `2 / (n (n + 1)) * sum_s (n / q_{s-1}) (1/s + 1/(n - s))`.
///
/// The leading constant is `(n-1)! / prod_{k=1}^{n-1} (2 + k)`, which
/// telescopes to `2 / (n (n + 1))`.
pub fn mean_d(q: &SamplingVector) -> f64 {
    mean_d_raw(q.as_slice())
}

/// [`mean_d`] on a bare slice of length `n - 3`.
pub fn mean_d_raw(q: &[f64]) -> f64 {
    let n = q.len() + 3;
    let nf = n as f64;
    let c = 2.0 / (nf * (nf + 1.0));
    c * (2..=n - 2)
        .map(|s| nf / q[s - 2] * (1.0 / s as f64 + 1.0 / (n - s) as f64))
        .sum::<f64>()
}

/// Evaluations sufficient for an `(eps, delta)`-approximation:
/// `4 n u^2 D / eps^2 * ln(8 n^2 / delta)`.
pub fn sample_complexity_bound(n: usize, u: f64, d: f64, eps: f64, delta: f64) -> Result<f64> {
    if n == 0 || !(u > 0.0) || !(d >= 0.0) || !(eps > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidArgument(
            "bound needs n, u, eps, delta > 0 and D >= 0".into(),
        ));
    }
    let nf = n as f64;
    Ok(4.0 * nf * u * u * d / (eps * eps) * (8.0 * nf * nf / delta).ln())
}
