//! Semi-value weight vectors.
//!
//! A probabilistic value over `n` players is fixed by a non-negative vector
//! `p` (indexed by coalition size `s = 1..n`) with `sum_s C(n-1,s-1) p_s = 1`.
//! The effective size weights `m_s = C(n-1,s-1) p_s` form a distribution over
//! sizes and are what every estimator in this crate actually consumes.
//!
//! All binomials and Beta functions are evaluated in log space and
//! exponentiated once per entry, so `n` in the thousands is fine.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Tolerance used when checking `sum_s m_s = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Which probabilistic value to compute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SemivalueSpec {
    /// Beta Shapley value: `mu` has density proportional to
    /// `w^(beta-1) (1-w)^(alpha-1)`. `Beta(1,1)` is the Shapley value.
    BetaShapley { alpha: f64, beta: f64 },
    /// Weighted Banzhaf value: `mu` is a point mass at `a`.
    WeightedBanzhaf { a: f64 },
    /// Explicit `p_1..p_n`; the length fixes `n`.
    Custom(Vec<f64>),
}

impl SemivalueSpec {
    pub fn shapley() -> Self {
        SemivalueSpec::BetaShapley {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        let spec = SemivalueSpec::BetaShapley { alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn banzhaf(a: f64) -> Result<Self> {
        let spec = SemivalueSpec::WeightedBanzhaf { a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn is_shapley(&self) -> bool {
        matches!(self, SemivalueSpec::BetaShapley { alpha, beta } if *alpha == 1.0 && *beta == 1.0)
    }

    /// Checks parameter ranges. Normalization of custom vectors is checked
    /// by [`make_weights`], which knows `n`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            SemivalueSpec::BetaShapley { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite() && alpha >= 1.0 && beta >= 1.0) {
                    return Err(Error::InvalidSemivalue(format!(
                        "Beta({alpha},{beta}) requires alpha >= 1 and beta >= 1"
                    )));
                }
            }
            SemivalueSpec::WeightedBanzhaf { a } => {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::InvalidSemivalue(format!(
                        "WB-{a} requires 0 < a < 1"
                    )));
                }
            }
            SemivalueSpec::Custom(ref p) => {
                if p.is_empty() {
                    return Err(Error::InvalidSemivalue("empty custom weight vector".into()));
                }
                if let Some(bad) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return Err(Error::InvalidSemivalue(format!(
                        "custom weights must be finite and non-negative, found {bad}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads a custom vector from a file with one `p_s` per line.
    pub fn custom_from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut p = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::Parse(format!("line {}: `{line}` is not a number", lineno + 1))
            })?;
            p.push(v);
        }
        let spec = SemivalueSpec::Custom(p);
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for SemivalueSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemivalueSpec::BetaShapley { alpha, beta } => write!(f, "beta:{alpha}:{beta}"),
            SemivalueSpec::WeightedBanzhaf { a } => write!(f, "wb:{a}"),
            SemivalueSpec::Custom(p) => write!(f, "custom:n{}", p.len()),
        }
    }
}

impl FromStr for SemivalueSpec {
    type Err = Error;

    /// Accepts `beta:ALPHA:BETA`, `wb:A`, `custom:@FILE`, and the aliases
    /// `shapley` and `banzhaf`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSemivalue(format!("cannot parse `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.splitn(3, ':').collect();
        let spec = match parts.as_slice() {
            ["shapley"] => SemivalueSpec::shapley(),
            ["banzhaf"] => SemivalueSpec::WeightedBanzhaf { a: 0.5 },
            ["beta", a, b] => SemivalueSpec::BetaShapley {
                alpha: num(a)?,
                beta: num(b)?,
            },
            ["wb", a] => SemivalueSpec::WeightedBanzhaf { a: num(a)? },
            ["custom", rest] => {
                let path = rest.strip_prefix('@').ok_or_else(bad)?;
                return SemivalueSpec::custom_from_file(path);
            }
            ["custom", a, b] => {
                // `custom:@C:\path` style paths contain a second colon.
                let joined = format!("{a}:{b}");
                let path = joined.strip_prefix('@').ok_or_else(bad)?.to_owned();
                return SemivalueSpec::custom_from_file(path);
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for SemivalueSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SemivalueSpec> for String {
    fn from(s: SemivalueSpec) -> String {
        s.to_string()
    }
}

/// Weights `p_s` and `m_s = C(n-1,s-1) p_s` for a fixed player count.
///
/// Both vectors are stored 0-based: `p[s - 1]` is the weight of size `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    spec: SemivalueSpec,
    n: usize,
    p: Vec<f64>,
    m: Vec<f64>,
}

impl WeightVector {
    pub fn spec(&self) -> &SemivalueSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    /// `p_s` for a 1-based size; zero outside `1..=n`.
    pub fn p_at(&self, s: usize) -> f64 {
        if s == 0 || s > self.n {
            0.0
        } else {
            self.p[s - 1]
        }
    }

    /// `m_s` for a 1-based size; zero outside `1..=n`.
    pub fn m_at(&self, s: usize) -> f64 {
        if s == 0 || s > self.n {
            0.0
        } else {
            self.m[s - 1]
        }
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_binomial(n as u64, k as u64)
}

/// Builds the weight vector of `spec` for `n` players.
pub fn make_weights(spec: &SemivalueSpec, n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    spec.validate()?;
    let ln_p: Vec<f64> = match *spec {
        SemivalueSpec::BetaShapley { alpha, beta } => {
            let norm = ln_beta(beta, alpha);
            (1..=n)
                .map(|s| ln_beta(beta + (s - 1) as f64, alpha + (n - s) as f64) - norm)
                .collect()
        }
        SemivalueSpec::WeightedBanzhaf { a } => {
            let (la, lb) = (a.ln(), (-a).ln_1p());
            (1..=n)
                .map(|s| (s - 1) as f64 * la + (n - s) as f64 * lb)
                .collect()
        }
        SemivalueSpec::Custom(ref p) => {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
            p.iter().map(|x| x.ln()).collect()
        }
    };
    let p: Vec<f64> = match spec {
        SemivalueSpec::Custom(p) => p.clone(),
        _ => ln_p.iter().map(|l| l.exp()).collect(),
    };
    let m: Vec<f64> = ln_p
        .iter()
        .enumerate()
        .map(|(k, lp)| {
            if lp.is_finite() {
                (ln_choose(n - 1, k) + lp).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = m.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    Ok(WeightVector {
        spec: spec.clone(),
        n,
        p,
        m,
    })
}

/// Rescales a non-negative vector so that `sum_s C(n-1,s-1) p_s = 1`.
pub fn normalize_custom(p: &[f64]) -> Result<Vec<f64>> {
    SemivalueSpec::Custom(p.to_vec()).validate()?;
    let n = p.len();
    let total: f64 = p
        .iter()
        .enumerate()
        .filter(|(_, x)| **x > 0.0)
        .map(|(k, x)| (ln_choose(n - 1, k) + x.ln()).exp())
        .sum();
    if total <= 0.0 {
        return Err(Error::InvalidSemivalue(
            "all-zero custom weight vector".into(),
        ));
    }
    Ok(p.iter().map(|x| x / total).collect())
}

/// `int w^k dmu(w)`.
pub fn moment(spec: &SemivalueSpec, k: u32) -> Result<f64> {
    spec.validate()?;
    match *spec {
        SemivalueSpec::BetaShapley { alpha, beta } => {
            Ok((ln_beta(beta + k as f64, alpha) - ln_beta(beta, alpha)).exp())
        }
        SemivalueSpec::WeightedBanzhaf { a } => Ok(a.powi(k as i32)),
        SemivalueSpec::Custom(_) => Err(Error::NoMeasure(spec.to_string())),
    }
}

/// `int 1/(w(1-w)) dmu(w)`, or `None` when it diverges.
///
/// Finite for every WB-a and for Beta(alpha, beta) with both parameters > 1.
pub fn reciprocal_variance_moment(spec: &SemivalueSpec) -> Result<Option<f64>> {
    spec.validate()?;
    match *spec {
        SemivalueSpec::BetaShapley { alpha, beta } => {
            if alpha > 1.0 && beta > 1.0 {
                Ok(Some(
                    (ln_beta(beta - 1.0, alpha - 1.0) - ln_beta(beta, alpha)).exp(),
                ))
            } else {
                Ok(None)
            }
        }
        SemivalueSpec::WeightedBanzhaf { a } => Ok(Some(1.0 / (a * (1.0 - a)))),
        SemivalueSpec::Custom(_) => Err(Error::NoMeasure(spec.to_string())),
    }
}

/// Supremum of the density of `mu`; `None` for point masses and custom vectors.
pub fn max_density(spec: &SemivalueSpec) -> Option<f64> {
    match *spec {
        SemivalueSpec::BetaShapley { alpha, beta } if alpha >= 1.0 && beta >= 1.0 => {
            if alpha + beta <= 2.0 {
                return Some(1.0);
            }
            let mode = (beta - 1.0) / (alpha + beta - 2.0);
            let term = |e: f64, x: f64| if e == 0.0 { 0.0 } else { e * x.ln() };
            Some(
                (term(beta - 1.0, mode) + term(alpha - 1.0, 1.0 - mode) - ln_beta(beta, alpha))
                    .exp(),
            )
        }
        _ => None,
    }
}
