//! Weighted least-squares datamodels and their link to semi-values.
//!
//! A datamodel fits `U(S) ≈ b + sum_{i in S} theta_i` over all coalitions
//! with size weights `eta_{s+1}`. When the interior weights satisfy
//! `eta_s = p_{s-1} + p_s`, differences of the optimal `theta` equal
//! differences of the semi-value with weights `p`; for weighted Banzhaf
//! with geometric `eta`, `theta` is the semi-value itself.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::ln_beta;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::games::{exact_semivalue, Game};
use crate::weights::{SemivalueSpec, WeightVector};

/// Largest game the exact solver enumerates.
pub const DATAMODEL_MAX_PLAYERS: usize = 20;

/// How the two unconstrained boundary weights `eta_1`, `eta_{n+1}` were chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaBoundary {
    /// `int w^{k-2} (1-w)^{n-k} dmu` extended to `k = 1` and `k = n+1`.
    Measure,
    /// `eta_1 = p_1` and `eta_{n+1} = p_n`.
    EdgeWeights,
    /// Supplied by the caller.
    Explicit,
}

impl std::fmt::Display for EtaBoundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EtaBoundary::Measure => "measure",
            EtaBoundary::EdgeWeights => "edge-weights",
            EtaBoundary::Explicit => "explicit",
        })
    }
}

/// Size weights `eta`, stored 0-based: `eta()[s]` weighs coalitions of size `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct DatamodelWeights {
    n: usize,
    eta: Vec<f64>,
    boundary: EtaBoundary,
}

impl DatamodelWeights {
    pub fn new(eta: Vec<f64>, boundary: EtaBoundary) -> Result<Self> {
        if eta.len() < 2 {
            return Err(Error::InvalidArgument(
                "eta needs n + 1 >= 2 entries".into(),
            ));
        }
        if eta.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument(
                "eta entries must be finite and non-negative".into(),
            ));
        }
        if !(eta.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidArgument(
                "eta must have positive total weight".into(),
            ));
        }
        Ok(DatamodelWeights {
            n: eta.len() - 1,
            eta,
            boundary,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `eta_k` with the 1-based index used in the identities.
    pub fn eta_at(&self, k: usize) -> f64 {
        self.eta[k - 1]
    }

    pub fn boundary(&self) -> EtaBoundary {
        self.boundary
    }
}

/// `eta_s = p_{s-1} + p_s` for `2 <= s <= n`, with caller-chosen ends.
pub fn eta_from_p(w: &WeightVector, head: f64, tail: f64) -> Result<DatamodelWeights> {
    if !(head >= 0.0) || !(tail >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "boundary weights must be non-negative, got {head} and {tail}"
        )));
    }
    let n = w.n();
    let mut eta = Vec::with_capacity(n + 1);
    eta.push(head);
    eta.extend((2..=n).map(|s| w.p_at(s - 1) + w.p_at(s)));
    eta.push(tail);
    DatamodelWeights::new(eta, EtaBoundary::Explicit)
}

/// `eta_k = a^{k-2} (1-a)^{n-k}` for `1 <= k <= n+1`.
pub fn eta_banzhaf(a: f64, n: usize) -> Result<DatamodelWeights> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "a must lie in (0, 1), got {a}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let (la, lb) = (a.ln(), (-a).ln_1p());
    let eta = (1..=n + 1)
        .map(|k| ((k as f64 - 2.0) * la + (n as f64 - k as f64) * lb).exp())
        .collect();
    DatamodelWeights::new(eta, EtaBoundary::Measure)
}

/// Interior from the weights, ends from the measure when its integrals
/// converge and from `p_1`, `p_n` otherwise.
pub fn eta_default(w: &WeightVector) -> Result<DatamodelWeights> {
    let n = w.n();
    match *w.spec() {
        SemivalueSpec::WeightedBanzhaf { a } => eta_banzhaf(a, n),
        SemivalueSpec::BetaShapley { alpha, beta } => {
            let norm = ln_beta(beta, alpha);
            let nf = n as f64;
            let head = (beta > 1.0).then(|| (ln_beta(beta - 1.0, alpha + nf - 1.0) - norm).exp());
            let tail = (alpha > 1.0).then(|| (ln_beta(beta + nf - 1.0, alpha - 1.0) - norm).exp());
            let mut d = eta_from_p(w, head.unwrap_or(w.p_at(1)), tail.unwrap_or(w.p_at(n)))?;
            d.boundary = if head.is_some() && tail.is_some() {
                EtaBoundary::Measure
            } else {
                EtaBoundary::EdgeWeights
            };
            Ok(d)
        }
        SemivalueSpec::Custom(_) => {
            let mut d = eta_from_p(w, w.p_at(1), w.p_at(n))?;
            d.boundary = EtaBoundary::EdgeWeights;
            Ok(d)
        }
    }
}

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Constants of the normal matrix: `A00 = sum_s C(n,s) eta_{s+1}`,
/// `A0i = Aii = kappa`, `Aij = tau` for `i != j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalStructure {
    pub total: f64,
    pub kappa: f64,
    pub tau: f64,
}

impl NormalStructure {
    pub fn of(eta: &DatamodelWeights) -> Self {
        let n = eta.n;
        let e = &eta.eta;
        let total = (0..=n).map(|s| choose(n, s) * e[s]).sum();
        let kappa = (1..=n).map(|s| choose(n - 1, s - 1) * e[s]).sum();
        let tau = (2..=n).map(|s| choose(n - 2, s - 2) * e[s]).sum();
        NormalStructure { total, kappa, tau }
    }

    /// Positive definiteness of the normal matrix in terms of the
    /// constants rescaled to unit total weight.
    pub fn is_nonsingular(&self, n: usize) -> bool {
        let (k, t) = (self.kappa / self.total, self.tau / self.total);
        let nf = n as f64;
        k - t > 1e-14 && k + (nf - 1.0) * t - nf * k * k > 1e-14
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatamodelSolution {
    pub b_star: f64,
    pub theta_star: Vec<f64>,
    pub structure: NormalStructure,
    /// `max |G x - r| / max(1, max |r|)` for the normal equations `G x = r`.
    pub residual: f64,
    pub boundary: EtaBoundary,
}

/// Solves `min_{b, theta} sum_S eta_{s+1} (U(S) - b - sum_{i in S} theta_i)^2`
/// by full enumeration.
pub fn solve_datamodel_exact(game: &dyn Game, eta: &DatamodelWeights) -> Result<DatamodelSolution> {
    let n = game.n();
    if n > DATAMODEL_MAX_PLAYERS {
        return Err(Error::TooManyPlayers {
            n,
            max: DATAMODEL_MAX_PLAYERS,
        });
    }
    if eta.n != n {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: eta.eta.len(),
        });
    }
    let st = NormalStructure::of(eta);
    if !st.is_nonsingular(n) {
        return Err(Error::Singular(format!(
            "kappa = {}, tau = {}, total = {} violate the positivity conditions",
            st.kappa, st.tau, st.total
        )));
    }
    let mut g = DMatrix::from_element(n + 1, n + 1, st.tau);
    g[(0, 0)] = st.total;
    for i in 1..=n {
        g[(0, i)] = st.kappa;
        g[(i, 0)] = st.kappa;
        g[(i, i)] = st.kappa;
    }
    let mut r = DVector::zeros(n + 1);
    for mask in 0..1u64 << n {
        let s = mask.count_ones() as usize;
        let wv = eta.eta[s] * game.utility(&Coalition::from_bits(mask));
        r[0] += wv;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            r[i + 1] += wv;
            bits &= bits - 1;
        }
    }
    let x = g
        .clone()
        .lu()
        .solve(&r)
        .ok_or_else(|| Error::Singular("normal equations could not be factorized".into()))?;
    let scale = r.amax().max(1.0);
    let residual = (&g * &x - &r).amax() / scale;
    Ok(DatamodelSolution {
        b_star: x[0],
        theta_star: x.rows(1, n).iter().copied().collect(),
        structure: st,
        residual,
        boundary: eta.boundary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            _ => Err(Error::Parse(format!(
                "unknown norm `{s}` (expected l1 or l2)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegSpec {
    lambda: f64,
    norm: Norm,
}

impl RegSpec {
    pub fn new(lambda: f64, norm: Norm) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(RegSpec { lambda, norm })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }
}

/// Regularized datamodel coefficients from a weighted Banzhaf value `phi`
/// (penalty `lambda / (a(1-a)) * R(theta)` on top of the geometric weights).
/// Works for any estimate of `phi`, so one run serves every `lambda`.
pub fn regularized_from_phi(phi: &[f64], a: f64, reg: RegSpec) -> Result<Vec<f64>> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "a must lie in (0, 1), got {a}"
        )));
    }
    let v = a * (1.0 - a);
    Ok(match reg.norm {
        Norm::L2 => {
            let shrink = 1.0 / (1.0 + reg.lambda / v);
            phi.iter().map(|x| shrink * x).collect()
        }
        Norm::L1 => {
            let t = reg.lambda / (2.0 * v);
            phi.iter()
                .map(|x| x.signum() * (x.abs() - t).max(0.0))
                .collect()
        }
    })
}

/// Closed-form regularized datamodel for WB-`a` using the exact semi-value.
pub fn solve_regularized(game: &dyn Game, a: f64, reg: RegSpec) -> Result<Vec<f64>> {
    let phi = exact_semivalue(game, &SemivalueSpec::banzhaf(a)?)?;
    regularized_from_phi(&phi, a, reg)
}

/// `max_{j,k} |(theta_j - theta_k) - (phi_j - phi_k)|`.
pub fn check_pairwise_identity(theta: &[f64], phi: &[f64]) -> Result<f64> {
    if theta.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            got: theta.len(),
        });
    }
    let (lo, hi) = theta
        .iter()
        .zip(phi)
        .map(|(t, p)| t - p)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    Ok(if theta.is_empty() { 0.0 } else { hi - lo })
}
