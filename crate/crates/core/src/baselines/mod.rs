//! Baseline estimators sharing one run contract: a game, a semi-value, a
//! per-player budget, a number of checkpoints and a seed.

mod kernel;
mod marginal;
mod regression;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{Evaluator, Game};
use crate::ofa::{q_ofa_a, q_ofa_s, AllocationMode, OfaConfig};
use crate::sampling::{rng_for, stream};
use crate::trace::{drive, Checkpoint, EstimateTrace, Stepper};
use crate::weights::{make_weights, reciprocal_variance_moment, SemivalueSpec, WeightVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorId {
    Permutation,
    SamplingLift,
    Wsl,
    WeightedShap,
    ShapIq,
    Msr,
    Arm,
    Gels,
    Complement,
    GroupTesting,
    Kernelshap,
    UnbiasedKernelshap,
    Ame,
    OfaA,
    OfaS,
}

/// Which semi-values an estimator is defined for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    ShapleyOnly,
    WeightedBanzhafOnly,
    /// Semi-values with `int 1/(w(1-w)) dmu < inf`.
    FiniteReciprocalVariance,
    Any,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 15] = [
        EstimatorId::Permutation,
        EstimatorId::SamplingLift,
        EstimatorId::Wsl,
        EstimatorId::WeightedShap,
        EstimatorId::ShapIq,
        EstimatorId::Msr,
        EstimatorId::Arm,
        EstimatorId::Gels,
        EstimatorId::Complement,
        EstimatorId::GroupTesting,
        EstimatorId::Kernelshap,
        EstimatorId::UnbiasedKernelshap,
        EstimatorId::Ame,
        EstimatorId::OfaA,
        EstimatorId::OfaS,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Permutation => "permutation",
            EstimatorId::SamplingLift => "sampling_lift",
            EstimatorId::Wsl => "wsl",
            EstimatorId::WeightedShap => "weighted_shap",
            EstimatorId::ShapIq => "shap_iq",
            EstimatorId::Msr => "msr",
            EstimatorId::Arm => "arm",
            EstimatorId::Gels => "gels",
            EstimatorId::Complement => "complement",
            EstimatorId::GroupTesting => "group_testing",
            EstimatorId::Kernelshap => "kernelshap",
            EstimatorId::UnbiasedKernelshap => "unbiased_kernelshap",
            EstimatorId::Ame => "ame",
            EstimatorId::OfaA => "ofa_a",
            EstimatorId::OfaS => "ofa_s",
        }
    }

    pub fn scope(self) -> Scope {
        use EstimatorId::*;
        match self {
            Permutation | Complement | GroupTesting | Kernelshap | UnbiasedKernelshap => {
                Scope::ShapleyOnly
            }
            Msr => Scope::WeightedBanzhafOnly,
            Ame => Scope::FiniteReciprocalVariance,
            SamplingLift | Wsl | WeightedShap | ShapIq | Arm | Gels | OfaA | OfaS => Scope::Any,
        }
    }

    /// Whether every sampled subset updates all `n` estimates.
    pub fn reuses_every_sample(self) -> bool {
        use EstimatorId::*;
        matches!(
            self,
            Msr | ShapIq | Kernelshap | UnbiasedKernelshap | Complement | Ame | OfaA | OfaS
        )
    }

    pub fn supports(self, spec: &SemivalueSpec) -> bool {
        match self.scope() {
            Scope::ShapleyOnly => spec.is_shapley(),
            Scope::WeightedBanzhafOnly => matches!(spec, SemivalueSpec::WeightedBanzhaf { .. }),
            Scope::FiniteReciprocalVariance => {
                matches!(reciprocal_variance_moment(spec), Ok(Some(_)))
            }
            Scope::Any => true,
        }
    }

    /// `Ok` when `spec` is in scope, the scope error otherwise.
    pub fn check_scope(self, spec: &SemivalueSpec) -> Result<()> {
        if self.supports(spec) {
            Ok(())
        } else {
            Err(Error::OutOfScope {
                estimator: self.to_string(),
                semivalue: spec.to_string(),
            })
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownEstimator(s.to_owned()))
    }
}

impl TryFrom<String> for EstimatorId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorId> for String {
    fn from(id: EstimatorId) -> String {
        id.as_str().to_owned()
    }
}

/// `max_k p_k / q_k` for two weight vectors over the same sizes, i.e. the
/// worst-case importance weight when sampling from `q` to target `p`.
pub fn max_weight_ratio(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut worst: f64 = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *a > 0.0 {
            if *b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            worst = worst.max(a / b);
        }
    }
    Ok(worst)
}

/// Largest reweighting factor `p_k / p^Shap_k = n m_k` applied by the
/// weighted sampling lift.
pub fn wsl_amplification(w: &WeightVector) -> f64 {
    w.n() as f64 * w.m().iter().fold(0.0_f64, |a, b| a.max(*b))
}

/// Estimator steppers expose their diagnostics once the run ends.
pub(crate) trait Baseline: Stepper<Snapshot = Vec<f64>> {
    fn meta(&self, _out: &mut BTreeMap<String, String>) {}
}

/// Counts sampled subsets and the estimate updates they caused.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Reuse {
    pub samples: u64,
    pub updates: u64,
}

impl Reuse {
    pub fn record(&mut self, updates: usize) {
        self.samples += 1;
        self.updates += updates as u64;
    }

    pub fn write(&self, out: &mut BTreeMap<String, String>) {
        out.insert("samples".into(), self.samples.to_string());
        out.insert("updates".into(), self.updates.to_string());
        if self.samples > 0 {
            out.insert(
                "updates_per_sample".into(),
                format!("{}", self.updates as f64 / self.samples as f64),
            );
        }
    }
}

/// Runs estimator `id` on `game` for `spec`.
pub fn run_estimator(
    id: EstimatorId,
    game: &dyn Game,
    spec: &SemivalueSpec,
    budget_per_player: u64,
    checkpoints: usize,
    seed: u64,
) -> Result<EstimateTrace> {
    id.check_scope(spec)?;
    let n = game.n();
    let w = make_weights(spec, n)?;
    match id {
        EstimatorId::OfaA | EstimatorId::OfaS => {
            let cfg = OfaConfig {
                budget_per_player,
                checkpoints,
                seed,
                allocation: AllocationMode::Stochastic,
            };
            run_ofa_estimator(id, game, spec, &cfg)
        }
        EstimatorId::Permutation => drive_baseline(
            id,
            marginal::Permutation::new(n),
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::SamplingLift => drive_baseline(
            id,
            marginal::SamplingLift::new(&w)?,
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::Wsl => drive_baseline(
            id,
            marginal::Wsl::new(&w),
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::WeightedShap => drive_baseline(
            id,
            marginal::WeightedShap::new(&w),
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::Msr => {
            let SemivalueSpec::WeightedBanzhaf { a } = *spec else {
                unreachable!("scope checked")
            };
            drive_baseline(
                id,
                marginal::Msr::new(n, a),
                game,
                w,
                budget_per_player,
                checkpoints,
                seed,
            )
        }
        EstimatorId::Arm => drive_baseline(
            id,
            marginal::Arm::new(&w)?,
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::Complement => drive_baseline(
            id,
            marginal::Complement::new(n),
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::ShapIq => drive_baseline(
            id,
            kernel::ShapIq::new(&w)?,
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::UnbiasedKernelshap => drive_baseline(
            id,
            kernel::UnbiasedKernelshap::new(n)?,
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::GroupTesting => drive_baseline(
            id,
            kernel::GroupTesting::new(n)?,
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::Gels => drive_baseline(
            id,
            kernel::Gels::new(&w)?,
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::Kernelshap => drive_baseline(
            id,
            regression::Kernelshap::new(n)?,
            game,
            w,
            budget_per_player,
            checkpoints,
            seed,
        ),
        EstimatorId::Ame => {
            let c = reciprocal_variance_moment(spec)?.expect("scope checked");
            drive_baseline(
                id,
                regression::Ame::new(n, spec, c)?,
                game,
                w,
                budget_per_player,
                checkpoints,
                seed,
            )
        }
    }
}

/// Runs `ofa_a` or `ofa_s` with an explicit configuration (for example the
/// stratified allocation). Games with fewer than 5 players are enumerated.
pub fn run_ofa_estimator(
    id: EstimatorId,
    game: &dyn Game,
    spec: &SemivalueSpec,
    cfg: &OfaConfig,
) -> Result<EstimateTrace> {
    id.check_scope(spec)?;
    let n = game.n();
    let w = make_weights(spec, n)?;
    let q = match (id, n >= 5) {
        (EstimatorId::OfaA | EstimatorId::OfaS, false) => None,
        (EstimatorId::OfaA, true) => Some(q_ofa_a(n)?),
        (EstimatorId::OfaS, true) => Some(q_ofa_s(&w)?),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{id} is not an OFA estimator"
            )))
        }
    };
    let mut run =
        crate::ofa::run_ofa_as(game, std::slice::from_ref(&w), q.as_ref(), cfg, Some(id))?;
    Ok(run.traces.remove(0))
}

fn drive_baseline<B: Baseline>(
    id: EstimatorId,
    mut stepper: B,
    game: &dyn Game,
    w: WeightVector,
    budget_per_player: u64,
    checkpoints: usize,
    seed: u64,
) -> Result<EstimateTrace> {
    let n = game.n();
    let budget = budget_per_player * n as u64;
    let first = stepper.next_cost();
    if budget < first {
        return Err(Error::BudgetTooSmall {
            budget,
            required: first,
        });
    }
    let ev = Evaluator::new(game);
    let mut rng = rng_for(seed, stream::BASELINE ^ ((id as u64) << 32));
    let snaps = drive(&mut stepper, &ev, &mut rng, budget, checkpoints)?;
    let mut meta = BTreeMap::new();
    stepper.meta(&mut meta);
    meta.insert("evaluations".into(), ev.count().to_string());
    if id == EstimatorId::Wsl {
        meta.insert(
            "max_weight_ratio".into(),
            format!("{}", wsl_amplification(&w)),
        );
    }
    Ok(EstimateTrace {
        estimator: id,
        semivalue: w.spec().clone(),
        seed,
        n,
        budget_per_player,
        checkpoints: snaps
            .into_iter()
            .map(|(mark, evals_total, estimate)| Checkpoint {
                mark,
                evals_total,
                estimate,
            })
            .collect(),
        meta,
    })
}

/// Running per-player means.
#[derive(Clone, Debug)]
pub(crate) struct Means {
    sum: Vec<f64>,
    cnt: Vec<u64>,
}

impl Means {
    pub fn new(len: usize) -> Self {
        Means {
            sum: vec![0.0; len],
            cnt: vec![0; len],
        }
    }

    #[inline]
    pub fn add(&mut self, k: usize, v: f64) {
        self.sum[k] += v;
        self.cnt[k] += 1;
    }

    /// Mean of slot `k`, zero when empty.
    #[inline]
    pub fn mean(&self, k: usize) -> f64 {
        if self.cnt[k] == 0 {
            0.0
        } else {
            self.sum[k] / self.cnt[k] as f64
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.sum.len()).map(|k| self.mean(k)).collect()
    }
}

/// `H_k = sum_{j=1}^k 1/j`.
pub(crate) fn harmonic(k: usize) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}
