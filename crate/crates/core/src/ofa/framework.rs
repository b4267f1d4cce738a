use std::collections::BTreeMap;

use super::{q_ofa_a, QSource, SamplingVector};
use crate::baselines::EstimatorId;
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::games::{Evaluator, Game};
use crate::sampling::{rng_for, stream, Categorical, RunRng, SubsetSampler};
use crate::trace::{drive, Checkpoint, EstimateTrace, Stepper};
use crate::weights::WeightVector;

/// Count sentinel marking a bucket filled exactly rather than by sampling.
const EXACT: u64 = u64::MAX;

/// How phase-2 samples are spread over sizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AllocationMode {
    /// Size drawn from `q` independently per sample.
    #[default]
    Stochastic,
    /// `T * q` samples per size fixed up front (largest remainder), interleaved.
    Stratified,
}

impl std::fmt::Display for AllocationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AllocationMode::Stochastic => "stochastic",
            AllocationMode::Stratified => "stratified",
        })
    }
}

impl std::str::FromStr for AllocationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(AllocationMode::Stochastic),
            "stratified" => Ok(AllocationMode::Stratified),
            _ => Err(Error::Parse(format!(
                "unknown allocation `{s}` (expected stochastic or stratified)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OfaConfig {
    pub budget_per_player: u64,
    pub checkpoints: usize,
    pub seed: u64,
    pub allocation: AllocationMode,
}

/// A bucket as seen from outside: its mean and how many samples fed it
/// (`None` for exactly computed buckets).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bucket {
    pub mean: f64,
    pub count: Option<u64>,
}

/// Running sums behind `phi^+_{i,s}` (`s = 1..=n`) and `phi^-_{i,s}`
/// (`s = 0..n`).
#[derive(Clone, Debug, PartialEq)]
pub struct BucketEstimates {
    n: usize,
    plus_sum: Vec<f64>,
    plus_cnt: Vec<u64>,
    minus_sum: Vec<f64>,
    minus_cnt: Vec<u64>,
    samples: u64,
}

impl BucketEstimates {
    pub fn new(n: usize) -> Self {
        BucketEstimates {
            n,
            plus_sum: vec![0.0; n * (n + 1)],
            plus_cnt: vec![0; n * (n + 1)],
            minus_sum: vec![0.0; n * n],
            minus_cnt: vec![0; n * n],
            samples: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sampled subsets absorbed so far.
    pub fn samples(&self) -> u64 {
        self.samples
    }

    fn get(sum: &[f64], cnt: &[u64], k: usize) -> Bucket {
        match cnt[k] {
            EXACT => Bucket {
                mean: sum[k],
                count: None,
            },
            0 => Bucket {
                mean: 0.0,
                count: Some(0),
            },
            c => Bucket {
                mean: sum[k] / c as f64,
                count: Some(c),
            },
        }
    }

    /// `phi^+_{i,s}` for `1 <= s <= n`.
    pub fn plus(&self, i: usize, s: usize) -> Bucket {
        Self::get(&self.plus_sum, &self.plus_cnt, i * (self.n + 1) + s)
    }

    /// `phi^-_{i,s}` for `0 <= s < n`.
    pub fn minus(&self, i: usize, s: usize) -> Bucket {
        Self::get(&self.minus_sum, &self.minus_cnt, i * self.n + s)
    }

    #[inline]
    fn plus_mean(&self, k: usize) -> f64 {
        match self.plus_cnt[k] {
            EXACT => self.plus_sum[k],
            0 => 0.0,
            c => self.plus_sum[k] / c as f64,
        }
    }

    #[inline]
    fn minus_mean(&self, k: usize) -> f64 {
        match self.minus_cnt[k] {
            EXACT => self.minus_sum[k],
            0 => 0.0,
            c => self.minus_sum[k] / c as f64,
        }
    }

    fn set_plus_exact(&mut self, i: usize, s: usize, v: f64) {
        let k = i * (self.n + 1) + s;
        self.plus_sum[k] = v;
        self.plus_cnt[k] = EXACT;
    }

    fn set_minus_exact(&mut self, i: usize, s: usize, v: f64) {
        let k = i * self.n + s;
        self.minus_sum[k] = v;
        self.minus_cnt[k] = EXACT;
    }

    /// Adds one sampled utility `v = U(S)` with `|S| = s` to every player:
    /// members feed `phi^+_{i,s}`, the rest feed `phi^-_{i,s}`.
    fn absorb(&mut self, member: &[bool], s: usize, v: f64) {
        let n = self.n;
        for (i, inside) in member.iter().enumerate() {
            if *inside {
                let k = i * (n + 1) + s;
                self.plus_sum[k] += v;
                self.plus_cnt[k] += 1;
            } else {
                let k = i * n + s;
                self.minus_sum[k] += v;
                self.minus_cnt[k] += 1;
            }
        }
        self.samples += 1;
    }

    /// Count-weighted merge of another run's buckets over the same game.
    /// Exact buckets must be exact on both sides and are kept as is.
    pub fn merge(&mut self, other: &BucketEstimates) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let pairs = [
            (
                &mut self.plus_sum,
                &mut self.plus_cnt,
                &other.plus_sum,
                &other.plus_cnt,
            ),
            (
                &mut self.minus_sum,
                &mut self.minus_cnt,
                &other.minus_sum,
                &other.minus_cnt,
            ),
        ];
        for (sum, cnt, osum, ocnt) in pairs {
            for k in 0..sum.len() {
                match (cnt[k] == EXACT, ocnt[k] == EXACT) {
                    (true, true) => {}
                    (false, false) => {
                        sum[k] += osum[k];
                        cnt[k] += ocnt[k];
                    }
                    _ => {
                        return Err(Error::InvalidArgument(
                            "cannot merge exact and sampled buckets".into(),
                        ))
                    }
                }
            }
        }
        self.samples += other.samples;
        Ok(())
    }
}

/// `phi_i = sum_{s=1}^n m_s (phi^+_{i,s} - phi^-_{i,s-1})`; reads stored
/// means only, so it costs no utility evaluations.
pub fn aggregate(b: &BucketEstimates, w: &WeightVector) -> Result<Vec<f64>> {
    let n = b.n;
    if w.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.n(),
        });
    }
    let m = w.m();
    Ok((0..n)
        .map(|i| {
            (1..=n)
                .map(|s| m[s - 1] * (b.plus_mean(i * (n + 1) + s) - b.minus_mean(i * n + s - 1)))
                .sum()
        })
        .collect())
}

/// Output of a run aggregated under several weight vectors at once.
#[derive(Clone, Debug)]
pub struct OfaRun {
    /// One trace per weight vector, in input order.
    pub traces: Vec<EstimateTrace>,
    pub buckets: BucketEstimates,
    /// Utility evaluations consumed by the whole run.
    pub evaluations: u64,
}

enum Sizes {
    Stochastic(Categorical),
    /// Smooth weighted round-robin over fixed per-size quotas.
    Stratified {
        quota: Vec<u64>,
        credit: Vec<i64>,
        left: u64,
        total: i64,
    },
}

impl Sizes {
    fn stratified(q: &SamplingVector, t: u64) -> Self {
        let quota = largest_remainder(q.as_slice(), t);
        Sizes::Stratified {
            credit: vec![0; quota.len()],
            quota,
            left: t,
            total: t as i64,
        }
    }

    fn next<R: rand::Rng>(&mut self, rng: &mut R) -> usize {
        match self {
            Sizes::Stochastic(cat) => cat.sample(rng),
            Sizes::Stratified {
                quota,
                credit,
                left,
                total,
            } => {
                let mut best = 0;
                for j in 0..quota.len() {
                    credit[j] += quota[j] as i64;
                    if credit[j] > credit[best] {
                        best = j;
                    }
                }
                credit[best] -= *total;
                *left -= 1;
                best + 2
            }
        }
    }

    fn exhausted(&self) -> bool {
        matches!(self, Sizes::Stratified { left: 0, .. })
    }
}

/// Splits `t` into integer parts proportional to `q`; each part is within 1
/// of `t * q_j`.
pub(crate) fn largest_remainder(q: &[f64], t: u64) -> Vec<u64> {
    let ideal: Vec<f64> = q.iter().map(|x| x * t as f64).collect();
    let mut out: Vec<u64> = ideal.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|a, b| {
        (ideal[*b] - ideal[*b].floor())
            .total_cmp(&(ideal[*a] - ideal[*a].floor()))
            .then(a.cmp(b))
    });
    for j in order.into_iter().take(t.saturating_sub(assigned) as usize) {
        out[j] += 1;
    }
    out
}

struct OfaStepper<'w> {
    n: usize,
    weights: &'w [WeightVector],
    buckets: BucketEstimates,
    exact_done: bool,
    sizes: Option<Sizes>,
    sampler: SubsetSampler,
    member: Vec<bool>,
}

impl OfaStepper<'_> {
    fn exact_cost(n: usize) -> u64 {
        if n <= 4 {
            1 << n
        } else {
            2 * n as u64 + 2
        }
    }

    /// Every bucket by full enumeration; used for `n <= 4`.
    fn enumerate(&mut self, ev: &Evaluator<'_>) -> Result<()> {
        let n = self.n;
        let mut plus = vec![(0.0, 0u64); n * (n + 1)];
        let mut minus = vec![(0.0, 0u64); n * n];
        for mask in 0..1u64 << n {
            let v = ev.evaluate(&Coalition::from_bits(mask))?;
            let s = mask.count_ones() as usize;
            for i in 0..n {
                let slot = if mask >> i & 1 == 1 {
                    &mut plus[i * (n + 1) + s]
                } else {
                    &mut minus[i * n + s]
                };
                slot.0 += v;
                slot.1 += 1;
            }
        }
        for i in 0..n {
            for s in 1..=n {
                let (sum, c) = plus[i * (n + 1) + s];
                self.buckets.set_plus_exact(i, s, sum / c as f64);
            }
            for s in 0..n {
                let (sum, c) = minus[i * n + s];
                self.buckets.set_minus_exact(i, s, sum / c as f64);
            }
        }
        Ok(())
    }

    /// The `2n + 2` boundary evaluations and the six exact bucket families.
    fn boundary(&mut self, ev: &Evaluator<'_>) -> Result<()> {
        let n = self.n;
        let full = Coalition::full(n);
        let u_empty = ev.evaluate(&Coalition::empty())?;
        let u_full = ev.evaluate(&full)?;
        let single: Vec<f64> = (0..n)
            .map(|i| ev.evaluate(&Coalition::from_players([i])))
            .collect::<Result<_>>()?;
        let drop: Vec<f64> = (0..n)
            .map(|i| ev.evaluate(&full.without(i)))
            .collect::<Result<_>>()?;
        let (sum_single, sum_drop): (f64, f64) = (single.iter().sum(), drop.iter().sum());
        let others = (n - 1) as f64;
        for i in 0..n {
            self.buckets.set_plus_exact(i, 1, single[i]);
            self.buckets.set_plus_exact(i, n, u_full);
            self.buckets
                .set_plus_exact(i, n - 1, (sum_drop - drop[i]) / others);
            self.buckets.set_minus_exact(i, 0, u_empty);
            self.buckets
                .set_minus_exact(i, 1, (sum_single - single[i]) / others);
            self.buckets.set_minus_exact(i, n - 1, drop[i]);
        }
        Ok(())
    }
}

impl Stepper for OfaStepper<'_> {
    type Snapshot = Vec<Vec<f64>>;

    fn next_cost(&self) -> u64 {
        if !self.exact_done {
            return Self::exact_cost(self.n);
        }
        match &self.sizes {
            Some(s) if !s.exhausted() => 1,
            _ => 0,
        }
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        if !self.exact_done {
            self.exact_done = true;
            return if self.n <= 4 {
                self.enumerate(ev)
            } else {
                self.boundary(ev)
            };
        }
        let sizes = self
            .sizes
            .as_mut()
            .expect("sampling phase needs a size schedule");
        let s = sizes.next(rng);
        let idx = self.sampler.sample_indices(rng, s);
        let mut c = Coalition::empty();
        for &i in idx {
            c.insert(i);
            self.member[i] = true;
        }
        let v = ev.evaluate(&c)?;
        self.buckets.absorb(&self.member, s, v);
        for &i in self.sampler.current(s) {
            self.member[i] = false;
        }
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<Vec<f64>>> {
        self.weights
            .iter()
            .map(|w| aggregate(&self.buckets, w))
            .collect()
    }
}

/// Runs the framework once and aggregates the same buckets under every
/// weight vector in `weights`. `q` defaults to the average-case vector and
/// is ignored for `n <= 4`.
pub fn run_ofa_shared(
    game: &dyn Game,
    weights: &[WeightVector],
    q: Option<&SamplingVector>,
    cfg: &OfaConfig,
) -> Result<OfaRun> {
    run_ofa_as(game, weights, q, cfg, None)
}

/// Single-weight convenience wrapper around [`run_ofa_shared`].
pub fn run_ofa(
    game: &dyn Game,
    w: &WeightVector,
    q: Option<&SamplingVector>,
    cfg: &OfaConfig,
) -> Result<EstimateTrace> {
    let mut run = run_ofa_shared(game, std::slice::from_ref(w), q, cfg)?;
    Ok(run.traces.remove(0))
}

pub(crate) fn run_ofa_as(
    game: &dyn Game,
    weights: &[WeightVector],
    q: Option<&SamplingVector>,
    cfg: &OfaConfig,
    id: Option<EstimatorId>,
) -> Result<OfaRun> {
    let n = game.n();
    if n == 0 {
        return Err(Error::InvalidArgument("game has no players".into()));
    }
    if let Some(w) = weights.iter().find(|w| w.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.n(),
        });
    }
    let budget = cfg.budget_per_player * n as u64;
    let floor = OfaStepper::exact_cost(n);
    if budget < floor {
        return Err(Error::BudgetTooSmall {
            budget,
            required: floor,
        });
    }

    let default_q;
    let q = if n >= 5 {
        let q = match q {
            Some(q) => q,
            None => {
                default_q = q_ofa_a(n)?;
                &default_q
            }
        };
        if q.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n - 3,
                got: q.as_slice().len(),
            });
        }
        Some(q)
    } else {
        None
    };
    let label = match cfg.allocation {
        AllocationMode::Stochastic => stream::OFA_STOCHASTIC,
        AllocationMode::Stratified => stream::OFA_STRATIFIED,
    };
    let sizes = match q {
        None => None,
        Some(q) => Some(match cfg.allocation {
            AllocationMode::Stochastic => Sizes::Stochastic(Categorical::new(q.as_slice(), 2)?),
            AllocationMode::Stratified => Sizes::stratified(q, budget - floor),
        }),
    };

    let ev = Evaluator::new(game);
    let mut rng = rng_for(cfg.seed, label);
    let mut stepper = OfaStepper {
        n,
        weights,
        buckets: BucketEstimates::new(n),
        exact_done: false,
        sizes,
        sampler: SubsetSampler::new(n),
        member: vec![false; n],
    };
    let snaps = drive(&mut stepper, &ev, &mut rng, budget, cfg.checkpoints)?;

    let source = q.map(|q| q.source());
    let id = id.unwrap_or(match source {
        Some(QSource::OfaS) => EstimatorId::OfaS,
        _ => EstimatorId::OfaA,
    });
    let mut meta = BTreeMap::new();
    meta.insert(
        "mode".to_owned(),
        if q.is_some() {
            cfg.allocation.to_string()
        } else {
            "exact".to_owned()
        },
    );
    meta.insert(
        "q".to_owned(),
        source.map_or("none".to_owned(), |s| s.to_string()),
    );
    meta.insert("samples".to_owned(), stepper.buckets.samples.to_string());
    meta.insert("updates_per_sample".to_owned(), n.to_string());
    meta.insert("evaluations".to_owned(), ev.count().to_string());

    let traces = weights
        .iter()
        .enumerate()
        .map(|(k, w)| EstimateTrace {
            estimator: id,
            semivalue: w.spec().clone(),
            seed: cfg.seed,
            n,
            budget_per_player: cfg.budget_per_player,
            checkpoints: snaps
                .iter()
                .map(|(mark, used, est)| Checkpoint {
                    mark: *mark,
                    evals_total: *used,
                    estimate: est[k].clone(),
                })
                .collect(),
            meta: meta.clone(),
        })
        .collect();
    Ok(OfaRun {
        traces,
        evaluations: ev.count(),
        buckets: stepper.buckets,
    })
}
