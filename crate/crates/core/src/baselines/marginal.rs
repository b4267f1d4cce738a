//! Estimators built from marginal contributions or in/out means.

use std::collections::BTreeMap;

use rand::Rng;

use super::{Baseline, Means, Reuse};
use crate::coalition::Coalition;
use crate::error::Result;
use crate::games::Evaluator;
use crate::sampling::{bernoulli_subset, Categorical, RunRng, SubsetSampler};
use crate::trace::Stepper;
use crate::weights::WeightVector;

/// Uniform `k`-subset of `[n] \ {i}` drawn with a sampler over `n - 1` slots.
fn subset_without(sampler: &mut SubsetSampler, rng: &mut RunRng, k: usize, i: usize) -> Coalition {
    let mut c = Coalition::empty();
    for &j in sampler.sample_indices(rng, k) {
        c.insert(if j >= i { j + 1 } else { j });
    }
    c
}

/// Shapley marginals along uniformly random permutations; `n + 1`
/// evaluations per permutation.
pub(crate) struct Permutation {
    n: usize,
    sampler: SubsetSampler,
    sum: Vec<f64>,
    perms: u64,
    reuse: Reuse,
}

impl Permutation {
    pub fn new(n: usize) -> Self {
        Permutation {
            n,
            sampler: SubsetSampler::new(n),
            sum: vec![0.0; n],
            perms: 0,
            reuse: Reuse::default(),
        }
    }
}

impl Stepper for Permutation {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        self.n as u64 + 1
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let mut c = Coalition::empty();
        let mut prev = ev.evaluate(&c)?;
        for &i in self.sampler.permutation(rng) {
            c.insert(i);
            let v = ev.evaluate(&c)?;
            self.sum[i] += v - prev;
            prev = v;
        }
        self.perms += 1;
        self.reuse.record(self.n);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        let t = self.perms.max(1) as f64;
        Ok(self.sum.iter().map(|s| s / t).collect())
    }
}

impl Baseline for Permutation {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        out.insert("permutations".into(), self.perms.to_string());
        self.reuse.write(out);
    }
}

/// Per player: size `s ~ m`, then `S ⊆ [n]\i` uniform with `|S| = s - 1`;
/// players are served round-robin, two evaluations per sample.
pub(crate) struct SamplingLift {
    n: usize,
    sizes: Categorical,
    sampler: SubsetSampler,
    means: Means,
    next_player: usize,
    reuse: Reuse,
}

impl SamplingLift {
    pub fn new(w: &WeightVector) -> Result<Self> {
        let n = w.n();
        Ok(SamplingLift {
            n,
            sizes: Categorical::new(w.m(), 1)?,
            sampler: SubsetSampler::new(n - 1),
            means: Means::new(n),
            next_player: 0,
            reuse: Reuse::default(),
        })
    }
}

impl Stepper for SamplingLift {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        2
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let i = self.next_player;
        self.next_player = (i + 1) % self.n;
        let s = self.sizes.sample(rng);
        let c = subset_without(&mut self.sampler, rng, s - 1, i);
        let v = ev.evaluate(&c.with(i))? - ev.evaluate(&c)?;
        self.means.add(i, v);
        self.reuse.record(1);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        Ok(self.means.means())
    }
}

impl Baseline for SamplingLift {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}

/// Shapley-distributed marginals (`w ~ U(0,1)`, then Bernoulli(w)
/// membership) reweighted by `p_{s+1} / p^Shap_{s+1} = n m_{s+1}`.
pub(crate) struct Wsl {
    n: usize,
    ratio: Vec<f64>,
    means: Means,
    next_player: usize,
    reuse: Reuse,
}

impl Wsl {
    pub fn new(w: &WeightVector) -> Self {
        let n = w.n();
        // ratio[s] for |S| = s, s = 0..n-1.
        let ratio = (0..n).map(|s| n as f64 * w.m_at(s + 1)).collect();
        Wsl {
            n,
            ratio,
            means: Means::new(n),
            next_player: 0,
            reuse: Reuse::default(),
        }
    }
}

impl Stepper for Wsl {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        2
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let i = self.next_player;
        self.next_player = (i + 1) % self.n;
        let w: f64 = rng.random();
        let c = bernoulli_subset(rng, (0..self.n).filter(|j| *j != i), w);
        let v = ev.evaluate(&c.with(i))? - ev.evaluate(&c)?;
        self.means.add(i, self.ratio[c.len()] * v);
        self.reuse.record(1);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        Ok(self.means.means())
    }
}

impl Baseline for Wsl {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}

/// Per player: a random permutation of `[n]\i` gives one marginal at every
/// size `0..n-1`, combined as `sum_k m_{k+1} * marginal_k`. The chain sets
/// `S^k` and `S^k ∪ i` are pairwise distinct, so a permutation costs `2n`.
pub(crate) struct WeightedShap {
    n: usize,
    m: Vec<f64>,
    sampler: SubsetSampler,
    means: Means,
    next_player: usize,
    reuse: Reuse,
}

impl WeightedShap {
    pub fn new(w: &WeightVector) -> Self {
        let n = w.n();
        WeightedShap {
            n,
            m: w.m().to_vec(),
            sampler: SubsetSampler::new(n - 1),
            means: Means::new(n),
            next_player: 0,
            reuse: Reuse::default(),
        }
    }
}

impl Stepper for WeightedShap {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        2 * self.n as u64
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let i = self.next_player;
        self.next_player = (i + 1) % self.n;
        let mut c = Coalition::empty();
        let mut total = self.m[0] * (ev.evaluate(&c.with(i))? - ev.evaluate(&c)?);
        for (k, &j) in self.sampler.permutation(rng).iter().enumerate() {
            c.insert(if j >= i { j + 1 } else { j });
            total += self.m[k + 1] * (ev.evaluate(&c.with(i))? - ev.evaluate(&c)?);
        }
        self.means.add(i, total);
        self.reuse.record(1);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        Ok(self.means.means())
    }
}

impl Baseline for WeightedShap {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}

/// Weighted Banzhaf by maximum sample reuse: each player joins with
/// probability `a`; estimate is the in-mean minus the out-mean.
pub(crate) struct Msr {
    n: usize,
    a: f64,
    inside: Means,
    outside: Means,
    reuse: Reuse,
}

impl Msr {
    pub fn new(n: usize, a: f64) -> Self {
        Msr {
            n,
            a,
            inside: Means::new(n),
            outside: Means::new(n),
            reuse: Reuse::default(),
        }
    }
}

impl Stepper for Msr {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        1
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let c = bernoulli_subset(rng, 0..self.n, self.a);
        let v = ev.evaluate(&c)?;
        for i in 0..self.n {
            if c.contains(i) {
                self.inside.add(i, v);
            } else {
                self.outside.add(i, v);
            }
        }
        self.reuse.record(self.n);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        Ok((0..self.n)
            .map(|i| self.inside.mean(i) - self.outside.mean(i))
            .collect())
    }
}

impl Baseline for Msr {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}

/// Alternates draws from `P+(S) ∝ p_s` (nonempty `S`) and `P-(S) ∝ p_{s+1}`
/// (`S ≠ [n]`); estimate is the `P+` mean over samples containing `i`
/// minus the `P-` mean over samples missing `i`.
pub(crate) struct Arm {
    n: usize,
    plus_sizes: Categorical,
    minus_sizes: Categorical,
    sampler: SubsetSampler,
    plus: Means,
    minus: Means,
    draw_plus: bool,
    reuse: Reuse,
}

impl Arm {
    pub fn new(w: &WeightVector) -> Result<Self> {
        let n = w.n();
        let nf = n as f64;
        // C(n,s) p_s = m_s n / s for s = 1..n and C(n,s) p_{s+1} = m_{s+1} n / (n-s) for s = 0..n-1.
        let plus: Vec<f64> = (1..=n).map(|s| w.m_at(s) * nf / s as f64).collect();
        let minus: Vec<f64> = (0..n)
            .map(|s| w.m_at(s + 1) * nf / (n - s) as f64)
            .collect();
        Ok(Arm {
            n,
            plus_sizes: Categorical::new(&plus, 1)?,
            minus_sizes: Categorical::new(&minus, 0)?,
            sampler: SubsetSampler::new(n),
            plus: Means::new(n),
            minus: Means::new(n),
            draw_plus: true,
            reuse: Reuse::default(),
        })
    }
}

impl Stepper for Arm {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        1
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let plus = self.draw_plus;
        self.draw_plus = !plus;
        let s = if plus {
            self.plus_sizes.sample(rng)
        } else {
            self.minus_sizes.sample(rng)
        };
        let c = self.sampler.sample(rng, s);
        let v = ev.evaluate(&c)?;
        let mut updates = 0;
        for i in 0..self.n {
            match (plus, c.contains(i)) {
                (true, true) => self.plus.add(i, v),
                (false, false) => self.minus.add(i, v),
                _ => continue,
            }
            updates += 1;
        }
        self.reuse.record(updates);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        Ok((0..self.n)
            .map(|i| self.plus.mean(i) - self.minus.mean(i))
            .collect())
    }
}

impl Baseline for Arm {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}

/// Shapley via complementary contributions: `s` uniform in `1..n`, `S`
/// uniform of size `s`, `v = U(S) - U([n]\S)`. Members credit `v` to their
/// size-`s` bucket, non-members credit `-v` to their size-`(n-s)` bucket.
pub(crate) struct Complement {
    n: usize,
    sampler: SubsetSampler,
    buckets: Means,
    reuse: Reuse,
}

impl Complement {
    pub fn new(n: usize) -> Self {
        Complement {
            n,
            sampler: SubsetSampler::new(n),
            buckets: Means::new(n * (n + 1)),
            reuse: Reuse::default(),
        }
    }
}

impl Stepper for Complement {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        2
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let n = self.n;
        let s = rng.random_range(1..=n);
        let c = self.sampler.sample(rng, s);
        let v = ev.evaluate(&c)? - ev.evaluate(&c.complement(n))?;
        for i in 0..n {
            if c.contains(i) {
                self.buckets.add(i * (n + 1) + s, v);
            } else {
                self.buckets.add(i * (n + 1) + n - s, -v);
            }
        }
        self.reuse.record(n);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        let n = self.n;
        Ok((0..n)
            .map(|i| {
                (1..=n)
                    .map(|s| self.buckets.mean(i * (n + 1) + s))
                    .sum::<f64>()
                    / n as f64
            })
            .collect())
    }
}

impl Baseline for Complement {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}
