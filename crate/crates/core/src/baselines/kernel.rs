//! Importance-sampling estimators over the Shapley kernel
//! `P(s) ∝ 1 / (s (n - s))` and its relatives.

use std::collections::BTreeMap;

use super::{harmonic, Baseline, Means, Reuse};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::games::Evaluator;
use crate::sampling::{Categorical, RunRng, SubsetSampler};
use crate::trace::Stepper;
use crate::weights::WeightVector;

/// Size sampler for `s = 1..k-1` with `P(s) ∝ 1 / (s (k - s))`.
fn kernel_sizes(k: usize) -> Result<Categorical> {
    if k < 2 {
        return Err(Error::InvalidArgument(
            "the Shapley kernel needs at least 2 players".into(),
        ));
    }
    let w: Vec<f64> = (1..k).map(|s| 1.0 / (s * (k - s)) as f64).collect();
    Categorical::new(&w, 1)
}

/// `U(∅)` and `U([n])`, evaluated once before any sampling.
#[derive(Clone, Copy, Debug)]
struct Ends {
    empty: f64,
    full: f64,
}

fn ends(ev: &Evaluator<'_>) -> Result<Ends> {
    let n = ev.n();
    Ok(Ends {
        empty: ev.evaluate(&Coalition::empty())?,
        full: ev.evaluate(&Coalition::full(n))?,
    })
}

/// `p_n (U([n]) - U(∅)) + (2 H_{n-1} / T) sum_j (U(S_j) - U(∅)) c_i(S_j)` with
/// `c_i(S) = (n - s) m_s` for `i ∈ S` and `-s m_{s+1}` otherwise.
pub(crate) struct ShapIq {
    n: usize,
    m: Vec<f64>,
    p_n: f64,
    scale: f64,
    sizes: Categorical,
    sampler: SubsetSampler,
    ends: Option<Ends>,
    acc: Vec<f64>,
    reuse: Reuse,
}

impl ShapIq {
    pub fn new(w: &WeightVector) -> Result<Self> {
        let n = w.n();
        Ok(ShapIq {
            n,
            m: (0..=n + 1).map(|s| w.m_at(s)).collect(),
            p_n: w.p_at(n),
            scale: 2.0 * harmonic(n - 1),
            sizes: kernel_sizes(n)?,
            sampler: SubsetSampler::new(n),
            ends: None,
            acc: vec![0.0; n],
            reuse: Reuse::default(),
        })
    }
}

impl Stepper for ShapIq {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        if self.ends.is_none() {
            2
        } else {
            1
        }
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let Some(e) = self.ends else {
            self.ends = Some(ends(ev)?);
            return Ok(());
        };
        let n = self.n;
        let s = self.sizes.sample(rng);
        let c = self.sampler.sample(rng, s);
        let v = ev.evaluate(&c)? - e.empty;
        let (inside, outside) = ((n - s) as f64 * self.m[s], -(s as f64) * self.m[s + 1]);
        for (i, acc) in self.acc.iter_mut().enumerate() {
            *acc += v * if c.contains(i) { inside } else { outside };
        }
        self.reuse.record(n);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        let Some(e) = self.ends else {
            return Ok(vec![0.0; self.n]);
        };
        let base = self.p_n * (e.full - e.empty);
        let t = self.reuse.samples;
        let k = if t == 0 { 0.0 } else { self.scale / t as f64 };
        Ok(self.acc.iter().map(|a| base + k * a).collect())
    }
}

impl Baseline for ShapIq {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}

/// `(U([n]) - U(∅)) / n + (2 H_{n-1} / T) sum_j (U(S_j) - U(∅)) (1[i ∈ S_j] - s_j / n)`.
pub(crate) struct UnbiasedKernelshap {
    n: usize,
    scale: f64,
    sizes: Categorical,
    sampler: SubsetSampler,
    ends: Option<Ends>,
    acc: Vec<f64>,
    reuse: Reuse,
}

impl UnbiasedKernelshap {
    pub fn new(n: usize) -> Result<Self> {
        Ok(UnbiasedKernelshap {
            n,
            scale: 2.0 * harmonic(n.saturating_sub(1)),
            sizes: kernel_sizes(n)?,
            sampler: SubsetSampler::new(n),
            ends: None,
            acc: vec![0.0; n],
            reuse: Reuse::default(),
        })
    }
}

impl Stepper for UnbiasedKernelshap {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        if self.ends.is_none() {
            2
        } else {
            1
        }
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let Some(e) = self.ends else {
            self.ends = Some(ends(ev)?);
            return Ok(());
        };
        let n = self.n;
        let s = self.sizes.sample(rng);
        let c = self.sampler.sample(rng, s);
        let v = ev.evaluate(&c)? - e.empty;
        let frac = s as f64 / n as f64;
        for (i, acc) in self.acc.iter_mut().enumerate() {
            *acc += v * (if c.contains(i) { 1.0 } else { 0.0 } - frac);
        }
        self.reuse.record(n);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        let Some(e) = self.ends else {
            return Ok(vec![0.0; self.n]);
        };
        let base = (e.full - e.empty) / self.n as f64;
        let t = self.reuse.samples;
        let k = if t == 0 { 0.0 } else { self.scale / t as f64 };
        Ok(self.acc.iter().map(|a| base + k * a).collect())
    }
}

impl Baseline for UnbiasedKernelshap {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}

/// Shapley by group testing with a dummy player `n`: sizes `1..n` of
/// `[n+1]` with `P(s) ∝ 1 / (s (n + 1 - s))`, then
/// `(2 H_n / T) sum_j (U(S_j ∩ [n]) - U(∅)) (1[i ∈ S_j, n ∉ S_j] - 1[i ∉ S_j, n ∈ S_j])`.
pub(crate) struct GroupTesting {
    n: usize,
    scale: f64,
    sizes: Categorical,
    sampler: SubsetSampler,
    empty: Option<f64>,
    acc: Vec<f64>,
    reuse: Reuse,
}

impl GroupTesting {
    pub fn new(n: usize) -> Result<Self> {
        if n >= crate::coalition::MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                n,
                max: crate::coalition::MAX_PLAYERS - 1,
            });
        }
        Ok(GroupTesting {
            n,
            scale: 2.0 * harmonic(n),
            sizes: kernel_sizes(n + 1)?,
            sampler: SubsetSampler::new(n + 1),
            empty: None,
            acc: vec![0.0; n],
            reuse: Reuse::default(),
        })
    }
}

impl Stepper for GroupTesting {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        1
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let Some(empty) = self.empty else {
            self.empty = Some(ev.evaluate(&Coalition::empty())?);
            return Ok(());
        };
        let n = self.n;
        let s = self.sizes.sample(rng);
        let c = self.sampler.sample(rng, s);
        let dummy = c.contains(n);
        let v = ev.evaluate(&c.without(n))? - empty;
        let mut updates = 0;
        for (i, acc) in self.acc.iter_mut().enumerate() {
            match (c.contains(i), dummy) {
                (true, false) => *acc += v,
                (false, true) => *acc -= v,
                _ => continue,
            }
            updates += 1;
        }
        self.reuse.record(updates);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        let t = self.reuse.samples;
        let k = if t == 0 { 0.0 } else { self.scale / t as f64 };
        Ok(self.acc.iter().map(|a| k * a).collect())
    }
}

impl Baseline for GroupTesting {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        self.reuse.write(out);
    }
}

/// Least squares over `[n+1]` with a dummy player `n`: `S ⊆ [n+1]` drawn
/// with `P(S) ∝ p_s` (`1 <= s <= n`), `v_k` the mean of `U(S ∩ [n])` over
/// samples containing `k`, and `phi_i = K (v_i - v_n)` with
/// `K = sum_s C(n, s-1) p_s`.
pub(crate) struct Gels {
    n: usize,
    k: f64,
    sizes: Categorical,
    sampler: SubsetSampler,
    means: Means,
    reuse: Reuse,
}

impl Gels {
    pub fn new(w: &WeightVector) -> Result<Self> {
        let n = w.n();
        if n >= crate::coalition::MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                n,
                max: crate::coalition::MAX_PLAYERS - 1,
            });
        }
        // C(n+1, s) p_s = m_s (n+1) n / (s (n+1-s)); the constant factor is dropped.
        let sizes: Vec<f64> = (1..=n)
            .map(|s| w.m_at(s) / (s * (n + 1 - s)) as f64)
            .collect();
        // C(n, s-1) p_s = m_s n / (n - s + 1).
        let k = (1..=n)
            .map(|s| w.m_at(s) * n as f64 / (n - s + 1) as f64)
            .sum();
        Ok(Gels {
            n,
            k,
            sizes: Categorical::new(&sizes, 1)?,
            sampler: SubsetSampler::new(n + 1),
            means: Means::new(n + 1),
            reuse: Reuse::default(),
        })
    }
}

impl Stepper for Gels {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        1
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let s = self.sizes.sample(rng);
        let c = self.sampler.sample(rng, s);
        let v = ev.evaluate(&c.without(self.n))?;
        for k in c.iter() {
            self.means.add(k, v);
        }
        self.reuse.record(s);
        Ok(())
    }

    fn snapshot(&mut self, _: bool) -> Result<Vec<f64>> {
        let dummy = self.means.mean(self.n);
        Ok((0..self.n)
            .map(|i| self.k * (self.means.mean(i) - dummy))
            .collect())
    }
}

impl Baseline for Gels {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        out.insert("scale".into(), format!("{}", self.k));
        self.reuse.write(out);
    }
}
