//! Random primitives shared by all estimators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::coalition::Coalition;
use crate::error::{Error, Result};

pub type RunRng = ChaCha8Rng;

/// Labels for the independent streams split off a run's root seed.
pub mod stream {
    pub const SOU_TERMS: u64 = 0x5011;
    pub const TABLE: u64 = 0x7AB1;
    pub const OFA_STOCHASTIC: u64 = 0x0FA1;
    pub const OFA_STRATIFIED: u64 = 0x0FA2;
    pub const BASELINE: u64 = 0xBA5E;
}

/// Deterministic generator for `(seed, label)`.
pub fn rng_for(seed: u64, label: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

/// Uniform fixed-size subsets of `{0, .., n-1}` by partial Fisher-Yates.
///
/// The scratch permutation is not reset between draws; each draw is still
/// exactly uniform because it only depends on fresh swaps.
#[derive(Clone, Debug)]
pub struct SubsetSampler {
    perm: Vec<usize>,
}

impl SubsetSampler {
    pub fn new(n: usize) -> Self {
        SubsetSampler {
            perm: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Shuffles the first `s` slots and returns them.
    pub fn sample_indices<R: Rng + ?Sized>(&mut self, rng: &mut R, s: usize) -> &[usize] {
        let n = self.perm.len();
        debug_assert!(s <= n);
        for k in 0..s {
            let j = rng.random_range(k..n);
            self.perm.swap(k, j);
        }
        &self.perm[..s]
    }

    /// The first `s` slots as left by the latest draw.
    pub fn current(&self, s: usize) -> &[usize] {
        &self.perm[..s]
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, s: usize) -> Coalition {
        Coalition::from_players(self.sample_indices(rng, s).iter().copied())
    }

    /// A full uniform permutation.
    pub fn permutation<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        let n = self.perm.len();
        self.sample_indices(rng, n)
    }
}

/// Each player of `players` joins independently with probability `w`.
pub fn bernoulli_subset<R: Rng + ?Sized>(
    rng: &mut R,
    players: impl IntoIterator<Item = usize>,
    w: f64,
) -> Coalition {
    let mut c = Coalition::empty();
    for i in players {
        if rng.random::<f64>() < w {
            c.insert(i);
        }
    }
    c
}

/// Categorical sampler over `offset, offset+1, ..` built with the alias method.
#[derive(Clone, Debug)]
pub struct Categorical {
    alias: WeightedAliasIndex<f64>,
    offset: usize,
}

impl Categorical {
    pub fn new(weights: &[f64], offset: usize) -> Result<Self> {
        let alias = WeightedAliasIndex::new(weights.to_vec())
            .map_err(|e| Error::InvalidArgument(format!("bad categorical weights: {e}")))?;
        Ok(Categorical { alias, offset })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.offset + self.alias.sample(rng)
    }
}
