use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Game;
use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::sampling::{rng_for, stream, SubsetSampler};

/// One unanimity term `coef * 1[players ⊆ S]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SouTerm {
    pub players: Coalition,
    pub coef: f64,
}

/// Sum of unanimity games `U(S) = sum_j coef_j * 1[S_j ⊆ S]`.
///
/// Term supports are drawn by picking a size uniformly from `1..n-1` and
/// then a subset of that size uniformly; coefficients are i.i.d.
/// `Uniform[-1, 1]`.
#[derive(Clone, Debug)]
pub struct SouGame {
    n: usize,
    seed: u64,
    terms: Vec<SouTerm>,
    // Term masks laid out `words` per term for the evaluation loop.
    words: usize,
    masks: Vec<u64>,
    coefs: Vec<f64>,
    bound: f64,
}

#[derive(Serialize, Deserialize)]
struct SouFile {
    n: usize,
    d: usize,
    seed: u64,
    terms: Vec<SouFileTerm>,
}

#[derive(Serialize, Deserialize)]
struct SouFileTerm {
    /// 1-based player ids.
    players: Vec<usize>,
    coef: f64,
}

impl SouGame {
    pub fn generate(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "SOU games need n >= 2, got {n}"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidArgument("SOU games need d >= 1".into()));
        }
        if n > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                n,
                max: MAX_PLAYERS,
            });
        }
        let mut rng = rng_for(seed, stream::SOU_TERMS);
        let mut subsets = SubsetSampler::new(n);
        let terms = (0..d)
            .map(|_| {
                let size = rng.random_range(1..n);
                let players = subsets.sample(&mut rng, size);
                let coef = rng.random_range(-1.0..=1.0);
                SouTerm { players, coef }
            })
            .collect();
        Self::from_terms(n, seed, terms)
    }

    pub fn from_terms(n: usize, seed: u64, terms: Vec<SouTerm>) -> Result<Self> {
        if n < 2 || n > MAX_PLAYERS {
            return Err(Error::InvalidArgument(format!(
                "SOU games need 2 <= n <= {MAX_PLAYERS}, got {n}"
            )));
        }
        for t in &terms {
            if t.players.is_empty() || t.players.len() >= n || t.players.upper_bound() > n {
                return Err(Error::InvalidArgument(format!(
                    "unanimity support {:?} must be a nonempty proper subset of the {n} players",
                    t.players
                )));
            }
        }
        let words = n.div_ceil(64);
        let mut masks = Vec::with_capacity(words * terms.len());
        for t in &terms {
            masks.extend_from_slice(&t.players.words()[..words]);
        }
        let coefs: Vec<f64> = terms.iter().map(|t| t.coef).collect();
        let bound = coefs.iter().map(|c| c.abs()).sum();
        Ok(SouGame {
            n,
            seed,
            terms,
            words,
            masks,
            coefs,
            bound,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn d(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[SouTerm] {
        &self.terms
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = SouFile {
            n: self.n,
            d: self.d(),
            seed: self.seed,
            terms: self
                .terms
                .iter()
                .map(|t| SouFileTerm {
                    players: t.players.iter().map(|i| i + 1).collect(),
                    coef: t.coef,
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let file: SouFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.terms.len() != file.d {
            return Err(Error::Parse(format!(
                "d = {} but {} terms listed",
                file.d,
                file.terms.len()
            )));
        }
        let mut terms = Vec::with_capacity(file.d);
        for t in file.terms {
            if let Some(bad) = t.players.iter().find(|p| **p == 0 || **p > file.n) {
                return Err(Error::Parse(format!(
                    "player id {bad} outside 1..={}",
                    file.n
                )));
            }
            terms.push(SouTerm {
                players: Coalition::from_players(t.players.iter().map(|p| p - 1)),
                coef: t.coef,
            });
        }
        Self::from_terms(file.n, file.seed, terms)
    }
}

impl Game for SouGame {
    fn n(&self) -> usize {
        self.n
    }

    fn utility(&self, s: &Coalition) -> f64 {
        if self.words == 1 {
            let s = s.low_bits();
            self.masks
                .iter()
                .zip(&self.coefs)
                .map(|(m, c)| if m & !s == 0 { *c } else { 0.0 })
                .sum()
        } else {
            let sw = &s.words()[..self.words];
            self.masks
                .chunks_exact(self.words)
                .zip(&self.coefs)
                .map(|(m, c)| {
                    if m.iter().zip(sw).all(|(a, b)| a & !b == 0) {
                        *c
                    } else {
                        0.0
                    }
                })
                .sum()
        }
    }

    fn u_bound(&self) -> Option<f64> {
        Some(self.bound)
    }

    fn as_sou(&self) -> Option<&SouGame> {
        Some(self)
    }
}
