//! Utility functions over coalitions, evaluation accounting, and exact
//! ground-truth oracles.

mod exact;
mod sou;
mod table;

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

pub use exact::{
    exact_semivalue, exact_semivalue_bruteforce, exact_semivalue_sou, BRUTE_FORCE_MAX_PLAYERS,
};
pub use sou::{SouGame, SouTerm};
pub use table::{TableGame, TABLE_MAX_PLAYERS};

use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};

/// A cooperative game `U: 2^[n] -> R`.
///
/// `utility` must be a pure function of the coalition.
pub trait Game: Send + Sync {
    fn n(&self) -> usize;

    fn utility(&self, s: &Coalition) -> f64;

    /// Known bound on `|U(S)|`, checked on every counted evaluation.
    fn u_bound(&self) -> Option<f64> {
        None
    }

    /// Closed-form description, when the game is a sum of unanimity games.
    fn as_sou(&self) -> Option<&SouGame> {
        None
    }
}

/// Game defined by a closure. Mostly useful for tests and examples.
pub struct FnGame<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&Coalition) -> f64 + Send + Sync> FnGame<F> {
    pub fn new(n: usize, f: F) -> Self {
        assert!(n <= MAX_PLAYERS);
        FnGame { n, f }
    }
}

impl<F: Fn(&Coalition) -> f64 + Send + Sync> Game for FnGame<F> {
    fn n(&self) -> usize {
        self.n
    }

    fn utility(&self, s: &Coalition) -> f64 {
        (self.f)(s)
    }
}

/// `U(S) = c` for every `S`.
pub fn constant_game(n: usize, c: f64) -> impl Game {
    FnGame::new(n, move |_| c)
}

/// `U(S) = sum_{i in S} c_i`.
pub fn additive_game(c: Vec<f64>) -> impl Game {
    FnGame::new(c.len(), move |s: &Coalition| s.iter().map(|i| c[i]).sum())
}

/// Counting view of a game owned by one estimator run.
///
/// Every call to [`Evaluator::evaluate`] that is not served by the
/// (opt-in) memo increments the counter by one.
pub struct Evaluator<'g> {
    game: &'g dyn Game,
    n: usize,
    bound: Option<f64>,
    count: AtomicU64,
    memo: Option<Mutex<HashMap<Coalition, f64>>>,
}

impl<'g> Evaluator<'g> {
    pub fn new(game: &'g dyn Game) -> Self {
        Evaluator {
            game,
            n: game.n(),
            bound: game.u_bound(),
            count: AtomicU64::new(0),
            memo: None,
        }
    }

    /// Evaluator whose repeated queries are free until [`Evaluator::clear_memo`].
    pub fn with_memo(game: &'g dyn Game) -> Self {
        Evaluator {
            memo: Some(Mutex::new(HashMap::new())),
            ..Evaluator::new(game)
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn game(&self) -> &'g dyn Game {
        self.game
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn clear_memo(&self) {
        if let Some(memo) = &self.memo {
            memo.lock().expect("memo poisoned").clear();
        }
    }

    pub fn evaluate(&self, s: &Coalition) -> Result<f64> {
        let ub = s.upper_bound();
        if ub > self.n {
            return Err(Error::PlayerOutOfRange {
                player: ub,
                n: self.n,
            });
        }
        if let Some(memo) = &self.memo {
            if let Some(v) = memo.lock().expect("memo poisoned").get(s) {
                return Ok(*v);
            }
        }
        let v = self.game.utility(s);
        self.count.fetch_add(1, Ordering::Relaxed);
        if let Some(bound) = self.bound {
            if v.abs() > bound * (1.0 + 1e-12) {
                return Err(Error::BoundViolated { value: v, bound });
            }
        }
        if let Some(memo) = &self.memo {
            memo.lock().expect("memo poisoned").insert(*s, v);
        }
        Ok(v)
    }
}

/// Textual game description used by the CLI and benchmark configs.
///
/// * `sou:N:D:SEED` generates a sum-of-unanimity game,
/// * `sou:@FILE` loads one from its JSON audit file,
/// * `table:@FILE` loads a `mask,utility` CSV,
/// * `table-random:N:SEED` draws a table uniformly from `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GameSource {
    Sou { n: usize, d: usize, seed: u64 },
    SouFile(String),
    TableFile(String),
    RandomTable { n: usize, seed: u64 },
}

impl GameSource {
    pub fn load(&self) -> Result<Box<dyn Game>> {
        Ok(match self {
            GameSource::Sou { n, d, seed } => Box::new(SouGame::generate(*n, *d, *seed)?),
            GameSource::SouFile(path) => Box::new(SouGame::read_json(path)?),
            GameSource::TableFile(path) => Box::new(TableGame::read_csv(path)?),
            GameSource::RandomTable { n, seed } => Box::new(TableGame::random(*n, *seed)?),
        })
    }
}

impl std::fmt::Display for GameSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GameSource::Sou { n, d, seed } => write!(f, "sou:{n}:{d}:{seed}"),
            GameSource::SouFile(p) => write!(f, "sou:@{p}"),
            GameSource::TableFile(p) => write!(f, "table:@{p}"),
            GameSource::RandomTable { n, seed } => write!(f, "table-random:{n}:{seed}"),
        }
    }
}

impl FromStr for GameSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cannot parse game `{s}`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        if let Some(path) = rest.strip_prefix('@') {
            return match kind {
                "sou" => Ok(GameSource::SouFile(path.to_owned())),
                "table" => Ok(GameSource::TableFile(path.to_owned())),
                _ => Err(bad()),
            };
        }
        let nums: Vec<u64> = rest
            .split(':')
            .map(|t| t.parse::<u64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (kind, nums.as_slice()) {
            ("sou", [n, d, seed]) => Ok(GameSource::Sou {
                n: *n as usize,
                d: *d as usize,
                seed: *seed,
            }),
            ("table-random", [n, seed]) => Ok(GameSource::RandomTable {
                n: *n as usize,
                seed: *seed,
            }),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for GameSource {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GameSource> for String {
    fn from(g: GameSource) -> String {
        g.to_string()
    }
}
