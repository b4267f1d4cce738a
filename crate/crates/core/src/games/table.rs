use std::path::Path;

use rand::Rng;

use super::Game;
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::sampling::{rng_for, stream};

pub const TABLE_MAX_PLAYERS: usize = 25;

/// Game stored as a full table of `2^n` utilities indexed by bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct TableGame {
    n: usize,
    table: Vec<f64>,
}

impl TableGame {
    pub fn new(n: usize, table: Vec<f64>) -> Result<Self> {
        if n > TABLE_MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                n,
                max: TABLE_MAX_PLAYERS,
            });
        }
        if table.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                got: table.len(),
            });
        }
        Ok(TableGame { n, table })
    }

    pub fn from_fn(n: usize, f: impl Fn(&Coalition) -> f64) -> Result<Self> {
        if n > TABLE_MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                n,
                max: TABLE_MAX_PLAYERS,
            });
        }
        let table = (0..1u64 << n)
            .map(|m| f(&Coalition::from_bits(m)))
            .collect();
        Self::new(n, table)
    }

    /// Tabulates any game with at most [`TABLE_MAX_PLAYERS`] players.
    pub fn tabulate(game: &dyn Game) -> Result<Self> {
        Self::from_fn(game.n(), |s| game.utility(s))
    }

    /// Utilities drawn i.i.d. from `Uniform[-1, 1]`.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        if n > TABLE_MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                n,
                max: TABLE_MAX_PLAYERS,
            });
        }
        let mut rng = rng_for(seed, stream::TABLE);
        let table = (0..1usize << n)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Self::new(n, table)
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["mask", "utility"])?;
        for (mask, v) in self.table.iter().enumerate() {
            // `{}` on f64 prints the shortest representation that parses back exactly.
            w.write_record([mask.to_string(), format!("{v}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["mask", "utility"] {
            return Err(Error::Parse(format!(
                "expected header `mask,utility`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows: Vec<(usize, f64)> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mask: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad mask `{}`", &rec[0])))?;
            let v: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad utility `{}`", &rec[1])))?;
            rows.push((mask, v));
        }
        let len = rows.len();
        if !len.is_power_of_two() {
            return Err(Error::Parse(format!("{len} rows is not a power of two")));
        }
        let n = len.trailing_zeros() as usize;
        let mut table = vec![f64::NAN; len];
        for (mask, v) in rows {
            if mask >= len || !table[mask].is_nan() {
                return Err(Error::Parse(format!(
                    "mask {mask} is out of range or repeated"
                )));
            }
            table[mask] = v;
        }
        Self::new(n, table)
    }
}

impl Game for TableGame {
    fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn utility(&self, s: &Coalition) -> f64 {
        self.table[s.low_bits() as usize]
    }
}
