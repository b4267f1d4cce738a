//! Fixed-width bitset over players `0..MAX_PLAYERS`.
//!
//! Player `i` (0-based) is bit `i`; in file formats the same bit denotes
//! the 1-based player `i + 1`.

use std::fmt;

pub const MAX_PLAYERS: usize = 256;
const WORDS: usize = MAX_PLAYERS / 64;

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    words: [u64; WORDS],
}

impl Coalition {
    pub const fn empty() -> Self {
        Coalition { words: [0; WORDS] }
    }

    /// `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_PLAYERS);
        let mut c = Coalition::empty();
        for w in 0..WORDS {
            let lo = w * 64;
            if n >= lo + 64 {
                c.words[w] = u64::MAX;
            } else if n > lo {
                c.words[w] = (1u64 << (n - lo)) - 1;
            }
        }
        c
    }

    pub fn from_bits(bits: u64) -> Self {
        let mut c = Coalition::empty();
        c.words[0] = bits;
        c
    }

    pub fn from_players(players: impl IntoIterator<Item = usize>) -> Self {
        let mut c = Coalition::empty();
        for i in players {
            c.insert(i);
        }
        c
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < MAX_PLAYERS && self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn with(mut self, i: usize) -> Self {
        self.insert(i);
        self
    }

    #[inline]
    pub fn without(mut self, i: usize) -> Self {
        self.remove(i);
        self
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    #[inline]
    pub fn is_subset(&self, other: &Coalition) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    /// Complement within `{0, .., n-1}`.
    pub fn complement(&self, n: usize) -> Self {
        let full = Coalition::full(n);
        let mut c = Coalition::empty();
        for w in 0..WORDS {
            c.words[w] = full.words[w] & !self.words[w];
        }
        c
    }

    /// One past the highest member, or 0 when empty.
    pub fn upper_bound(&self) -> usize {
        for w in (0..WORDS).rev() {
            if self.words[w] != 0 {
                return w * 64 + 64 - self.words[w].leading_zeros() as usize;
            }
        }
        0
    }

    /// Low 64 bits; exact whenever every member is below 64.
    #[inline]
    pub fn low_bits(&self) -> u64 {
        self.words[0]
    }

    pub fn words(&self) -> &[u64; WORDS] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..WORDS).flat_map(move |w| {
            let mut bits = self.words[w];
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let t = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + t)
                }
            })
        })
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
