use super::{Game, SouGame};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::weights::{make_weights, moment, SemivalueSpec, WeightVector};

pub const BRUTE_FORCE_MAX_PLAYERS: usize = 25;

/// Closed-form semi-value of a sum of unanimity games:
/// `phi_i = sum_{j : i in S_j} coef_j * int w^(s_j - 1) dmu(w)`.
pub fn exact_semivalue_sou(game: &SouGame, spec: &SemivalueSpec) -> Result<Vec<f64>> {
    let n = game.n();
    let moments: Vec<f64> = (0..n as u32)
        .map(|k| moment(spec, k))
        .collect::<Result<_>>()?;
    let mut phi = vec![0.0; n];
    for t in game.terms() {
        let v = t.coef * moments[t.players.len() - 1];
        for i in t.players.iter() {
            phi[i] += v;
        }
    }
    Ok(phi)
}

/// `phi_i = sum_{S ⊆ [n]\i} p_{s+1} (U(S ∪ i) - U(S))` by full enumeration.
///
/// Each utility is queried exactly once; the sum is rearranged as
/// `sum_{S ∋ i} p_s U(S) - sum_{S ∌ i} p_{s+1} U(S)`.
pub fn exact_semivalue_bruteforce(game: &dyn Game, w: &WeightVector) -> Result<Vec<f64>> {
    let n = game.n();
    if n > BRUTE_FORCE_MAX_PLAYERS {
        return Err(Error::TooManyPlayers {
            n,
            max: BRUTE_FORCE_MAX_PLAYERS,
        });
    }
    if w.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.n(),
        });
    }
    // Accumulate per (player, size) first so each weight multiplies a sum.
    let mut inside = vec![0.0; n * (n + 1)];
    let mut outside = vec![0.0; n * (n + 1)];
    for mask in 0..1u64 << n {
        let v = game.utility(&Coalition::from_bits(mask));
        let s = mask.count_ones() as usize;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                inside[i * (n + 1) + s] += v;
            } else {
                outside[i * (n + 1) + s] += v;
            }
        }
    }
    Ok((0..n)
        .map(|i| {
            (0..=n)
                .map(|s| {
                    w.p_at(s) * inside[i * (n + 1) + s] - w.p_at(s + 1) * outside[i * (n + 1) + s]
                })
                .sum()
        })
        .collect())
}

/// Best available exact oracle: closed form for SOU games with a measure,
/// otherwise enumeration when `n` is small enough.
pub fn exact_semivalue(game: &dyn Game, spec: &SemivalueSpec) -> Result<Vec<f64>> {
    if let Some(sou) = game.as_sou() {
        if !matches!(spec, SemivalueSpec::Custom(_)) {
            return exact_semivalue_sou(sou, spec);
        }
    }
    if game.n() <= BRUTE_FORCE_MAX_PLAYERS {
        let w = make_weights(spec, game.n())?;
        return exact_semivalue_bruteforce(game, &w);
    }
    Err(Error::NoOracle(format!(
        "{} players and no closed form for {spec}",
        game.n()
    )))
}
