//! Shared oracles and checks for the integration tests and the acceptance
//! harness. Each `check_*` returns a description of the first violation.
#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};

use ofa_core::baselines::EstimatorId;
use ofa_core::coalition::Coalition;
use ofa_core::games::{additive_game, constant_game, exact_semivalue, Game, TableGame};
use ofa_core::ofa::{d_value_raw, gamma_value, mean_d_raw, SamplingVector};
use ofa_core::weights::{make_weights, max_density, SemivalueSpec};
use ofa_core::{run_estimator, OutputFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn shapley() -> SemivalueSpec {
    SemivalueSpec::shapley()
}

pub fn beta(alpha: f64, beta: f64) -> SemivalueSpec {
    SemivalueSpec::beta(alpha, beta).unwrap()
}

pub fn wb(a: f64) -> SemivalueSpec {
    SemivalueSpec::banzhaf(a).unwrap()
}

/// The six semivalues of the SOU experiments.
pub fn sou_semivalues() -> Vec<SemivalueSpec> {
    vec![
        beta(4.0, 1.0),
        beta(1.0, 1.0),
        beta(1.0, 4.0),
        wb(0.2),
        wb(0.5),
        wb(0.8),
    ]
}

/// The SOU set plus a symmetric Beta that has a finite reciprocal-variance moment.
pub fn seven_semivalues() -> Vec<SemivalueSpec> {
    let mut v = sou_semivalues();
    v.insert(3, beta(2.0, 2.0));
    v
}

pub fn random_simplex(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let t: f64 = e.iter().sum();
    e.into_iter().map(|x| x / t).collect()
}

pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Wraps a game and counts every utility query, independently of the
/// library's own evaluator bookkeeping.
pub struct Counting<'g> {
    pub inner: &'g dyn Game,
    pub calls: AtomicU64,
}

impl<'g> Counting<'g> {
    pub fn new(inner: &'g dyn Game) -> Self {
        Counting {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Game for Counting<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn utility(&self, s: &Coalition) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.utility(s)
    }
}

/// Per-coordinate check that the mean of `runs` lies within `k` standard
/// errors of `exact`. Returns the worst z-score.
pub fn within_standard_errors(runs: &[Vec<f64>], exact: &[f64], k: f64) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for (i, &truth) in exact.iter().enumerate() {
        let xs: Vec<f64> = runs.iter().map(|r| r[i]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let se = sample_std(&xs) / (xs.len() as f64).sqrt();
        let dev = (mean - truth).abs();
        let z = if se > 0.0 {
            dev / se
        } else if dev < 1e-9 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
        if z > k {
            return Err(format!(
                "player {i}: mean {mean} vs exact {truth} is {z:.2} standard errors away"
            ));
        }
    }
    Ok(worst)
}

/// Minimizes `f` on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / 2.0
}

/// Numerical argmin of the averaged `D` over the simplex, by pairwise mass
/// exchange: each sweep moves mass between two coordinates to the best
/// split found by golden-section search.
pub fn argmin_mean_d(n: usize) -> Vec<f64> {
    let k = n - 3;
    let mut q = vec![1.0 / k as f64; k];
    for _sweep in 0..200 {
        let before = q.clone();
        for a in 0..k {
            for b in a + 1..k {
                let pool = q[a] + q[b];
                let eval = |t: f64| {
                    let mut trial = q.clone();
                    trial[a] = t * pool;
                    trial[b] = (1.0 - t) * pool;
                    mean_d_raw(&trial)
                };
                let t = golden_section(eval, 1e-9, 1.0 - 1e-9, 120);
                q[a] = t * pool;
                q[b] = (1.0 - t) * pool;
            }
        }
        let moved = q
            .iter()
            .zip(&before)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if moved < 1e-14 {
            break;
        }
    }
    q
}

/// Weighted least-squares datamodel objective over all coalitions plus an
/// optional penalty, minimized by proximal gradient descent with a
/// Gershgorin step size. `x = (b, theta)`; the penalty acts on `theta`.
pub struct ProxOracle {
    n: usize,
    g: Vec<Vec<f64>>,
    r: Vec<f64>,
}

impl ProxOracle {
    /// `eta[s]` weighs coalitions of size `s`.
    pub fn new(game: &dyn Game, eta: &[f64]) -> Self {
        let n = game.n();
        let mut g = vec![vec![0.0; n + 1]; n + 1];
        let mut r = vec![0.0; n + 1];
        for mask in 0u64..1 << n {
            let w = eta[mask.count_ones() as usize];
            let u = game.utility(&Coalition::from_bits(mask));
            let x: Vec<f64> = std::iter::once(1.0)
                .chain((0..n).map(|i| (mask >> i & 1) as f64))
                .collect();
            for a in 0..=n {
                r[a] += w * u * x[a];
                for b in 0..=n {
                    g[a][b] += w * x[a] * x[b];
                }
            }
        }
        ProxOracle { n, g, r }
    }

    /// Minimizes `x' G x - 2 r' x + pen(theta)` where `l2` adds `mu ||theta||^2`
    /// and otherwise `mu ||theta||_1` is added.
    pub fn solve(&self, mu: f64, l2: bool) -> Vec<f64> {
        let n = self.n;
        let lip = 2.0
            * self
                .g
                .iter()
                .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
            + if l2 { 2.0 * mu } else { 0.0 };
        let step = 1.0 / lip;
        let mut x = vec![0.0; n + 1];
        for _ in 0..2_000_000 {
            let mut next = x.clone();
            for a in 0..=n {
                let mut grad =
                    2.0 * (self.g[a].iter().zip(&x).map(|(g, v)| g * v).sum::<f64>() - self.r[a]);
                if l2 && a > 0 {
                    grad += 2.0 * mu * x[a];
                }
                next[a] = x[a] - step * grad;
                if !l2 && a > 0 {
                    let t = step * mu;
                    next[a] = next[a].signum() * (next[a].abs() - t).max(0.0);
                }
            }
            let moved = next
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            x = next;
            if moved < 1e-15 {
                break;
            }
        }
        x[1..].to_vec()
    }
}

// Property checks shared by the proptest suites and the acceptance harness.

pub fn check_normalization(spec: &SemivalueSpec, n: usize) -> Check {
    let w = make_weights(spec, n).map_err(|e| e.to_string())?;
    let total: f64 = w.m().iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(format!("{spec} at n={n}: sum m_s = {total}"));
    }
    if w.m().iter().any(|m| !(*m >= 0.0)) {
        return Err(format!("{spec} at n={n}: negative m_s"));
    }
    Ok(())
}

/// `m_s <= B / n` where `B` bounds the density of the measure.
pub fn check_density_bound(spec: &SemivalueSpec, n: usize) -> Check {
    let Some(b) = max_density(spec) else {
        return Ok(());
    };
    let w = make_weights(spec, n).map_err(|e| e.to_string())?;
    let bound = b / n as f64;
    match w.m().iter().position(|m| *m > bound * (1.0 + 1e-9) + 1e-15) {
        Some(s) => Err(format!(
            "{spec} at n={n}: m_{} = {} > B/n = {bound}",
            s + 1,
            w.m()[s]
        )),
        None => Ok(()),
    }
}

/// Convexity of `D` along the segment between two random `(m, q)` pairs.
pub fn check_d_convexity(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let m1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let m2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let q1 = random_simplex(&mut rng, n - 3);
    let q2 = random_simplex(&mut rng, n - 3);
    let (d1, d2) = (
        d_value_raw(&m1, &q1).unwrap(),
        d_value_raw(&m2, &q2).unwrap(),
    );
    for k in 1..10 {
        let t = k as f64 / 10.0;
        let mix = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| t * x + (1.0 - t) * y)
                .collect::<Vec<_>>()
        };
        let d = d_value_raw(&mix(&m1, &m2), &mix(&q1, &q2)).unwrap();
        let chord = t * d1 + (1.0 - t) * d2;
        if d > chord * (1.0 + 1e-12) {
            return Err(format!("n={n}, t={t}: D = {d} above chord {chord}"));
        }
    }
    Ok(())
}

pub fn check_gamma(n: usize, seed: u64) -> Check {
    let q =
        SamplingVector::new(n, random_simplex(&mut rng(seed), n - 3)).map_err(|e| e.to_string())?;
    let g = gamma_value(&q);
    if !(g > 0.0 && g <= 0.5) {
        return Err(format!("gamma = {g} for n={n}"));
    }
    Ok(())
}

fn trace_bytes(
    id: EstimatorId,
    game: &dyn Game,
    spec: &SemivalueSpec,
    budget: u64,
    seed: u64,
) -> Result<Vec<u8>, String> {
    let t = run_estimator(id, game, spec, budget, 7, seed).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    t.write(&mut out, OutputFormat::Csv, &[])
        .map_err(|e| e.to_string())?;
    Ok(out)
}

/// A semivalue every estimator id accepts, for scope-agnostic checks.
pub fn spec_for(id: EstimatorId, pick: usize) -> SemivalueSpec {
    use ofa_core::Scope;
    match id.scope() {
        Scope::ShapleyOnly => shapley(),
        Scope::WeightedBanzhafOnly => [wb(0.2), wb(0.5), wb(0.8)][pick % 3].clone(),
        Scope::FiniteReciprocalVariance => {
            [beta(2.0, 2.0), beta(3.0, 2.0), wb(0.5)][pick % 3].clone()
        }
        Scope::Any => seven_semivalues()[pick % 7].clone(),
    }
}

pub fn check_determinism(id: EstimatorId, pick: usize, seed: u64) -> Check {
    let game = TableGame::random(7, seed ^ 0x55).unwrap();
    let spec = spec_for(id, pick);
    let a = trace_bytes(id, &game, &spec, 60, seed)?;
    let b = trace_bytes(id, &game, &spec, 60, seed)?;
    if a != b {
        return Err(format!("{id} on {spec}: two runs with seed {seed} differ"));
    }
    Ok(())
}

/// Exact oracles return zero on a constant game and `c` on an additive one.
pub fn check_exact_trivial_games(spec: &SemivalueSpec, n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let level = rng.random_range(-5.0..5.0);
    let phi = exact_semivalue(&constant_game(n, level), spec).map_err(|e| e.to_string())?;
    if let Some(x) = phi.iter().find(|x| x.abs() > 1e-9) {
        return Err(format!("{spec}: constant game gives {x}"));
    }
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let phi = exact_semivalue(&additive_game(c.clone()), spec).map_err(|e| e.to_string())?;
    for (i, (a, b)) in phi.iter().zip(&c).enumerate() {
        if (a - b).abs() > 1e-9 {
            return Err(format!(
                "{spec}: additive game player {i} gives {a}, expected {b}"
            ));
        }
    }
    Ok(())
}

/// Every estimator reports zeros on a constant game once its first
/// checkpoint has seen enough samples to fill every bucket.
pub fn check_constant_game_estimators(id: EstimatorId, pick: usize, seed: u64) -> Check {
    let n = 6;
    let game = constant_game(n, 3.0);
    let spec = spec_for(id, pick);
    let budget = if matches!(id, EstimatorId::OfaA | EstimatorId::OfaS) {
        4000
    } else {
        60
    };
    let t = run_estimator(id, &game, &spec, budget, 2, seed).map_err(|e| e.to_string())?;
    for c in &t.checkpoints {
        if let Some(x) = c.estimate.iter().find(|x| x.abs() > 1e-9) {
            return Err(format!("{id} on {spec}: {x} at mark {}", c.mark));
        }
    }
    Ok(())
}

/// The permutation estimator is exact on additive games once one
/// permutation has been walked.
pub fn check_permutation_additive(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t = run_estimator(
        EstimatorId::Permutation,
        &additive_game(c.clone()),
        &shapley(),
        3,
        3,
        seed,
    )
    .map_err(|e| e.to_string())?;
    for cp in t.checkpoints.iter().filter(|cp| cp.evals_total > 0) {
        for (a, b) in cp.estimate.iter().zip(&c) {
            if (a - b).abs() > 1e-12 {
                return Err(format!("n={n}: estimate {a} vs {b} at mark {}", cp.mark));
            }
        }
    }
    Ok(())
}
