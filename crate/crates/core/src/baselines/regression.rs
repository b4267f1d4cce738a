//! Regression-based estimators: KernelSHAP and AME.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Beta, Distribution};

use super::{Baseline, Reuse};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::games::Evaluator;
use crate::sampling::{bernoulli_subset, Categorical, RunRng, SubsetSampler};
use crate::trace::Stepper;
use crate::weights::SemivalueSpec;

/// Systems with a larger condition number are treated as singular.
pub(crate) const MAX_CONDITION: f64 = 1e12;

/// Solves `a x = b` for every column of `b` when `a` is well conditioned.
fn solve_checked(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let (hi, lo) = svd
        .singular_values
        .iter()
        .fold((0.0_f64, f64::INFINITY), |(h, l), s| (h.max(*s), l.min(*s)));
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return None;
    }
    svd.solve(b, 0.0).ok()
}

fn pseudo_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let hi = svd.singular_values.max();
    svd.solve(b, hi * 1e-12)
        .unwrap_or_else(|_| DVector::zeros(b.len()))
}

/// Constrained least squares on sampled coalitions: with
/// `A = E[1_S 1_S^T]`, `b = E[(U(S) - U(∅)) 1_S]` and `c = U([n]) - U(∅)`,
/// `phi = A^{-1} (b - 1 (1^T A^{-1} b - c) / (1^T A^{-1} 1))`.
///
/// Coalitions come from the Shapley kernel over sizes `1..n-1`.
pub(crate) struct Kernelshap {
    n: usize,
    sizes: Categorical,
    sampler: SubsetSampler,
    ends: Option<(f64, f64)>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    fallbacks: usize,
    reuse: Reuse,
}

impl Kernelshap {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(
                "kernelshap needs at least 2 players".into(),
            ));
        }
        let w: Vec<f64> = (1..n).map(|s| 1.0 / (s * (n - s)) as f64).collect();
        Ok(Kernelshap {
            n,
            sizes: Categorical::new(&w, 1)?,
            sampler: SubsetSampler::new(n),
            ends: None,
            a: DMatrix::zeros(n, n),
            b: DVector::zeros(n),
            fallbacks: 0,
            reuse: Reuse::default(),
        })
    }

    /// Least-norm solution of the KKT system, used while `A` is singular.
    fn fallback(&self, a: &DMatrix<f64>, b: &DVector<f64>, c: f64) -> Vec<f64> {
        let n = self.n;
        let mut kkt = DMatrix::zeros(n + 1, n + 1);
        kkt.view_mut((0, 0), (n, n)).copy_from(a);
        for i in 0..n {
            kkt[(i, n)] = 1.0;
            kkt[(n, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(b);
        rhs[n] = c;
        pseudo_solve(&kkt, &rhs)
            .rows(0, n)
            .iter()
            .copied()
            .collect()
    }
}

impl Stepper for Kernelshap {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        if self.ends.is_none() {
            2
        } else {
            1
        }
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let Some((empty, _)) = self.ends else {
            let empty = ev.evaluate(&Coalition::empty())?;
            let full = ev.evaluate(&Coalition::full(self.n))?;
            self.ends = Some((empty, full));
            return Ok(());
        };
        let s = self.sizes.sample(rng);
        let idx = self.sampler.sample_indices(rng, s);
        let c = Coalition::from_players(idx.iter().copied());
        let v = ev.evaluate(&c)? - empty;
        for &i in idx {
            self.b[i] += v;
            for &j in idx {
                self.a[(i, j)] += 1.0;
            }
        }
        self.reuse.record(self.n);
        Ok(())
    }

    fn snapshot(&mut self, last: bool) -> Result<Vec<f64>> {
        let n = self.n;
        let t = self.reuse.samples;
        let (empty, full) = self.ends.unwrap_or((0.0, 0.0));
        let c = full - empty;
        let a = &self.a / t.max(1) as f64;
        let b = &self.b / t.max(1) as f64;
        let mut rhs = DMatrix::zeros(n, 2);
        rhs.set_column(0, &b);
        rhs.set_column(1, &DVector::from_element(n, 1.0));
        let solved = if t == 0 {
            None
        } else {
            solve_checked(&a, &rhs)
        };
        match solved {
            Some(x) => {
                let (ainv_b, ainv_1) = (x.column(0), x.column(1));
                let nu = (ainv_b.sum() - c) / ainv_1.sum();
                Ok((0..n).map(|i| ainv_b[i] - nu * ainv_1[i]).collect())
            }
            None if last => Err(Error::RankDeficient(format!(
                "sampled kernelshap system is singular after {t} coalitions"
            ))),
            None => {
                self.fallbacks += 1;
                Ok(self.fallback(&a, &b, c))
            }
        }
    }
}

impl Baseline for Kernelshap {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        out.insert("fallback_checkpoints".into(), self.fallbacks.to_string());
        self.reuse.write(out);
    }
}

enum Mixing {
    Beta(Beta<f64>),
    Point(f64),
}

/// Average marginal effect regression: `w ~ mu`, `S` Bernoulli(w), features
/// `x_i = 1 / (w C)` if `i ∈ S` and `-1 / ((1 - w) C)` otherwise with
/// `C = int 1/(w(1-w)) dmu`. The ordinary least squares slope on `x`
/// (with an intercept) estimates the semi-value.
///
/// Sums are kept as running means and co-moments so that a constant
/// utility yields an exactly zero slope.
pub(crate) struct Ame {
    n: usize,
    c: f64,
    mixing: Mixing,
    x: Vec<f64>,
    mean_x: DVector<f64>,
    mean_y: f64,
    cxx: DMatrix<f64>,
    cxy: DVector<f64>,
    fallbacks: usize,
    reuse: Reuse,
}

impl Ame {
    pub fn new(n: usize, spec: &SemivalueSpec, c: f64) -> Result<Self> {
        let mixing = match *spec {
            // Density w^(beta-1) (1-w)^(alpha-1) is Beta(beta, alpha) in the usual parametrization.
            SemivalueSpec::BetaShapley { alpha, beta } => Mixing::Beta(
                Beta::new(beta, alpha).map_err(|e| Error::InvalidSemivalue(e.to_string()))?,
            ),
            SemivalueSpec::WeightedBanzhaf { a } => Mixing::Point(a),
            SemivalueSpec::Custom(_) => return Err(Error::NoMeasure(spec.to_string())),
        };
        Ok(Ame {
            n,
            c,
            mixing,
            x: vec![0.0; n],
            mean_x: DVector::zeros(n),
            mean_y: 0.0,
            cxx: DMatrix::zeros(n, n),
            cxy: DVector::zeros(n),
            fallbacks: 0,
            reuse: Reuse::default(),
        })
    }
}

impl Stepper for Ame {
    type Snapshot = Vec<f64>;

    fn next_cost(&self) -> u64 {
        1
    }

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()> {
        let n = self.n;
        let w = match &self.mixing {
            Mixing::Beta(d) => d.sample(rng),
            Mixing::Point(a) => *a,
        };
        let s = bernoulli_subset(rng, 0..n, w);
        let y = ev.evaluate(&s)?;
        let (xin, xout) = (1.0 / (w * self.c), -1.0 / ((1.0 - w) * self.c));
        for (i, x) in self.x.iter_mut().enumerate() {
            *x = if s.contains(i) { xin } else { xout };
        }
        // Welford update of means and co-moments.
        self.reuse.record(n);
        let t = self.reuse.samples as f64;
        let dx_old: DVector<f64> =
            DVector::from_iterator(n, self.x.iter().zip(self.mean_x.iter()).map(|(x, m)| x - m));
        let dy_old = y - self.mean_y;
        self.mean_x.axpy(1.0 / t, &dx_old, 1.0);
        self.mean_y += dy_old / t;
        let dx_new: DVector<f64> =
            DVector::from_iterator(n, self.x.iter().zip(self.mean_x.iter()).map(|(x, m)| x - m));
        let dy_new = y - self.mean_y;
        self.cxx.ger(1.0, &dx_old, &dx_new, 1.0);
        self.cxy.axpy(dy_new, &dx_old, 1.0);
        Ok(())
    }

    fn snapshot(&mut self, last: bool) -> Result<Vec<f64>> {
        let n = self.n;
        let sym = (&self.cxx + self.cxx.transpose()) * 0.5;
        let rhs = DMatrix::from_column_slice(n, 1, self.cxy.as_slice());
        match solve_checked(&sym, &rhs) {
            Some(x) => Ok(x.column(0).iter().copied().collect()),
            None if last => Err(Error::RankDeficient(format!(
                "ame design is singular after {} samples",
                self.reuse.samples
            ))),
            None => {
                self.fallbacks += 1;
                Ok(pseudo_solve(&sym, &self.cxy).iter().copied().collect())
            }
        }
    }
}

impl Baseline for Ame {
    fn meta(&self, out: &mut BTreeMap<String, String>) {
        out.insert("fallback_checkpoints".into(), self.fallbacks.to_string());
        self.reuse.write(out);
    }
}
