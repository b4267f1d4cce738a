//! Checkpointed estimates and the budget-driven run loop shared by all
//! estimators.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::baselines::EstimatorId;
use crate::error::{Error, Result};
use crate::games::Evaluator;
use crate::sampling::RunRng;
use crate::weights::SemivalueSpec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    /// Nominal cumulative budget this checkpoint stands for.
    pub mark: u64,
    /// Utility evaluations actually consumed when the estimate was taken
    /// (never above `mark`).
    pub evals_total: u64,
    pub estimate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateTrace {
    pub estimator: EstimatorId,
    pub semivalue: SemivalueSpec,
    pub seed: u64,
    pub n: usize,
    pub budget_per_player: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// Free-form run metadata (sampling mode, q provenance, fallbacks, ...).
    pub meta: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            _ => Err(Error::Parse(format!(
                "unknown format `{s}` (expected csv or jsonl)"
            ))),
        }
    }
}

impl EstimateTrace {
    pub fn final_estimate(&self) -> Option<&[f64]> {
        self.checkpoints.last().map(|c| c.estimate.as_slice())
    }

    pub fn final_evals(&self) -> u64 {
        self.checkpoints.last().map_or(0, |c| c.evals_total)
    }

    pub fn total_budget(&self) -> u64 {
        self.budget_per_player * self.n as u64
    }

    /// Metadata as `key=value` pairs, identity fields first.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("estimator".to_owned(), self.estimator.to_string()),
            ("semivalue".to_owned(), self.semivalue.to_string()),
            ("seed".to_owned(), self.seed.to_string()),
            ("n".to_owned(), self.n.to_string()),
            (
                "budget_per_player".to_owned(),
                self.budget_per_player.to_string(),
            ),
        ];
        out.extend(self.meta.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }

    /// Checkpoints with distinct evaluation counts; when a step is larger
    /// than the mark spacing several marks share one count and only the
    /// latest of them is kept.
    pub fn distinct_checkpoints(&self) -> impl Iterator<Item = &Checkpoint> {
        let cps = &self.checkpoints;
        cps.iter()
            .enumerate()
            .filter(move |(k, c)| {
                cps.get(k + 1)
                    .is_none_or(|next| next.evals_total != c.evals_total)
            })
            .map(|(_, c)| c)
    }

    /// Checks the structural invariants of a finished trace.
    pub fn validate(&self) -> Result<()> {
        let mut last: Option<&Checkpoint> = None;
        for c in &self.checkpoints {
            if c.evals_total > c.mark || c.estimate.len() != self.n {
                return Err(Error::InvalidArgument(format!(
                    "malformed checkpoint at mark {}",
                    c.mark
                )));
            }
            if let Some(prev) = last {
                if c.mark <= prev.mark || c.evals_total < prev.evals_total {
                    return Err(Error::InvalidArgument("checkpoints must be ordered".into()));
                }
            }
            last = Some(c);
        }
        if self.final_evals() > self.total_budget() {
            return Err(Error::InvalidArgument("trace exceeds its budget".into()));
        }
        Ok(())
    }

    /// Writes the trace. CSV starts with a `#` metadata line followed by
    /// `evals_total,player,estimate` rows (players 1-based); JSONL starts
    /// with a `{"meta": ...}` object followed by one object per checkpoint.
    pub fn write<W: Write>(
        &self,
        out: W,
        format: OutputFormat,
        extra_meta: &[(String, String)],
    ) -> Result<()> {
        let mut meta = self.metadata();
        meta.extend(extra_meta.iter().cloned());
        match format {
            OutputFormat::Csv => {
                let mut out = out;
                let line: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
                writeln!(out, "# {}", line.join(" "))?;
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["evals_total", "player", "estimate"])?;
                for c in self.distinct_checkpoints() {
                    for (i, v) in c.estimate.iter().enumerate() {
                        w.write_record([
                            c.evals_total.to_string(),
                            (i + 1).to_string(),
                            format!("{v}"),
                        ])?;
                    }
                }
                w.flush()?;
            }
            OutputFormat::Jsonl => {
                let mut out = out;
                let meta: BTreeMap<_, _> = meta.into_iter().collect();
                writeln!(out, "{}", serde_json::json!({ "meta": meta }))?;
                for c in self.distinct_checkpoints() {
                    writeln!(out, "{}", serde_json::to_string(c)?)?;
                }
            }
        }
        Ok(())
    }
}

/// One atomic unit of estimator work.
pub(crate) trait Stepper {
    type Snapshot;

    /// Evaluations the next call to [`Stepper::step`] will consume at most.
    fn next_cost(&self) -> u64;

    fn step(&mut self, ev: &Evaluator<'_>, rng: &mut RunRng) -> Result<()>;

    /// Current estimate; `last` is set for the final checkpoint.
    fn snapshot(&mut self, last: bool) -> Result<Self::Snapshot>;
}

/// Evenly spaced marks `j * budget / k` for `j = 1..=k`.
pub fn checkpoint_marks(budget: u64, k: usize) -> Vec<u64> {
    (1..=k as u64).map(|j| j * budget / k as u64).collect()
}

/// Runs `stepper` until the next step would exceed `budget`, taking a
/// snapshot right before the first step that would cross each mark.
pub(crate) fn drive<S: Stepper>(
    stepper: &mut S,
    ev: &Evaluator<'_>,
    rng: &mut RunRng,
    budget: u64,
    checkpoints: usize,
) -> Result<Vec<(u64, u64, S::Snapshot)>> {
    if checkpoints == 0 {
        return Err(Error::InvalidArgument(
            "at least one checkpoint is required".into(),
        ));
    }
    let marks = checkpoint_marks(budget, checkpoints);
    let mut out = Vec::with_capacity(checkpoints);
    let mut next = 0;
    loop {
        let cost = stepper.next_cost();
        let used = ev.count();
        let can_step = cost > 0 && used + cost <= budget;
        while next < marks.len() && (!can_step || used + cost > marks[next]) {
            let last = next + 1 == marks.len();
            out.push((marks[next], used, stepper.snapshot(last)?));
            next += 1;
        }
        if !can_step || next == marks.len() {
            break;
        }
        stepper.step(ev, rng)?;
    }
    Ok(out)
}
