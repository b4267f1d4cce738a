//! Multi-seed convergence benchmark: relative-error curves, AUCC tables and
//! optional SVG plots.
//!
//! Budgets are counted in total utility evaluations per run, which is `n`
//! times the per-player budget. Curves are indexed by the checkpoint mark
//! divided by `n` (evaluations per player).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_estimator, EstimatorId};
use crate::error::{Error, Result};
use crate::games::{exact_semivalue, Game, GameSource};
use crate::ofa::{q_ofa_a, run_ofa_as, AllocationMode, OfaConfig};
use crate::trace::EstimateTrace;
use crate::weights::{make_weights, SemivalueSpec};

/// `‖est - exact‖₂ / ‖exact‖₂`.
pub fn relative_error(est: &[f64], exact: &[f64]) -> Result<f64> {
    if est.len() != exact.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            got: est.len(),
        });
    }
    let norm = l2(exact.iter().copied());
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "relative error against a zero vector".into(),
        ));
    }
    Ok(l2(est.iter().zip(exact).map(|(a, b)| a - b)) / norm)
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Area under the convergence curve: the mean of the checkpointed errors.
pub fn aucc(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("AUCC of an empty curve".into()));
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Benchmark grid, usually read from a TOML file:
///
/// ```toml
/// game = "sou:64:4096:2024"
/// semivalues = ["beta:4:1", "shapley", "wb:0.5"]
/// estimators = ["ofa_a", "ofa_s", "wsl"]
/// budget_per_player = 2000
/// checkpoints = 100
/// seeds = [0, 1, 2]
/// output_dir = "bench-out"
/// plots = true
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub game: GameSource,
    pub semivalues: Vec<SemivalueSpec>,
    pub estimators: Vec<EstimatorId>,
    pub budget_per_player: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub plots: bool,
    /// Worker threads; `None` uses one per logical core.
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_checkpoints() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("bench-out")
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchmarkConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints == 0 {
            return Err(Error::InvalidArgument(
                "at least one checkpoint is required".into(),
            ));
        }
        if self.seeds.is_empty() || self.semivalues.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidArgument(
                "seeds, semivalues and estimators must be non-empty".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::InvalidArgument(format!("seed {dup} listed twice")));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidArgument("jobs must be positive".into()));
        }
        for s in &self.semivalues {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub estimator: EstimatorId,
    pub semivalue: SemivalueSpec,
    pub seed: u64,
    pub evals_per_player: Vec<f64>,
    pub errors: Vec<f64>,
    /// Utility evaluations the producing run consumed. For OFA-A this is the
    /// shared run that served every semivalue of the seed.
    pub evaluations: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    Skipped,
    Failed,
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellStatus::Ok => "ok",
            CellStatus::Skipped => "skipped",
            CellStatus::Failed => "failed",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuccSummary {
    pub estimator: EstimatorId,
    pub semivalue: SemivalueSpec,
    /// Mean and population standard deviation over the seeds that finished.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_seeds: usize,
    pub status: CellStatus,
    /// `(seed, error)` for runs that returned an error.
    pub failures: Vec<(u64, String)>,
}

/// One OFA-A task: a single sample stream aggregated under several semivalues.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedRun {
    pub seed: u64,
    pub semivalues: usize,
    pub evaluations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub game: String,
    pub seeds: Vec<u64>,
    pub n: usize,
    pub budget_per_player: u64,
    pub checkpoints: usize,
    pub curves: Vec<Curve>,
    pub summary: Vec<AuccSummary>,
    pub shared_runs: Vec<SharedRun>,
    /// Semivalues whose exact value is zero; their curves hold absolute
    /// errors instead of relative ones.
    pub absolute_error: Vec<SemivalueSpec>,
}

impl ConvergenceReport {
    pub fn summary_for(&self, est: EstimatorId, spec: &SemivalueSpec) -> Option<&AuccSummary> {
        self.summary
            .iter()
            .find(|s| s.estimator == est && &s.semivalue == spec)
    }

    pub fn curves_for<'a>(
        &'a self,
        est: EstimatorId,
        spec: &'a SemivalueSpec,
    ) -> impl Iterator<Item = &'a Curve> + 'a {
        self.curves
            .iter()
            .filter(move |c| c.estimator == est && &c.semivalue == spec)
    }

    fn header(&self, extra: &[(String, String)]) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let mut meta = vec![
            ("game".to_owned(), self.game.clone()),
            ("n".to_owned(), self.n.to_string()),
            (
                "budget_per_player".to_owned(),
                self.budget_per_player.to_string(),
            ),
            (
                "total_budget_per_run".to_owned(),
                (self.budget_per_player * self.n as u64).to_string(),
            ),
            ("checkpoints".to_owned(), self.checkpoints.to_string()),
            ("seeds".to_owned(), seeds.join(",")),
            ("evals_per_player".to_owned(), "mark/n".to_owned()),
            ("error".to_owned(), "relative_l2".to_owned()),
        ];
        if !self.absolute_error.is_empty() {
            let list: Vec<String> = self.absolute_error.iter().map(|s| s.to_string()).collect();
            meta.push(("absolute_error_for".to_owned(), list.join(",")));
        }
        meta.extend(extra.iter().cloned());
        let parts: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# {}", parts.join(" "))
    }

    pub fn write_curves<W: Write>(&self, out: W, meta: &[(String, String)]) -> Result<()> {
        let mut out = out;
        writeln!(out, "{}", self.header(meta))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "estimator",
            "semivalue",
            "seed",
            "evals_per_player",
            "rel_error",
        ])?;
        for c in &self.curves {
            for (x, e) in c.evals_per_player.iter().zip(&c.errors) {
                w.write_record([
                    c.estimator.to_string(),
                    c.semivalue.to_string(),
                    c.seed.to_string(),
                    format!("{x}"),
                    format!("{e}"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aucc<W: Write>(&self, out: W, meta: &[(String, String)]) -> Result<()> {
        let mut out = out;
        writeln!(out, "{}", self.header(meta))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["estimator", "semivalue", "mean", "std", "n_seeds", "status"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for s in &self.summary {
            w.write_record([
                s.estimator.to_string(),
                s.semivalue.to_string(),
                opt(s.mean),
                opt(s.std),
                s.n_seeds.to_string(),
                s.status.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean error curve per estimator for one semivalue, as an SVG line plot
    /// with a log-scaled error axis.
    pub fn plot_svg(&self, spec: &SemivalueSpec) -> String {
        const W: f64 = 640.0;
        const H: f64 = 420.0;
        const PAD: f64 = 60.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
        ];

        let mut lines: Vec<(EstimatorId, Vec<(f64, f64)>)> = Vec::new();
        for s in self
            .summary
            .iter()
            .filter(|s| &s.semivalue == spec && s.n_seeds > 0)
        {
            let curves: Vec<&Curve> = self.curves_for(s.estimator, spec).collect();
            let k = curves[0].errors.len();
            let pts = (0..k)
                .map(|j| {
                    (
                        curves[0].evals_per_player[j],
                        curves.iter().map(|c| c.errors[j]).sum::<f64>() / curves.len() as f64,
                    )
                })
                .filter(|(_, e)| *e > 0.0)
                .collect();
            lines.push((s.estimator, pts));
        }
        let all = lines.iter().flat_map(|(_, p)| p.iter());
        let (mut x1, mut lo, mut hi) = (0.0_f64, f64::INFINITY, f64::NEG_INFINITY);
        for (x, e) in all {
            x1 = x1.max(*x);
            lo = lo.min(e.log10());
            hi = hi.max(e.log10());
        }
        if !lo.is_finite() {
            (lo, hi, x1) = (-1.0, 0.0, 1.0);
        }
        let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
        let px = |x: f64| PAD + x / x1.max(f64::MIN_POSITIVE) * (W - 2.0 * PAD);
        let py = |e: f64| H - PAD - (e.log10() - lo) / (hi - lo) * (H - 2.0 * PAD);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
            W / 2.0,
            spec
        );
        let _ = writeln!(
            svg,
            r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
            H - PAD,
            W - PAD
        );
        for d in lo as i32..=hi as i32 {
            let y = py(10f64.powi(d));
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">1e{d}</text>"#,
                PAD - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{x1}</text>"#,
            W - PAD,
            H - PAD + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">evaluations per player</text>"#,
            W / 2.0,
            H - 20.0
        );
        for (k, (est, pts)) in lines.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = pts
                .iter()
                .map(|(x, e)| format!("{:.2},{:.2}", px(*x), py(*e)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
            let ly = PAD + 16.0 * k as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{ly}" fill="{color}">{est}</text>"#,
                W - PAD - 90.0
            );
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Writes `curves.csv`, `aucc.csv` and, when asked, one
    /// `plot_<semivalue>.svg` per semivalue. `meta` is appended to the
    /// header line of both tables.
    pub fn write_dir(
        &self,
        dir: &Path,
        plots: bool,
        meta: &[(String, String)],
    ) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let curves = dir.join("curves.csv");
        write_atomic(&curves, |w| self.write_curves(w, meta))?;
        written.push(curves);
        let table = dir.join("aucc.csv");
        write_atomic(&table, |w| self.write_aucc(w, meta))?;
        written.push(table);
        if plots {
            let mut specs: Vec<&SemivalueSpec> = Vec::new();
            for s in &self.summary {
                if !specs.contains(&&s.semivalue) {
                    specs.push(&s.semivalue);
                }
            }
            for spec in specs {
                let name = spec.to_string().replace([':', '/', '@'], "_");
                let path = dir.join(format!("plot_{name}.svg"));
                let svg = self.plot_svg(spec);
                write_atomic(&path, |w| Ok(w.write_all(svg.as_bytes())?))?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        f(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

enum Task {
    Cell {
        est: EstimatorId,
        spec: usize,
        seed: u64,
    },
    Shared {
        seed: u64,
        specs: Vec<usize>,
    },
}

type TaskOutput = Vec<(
    EstimatorId,
    usize,
    u64,
    Result<EstimateTrace>,
    Option<SharedRun>,
)>;

fn run_task(task: &Task, game: &dyn Game, cfg: &BenchmarkConfig) -> TaskOutput {
    match *task {
        Task::Cell { est, spec, seed } => {
            let r = run_estimator(
                est,
                game,
                &cfg.semivalues[spec],
                cfg.budget_per_player,
                cfg.checkpoints,
                seed,
            );
            vec![(est, spec, seed, r, None)]
        }
        Task::Shared { seed, ref specs } => {
            let n = game.n();
            let run = (|| {
                let weights = specs
                    .iter()
                    .map(|&k| make_weights(&cfg.semivalues[k], n))
                    .collect::<Result<Vec<_>>>()?;
                let q = if n >= 5 { Some(q_ofa_a(n)?) } else { None };
                let ofa = OfaConfig {
                    budget_per_player: cfg.budget_per_player,
                    checkpoints: cfg.checkpoints,
                    seed,
                    allocation: AllocationMode::Stochastic,
                };
                run_ofa_as(game, &weights, q.as_ref(), &ofa, Some(EstimatorId::OfaA))
            })();
            match run {
                Ok(run) => {
                    let shared = SharedRun {
                        seed,
                        semivalues: specs.len(),
                        evaluations: run.evaluations,
                    };
                    specs
                        .iter()
                        .zip(run.traces)
                        .enumerate()
                        .map(|(k, (&spec, t))| {
                            (
                                EstimatorId::OfaA,
                                spec,
                                seed,
                                Ok(t),
                                (k == 0).then(|| shared.clone()),
                            )
                        })
                        .collect()
                }
                Err(e) => {
                    let msg = e.to_string();
                    specs
                        .iter()
                        .map(|&spec| {
                            (
                                EstimatorId::OfaA,
                                spec,
                                seed,
                                Err(Error::InvalidArgument(msg.clone())),
                                None,
                            )
                        })
                        .collect()
                }
            }
        }
    }
}

/// Runs every in-scope (estimator, semivalue, seed) cell of `cfg`.
///
/// The exact semivalue is computed once per semivalue. Out-of-scope pairs
/// become `skipped` summary rows and runs that return an error become
/// `failed` rows; neither aborts the benchmark. All OFA-A cells of one seed
/// share a single run. Results do not depend on the number of workers.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let game = cfg.game.load()?;
    let game: &dyn Game = game.as_ref();
    let n = game.n();
    let exact: Vec<Vec<f64>> = cfg
        .semivalues
        .iter()
        .map(|s| exact_semivalue(game, s))
        .collect::<Result<_>>()?;

    let in_scope = |est: EstimatorId, k: usize| est.supports(&cfg.semivalues[k]);
    let mut tasks = Vec::new();
    for &est in &cfg.estimators {
        if est == EstimatorId::OfaA {
            let specs: Vec<usize> = (0..cfg.semivalues.len())
                .filter(|&k| in_scope(est, k))
                .collect();
            if !specs.is_empty() {
                tasks.extend(cfg.seeds.iter().map(|&seed| Task::Shared {
                    seed,
                    specs: specs.clone(),
                }));
            }
            continue;
        }
        for k in (0..cfg.semivalues.len()).filter(|&k| in_scope(est, k)) {
            tasks.extend(
                cfg.seeds
                    .iter()
                    .map(|&seed| Task::Cell { est, spec: k, seed }),
            );
        }
    }

    let work = || {
        tasks
            .par_iter()
            .map(|t| run_task(t, game, cfg))
            .collect::<Vec<_>>()
    };
    let outputs = match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut results: BTreeMap<(usize, usize, u64), Result<EstimateTrace>> = BTreeMap::new();
    let est_pos = |e: EstimatorId| {
        cfg.estimators
            .iter()
            .position(|x| *x == e)
            .expect("listed estimator")
    };
    let seed_pos = |s: u64| cfg.seeds.iter().position(|x| *x == s).expect("listed seed") as u64;
    let mut shared_runs = Vec::new();
    for (est, spec, seed, r, shared) in outputs.into_iter().flatten() {
        results.insert((est_pos(est), spec, seed_pos(seed)), r);
        shared_runs.extend(shared);
    }

    let absolute: Vec<bool> = exact.iter().map(|e| e.iter().all(|x| *x == 0.0)).collect();
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for (ei, &est) in cfg.estimators.iter().enumerate() {
        for (k, spec) in cfg.semivalues.iter().enumerate() {
            let mut row = AuccSummary {
                estimator: est,
                semivalue: spec.clone(),
                mean: None,
                std: None,
                n_seeds: 0,
                status: CellStatus::Ok,
                failures: Vec::new(),
            };
            if !in_scope(est, k) {
                row.status = CellStatus::Skipped;
                summary.push(row);
                continue;
            }
            let mut scores = Vec::new();
            for (si, &seed) in cfg.seeds.iter().enumerate() {
                let trace = match results
                    .remove(&(ei, k, si as u64))
                    .expect("every task reports")
                {
                    Ok(t) => t,
                    Err(e) => {
                        row.failures.push((seed, e.to_string()));
                        continue;
                    }
                };
                let errors = trace
                    .checkpoints
                    .iter()
                    .map(|c| {
                        if absolute[k] {
                            Ok(l2(c.estimate.iter().copied()))
                        } else {
                            relative_error(&c.estimate, &exact[k])
                        }
                    })
                    .collect::<Result<Vec<f64>>>()?;
                scores.push(aucc(&errors)?);
                curves.push(Curve {
                    estimator: est,
                    semivalue: spec.clone(),
                    seed,
                    evals_per_player: trace
                        .checkpoints
                        .iter()
                        .map(|c| c.mark as f64 / n as f64)
                        .collect(),
                    errors,
                    evaluations: trace
                        .meta
                        .get("evaluations")
                        .and_then(|v| v.parse().ok())
                        .unwrap_or(trace.final_evals()),
                });
            }
            if !row.failures.is_empty() {
                row.status = CellStatus::Failed;
            }
            row.n_seeds = scores.len();
            if !scores.is_empty() {
                let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                let var =
                    scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64;
                row.mean = Some(mean);
                row.std = Some(var.sqrt());
            }
            summary.push(row);
        }
    }

    Ok(ConvergenceReport {
        game: cfg.game.to_string(),
        seeds: cfg.seeds.clone(),
        n,
        budget_per_player: cfg.budget_per_player,
        checkpoints: cfg.checkpoints,
        curves,
        summary,
        shared_runs,
        absolute_error: cfg
            .semivalues
            .iter()
            .zip(&absolute)
            .filter(|(_, a)| **a)
            .map(|(s, _)| s.clone())
            .collect(),
    })
}
