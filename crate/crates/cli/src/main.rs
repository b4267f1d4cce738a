//! `ofa`: weights, exact values, estimates, benchmarks, datamodels and
//! sample-complexity bounds from the command line.
//!
//! Data goes to stdout or to `--output`; diagnostics go to stderr as a
//! single `error: <code>: <message>` line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ofa_core::benchmark::write_atomic;
use ofa_core::datamodels::{
    check_pairwise_identity, eta_default, solve_datamodel_exact, solve_regularized, Norm, RegSpec,
};
use ofa_core::games::exact_semivalue;
use ofa_core::ofa::sample_complexity_bound;
use ofa_core::{
    make_weights, run_benchmark, run_estimator, run_ofa_estimator, AllocationMode, BenchmarkConfig,
    Error, EstimatorId, GameSource, OfaConfig, OutputFormat, SemivalueSpec,
};

const OUTPUT_DIR_ENV: &str = "OFA_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "ofa",
    version,
    about = "Semi-value estimation with one shared sample stream"
)]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the weights p_s and m_s of a semi-value.
    Weights {
        #[arg(long)]
        semivalue: SemivalueSpec,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Exact semi-value by closed form (SOU games) or enumeration.
    Exact {
        #[arg(long)]
        game: GameSource,
        #[arg(long)]
        semivalue: SemivalueSpec,
        #[command(flatten)]
        out: Output,
    },
    /// Run one estimator and write its checkpointed trace.
    Estimate {
        #[arg(long)]
        estimator: EstimatorId,
        #[arg(long)]
        semivalue: SemivalueSpec,
        #[arg(long)]
        game: GameSource,
        /// Utility evaluations per player; the run may use n times this.
        #[arg(long)]
        budget: u64,
        #[arg(long, default_value_t = 100)]
        checkpoints: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Size allocation for ofa_a / ofa_s.
        #[arg(long, default_value = "stochastic")]
        allocation: AllocationMode,
        #[command(flatten)]
        out: Output,
    },
    /// Run a benchmark grid from a TOML config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Also emit SVG plots.
        #[arg(long)]
        plots: bool,
    },
    /// Fit the exact datamodel and check it against the semi-value.
    Datamodel {
        #[arg(long)]
        game: GameSource,
        #[arg(long)]
        semivalue: SemivalueSpec,
        /// Regularization strength; needs a weighted Banzhaf semi-value.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value = "l2")]
        norm: Norm,
        #[command(flatten)]
        out: Output,
    },
    /// Evaluations sufficient for an (eps, delta)-approximation.
    Bound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        u: f64,
        #[arg(long = "D")]
        d: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Output {
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Output file; without it data goes to `$OFA_OUTPUT_DIR/<name>` when
    /// that variable is set and to stdout otherwise.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Where one artifact goes, decided before any work is done.
enum Sink {
    Stdout,
    File(PathBuf),
}

impl Output {
    fn sink(&self, default_name: &str) -> Sink {
        if let Some(p) = &self.output {
            return Sink::File(p.clone());
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => {
                let ext = match self.format {
                    OutputFormat::Csv => "csv",
                    OutputFormat::Jsonl => "jsonl",
                };
                Sink::File(Path::new(&dir).join(format!("{default_name}.{ext}")))
            }
            _ => Sink::Stdout,
        }
    }
}

fn emit(
    sink: &Sink,
    f: impl FnOnce(&mut dyn Write) -> ofa_core::Result<()>,
) -> ofa_core::Result<()> {
    match sink {
        Sink::Stdout => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
        Sink::File(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            write_atomic(path, f)
        }
    }
}

/// Provenance attached to every artifact. Seeded runs add their seed
/// through the trace or benchmark metadata.
fn provenance() -> Vec<(String, String)> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    vec![
        ("version".to_owned(), env!("CARGO_PKG_VERSION").to_owned()),
        ("args".to_owned(), args.join(" ")),
    ]
}

/// A table with a leading metadata record: a `#` line for CSV, a
/// `{"meta": ...}` object for JSONL.
fn write_table(
    out: &mut dyn Write,
    format: OutputFormat,
    meta: &[(String, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> ofa_core::Result<()> {
    match format {
        OutputFormat::Csv => {
            let line: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(out, "# {}", line.join(" "))?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Jsonl => {
            let meta: serde_json::Map<String, serde_json::Value> = meta
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect();
            writeln!(out, "{}", serde_json::json!({ "meta": meta }))?;
            for r in rows {
                let obj: serde_json::Map<String, serde_json::Value> = header
                    .iter()
                    .zip(r)
                    .map(|(k, v)| {
                        let val = v
                            .parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map_or_else(
                                || serde_json::Value::String(v.clone()),
                                serde_json::Value::Number,
                            );
                        (k.to_string(), val)
                    })
                    .collect();
                writeln!(out, "{}", serde_json::Value::Object(obj))?;
            }
        }
    }
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn run(cli: Cli) -> ofa_core::Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::InvalidArgument("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Weights { semivalue, n, out } => {
            let w = make_weights(&semivalue, n)?;
            let rows: Vec<Vec<String>> = (1..=n)
                .map(|s| vec![s.to_string(), num(w.p_at(s)), num(w.m_at(s))])
                .collect();
            let mut meta = provenance();
            meta.push(("semivalue".into(), semivalue.to_string()));
            meta.push(("n".into(), n.to_string()));
            emit(&out.sink("weights"), |o| {
                write_table(o, out.format, &meta, &["s", "p", "m"], &rows)
            })
        }
        Command::Exact {
            game,
            semivalue,
            out,
        } => {
            let g = game.load()?;
            let phi = exact_semivalue(g.as_ref(), &semivalue)?;
            let rows: Vec<Vec<String>> = phi
                .iter()
                .enumerate()
                .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
                .collect();
            let mut meta = provenance();
            meta.push(("game".into(), game.to_string()));
            meta.push(("semivalue".into(), semivalue.to_string()));
            emit(&out.sink("exact"), |o| {
                write_table(o, out.format, &meta, &["player", "value"], &rows)
            })
        }
        Command::Estimate {
            estimator,
            semivalue,
            game,
            budget,
            checkpoints,
            seed,
            allocation,
            out,
        } => {
            estimator.check_scope(&semivalue)?;
            if allocation != AllocationMode::Stochastic
                && !matches!(estimator, EstimatorId::OfaA | EstimatorId::OfaS)
            {
                return Err(Error::InvalidArgument(format!(
                    "--allocation only applies to ofa_a and ofa_s, not {estimator}"
                )));
            }
            let g = game.load()?;
            let trace = match estimator {
                EstimatorId::OfaA | EstimatorId::OfaS => {
                    let cfg = OfaConfig {
                        budget_per_player: budget,
                        checkpoints,
                        seed,
                        allocation,
                    };
                    run_ofa_estimator(estimator, g.as_ref(), &semivalue, &cfg)?
                }
                _ => run_estimator(estimator, g.as_ref(), &semivalue, budget, checkpoints, seed)?,
            };
            let mut meta: Vec<(String, String)> = provenance()
                .into_iter()
                .chain([("game".to_owned(), game.to_string())])
                .collect();
            meta.push(("total_budget".into(), trace.total_budget().to_string()));
            let name = format!(
                "estimate_{estimator}_{}_{seed}",
                semivalue.to_string().replace(':', "-")
            );
            emit(&out.sink(&name), |o| trace.write(o, out.format, &meta))
        }
        Command::Benchmark {
            config,
            output_dir,
            plots,
        } => {
            let mut cfg = BenchmarkConfig::read(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            } else if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
                if cfg.output_dir.is_relative() {
                    cfg.output_dir = Path::new(&dir).join(&cfg.output_dir);
                }
            }
            cfg.plots |= plots;
            if cli.jobs.is_some() {
                cfg.jobs = cli.jobs;
            }
            let report = run_benchmark(&cfg)?;
            let files = report.write_dir(&cfg.output_dir, cfg.plots, &provenance())?;
            let mut w = std::io::stdout().lock();
            for f in files {
                writeln!(w, "{}", f.display())?;
            }
            Ok(())
        }
        Command::Datamodel {
            game,
            semivalue,
            lambda,
            norm,
            out,
        } => {
            let g = game.load()?;
            let n = g.n();
            let w = make_weights(&semivalue, n)?;
            let eta = eta_default(&w)?;
            let sol = solve_datamodel_exact(g.as_ref(), &eta)?;
            let phi = exact_semivalue(g.as_ref(), &semivalue)?;
            let pairwise = check_pairwise_identity(&sol.theta_star, &phi)?;
            let regularized = match lambda {
                Some(l) => {
                    let SemivalueSpec::WeightedBanzhaf { a } = semivalue else {
                        return Err(Error::InvalidArgument(
                            "--lambda needs a weighted Banzhaf semi-value".into(),
                        ));
                    };
                    Some(solve_regularized(g.as_ref(), a, RegSpec::new(l, norm)?)?)
                }
                None => None,
            };
            let mut meta = provenance();
            meta.extend([
                ("game".to_owned(), game.to_string()),
                ("semivalue".to_owned(), semivalue.to_string()),
                ("eta_boundary".to_owned(), sol.boundary.to_string()),
                ("intercept".to_owned(), num(sol.b_star)),
                ("residual".to_owned(), num(sol.residual)),
                ("pairwise_identity_error".to_owned(), num(pairwise)),
            ]);
            let mut header = vec!["player", "theta", "semivalue"];
            if regularized.is_some() {
                header.push("theta_regularized");
            }
            let rows: Vec<Vec<String>> = (0..n)
                .map(|i| {
                    let mut r = vec![(i + 1).to_string(), num(sol.theta_star[i]), num(phi[i])];
                    if let Some(t) = &regularized {
                        r.push(num(t[i]));
                    }
                    r
                })
                .collect();
            emit(&out.sink("datamodel"), |o| {
                write_table(o, out.format, &meta, &header, &rows)
            })
        }
        Command::Bound {
            n,
            u,
            d,
            eps,
            delta,
            out,
        } => {
            let b = sample_complexity_bound(n, u, d, eps, delta)?;
            let row = vec![n.to_string(), num(u), num(d), num(eps), num(delta), num(b)];
            emit(&out.sink("bound"), |o| {
                write_table(
                    o,
                    out.format,
                    &provenance(),
                    &["n", "u", "D", "eps", "delta", "evaluations"],
                    &[row],
                )
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid invocation")
                .trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
