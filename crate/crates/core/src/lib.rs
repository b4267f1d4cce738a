//! Estimation of probabilistic values (semi-values) of cooperative games.
//!
//! The central piece is the one-sample-fits-all framework in [`ofa`]: a
//! single stream of sampled coalitions feeds per-size bucket means from
//! which any semi-value is recovered by reweighting. [`baselines`] holds the
//! competing estimators behind the same run contract, [`games`] the test
//! games and exact oracles, and [`datamodels`] the regression identities
//! linking datamodels to weighted Banzhaf values.

pub mod baselines;
pub mod benchmark;
pub mod coalition;
pub mod datamodels;
pub mod error;
pub mod games;
pub mod ofa;
pub mod sampling;
pub mod trace;
pub mod weights;

pub use baselines::{run_estimator, run_ofa_estimator, EstimatorId, Scope};
pub use benchmark::{run_benchmark, BenchmarkConfig, ConvergenceReport};
pub use coalition::Coalition;
pub use error::{Error, Result};
pub use games::{Evaluator, Game, GameSource};
pub use ofa::{run_ofa, run_ofa_shared, AllocationMode, OfaConfig, SamplingVector};
pub use trace::{Checkpoint, EstimateTrace, OutputFormat};
pub use weights::{make_weights, SemivalueSpec, WeightVector};
