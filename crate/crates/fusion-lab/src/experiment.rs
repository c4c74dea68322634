//! Monte Carlo estimation of fusion error probabilities.
//!
//! Each trial draws one window of states, node statuses, and reports, runs a
//! configured fusion scheme, and counts wrongly decided window steps. Trials
//! use counter-derived random streams, so they can run in parallel in any
//! order and still reproduce bit-identical aggregates. Error rates come with
//! Wilson score intervals, which stay honest for the very small rates the
//! persistent-state setups reach.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{hard_isolation_fuse, majority_fuse, soft_isolation_fuse};
use crate::exact::{exact_bitwise_map, ExactError, BITWISE_MAP_MAX_M};
use crate::model::{
    sample_node_statuses, sample_reports, sample_states, ModelError, ModelParams,
};
use crate::mp::{decide_states, fuse_mp, MpError};

/// Two-sided 95% normal quantile used for the Wilson score intervals.
pub const Z_95: f64 = 1.959963984540054;

/// Errors produced while configuring or running an experiment.
#[derive(Debug, Error)]
pub enum ExperimentError {
    /// A configuration field violates its documented range.
    #[error("invalid experiment configuration: {what} must satisfy {requirement}")]
    InvalidConfig {
        /// Offending field.
        what: &'static str,
        /// Violated requirement.
        requirement: &'static str,
    },
    /// The scheme name did not match any known fusion rule.
    #[error("unknown scheme {0:?}, expected one of mp, optimal, majority, hard, soft")]
    UnknownScheme(String),
    /// The model parameters themselves are invalid.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Message passing failed.
    #[error(transparent)]
    Mp(#[from] MpError),
    /// The exact oracle failed.
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Fusion rule run inside each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Loopy message passing over the full factor graph.
    Mp,
    /// Exact bitwise MAP by exhaustive state enumeration.
    Optimal,
    /// Unweighted majority vote.
    Majority,
    /// Majority with hard isolation of high-mismatch nodes.
    Hard,
    /// Majority with mismatch-weighted revote.
    Soft,
}

impl Scheme {
    /// All schemes, in the order used for reports and sweeps.
    pub const ALL: [Scheme; 5] = [
        Scheme::Mp,
        Scheme::Optimal,
        Scheme::Majority,
        Scheme::Hard,
        Scheme::Soft,
    ];

    /// Stable lowercase name used on the command line and in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mp => "mp",
            Scheme::Optimal => "optimal",
            Scheme::Majority => "majority",
            Scheme::Hard => "hard",
            Scheme::Soft => "soft",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| ExperimentError::UnknownScheme(s.to_string()))
    }
}

/// Full description of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Generative model parameters.
    pub params: ModelParams,
    /// Fusion rule under test.
    pub scheme: Scheme,
    /// Number of independent trials.
    pub trials: u64,
    /// Iteration budget for message passing.
    pub mp_max_iters: usize,
    /// Convergence tolerance for message passing.
    pub mp_tol: f64,
    /// Isolation threshold for the hard scheme.
    pub delta_iso: f64,
    /// Root seed from which all per-trial streams are derived.
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.params.validate()?;
        if self.trials < 1 {
            return Err(ExperimentError::InvalidConfig {
                what: "trials",
                requirement: "trials >= 1",
            });
        }
        if self.mp_max_iters < 1 {
            return Err(ExperimentError::InvalidConfig {
                what: "mp_max_iters",
                requirement: "mp_max_iters >= 1",
            });
        }
        if !(self.mp_tol > 0.0 && self.mp_tol.is_finite()) {
            return Err(ExperimentError::InvalidConfig {
                what: "mp_tol",
                requirement: "0 < mp_tol and finite",
            });
        }
        if !(self.delta_iso > 0.0 && self.delta_iso <= 1.0) {
            return Err(ExperimentError::InvalidConfig {
                what: "delta_iso",
                requirement: "0 < delta_iso <= 1",
            });
        }
        if self.scheme == Scheme::Optimal && self.params.m > BITWISE_MAP_MAX_M {
            return Err(ExperimentError::InvalidConfig {
                what: "params.m",
                requirement: "m <= 20 when scheme is optimal",
            });
        }
        Ok(())
    }
}

/// Error tally from one simulated trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Window steps decided wrongly, between 0 and m.
    pub errors: u64,
    /// Message-passing iterations spent, for the mp scheme only.
    pub mp_iterations: Option<usize>,
}

/// Monte Carlo estimate of a bitwise error probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    /// Fraction of wrongly decided window steps.
    pub pe: f64,
    /// Total decided steps, trials times m.
    pub decided_bits: u64,
    /// Wrongly decided steps.
    pub errors: u64,
    /// Lower end of the 95% Wilson score interval.
    pub ci_low: f64,
    /// Upper end of the 95% Wilson score interval.
    pub ci_high: f64,
    /// Mean message-passing iterations per trial, for the mp scheme only.
    pub mean_mp_iterations: Option<f64>,
}

/// Paired per-trial comparison of message passing against the exact rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedOutcome {
    /// Window steps the message-passing decisions got wrong.
    pub errors_mp: u64,
    /// Window steps the exact decisions got wrong.
    pub errors_optimal: u64,
    /// Whether the two decision vectors differ anywhere.
    pub decisions_differ: bool,
    /// Message-passing iterations spent.
    pub mp_iterations: usize,
}

/// Aggregated paired comparison over many trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedEstimate {
    /// Bitwise error probability of message passing.
    pub pe_mp: f64,
    /// Bitwise error probability of the exact rule on the same draws.
    pub pe_optimal: f64,
    /// `pe_mp - pe_optimal`; negative values are Monte Carlo noise.
    pub pe_gap: f64,
    /// Fraction of trials whose decision vectors differ anywhere.
    pub differing_fraction: f64,
    /// Total decided steps per scheme.
    pub decided_bits: u64,
    /// Mean message-passing iterations per trial.
    pub mean_mp_iterations: f64,
}

/// Returns the independent random stream for one trial.
///
/// All trials share the seed and differ only in the stream counter, so any
/// subset of trials can be replayed without running the others.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Runs one trial: draw a window, fuse it, count wrong decisions.
///
/// Exact posterior ties are broken by fair coins drawn after the generative
/// draws, so schemes that never tie consume exactly the generative prefix of
/// the stream.
pub fn run_trial(
    config: &ExperimentConfig,
    trial_index: u64,
) -> Result<TrialOutcome, ExperimentError> {
    let params = &config.params;
    let mut rng = trial_rng(config.master_seed, trial_index);
    let states = sample_states(params, &mut rng);
    let statuses = sample_node_statuses(params, &mut rng);
    let reports = sample_reports(&states, &statuses, params, &mut rng);

    let (decisions, mp_iterations) = match config.scheme {
        Scheme::Mp => {
            let fused = fuse_mp(&reports, params, config.mp_max_iters, config.mp_tol)?;
            let decisions = decide_states(&fused.state_posteriors, Some(&mut rng));
            (decisions, Some(fused.iterations_used))
        }
        Scheme::Optimal => {
            let result = exact_bitwise_map(&reports, params)?;
            let decisions = decide_states(&result.state_posteriors, Some(&mut rng));
            (decisions, None)
        }
        Scheme::Majority => (majority_fuse(&reports, &mut rng), None),
        Scheme::Hard => (
            hard_isolation_fuse(&reports, params, config.delta_iso, &mut rng).0,
            None,
        ),
        Scheme::Soft => (soft_isolation_fuse(&reports, params, &mut rng).0, None),
    };

    Ok(TrialOutcome {
        errors: count_errors(decisions.bits(), states.bits()),
        mp_iterations,
    })
}

/// Runs message passing and the exact rule on one shared generative draw.
///
/// Both schemes see identical states, statuses, and reports, and each breaks
/// posterior ties with its own copy of the post-generation stream, so a tie
/// resolves the same way on both sides.
pub fn run_paired_trial(
    config: &ExperimentConfig,
    trial_index: u64,
) -> Result<PairedOutcome, ExperimentError> {
    let params = &config.params;
    let mut rng = trial_rng(config.master_seed, trial_index);
    let states = sample_states(params, &mut rng);
    let statuses = sample_node_statuses(params, &mut rng);
    let reports = sample_reports(&states, &statuses, params, &mut rng);
    let mut rng_optimal = rng.clone();

    let fused = fuse_mp(&reports, params, config.mp_max_iters, config.mp_tol)?;
    let mp_decisions = decide_states(&fused.state_posteriors, Some(&mut rng));
    let exact = exact_bitwise_map(&reports, params)?;
    let optimal_decisions = decide_states(&exact.state_posteriors, Some(&mut rng_optimal));

    Ok(PairedOutcome {
        errors_mp: count_errors(mp_decisions.bits(), states.bits()),
        errors_optimal: count_errors(optimal_decisions.bits(), states.bits()),
        decisions_differ: mp_decisions != optimal_decisions,
        mp_iterations: fused.iterations_used,
    })
}

/// Estimates the bitwise error probability of the configured scheme.
///
/// Trials run in parallel on the current rayon pool; the reduction adds
/// integer counters, so the estimate is bit-identical for any worker count
/// and execution order.
pub fn estimate_error_probability(
    config: &ExperimentConfig,
) -> Result<ErrorEstimate, ExperimentError> {
    config.validate()?;
    let totals = (0..config.trials)
        .into_par_iter()
        .map(|index| run_trial(config, index))
        .try_fold(Totals::default, |acc, outcome| {
            outcome.map(|o| acc.add(o.errors, o.mp_iterations.unwrap_or(0) as u64))
        })
        .try_reduce(Totals::default, |a, b| Ok(a.merge(b)))?;

    let decided_bits = config.trials * config.params.m as u64;
    let mean_mp_iterations = (config.scheme == Scheme::Mp)
        .then(|| totals.iterations as f64 / config.trials as f64);
    Ok(finish_estimate(
        totals.errors,
        decided_bits,
        mean_mp_iterations,
    ))
}

/// Runs the paired mp-versus-optimal comparison over all trials.
pub fn estimate_paired(config: &ExperimentConfig) -> Result<PairedEstimate, ExperimentError> {
    config.validate()?;
    if config.params.m > BITWISE_MAP_MAX_M {
        return Err(ExperimentError::InvalidConfig {
            what: "params.m",
            requirement: "m <= 20 for paired comparison",
        });
    }
    let totals = (0..config.trials)
        .into_par_iter()
        .map(|index| run_paired_trial(config, index))
        .try_fold(PairedTotals::default, |acc, outcome| {
            outcome.map(|o| acc.add(&o))
        })
        .try_reduce(PairedTotals::default, |a, b| Ok(a.merge(b)))?;

    let decided_bits = config.trials * config.params.m as u64;
    let trials = config.trials as f64;
    Ok(PairedEstimate {
        pe_mp: totals.errors_mp as f64 / decided_bits as f64,
        pe_optimal: totals.errors_optimal as f64 / decided_bits as f64,
        pe_gap: totals.errors_mp as f64 / decided_bits as f64
            - totals.errors_optimal as f64 / decided_bits as f64,
        differing_fraction: totals.differing as f64 / trials,
        decided_bits,
        mean_mp_iterations: totals.iterations as f64 / trials,
    })
}

/// Runs one estimate per grid point, pairing each with its configuration.
pub fn sweep(
    grid: &[ExperimentConfig],
) -> Result<Vec<(ExperimentConfig, ErrorEstimate)>, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::InvalidConfig {
            what: "grid",
            requirement: "at least one configuration",
        });
    }
    grid.iter()
        .map(|config| {
            estimate_error_probability(config).map(|estimate| (config.clone(), estimate))
        })
        .collect()
}

/// 95% Wilson score interval for `errors` successes out of `total` draws.
///
/// The interval always contains the point estimate and stays inside `[0, 1]`,
/// which the plain normal approximation does not guarantee at the very small
/// rates the persistent-state experiments produce.
pub fn wilson_interval(errors: u64, total: u64) -> (f64, f64) {
    assert!(total > 0, "interval needs at least one draw");
    let n = total as f64;
    let p = errors as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (
        (center - half).clamp(0.0, 1.0).min(p),
        (center + half).clamp(0.0, 1.0).max(p),
    )
}

fn finish_estimate(
    errors: u64,
    decided_bits: u64,
    mean_mp_iterations: Option<f64>,
) -> ErrorEstimate {
    let (ci_low, ci_high) = wilson_interval(errors, decided_bits);
    ErrorEstimate {
        pe: errors as f64 / decided_bits as f64,
        decided_bits,
        errors,
        ci_low,
        ci_high,
        mean_mp_iterations,
    }
}

fn count_errors(decided: &[u8], truth: &[u8]) -> u64 {
    decided
        .iter()
        .zip(truth)
        .filter(|(a, b)| a != b)
        .count() as u64
}

#[derive(Default, Clone, Copy)]
struct Totals {
    errors: u64,
    iterations: u64,
}

impl Totals {
    fn add(self, errors: u64, iterations: u64) -> Self {
        Totals {
            errors: self.errors + errors,
            iterations: self.iterations + iterations,
        }
    }

    fn merge(self, other: Self) -> Self {
        self.add(other.errors, other.iterations)
    }
}

#[derive(Default, Clone, Copy)]
struct PairedTotals {
    errors_mp: u64,
    errors_optimal: u64,
    differing: u64,
    iterations: u64,
}

impl PairedTotals {
    fn add(self, outcome: &PairedOutcome) -> Self {
        PairedTotals {
            errors_mp: self.errors_mp + outcome.errors_mp,
            errors_optimal: self.errors_optimal + outcome.errors_optimal,
            differing: self.differing + u64::from(outcome.decisions_differ),
            iterations: self.iterations + outcome.mp_iterations as u64,
        }
    }

    fn merge(self, other: Self) -> Self {
        PairedTotals {
            errors_mp: self.errors_mp + other.errors_mp,
            errors_optimal: self.errors_optimal + other.errors_optimal,
            differing: self.differing + other.differing,
            iterations: self.iterations + other.iterations,
        }
    }
}
