//! Reference fusion rules: plain majority voting and two mismatch-based
//! isolation schemes that exclude or down-weight suspect nodes.
//!
//! The isolation schemes share a two-pass shape. A first majority pass
//! produces reference decisions, each node's reports are compared against
//! that reference, and a second vote is taken with high-mismatch nodes
//! removed (hard isolation) or down-weighted (soft isolation).

use std::cmp::Ordering;

use rand::Rng;

use crate::model::{ModelParams, ReportMatrix, StateSequence};

/// Bounds applied to per-node agreement rates before they are turned into
/// log-odds weights, keeping the weights finite at the extremes.
const AGREEMENT_CLAMP: f64 = 1e-3;

/// Per-node bookkeeping produced by the isolation schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationReport {
    /// Window steps on which each node disagreed with the reference
    /// decisions from the first voting pass.
    pub mismatch_counts: Vec<u32>,
    /// Nodes excluded from the second vote. The soft scheme marks the nodes
    /// whose weight clamped to zero.
    pub isolated: Vec<bool>,
    /// Second-pass vote weights. The hard scheme reports indicator weights,
    /// 1 for survivors and 0 for isolated nodes.
    pub weights: Vec<f64>,
}

/// Decides each window step by an unweighted majority vote over all nodes.
///
/// Exact ties are broken by a fair coin from `rng`.
pub fn majority_fuse(reports: &ReportMatrix, rng: &mut impl Rng) -> StateSequence {
    let bits = (0..reports.m())
        .map(|i| {
            let ones = count_ones(reports.row(i));
            decide_vote(ones, reports.n() - ones, rng)
        })
        .collect();
    StateSequence::new(bits).expect("vote bits are binary")
}

/// Majority fusion with a second pass that drops suspect nodes.
///
/// A first majority vote gives reference decisions. Any node that disagrees
/// with the reference on a fraction of steps strictly greater than
/// `delta_iso` is isolated, and the surviving nodes vote again. When the
/// isolation step changes nothing, either because no node was isolated or
/// because every node was, the reference decisions are returned as is and no
/// further tie coins are drawn; with `delta_iso = 1` this makes the scheme
/// coincide with [`majority_fuse`] exactly.
///
/// `delta_iso` must lie in `(0, 1]`.
pub fn hard_isolation_fuse(
    reports: &ReportMatrix,
    params: &ModelParams,
    delta_iso: f64,
    rng: &mut impl Rng,
) -> (StateSequence, IsolationReport) {
    debug_assert_eq!(reports.m(), params.m);
    debug_assert_eq!(reports.n(), params.n);
    debug_assert!(delta_iso > 0.0 && delta_iso <= 1.0);

    let reference = majority_fuse(reports, rng);
    let mismatch_counts = count_mismatches(reports, &reference);
    let m = reports.m() as f64;
    let isolated: Vec<bool> = mismatch_counts
        .iter()
        .map(|&c| f64::from(c) / m > delta_iso)
        .collect();
    let weights = isolated
        .iter()
        .map(|&out| if out { 0.0 } else { 1.0 })
        .collect();

    let survivors = isolated.iter().filter(|&&out| !out).count();
    let decisions = if survivors == 0 || survivors == reports.n() {
        reference
    } else {
        let bits = (0..reports.m())
            .map(|i| {
                let row = reports.row(i);
                let ones = (0..reports.n())
                    .filter(|&j| !isolated[j] && row[j] == 1)
                    .count();
                decide_vote(ones, survivors - ones, rng)
            })
            .collect();
        StateSequence::new(bits).expect("vote bits are binary")
    };

    let report = IsolationReport {
        mismatch_counts,
        isolated,
        weights,
    };
    (decisions, report)
}

/// Majority fusion with a second, reliability-weighted pass.
///
/// A first majority vote gives reference decisions. Each node's agreement
/// rate with the reference, clamped away from 0 and 1, becomes a log-odds
/// weight floored at zero, so nodes that disagree at least half the time
/// carry no vote. The second pass decides each step by the sign of the
/// weighted report sum; exact ties are broken by a fair coin from `rng`.
pub fn soft_isolation_fuse(
    reports: &ReportMatrix,
    params: &ModelParams,
    rng: &mut impl Rng,
) -> (StateSequence, IsolationReport) {
    debug_assert_eq!(reports.m(), params.m);
    debug_assert_eq!(reports.n(), params.n);

    let reference = majority_fuse(reports, rng);
    let mismatch_counts = count_mismatches(reports, &reference);
    let m = reports.m() as f64;
    let weights: Vec<f64> = mismatch_counts
        .iter()
        .map(|&c| {
            let agreement =
                (1.0 - f64::from(c) / m).clamp(AGREEMENT_CLAMP, 1.0 - AGREEMENT_CLAMP);
            (agreement / (1.0 - agreement)).ln().max(0.0)
        })
        .collect();
    let isolated = weights.iter().map(|&w| w == 0.0).collect();

    let bits = (0..reports.m())
        .map(|i| {
            let score: f64 = reports
                .row(i)
                .iter()
                .zip(&weights)
                .map(|(&bit, &w)| if bit == 1 { w } else { -w })
                .sum();
            match score.partial_cmp(&0.0).expect("weights are finite") {
                Ordering::Greater => 1u8,
                Ordering::Less => 0u8,
                Ordering::Equal => u8::from(rng.gen_bool(0.5)),
            }
        })
        .collect();
    let decisions = StateSequence::new(bits).expect("vote bits are binary");

    let report = IsolationReport {
        mismatch_counts,
        isolated,
        weights,
    };
    (decisions, report)
}

fn count_ones(row: &[u8]) -> usize {
    row.iter().map(|&b| usize::from(b)).sum()
}

fn decide_vote(ones: usize, zeros: usize, rng: &mut impl Rng) -> u8 {
    match ones.cmp(&zeros) {
        Ordering::Greater => 1,
        Ordering::Less => 0,
        Ordering::Equal => u8::from(rng.gen_bool(0.5)),
    }
}

fn count_mismatches(reports: &ReportMatrix, reference: &StateSequence) -> Vec<u32> {
    let mut counts = vec![0u32; reports.n()];
    for i in 0..reports.m() {
        let decided = reference.get(i);
        for (j, &bit) in reports.row(i).iter().enumerate() {
            if bit != decided {
                counts[j] += 1;
            }
        }
    }
    counts
}
